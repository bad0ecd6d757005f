#pragma once

// Static SVG line plots with an optional shaded band per series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace apilab {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band;  // half-width of the shaded band; empty for none
};

struct PlotOptions {
    std::string title;
    std::string x_label = "iteration";
    std::string y_label;
    std::optional<std::pair<double, double>> y_range;  // auto-scaled when absent
    int width = 640;
    int height = 400;
};

namespace detail {

inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
}

}  // namespace detail

inline std::string line_plot_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
    const double left = 70, right = 150, top = 40, bottom = 50;
    const double pw = opt.width - left - right, ph = opt.height - top - bottom;

    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool any = false;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double b = s.band.empty() ? 0.0 : s.band[i];
            if (!any) {
                x0 = x1 = s.x[i];
                y0 = s.y[i] - b;
                y1 = s.y[i] + b;
                any = true;
            }
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i] - b);
            y1 = std::max(y1, s.y[i] + b);
        }
    }
    if (opt.y_range) std::tie(y0, y1) = *opt.y_range;
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (std::clamp(y, y0, y1) - y0) / (y1 - y0)) * ph; };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.width) +
                      "\" height=\"" + std::to_string(opt.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::num(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
           detail::escape_xml(opt.title) + "</text>\n";
    out += "<rect x=\"" + detail::num(left) + "\" y=\"" + detail::num(top) + "\" width=\"" + detail::num(pw) +
           "\" height=\"" + detail::num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
        out += "<text x=\"" + detail::num(px(fx)) + "\" y=\"" + detail::num(top + ph + 18) +
               "\" text-anchor=\"middle\">" + detail::num(fx) + "</text>\n";
        out += "<text x=\"" + detail::num(left - 6) + "\" y=\"" + detail::num(py(fy) + 4) +
               "\" text-anchor=\"end\">" + detail::num(fy) + "</text>\n";
        out += "<line x1=\"" + detail::num(left) + "\" x2=\"" + detail::num(left + pw) + "\" y1=\"" +
               detail::num(py(fy)) + "\" y2=\"" + detail::num(py(fy)) + "\" stroke=\"#ddd\"/>\n";
    }
    out += "<text x=\"" + detail::num(left + pw / 2) + "\" y=\"" + detail::num(opt.height - 10.0) +
           "\" text-anchor=\"middle\">" + detail::escape_xml(opt.x_label) + "</text>\n";
    out += "<text transform=\"translate(16," + detail::num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           detail::escape_xml(opt.y_label) + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = detail::palette(k);
        if (!s.band.empty() && !s.x.empty()) {
            std::string pts;
            for (std::size_t i = 0; i < s.x.size(); ++i) pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i] + s.band[i])) + " ";
            for (std::size_t i = s.x.size(); i-- > 0;) pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i] - s.band[i])) + " ";
            out += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i])) + " ";
        out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
        const double ly = top + 16.0 * static_cast<double>(k + 1);
        out += "<line x1=\"" + detail::num(left + pw + 10) + "\" x2=\"" + detail::num(left + pw + 30) + "\" y1=\"" +
               detail::num(ly) + "\" y2=\"" + detail::num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + detail::num(left + pw + 35) + "\" y=\"" + detail::num(ly + 4) + "\">" +
               detail::escape_xml(s.name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace apilab
