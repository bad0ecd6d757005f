#pragma once

// RunTrace serialization.
//
// CSV rows: algorithm,mdp_seed,run_seed,iter,loss,loss_conservative,epsilon,
// alpha,eta,advantage_hat,advantage_true,wallclock_ms (empty when not
// applicable). Run-level metadata (k*, k-dagger, stop-call values, rho, alpha,
// fingerprints) goes to a JSON header file written next to the CSV.

#include "apilab/algorithms.hpp"
#include "apilab/errors.hpp"
#include "apilab/mdp_io.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace apilab {

inline constexpr std::string_view trace_csv_header =
    "algorithm,mdp_seed,run_seed,iter,loss,loss_conservative,epsilon,alpha,eta,advantage_hat,advantage_true,"
    "wallclock_ms";

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

inline void append_trace_rows(std::string& out, const RunTrace& t) {
    const std::string prefix =
        to_string(t.algorithm) + "," + std::to_string(t.mdp_seed) + "," + std::to_string(t.run_seed) + ",";
    for (const auto& r : t.records) {
        out += prefix;
        out += std::to_string(r.k);
        out += ',' + format_double(r.loss);
        for (const auto* f : {&r.loss_conservative, &r.epsilon, &r.alpha, &r.eta, &r.advantage_hat, &r.advantage_true,
                              &r.wallclock_ms}) {
            out += ',' + format_optional(*f);
        }
        out += '\n';
    }
}

inline std::string trace_to_csv(const RunTrace& t) {
    std::string out(trace_csv_header);
    out += '\n';
    append_trace_rows(out, t);
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::optional<double> parse_optional(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad number '" + s + "' in trace");
    return x;
}

}  // namespace detail

/// Parses the rows of a single-run trace CSV.
inline RunTrace trace_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line).size() != 12) {
        throw IoError("trace csv: missing or malformed header");
    }
    RunTrace t;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 12) throw IoError("trace csv: expected 12 fields");
        if (first) {
            t.algorithm = parse_algorithm(f[0]);
            t.mdp_seed = std::stoull(f[1]);
            t.run_seed = std::stoull(f[2]);
            first = false;
        }
        IterationRecord r;
        r.k = std::stoul(f[3]);
        const auto loss = detail::parse_optional(f[4]);
        if (!loss) throw IoError("trace csv: loss is mandatory");
        r.loss = *loss;
        r.loss_conservative = detail::parse_optional(f[5]);
        r.epsilon = detail::parse_optional(f[6]);
        r.alpha = detail::parse_optional(f[7]);
        r.eta = detail::parse_optional(f[8]);
        r.advantage_hat = detail::parse_optional(f[9]);
        r.advantage_true = detail::parse_optional(f[10]);
        r.wallclock_ms = detail::parse_optional(f[11]);
        t.records.push_back(r);
    }
    return t;
}

struct TraceProvenance {
    std::string mdp_fingerprint;
    std::string mu_fingerprint;
    std::string nu_fingerprint;
    json greedy;  // greedy configuration as run
};

inline json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

inline json trace_header_json(const RunTrace& t, const TraceProvenance& prov) {
    json j{{"algorithm", to_string(t.algorithm)},
           {"mdp_seed", t.mdp_seed},
           {"run_seed", t.run_seed},
           {"mdp_fingerprint", prov.mdp_fingerprint},
           {"mu_fingerprint", prov.mu_fingerprint},
           {"nu_fingerprint", prov.nu_fingerprint},
           {"gamma", t.gamma},
           {"v_max", t.v_max},
           {"max_iters", t.max_iters},
           {"rho", optional_json(t.rho)},
           {"alpha", optional_json(t.fixed_alpha)},
           {"advantage_mode", t.advantage_mode ? json(*t.advantage_mode == AdvantageMode::exact ? "exact" : "noisy")
                                               : json(nullptr)},
           {"stop_iteration", t.stop_iteration ? json(*t.stop_iteration) : json(nullptr)},
           {"k_dagger", t.k_dagger ? json(*t.k_dagger) : json(nullptr)},
           {"stop_epsilon", optional_json(t.stop_epsilon)},
           {"stop_advantage_hat", optional_json(t.stop_advantage_hat)},
           {"stop_advantage_true", optional_json(t.stop_advantage_true)},
           {"final_policy", t.final_policy},
           {"projection_warning", t.projection_warning},
           {"greedy", prov.greedy}};
    return j;
}

namespace detail {

inline std::optional<double> optional_double(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

inline std::optional<std::size_t> optional_size(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::size_t>();
}

}  // namespace detail

/// Copies run-level fields from a header into a trace parsed from CSV.
inline TraceProvenance apply_trace_header(RunTrace& t, const json& j) {
    try {
        t.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        t.gamma = j.at("gamma").get<double>();
        t.v_max = j.at("v_max").get<double>();
        t.max_iters = j.at("max_iters").get<std::size_t>();
        t.rho = detail::optional_double(j, "rho");
        t.fixed_alpha = detail::optional_double(j, "alpha");
        if (j.contains("advantage_mode") && !j.at("advantage_mode").is_null()) {
            t.advantage_mode =
                j.at("advantage_mode").get<std::string>() == "noisy" ? AdvantageMode::noisy : AdvantageMode::exact;
        }
        t.stop_iteration = detail::optional_size(j, "stop_iteration");
        t.k_dagger = detail::optional_size(j, "k_dagger");
        t.stop_epsilon = detail::optional_double(j, "stop_epsilon");
        t.stop_advantage_hat = detail::optional_double(j, "stop_advantage_hat");
        t.stop_advantage_true = detail::optional_double(j, "stop_advantage_true");
        t.final_policy = j.value("final_policy", std::string());
        t.projection_warning = j.value("projection_warning", false);
        return {j.at("mdp_fingerprint").get<std::string>(), j.at("mu_fingerprint").get<std::string>(),
                j.at("nu_fingerprint").get<std::string>(), j.value("greedy", json::object())};
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed trace header: ") + e.what());
    }
}

inline std::string trace_header_path(const std::string& csv_path) { return csv_path + ".json"; }

inline void save_trace(const std::string& csv_path, const RunTrace& t, const TraceProvenance& prov) {
    write_text_file(csv_path, trace_to_csv(t));
    write_json_file(trace_header_path(csv_path), trace_header_json(t, prov));
}

struct LoadedTrace {
    RunTrace trace;
    TraceProvenance provenance;
};

inline LoadedTrace load_trace(const std::string& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + csv_path);
    std::stringstream buf;
    buf << in.rdbuf();
    RunTrace t = trace_from_csv(buf.str());
    TraceProvenance prov = apply_trace_header(t, read_json_file(trace_header_path(csv_path)));
    return {std::move(t), std::move(prov)};
}

}  // namespace apilab
