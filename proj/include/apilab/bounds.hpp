#pragma once

// Evaluates the performance bounds of DPI, CPI, CPI(alpha) and NSDPI on a
// recorded trace, using the measured greedy errors and the upper ends of the
// certified concentrability intervals. Per-iteration bounds are checked at every
// iteration, corollaries only at the iterations where they apply.

#include "apilab/algorithms.hpp"
#include "apilab/concentrability.hpp"
#include "apilab/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace apilab {

inline constexpr double bound_tolerance = 1e-9;
inline constexpr double marginal_band = 1e-6;

enum class BoundStatus { pass, fail, marginal, vacuous, inconclusive, informational };

inline std::string to_string(BoundStatus s) {
    switch (s) {
        case BoundStatus::pass: return "pass";
        case BoundStatus::fail: return "fail";
        case BoundStatus::marginal: return "marginal";
        case BoundStatus::vacuous: return "vacuous";
        case BoundStatus::inconclusive: return "inconclusive";
        case BoundStatus::informational: return "informational";
    }
    return "?";
}

struct BoundRow {
    std::string bound_id;
    std::size_t k = 0;
    double lhs = 0.0;
    double rhs = 0.0;  // +inf when the coefficient is infinite
    BoundStatus status = BoundStatus::pass;

    double slack() const { return rhs - lhs; }
};

struct BoundReport {
    std::vector<BoundRow> rows;
    std::string coefficient_end = "upper";

    std::size_t count(BoundStatus s) const {
        return static_cast<std::size_t>(
            std::count_if(rows.begin(), rows.end(), [s](const BoundRow& r) { return r.status == s; }));
    }
    /// True when every checked row passes (marginal rows count against it).
    bool ok() const { return count(BoundStatus::fail) == 0 && count(BoundStatus::marginal) == 0; }

    void append(const BoundReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }
};

/// Optional facts about the instance that bound the loss itself:
/// 0 <= loss <= mu v* - min(r) * (sum of discounts).
struct LossContext {
    double mu_v_star = 0.0;
    double reward_min = 0.0;
};

namespace detail {

inline BoundStatus classify(double lhs, double rhs) {
    if (std::isinf(rhs) && rhs > 0) return BoundStatus::vacuous;
    const double slack = rhs - lhs;
    if (slack >= -bound_tolerance) return BoundStatus::pass;
    if (slack > -marginal_band) return BoundStatus::marginal;
    return BoundStatus::fail;
}

inline BoundRow row(std::string id, std::size_t k, double lhs, double rhs) {
    return {std::move(id), k, lhs, rhs, classify(lhs, rhs)};
}

/// coefficient * error, with 0 * inf = 0 (no error, no amplification).
inline double scaled(const Extended& coefficient, double error) {
    if (error == 0.0) return 0.0;
    if (coefficient.is_infinite()) return std::numeric_limits<double>::infinity();
    return coefficient.value() * error;
}

/// Running max and sum of the recorded epsilons up to each record.
struct ErrorPrefix {
    std::vector<double> max;
    std::vector<double> sum;
};

inline ErrorPrefix error_prefix(const RunTrace& t) {
    ErrorPrefix p;
    double m = 0.0, s = 0.0;
    for (const auto& r : t.records) {
        if (r.k > 0 && r.epsilon) {
            m = std::max(m, *r.epsilon);
            s += *r.epsilon;
        }
        p.max.push_back(m);
        p.sum.push_back(s);
    }
    return p;
}

inline void loss_range_rows(BoundReport& out, const RunTrace& t, const std::optional<LossContext>& ctx,
                            bool finite_horizon) {
    double discount = 1.0;  // gamma^k
    for (const auto& r : t.records) {
        out.rows.push_back(row("loss_nonnegative", r.k, 0.0, r.loss));
        if (ctx) {
            // Lowest value any (finite-horizon) policy can reach.
            const double weight =
                finite_horizon ? (1.0 - discount * t.gamma) / (1.0 - t.gamma) : 1.0 / (1.0 - t.gamma);
            const double v_min = ctx->reward_min >= 0.0 ? ctx->reward_min * weight : ctx->reward_min / (1.0 - t.gamma);
            out.rows.push_back(row("loss_range", r.k, r.loss, ctx->mu_v_star - v_min));
        }
        discount *= t.gamma;
    }
}

}  // namespace detail

/// DPI: both displayed bounds at every k and both late-iteration forms.
inline BoundReport verify_dpi(const RunTrace& t, const ConcentrabilityReport& c, double gamma, double v_max,
                              const std::optional<LossContext>& ctx = {}) {
    BoundReport out;
    const auto e = detail::error_prefix(t);
    const double g1 = 1.0 - gamma;
    for (std::size_t idx = 0; idx < t.records.size(); ++idx) {
        const auto& r = t.records[idx];
        const double k = static_cast<double>(r.k);
        const double tail = std::pow(gamma, k) * v_max;
        out.rows.push_back(detail::row("dpi_c2", r.k, r.loss, detail::scaled(c.c2.upper, e.max[idx]) / (g1 * g1) + tail));
        out.rows.push_back(detail::row("dpi_c1", r.k, r.loss, detail::scaled(c.c1.upper, e.sum[idx]) / g1 + tail));
        const double eps = e.max[idx];
        if (eps > 0.0) {
            const double threshold = std::log(v_max / eps) / g1;
            if (r.k >= 1 && k >= threshold) {
                out.rows.push_back(detail::row("dpi_late_max", r.k, r.loss,
                                               (c.c2.upper.value() / (g1 * g1) + 1.0) * eps));
            }
            if (r.k >= 1 && k == std::ceil(threshold)) {
                out.rows.push_back(
                    detail::row("dpi_late_sum", r.k, r.loss, (k * c.c1.upper.value() / g1 + 1.0) * eps));
            }
        }
    }
    detail::loss_range_rows(out, t, ctx, false);
    return out;
}

/// CPI (adaptive or line search): monotone improvement, stop time and final
/// loss, the C1 envelope at every k, and the late-iteration forms.
inline BoundReport verify_cpi(const RunTrace& t, const ConcentrabilityReport& c, double rho, double gamma,
                              double v_max, const std::optional<LossContext>& ctx = {}) {
    BoundReport out;
    const double g1 = 1.0 - gamma;
    const bool informational_monotone = t.advantage_mode && *t.advantage_mode == AdvantageMode::noisy;

    // eta_{k+1} - eta_k > rho^2 / (72 gamma V_max)
    const double increment = rho * rho / (72.0 * gamma * v_max);
    for (std::size_t idx = 1; idx < t.records.size(); ++idx) {
        const auto& prev = t.records[idx - 1];
        const auto& cur = t.records[idx];
        if (!prev.eta || !cur.eta) continue;
        BoundRow br = detail::row("cpi_monotone", cur.k, increment, *cur.eta - *prev.eta);
        if (informational_monotone) br.status = BoundStatus::informational;
        out.rows.push_back(br);
    }

    // k* <= 72 gamma V_max^2 / rho^2
    const double stop_bound = 72.0 * gamma * v_max * v_max / (rho * rho);
    const std::size_t completed = t.records.empty() ? 0 : t.records.back().k;
    if (t.stop_iteration) {
        out.rows.push_back(detail::row("cpi_stop", *t.stop_iteration, static_cast<double>(*t.stop_iteration), stop_bound));
    } else if (static_cast<double>(completed) > stop_bound) {
        out.rows.push_back(detail::row("cpi_stop", completed, static_cast<double>(completed), stop_bound));
    } else {
        out.rows.push_back({"cpi_stop", completed, static_cast<double>(completed), stop_bound, BoundStatus::inconclusive});
    }

    // Final loss and its all-iteration form, at the returned policy.
    const auto e = detail::error_prefix(t);
    if (t.stop_iteration && !t.records.empty()) {
        const std::size_t ks = *t.stop_iteration;
        const auto it = std::find_if(t.records.begin(), t.records.end(), [ks](const auto& r) { return r.k == ks; });
        if (it != t.records.end()) {
            const auto idx = static_cast<std::size_t>(it - t.records.begin());
            double eps_stop = t.stop_epsilon.value_or(0.0);
            if (it->epsilon) eps_stop = std::max(eps_stop, *it->epsilon);  // both readings of the index
            const double factor = 1.0 / (g1 * g1);
            out.rows.push_back(detail::row("cpi_final", ks, it->loss,
                                           detail::scaled(c.c_pistar_exact, eps_stop + rho) * factor));
            const double eps_all = std::max({e.max[idx], eps_stop, rho});
            out.rows.push_back(
                detail::row("cpi_final_eps", ks, it->loss, 2.0 * detail::scaled(c.c_pistar_exact, eps_all) * factor));
        }
    }

    // Envelope: loss_k <= C1/(1-g)^2 sum alpha_i eps_i + exp(-(1-g) sum alpha_i) V_max
    double weighted = 0.0, alpha_sum = 0.0, eps_max = 0.0;
    bool dagger_checked = false;
    for (std::size_t idx = 0; idx < t.records.size(); ++idx) {
        const auto& r = t.records[idx];
        if (r.k > 0) {
            const double a = r.alpha.value_or(0.0);
            const double eps = r.epsilon.value_or(0.0);
            weighted += a * eps;
            alpha_sum += a;
            eps_max = std::max(eps_max, eps);
        }
        out.rows.push_back(detail::row("cpi_sum_c1", r.k, r.loss,
                                       detail::scaled(c.c1.upper, weighted) / (g1 * g1) +
                                           std::exp(-g1 * alpha_sum) * v_max));
        if (!dagger_checked && eps_max > 0.0 && alpha_sum >= std::log(v_max / eps_max) / g1) {
            dagger_checked = true;
            out.rows.push_back(detail::row("cpi_k_dagger", r.k, r.loss,
                                           (detail::scaled(c.c1.upper, alpha_sum) / (g1 * g1) + 1.0) * eps_max));
        }
    }
    detail::loss_range_rows(out, t, ctx, false);
    return out;
}

/// CPI(alpha): the envelope with alpha_i = alpha at every k, and the
/// fixed-step late form at k = ceil(log(V_max/eps) / (alpha (1-g))).
inline BoundReport verify_cpi_alpha(const RunTrace& t, const ConcentrabilityReport& c, double alpha, double gamma,
                                    double v_max, const std::optional<LossContext>& ctx = {}) {
    BoundReport out;
    const double g1 = 1.0 - gamma;
    const auto e = detail::error_prefix(t);
    for (std::size_t idx = 0; idx < t.records.size(); ++idx) {
        const auto& r = t.records[idx];
        const double k = static_cast<double>(r.k);
        out.rows.push_back(detail::row("cpi_alpha", r.k, r.loss,
                                       detail::scaled(c.c1.upper, alpha * e.sum[idx]) / (g1 * g1) +
                                           std::exp(-g1 * k * alpha) * v_max));
    }
    const double eps = e.max.empty() ? 0.0 : e.max.back();
    if (eps > 0.0) {
        const double kc = std::ceil(std::log(v_max / eps) / (alpha * g1));
        const auto it = std::find_if(t.records.begin(), t.records.end(),
                                     [kc](const auto& r) { return static_cast<double>(r.k) == kc; });
        const double rhs = alpha * (kc + 1.0) * c.c1.upper.value() / (g1 * g1) * eps;
        if (kc >= 1.0 && it != t.records.end()) {
            out.rows.push_back(detail::row("cpi_alpha_late", it->k, it->loss, rhs));
        } else {
            const std::size_t kk = kc >= 0.0 ? static_cast<std::size_t>(kc) : 0;
            out.rows.push_back({"cpi_alpha_late", kk, 0.0, rhs, BoundStatus::inconclusive});
        }
    }
    if (alpha == 1.0 && !t.records.empty()) {
        // Full steps with the occupancy distribution: no inequality with DPI is asserted.
        const auto& last = t.records.back();
        out.rows.push_back({"cpi_alpha_one_vs_dpi", last.k, last.loss, last.loss, BoundStatus::informational});
    }
    detail::loss_range_rows(out, t, ctx, false);
    return out;
}

/// NSDPI: both bounds on the conservative loss column at every k, plus the late-iteration forms.
inline BoundReport verify_nsdpi(const RunTrace& t, const ConcentrabilityReport& c, double gamma, double v_max,
                                const std::optional<LossContext>& ctx = {}) {
    BoundReport out;
    const double g1 = 1.0 - gamma;
    const auto e = detail::error_prefix(t);
    for (std::size_t idx = 0; idx < t.records.size(); ++idx) {
        const auto& r = t.records[idx];
        const double k = static_cast<double>(r.k);
        const double lhs = r.loss_conservative.value_or(r.loss + std::pow(gamma, k) * v_max);
        const double tail = 2.0 * std::pow(gamma, k) * v_max;
        out.rows.push_back(
            detail::row("nsdpi_c1pistar", r.k, lhs, detail::scaled(c.c1_pistar.upper, e.max[idx]) / g1 + tail));
        out.rows.push_back(
            detail::row("nsdpi_cpistar", r.k, lhs, detail::scaled(c.c_pistar_exact, e.sum[idx]) / g1 + tail));
        const double eps = e.max[idx];
        if (eps > 0.0) {
            const double threshold = std::log(2.0 * v_max / eps) / g1;
            if (r.k >= 1 && k >= threshold) {
                out.rows.push_back(
                    detail::row("nsdpi_late_max", r.k, lhs, (c.c1_pistar.upper.value() / g1 + 1.0) * eps));
            }
            if (r.k >= 1 && k == std::ceil(threshold)) {
                out.rows.push_back(
                    detail::row("nsdpi_late_sum", r.k, lhs, (k * c.c_pistar_exact.value() / g1 + 1.0) * eps));
            }
        }
    }
    detail::loss_range_rows(out, t, ctx, true);
    return out;
}

/// Dispatches on the trace's algorithm tag.
inline BoundReport verify_trace(const RunTrace& t, const ConcentrabilityReport& c,
                                const std::optional<LossContext>& ctx = {}) {
    switch (t.algorithm) {
        case Algorithm::dpi: return verify_dpi(t, c, t.gamma, t.v_max, ctx);
        case Algorithm::cpi:
        case Algorithm::cpi_plus:
            if (!t.rho) throw ConfigError("verify: cpi trace lacks rho");
            return verify_cpi(t, c, *t.rho, t.gamma, t.v_max, ctx);
        case Algorithm::cpi_alpha:
            if (!t.fixed_alpha) throw ConfigError("verify: cpi-alpha trace lacks alpha");
            return verify_cpi_alpha(t, c, *t.fixed_alpha, t.gamma, t.v_max, ctx);
        case Algorithm::nsdpi: return verify_nsdpi(t, c, t.gamma, t.v_max, ctx);
    }
    throw ConfigError("verify: unknown algorithm");
}

inline std::string bound_report_csv(const BoundReport& r) {
    std::string out = "bound_id,k,lhs,rhs,slack,status\n";
    for (const auto& row : r.rows) {
        const bool inf = std::isinf(row.rhs);
        out += row.bound_id + "," + std::to_string(row.k) + "," + format_double(row.lhs) + "," +
               (inf ? std::string("inf") : format_double(row.rhs)) + "," +
               (inf ? std::string("inf") : format_double(row.slack())) + "," + to_string(row.status) + "\n";
    }
    return out;
}

inline json bound_summary_json(const BoundReport& r) {
    json counts = json::object();
    for (auto s : {BoundStatus::pass, BoundStatus::fail, BoundStatus::marginal, BoundStatus::vacuous,
                   BoundStatus::inconclusive, BoundStatus::informational}) {
        counts[to_string(s)] = r.count(s);
    }
    return json{{"rows", r.rows.size()}, {"counts", counts}, {"coefficient_end", r.coefficient_end}, {"ok", r.ok()}};
}

}  // namespace apilab
