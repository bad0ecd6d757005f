#pragma once

// Concentrability coefficients.
//
//   c(i)        smallest c >= 1 with mu P_{pi_1}..P_{pi_i} <= c nu for every policy sequence
//   C1, C2      (1-g) sum g^i c(i),  (1-g)^2 sum (i+1) g^i c(i)
//   c_pi*(i)    smallest c >= 1 with mu (P_{pi*})^i <= c nu
//   C1_pi*      (1-g) sum g^i c_pi*(i)
//   C_pi*       smallest c >= 1 with d_{pi*,mu} <= c nu
//
// Infinite sums are reported as certified intervals: the lower end is the
// truncated sum, the upper end adds the tail with c(i) <= 1/min(nu).

#include "apilab/bellman.hpp"
#include "apilab/errors.hpp"
#include "apilab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace apilab {

/// A value in [0, inf] where infinity is an explicit tag.
class Extended {
public:
    constexpr Extended() = default;
    constexpr explicit Extended(double v) : value_(v) {}
    static constexpr Extended infinity() {
        Extended e;
        e.infinite_ = true;
        return e;
    }

    constexpr bool is_infinite() const noexcept { return infinite_; }
    /// Finite value; +inf as a double only for arithmetic convenience.
    constexpr double value() const noexcept { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

    friend constexpr bool operator==(const Extended&, const Extended&) = default;

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

struct Interval {
    Extended lower;
    Extended upper;

    bool is_infinite() const noexcept { return lower.is_infinite(); }
    double width() const noexcept { return upper.value() - lower.value(); }
};

/// Max over all length-`horizon` policy sequences of (mu P_{pi_1}..P_{pi_i})(target).
///
/// Backward induction: h_0 = 1{target}, h_{t+1}(s) = max_a sum_{s'} P(s'|s,a) h_t(s').
/// The max decouples per state, so time-varying deterministic policies attain it.
inline double max_reach(const Mdp& mdp, const Distribution& mu, std::size_t horizon, std::size_t target) {
    if (target >= mdp.n_states()) throw ConfigError("max_reach: target out of range");
    Vector h = Vector::Zero(static_cast<Eigen::Index>(mdp.n_states()));
    h[static_cast<Eigen::Index>(target)] = 1.0;
    Vector next(h.size());
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            double best = 0.0;
            for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
                double acc = 0.0;
                for (const auto& tr : mdp.row(s, a)) acc += tr.prob * h[static_cast<Eigen::Index>(tr.next)];
                best = std::max(best, acc);
            }
            next[static_cast<Eigen::Index>(s)] = best;
        }
        h.swap(next);
    }
    return mu.dot(h);
}

/// Same as max_reach, for every horizon 0..H at once: result[i][target].
inline std::vector<Vector> max_reach_table(const Mdp& mdp, const Distribution& mu, std::size_t H) {
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    std::vector<Vector> table(H + 1, Vector::Zero(n));
    Vector h(n), next(n);
    for (Eigen::Index target = 0; target < n; ++target) {
        h.setZero();
        h[target] = 1.0;
        table[0][target] = mu.dot(h);
        for (std::size_t t = 1; t <= H; ++t) {
            for (std::size_t s = 0; s < mdp.n_states(); ++s) {
                double best = 0.0;
                for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
                    double acc = 0.0;
                    for (const auto& tr : mdp.row(s, a)) acc += tr.prob * h[static_cast<Eigen::Index>(tr.next)];
                    best = std::max(best, acc);
                }
                next[static_cast<Eigen::Index>(s)] = best;
            }
            h.swap(next);
            table[t][target] = mu.dot(h);
        }
    }
    return table;
}

/// max(1, max_s mass(s) / nu(s)); states with nu = 0 are skipped when their
/// mass is zero (0/0) and make the ratio infinite otherwise.
inline Extended ratio_coefficient(const Vector& mass, const Distribution& nu) {
    double c = 1.0;
    for (Eigen::Index s = 0; s < mass.size(); ++s) {
        const double w = nu[static_cast<std::size_t>(s)];
        if (w == 0.0) {
            if (mass[s] > 0.0) return Extended::infinity();
            continue;
        }
        c = std::max(c, mass[s] / w);
    }
    return Extended(c);
}

inline std::vector<Extended> c_coefficients(const Mdp& mdp, const Distribution& mu, const Distribution& nu,
                                            std::size_t H) {
    std::vector<Extended> c;
    c.reserve(H + 1);
    for (const auto& reach : max_reach_table(mdp, mu, H)) c.push_back(ratio_coefficient(reach, nu));
    return c;
}

/// Tail sums beyond H with c(i) <= cap.
namespace detail {

inline double tail_c1(double gamma, std::size_t H, double cap) {
    // (1-g) sum_{i>H} g^i cap
    return std::pow(gamma, static_cast<double>(H + 1)) * cap;
}

inline double tail_c2(double gamma, std::size_t H, double cap) {
    // (1-g)^2 sum_{i>=m} (i+1) g^i cap, m = H+1
    const double m = static_cast<double>(H + 1);
    const double one_minus = 1.0 - gamma;
    return one_minus * one_minus * cap * std::pow(gamma, m) * ((m + 1.0) / one_minus + gamma / (one_minus * one_minus));
}

}  // namespace detail

struct BigConstants {
    Interval c1;
    Interval c2;
};

/// Truncated C1/C2 with certified tails. Any infinite c(i) makes both infinite;
/// nu_min = 0 leaves the upper ends unbounded.
inline BigConstants big_constants(const std::vector<Extended>& c, double gamma, std::size_t H, double nu_min) {
    if (c.size() < H + 1) throw ConfigError("big_constants: c list shorter than H+1");
    for (std::size_t i = 0; i <= H; ++i) {
        if (c[i].is_infinite()) return {{Extended::infinity(), Extended::infinity()}, {Extended::infinity(), Extended::infinity()}};
    }
    double s1 = 0.0, s2 = 0.0, g = 1.0;
    for (std::size_t i = 0; i <= H; ++i) {
        s1 += g * c[i].value();
        s2 += static_cast<double>(i + 1) * g * c[i].value();
        g *= gamma;
    }
    const double lo1 = (1.0 - gamma) * s1;
    const double lo2 = (1.0 - gamma) * (1.0 - gamma) * s2;
    if (!(nu_min > 0.0)) return {{Extended(lo1), Extended::infinity()}, {Extended(lo2), Extended::infinity()}};
    const double cap = 1.0 / nu_min;
    return {{Extended(lo1), Extended(lo1 + detail::tail_c1(gamma, H, cap))},
            {Extended(lo2), Extended(lo2 + detail::tail_c2(gamma, H, cap))}};
}

/// Smallest H whose C1 and C2 tail widths are both <= tolerance, capped.
inline std::size_t default_horizon(double gamma, double nu_min, double tolerance = 1e-6, std::size_t cap = 2000) {
    if (!(nu_min > 0.0)) return cap;
    const double c = 1.0 / nu_min;
    for (std::size_t H = 0; H < cap; ++H) {
        if (detail::tail_c1(gamma, H, c) <= tolerance && detail::tail_c2(gamma, H, c) <= tolerance) return H;
    }
    return cap;
}

struct PiStarConstants {
    std::vector<Extended> c_pistar;
    Interval c1_pistar;
    Extended c_pistar_exact;  // C_pi*
};

inline PiStarConstants c_pistar_constants(const Mdp& mdp, const DeterministicPolicy& pi_star, const Distribution& mu,
                                          const Distribution& nu, std::size_t H) {
    const Matrix P = policy_kernel(mdp, pi_star);
    PiStarConstants out;
    out.c_pistar.reserve(H + 1);
    Eigen::RowVectorXd x = mu.probs().transpose();
    for (std::size_t i = 0; i <= H; ++i) {
        out.c_pistar.push_back(ratio_coefficient(x.transpose(), nu));
        x = x * P;
    }
    out.c1_pistar = big_constants(out.c_pistar, mdp.gamma(), H, nu.min()).c1;
    out.c_pistar_exact = ratio_coefficient(discounted_occupancy(mdp, pi_star, mu).probs(), nu);
    return out;
}

struct ConcentrabilityReport {
    std::vector<Extended> c;
    std::vector<Extended> c_pistar;
    Interval c1;
    Interval c2;
    Interval c1_pistar;
    Extended c_pistar_exact;
    std::size_t horizon = 0;
    double tail_cap = 0.0;  // bound on c(i) used for the tails (1 / min nu)
    double gamma = 0.0;
};

inline ConcentrabilityReport concentrability_report(const Mdp& mdp, const DeterministicPolicy& pi_star,
                                                    const Distribution& mu, const Distribution& nu,
                                                    std::optional<std::size_t> horizon = {}) {
    const double nu_min = nu.min();
    const std::size_t H = horizon ? *horizon : default_horizon(mdp.gamma(), nu_min);
    ConcentrabilityReport r;
    r.horizon = H;
    r.gamma = mdp.gamma();
    r.tail_cap = nu_min > 0.0 ? 1.0 / nu_min : std::numeric_limits<double>::infinity();
    r.c = c_coefficients(mdp, mu, nu, H);
    const BigConstants big = big_constants(r.c, mdp.gamma(), H, nu_min);
    r.c1 = big.c1;
    r.c2 = big.c2;
    PiStarConstants ps = c_pistar_constants(mdp, pi_star, mu, nu, H);
    r.c_pistar = std::move(ps.c_pistar);
    r.c1_pistar = ps.c1_pistar;
    r.c_pistar_exact = ps.c_pistar_exact;
    return r;
}

struct OrderingResult {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
    bool vacuous = false;  // right-hand side infinite

    double slack() const { return rhs - lhs; }
};

inline constexpr double ordering_tolerance = 1e-9;

namespace detail {

inline OrderingResult compare(std::string name, Extended lhs, Extended rhs, double tolerance) {
    OrderingResult r{std::move(name), lhs.value(), rhs.value(), false, false};
    if (rhs.is_infinite()) {
        r.pass = true;
        r.vacuous = true;
    } else if (lhs.is_infinite()) {
        r.pass = false;
    } else {
        r.pass = lhs.value() <= rhs.value() + tolerance;
    }
    return r;
}

}  // namespace detail

/// Checks C_pi* <= C1_pi* <= C1 <= C2/(1-g) and c_pi*(i) <= c(i), using the
/// conservative interval end on each side.
inline std::vector<OrderingResult> ordering_check(const ConcentrabilityReport& r) {
    std::vector<OrderingResult> out;
    const double tol = ordering_tolerance;
    out.push_back(detail::compare("C_pistar<=C1_pistar", r.c_pistar_exact, r.c1_pistar.upper, tol));
    out.push_back(detail::compare("C1_pistar<=C1", r.c1_pistar.lower, r.c1.upper, tol));
    const Extended c2_scaled =
        r.c2.upper.is_infinite() ? Extended::infinity() : Extended(r.c2.upper.value() / (1.0 - r.gamma));
    out.push_back(detail::compare("C1<=C2/(1-gamma)", r.c1.lower, c2_scaled, tol));
    // Report the violating index if any, otherwise the tightest one.
    OrderingResult worst{"c_pistar(i)<=c(i)", 0.0, 0.0, true, true};
    const std::size_t n = std::min(r.c.size(), r.c_pistar.size());
    for (std::size_t i = 0; i < n; ++i) {
        OrderingResult one = detail::compare(worst.name, r.c_pistar[i], r.c[i], 1e-12);
        if (!one.pass) {
            worst = one;
            break;
        }
        if (!one.vacuous && (worst.vacuous || one.slack() < worst.slack())) worst = one;
    }
    out.push_back(worst);
    return out;
}

inline bool all_pass(const std::vector<OrderingResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const OrderingResult& r) { return r.pass; });
}

}  // namespace apilab
