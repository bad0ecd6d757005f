#pragma once

// Policy-search loops: DPI, CPI (adaptive, line search, fixed step) and
// NSDPI. Every loop evaluates its iterates exactly and emits a RunTrace.

#include "apilab/approx_greedy.hpp"
#include "apilab/bellman.hpp"
#include "apilab/errors.hpp"
#include "apilab/mdp.hpp"
#include "apilab/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace apilab {

enum class Algorithm { dpi, cpi, cpi_plus, cpi_alpha, nsdpi };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::dpi: return "dpi";
        case Algorithm::cpi: return "cpi";
        case Algorithm::cpi_plus: return "cpi-plus";
        case Algorithm::cpi_alpha: return "cpi-alpha";
        case Algorithm::nsdpi: return "nsdpi";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "dpi") return Algorithm::dpi;
    if (s == "cpi") return Algorithm::cpi;
    if (s == "cpi-plus" || s == "cpi+") return Algorithm::cpi_plus;
    if (s == "cpi-alpha") return Algorithm::cpi_alpha;
    if (s == "nsdpi") return Algorithm::nsdpi;
    throw ConfigError("unknown algorithm '" + s + "'");
}

/// Everything a run needs about the problem instance; immutable and shareable.
struct Problem {
    Mdp mdp;
    Distribution mu;
    Distribution nu;
    OptimalSolution optimum;
    std::optional<Matrix> features;

    static Problem make(Mdp mdp, Distribution mu, Distribution nu, std::optional<Matrix> features = {}) {
        detail::check_size(mdp, static_cast<Eigen::Index>(mu.size()), "mu");
        detail::check_size(mdp, static_cast<Eigen::Index>(nu.size()), "nu");
        OptimalSolution opt = optimal_solve(mdp);
        return {std::move(mdp), std::move(mu), std::move(nu), std::move(opt), std::move(features)};
    }

    double loss(const ValueFunction& v) const { return expected_loss(mu, optimum.v_star, v); }
};

enum class AdvantageMode { exact, noisy };
enum class StepMode { adaptive, fixed, line_search };

struct CpiConfig {
    double rho = 0.1;
    AdvantageMode advantage_mode = AdvantageMode::exact;
    std::size_t max_iters = 0;  // 0 selects the default safety cap
    StepMode step_mode = StepMode::adaptive;
    double alpha = 0.1;  // fixed mode only

    void validate() const {
        if (step_mode != StepMode::fixed && !(rho > 0.0)) throw ConfigError("cpi: rho must be positive");
        if (step_mode == StepMode::fixed && !(alpha > 0.0 && alpha <= 1.0)) {
            throw ConfigError("cpi: fixed step must lie in (0,1]");
        }
    }
};

/// ceil(72 gamma V_max^2 / rho^2): the iteration count at which adaptive CPI must have stopped.
inline std::size_t cpi_iteration_bound(double rho, double gamma, double v_max) {
    return static_cast<std::size_t>(std::ceil(72.0 * gamma * v_max * v_max / (rho * rho)));
}

inline std::size_t default_cpi_max_iters(double rho, double gamma, double v_max) {
    return 10 * cpi_iteration_bound(rho, gamma, v_max);
}

struct IterationRecord {
    std::size_t k = 0;
    double loss = 0.0;
    std::optional<double> loss_conservative;
    std::optional<double> epsilon;
    std::optional<double> alpha;
    std::optional<double> eta;
    std::optional<double> advantage_hat;
    std::optional<double> advantage_true;
    std::optional<double> wallclock_ms;
};

struct RunTrace {
    Algorithm algorithm = Algorithm::dpi;
    std::vector<IterationRecord> records;
    std::optional<std::size_t> stop_iteration;  // k*
    std::optional<std::size_t> k_dagger;
    // Greedy call made at the stopping test (its epsilon is eps_{k*+1}).
    std::optional<double> stop_epsilon;
    std::optional<double> stop_advantage_hat;
    std::optional<double> stop_advantage_true;
    std::string final_policy;
    std::uint64_t mdp_seed = 0;
    std::uint64_t run_seed = 0;
    // Run parameters needed to check the bounds later.
    double gamma = 0.0;
    double v_max = 0.0;
    std::optional<double> rho;
    std::optional<double> fixed_alpha;
    std::optional<AdvantageMode> advantage_mode;
    std::size_t max_iters = 0;
    bool projection_warning = false;
};

struct RunOptions {
    std::uint64_t mdp_seed = 0;
    std::uint64_t run_seed = 0;
    bool record_timing = false;
};

namespace detail {

class Stopwatch {
public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    std::optional<double> lap() {
        if (!enabled_) return std::nullopt;
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
        start_ = now;
        return ms;
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

inline RunTrace start_trace(Algorithm alg, const Problem& p, const RunOptions& opts) {
    RunTrace t;
    t.algorithm = alg;
    t.mdp_seed = opts.mdp_seed;
    t.run_seed = opts.run_seed;
    t.gamma = p.mdp.gamma();
    t.v_max = p.mdp.v_max();
    return t;
}

/// Greedy config whose noise stream is tied to this run.
inline GreedyConfig run_greedy_config(GreedyConfig cfg, Algorithm alg, const RunOptions& opts) {
    cfg.seed = derive_seed(cfg.seed ^ opts.run_seed, {stream_tag::run, static_cast<std::uint64_t>(alg)});
    return cfg;
}

}  // namespace detail

/// Direct Policy Iteration: pi_{k+1} = G_eps(nu, v_{pi_k}) for exactly K iterations.
inline RunTrace run_dpi(const Problem& p, const DeterministicPolicy& pi0, std::size_t K, const GreedyConfig& greedy,
                        const RunOptions& opts = {}) {
    if (K < 1) throw ConfigError("dpi: K must be >= 1");
    detail::check_policy(p.mdp, pi0);
    const GreedyConfig cfg = detail::run_greedy_config(greedy, Algorithm::dpi, opts);
    const Matrix basis = make_basis(p.mdp.n_states(), cfg, p.features);
    RunTrace trace = detail::start_trace(Algorithm::dpi, p, opts);
    trace.max_iters = K;
    detail::Stopwatch clock(opts.record_timing);

    DeterministicPolicy pi = pi0;
    ValueFunction v = policy_value(p.mdp, pi);
    trace.records.push_back({.k = 0, .loss = p.loss(v), .wallclock_ms = clock.lap()});
    for (std::size_t k = 1; k <= K; ++k) {
        ApproxGreedyResult g = approx_greedy(p.mdp, p.nu, v, cfg, basis, k);
        trace.projection_warning |= g.projection_warning;
        pi = std::move(g.policy);
        v = policy_value(p.mdp, pi);
        trace.records.push_back({.k = k,
                                 .loss = p.loss(v),
                                 .epsilon = g.measurement.epsilon,
                                 .alpha = 1.0,
                                 .wallclock_ms = clock.lap()});
    }
    trace.final_policy = "deterministic";
    return trace;
}

/// alpha = (1 - gamma)(A_hat - rho/3) / (4 gamma V_max), clamped to (0, 1].
inline double cpi_step_size(double advantage_hat, double rho, double gamma, double v_max) {
    const double alpha = (1.0 - gamma) * (advantage_hat - rho / 3.0) / (4.0 * gamma * v_max);
    if (!(alpha > 0.0)) throw NumericalError("cpi_step_size: non-positive step");
    return std::min(alpha, 1.0);
}

struct AdvantageEstimate {
    double advantage_hat = 0.0;
    double advantage_true = 0.0;
};

/// A = d_{pi_k,nu} (T_{pi'} v_{pi_k} - v_{pi_k}), exactly; noisy mode adds
/// uniform noise in [-rho/3, rho/3].
template <typename Policy>
AdvantageEstimate estimate_advantage(const Mdp& mdp, const Policy& pi_k, const DeterministicPolicy& pi_prime,
                                     const Distribution& nu, AdvantageMode mode, double rho = 0.0,
                                     std::uint64_t noise_seed = 0) {
    const ValueFunction v = policy_value(mdp, pi_k);
    const Distribution d = discounted_occupancy(mdp, pi_k, nu);
    AdvantageEstimate out;
    out.advantage_true = d.dot(bellman_apply(mdp, pi_prime, v) - v);
    out.advantage_hat = out.advantage_true;
    if (mode == AdvantageMode::noisy) {
        Rng rng(noise_seed);
        out.advantage_hat += rng.uniform(-rho / 3.0, rho / 3.0);
    }
    return out;
}

namespace detail {

struct CpiVariant {
    Algorithm tag;
    CpiConfig cfg;
};

inline RunTrace run_cpi_family(const Problem& p, const DeterministicPolicy& pi0, const CpiVariant& variant,
                               const GreedyConfig& greedy, const RunOptions& opts) {
    const CpiConfig& cfg = variant.cfg;
    cfg.validate();
    detail::check_policy(p.mdp, pi0);
    const Mdp& mdp = p.mdp;
    const double gamma = mdp.gamma();
    const double v_max = mdp.v_max();
    const GreedyConfig gcfg = run_greedy_config(greedy, variant.tag, opts);
    const Matrix basis = make_basis(mdp.n_states(), gcfg, p.features);

    RunTrace trace = start_trace(variant.tag, p, opts);
    const bool fixed = cfg.step_mode == StepMode::fixed;
    if (fixed) {
        trace.fixed_alpha = cfg.alpha;
    } else {
        trace.rho = cfg.rho;
        trace.advantage_mode = cfg.advantage_mode;
    }
    trace.max_iters = cfg.max_iters != 0 ? cfg.max_iters : default_cpi_max_iters(cfg.rho, gamma, v_max);
    Stopwatch clock(opts.record_timing);

    StochasticPolicy pi = StochasticPolicy::from(pi0, mdp.n_actions());
    ValueFunction v = policy_value(mdp, pi);
    trace.records.push_back({.k = 0, .loss = p.loss(v), .eta = p.nu.dot(v), .wallclock_ms = clock.lap()});

    double alpha_sum = 0.0;
    double eps_max = 0.0;
    for (std::size_t k = 0; k < trace.max_iters; ++k) {
        const Distribution d = discounted_occupancy(mdp, pi, p.nu);
        ApproxGreedyResult g = approx_greedy(mdp, d, v, gcfg, basis, k + 1);
        trace.projection_warning |= g.projection_warning;
        const double eps = g.measurement.epsilon;

        IterationRecord rec{.k = k + 1, .epsilon = eps};
        double alpha = cfg.alpha;
        if (!fixed) {
            const double a_true = d.dot(bellman_apply(mdp, g.policy, v) - v);
            double a_hat = a_true;
            if (cfg.advantage_mode == AdvantageMode::noisy) {
                Rng rng(derive_seed(opts.run_seed, {stream_tag::advantage, static_cast<std::uint64_t>(variant.tag), k}));
                a_hat += rng.uniform(-cfg.rho / 3.0, cfg.rho / 3.0);
            }
            if (a_hat <= 2.0 * cfg.rho / 3.0) {
                trace.stop_iteration = k;
                trace.stop_epsilon = eps;
                trace.stop_advantage_hat = a_hat;
                trace.stop_advantage_true = a_true;
                break;
            }
            rec.advantage_hat = a_hat;
            rec.advantage_true = a_true;
            alpha = cpi_step_size(a_hat, cfg.rho, gamma, v_max);
        }

        StochasticPolicy next;
        if (cfg.step_mode == StepMode::line_search) {
            // Candidates alpha * 2^i up to 1, plus 1 itself; keep the best nu v.
            const StochasticPolicy greedy_pi = StochasticPolicy::from(g.policy, mdp.n_actions());
            double best_step = 0.0;
            double best_eta = -std::numeric_limits<double>::infinity();
            ValueFunction best_v;
            for (double step = alpha;; step *= 2.0) {
                const double candidate = std::min(step, 1.0);
                StochasticPolicy mixed = mix_policies(pi, greedy_pi, candidate);
                ValueFunction vm = policy_value(mdp, mixed);
                const double eta = p.nu.dot(vm);
                if (eta > best_eta) {
                    best_eta = eta;
                    best_step = candidate;
                    best_v = std::move(vm);
                    next = std::move(mixed);
                }
                if (candidate >= 1.0) break;
            }
            alpha = best_step;
            v = std::move(best_v);
        } else {
            next = mix_policies(pi, g.policy, alpha);
            v = policy_value(mdp, next);
        }
        pi = std::move(next);

        alpha_sum += alpha;
        eps_max = std::max(eps_max, eps);
        if (!trace.k_dagger && eps_max > 0.0 && alpha_sum >= std::log(v_max / eps_max) / (1.0 - gamma)) {
            trace.k_dagger = k + 1;
        }
        rec.loss = p.loss(v);
        rec.alpha = alpha;
        rec.eta = p.nu.dot(v);
        rec.wallclock_ms = clock.lap();
        trace.records.push_back(rec);
    }
    std::size_t mixed_components = 0;
    for (Eigen::Index s = 0; s < pi.probs.rows(); ++s) {
        std::size_t support = 0;
        for (Eigen::Index a = 0; a < pi.probs.cols(); ++a) support += pi.probs(s, a) > 0.0 ? 1 : 0;
        mixed_components = std::max(mixed_components, support);
    }
    trace.final_policy = mixed_components <= 1 ? "deterministic" : "stochastic";
    return trace;
}

}  // namespace detail

/// Conservative Policy Iteration with the adaptive step.
inline RunTrace run_cpi(const Problem& p, const DeterministicPolicy& pi0, CpiConfig cfg, const GreedyConfig& greedy,
                        const RunOptions& opts = {}) {
    cfg.step_mode = StepMode::adaptive;
    return detail::run_cpi_family(p, pi0, {Algorithm::cpi, cfg}, greedy, opts);
}

/// CPI with a doubling line search on nu v, starting from the adaptive step.
inline RunTrace run_cpi_plus(const Problem& p, const DeterministicPolicy& pi0, double rho, std::size_t K,
                             const GreedyConfig& greedy, const RunOptions& opts = {},
                             AdvantageMode mode = AdvantageMode::exact) {
    if (K < 1) throw ConfigError("cpi-plus: K must be >= 1");
    CpiConfig cfg{.rho = rho, .advantage_mode = mode, .max_iters = K, .step_mode = StepMode::line_search};
    return detail::run_cpi_family(p, pi0, {Algorithm::cpi_plus, cfg}, greedy, opts);
}

/// CPI(alpha): fixed step, no stopping test, no advantage estimate.
inline RunTrace run_cpi_alpha(const Problem& p, const DeterministicPolicy& pi0, double alpha, std::size_t K,
                              const GreedyConfig& greedy, const RunOptions& opts = {}) {
    if (K < 1) throw ConfigError("cpi-alpha: K must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("cpi-alpha: alpha must lie in (0,1]");
    CpiConfig cfg{.max_iters = K, .step_mode = StepMode::fixed, .alpha = alpha};
    return detail::run_cpi_family(p, pi0, {Algorithm::cpi_alpha, cfg}, greedy, opts);
}

/// Non-Stationary DPI: sigma_{k+1} = pi_{k+1} sigma_k with pi_{k+1} = G_eps(nu, v_{sigma_k}).
/// When `sigma_out` is given it receives sigma_K, first-executed stage first.
inline RunTrace run_nsdpi(const Problem& p, std::size_t K, const GreedyConfig& greedy, const RunOptions& opts = {},
                          NonStationaryPolicy* sigma_out = nullptr) {
    if (K < 1) throw ConfigError("nsdpi: K must be >= 1");
    const GreedyConfig cfg = detail::run_greedy_config(greedy, Algorithm::nsdpi, opts);
    const Matrix basis = make_basis(p.mdp.n_states(), cfg, p.features);
    RunTrace trace = detail::start_trace(Algorithm::nsdpi, p, opts);
    trace.max_iters = K;
    detail::Stopwatch clock(opts.record_timing);
    const double v_max = p.mdp.v_max();

    // v_{sigma_k} = T_{pi_k} v_{sigma_{k-1}}, starting from v_empty = r.
    ValueFunction v = p.mdp.rewards();
    double horizon_weight = 1.0;  // gamma^k
    trace.records.push_back(
        {.k = 0, .loss = p.loss(v), .loss_conservative = p.loss(v) + v_max, .wallclock_ms = clock.lap()});
    for (std::size_t k = 1; k <= K; ++k) {
        ApproxGreedyResult g = approx_greedy(p.mdp, p.nu, v, cfg, basis, k);
        trace.projection_warning |= g.projection_warning;
        v = bellman_apply(p.mdp, g.policy, v);
        if (sigma_out) sigma_out->stages.insert(sigma_out->stages.begin(), g.policy);
        horizon_weight *= p.mdp.gamma();
        const double loss = p.loss(v);
        trace.records.push_back({.k = k,
                                 .loss = loss,
                                 .loss_conservative = loss + horizon_weight * v_max,
                                 .epsilon = g.measurement.epsilon,
                                 .alpha = 1.0,
                                 .wallclock_ms = clock.lap()});
    }
    trace.final_policy = "nonstationary(" + std::to_string(K) + ")";
    return trace;
}

}  // namespace apilab
