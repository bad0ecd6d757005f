#pragma once

// Exact finite-MDP machinery: kernels, Bellman operators, policy evaluation,
// exact greedy, occupancy measures and exact policy iteration.

#include "apilab/errors.hpp"
#include "apilab/mdp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>

namespace apilab {

inline constexpr double solve_residual_tolerance = 1e-10;

// ---------------------------------------------------------------------------
// Kernels

inline Matrix policy_kernel(const Mdp& mdp, const DeterministicPolicy& pi) {
    detail::check_policy(mdp, pi);
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    Matrix P = Matrix::Zero(n, n);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        for (const auto& t : mdp.row(s, pi.action[s])) {
            P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t.next)) += t.prob;
        }
    }
    return P;
}

inline Matrix policy_kernel(const Mdp& mdp, const StochasticPolicy& pi) {
    detail::check_policy(mdp, pi);
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    Matrix P = Matrix::Zero(n, n);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double w = pi.probs(si, static_cast<Eigen::Index>(a));
            if (w == 0.0) continue;
            for (const auto& t : mdp.row(s, a)) P(si, static_cast<Eigen::Index>(t.next)) += w * t.prob;
        }
    }
    return P;
}

// ---------------------------------------------------------------------------
// Bellman operators

/// T_pi v = r + gamma P_pi v.
inline ValueFunction bellman_apply(const Mdp& mdp, const DeterministicPolicy& pi, const ValueFunction& v) {
    detail::check_policy(mdp, pi);
    detail::check_size(mdp, v.size(), "value function");
    ValueFunction out(v.size());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) out[static_cast<Eigen::Index>(s)] = mdp.backup(v, s, pi.action[s]);
    return out;
}

inline ValueFunction bellman_apply(const Mdp& mdp, const StochasticPolicy& pi, const ValueFunction& v) {
    detail::check_policy(mdp, pi);
    detail::check_size(mdp, v.size(), "value function");
    ValueFunction out = ValueFunction::Zero(v.size());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double w = pi.probs(si, static_cast<Eigen::Index>(a));
            if (w != 0.0) out[si] += w * mdp.backup(v, s, a);
        }
    }
    return out;
}

struct GreedyResult {
    DeterministicPolicy policy;
    ValueFunction backup;  // T v
};

/// Exact greedy policy with respect to v; ties go to the lowest action index.
inline GreedyResult exact_greedy(const Mdp& mdp, const ValueFunction& v) {
    detail::check_size(mdp, v.size(), "value function");
    GreedyResult out{DeterministicPolicy{std::vector<std::size_t>(mdp.n_states(), 0)}, ValueFunction(v.size())};
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        double best = mdp.backup(v, s, 0);
        std::size_t best_a = 0;
        for (std::size_t a = 1; a < mdp.n_actions(); ++a) {
            const double q = mdp.backup(v, s, a);
            if (q > best) {
                best = q;
                best_a = a;
            }
        }
        out.policy.action[s] = best_a;
        out.backup[static_cast<Eigen::Index>(s)] = best;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear solves

namespace detail {

/// Solves (I - gamma K) x = b with LU and one step of iterative refinement.
inline Vector solve_discounted(const Matrix& K, double gamma, const Vector& b, bool transpose) {
    const auto n = K.rows();
    Matrix A = Matrix::Identity(n, n) - gamma * K;
    if (transpose) A.transposeInPlace();
    Eigen::PartialPivLU<Matrix> lu(A);
    Vector x = lu.solve(b);
    Vector residual = b - A * x;
    if (residual.lpNorm<Eigen::Infinity>() > 0.0) {
        x += lu.solve(residual);
        residual = b - A * x;
    }
    if (!x.allFinite() || residual.lpNorm<Eigen::Infinity>() > solve_residual_tolerance) {
        throw NumericalError("discounted linear solve failed: residual " +
                             std::to_string(residual.lpNorm<Eigen::Infinity>()));
    }
    return x;
}

}  // namespace detail

/// Solves (I - gamma P_pi) v = r.
template <typename Policy>
ValueFunction policy_value(const Mdp& mdp, const Policy& pi) {
    return detail::solve_discounted(policy_kernel(mdp, pi), mdp.gamma(), mdp.rewards(), false);
}

/// v_sigma = T_{pi_1} T_{pi_2} ... T_{pi_k} r; the empty policy has value r.
inline ValueFunction nonstationary_value(const Mdp& mdp, const NonStationaryPolicy& sigma) {
    ValueFunction v = mdp.rewards();
    for (auto it = sigma.stages.rbegin(); it != sigma.stages.rend(); ++it) v = bellman_apply(mdp, *it, v);
    return v;
}

/// d_{pi,nu} = (1 - gamma) nu (I - gamma P_pi)^{-1}.
///
/// Entries in [-1e-12, 0) are rounding noise and are clamped to zero before
/// renormalizing; anything more negative is an invariant violation.
template <typename Policy>
Distribution discounted_occupancy(const Mdp& mdp, const Policy& pi, const Distribution& nu) {
    detail::check_size(mdp, static_cast<Eigen::Index>(nu.size()), "distribution");
    const double gamma = mdp.gamma();
    Vector d = detail::solve_discounted(policy_kernel(mdp, pi), gamma, (1.0 - gamma) * nu.probs(), true);
    for (Eigen::Index s = 0; s < d.size(); ++s) {
        if (d[s] < -1e-12) throw NumericalError("occupancy entry " + std::to_string(s) + " is negative");
        if (d[s] < 0.0) d[s] = 0.0;
    }
    if (std::abs(d.sum() - 1.0) > 1e-10) throw NumericalError("occupancy does not sum to 1");
    return Distribution::normalized(std::move(d));
}

/// Exact policy iteration from the all-zero-action policy.
inline OptimalSolution optimal_solve(const Mdp& mdp) {
    DeterministicPolicy pi = DeterministicPolicy::constant(mdp.n_states(), 0);
    const std::size_t cap = mdp.n_states() * mdp.n_actions() + 10;
    for (std::size_t it = 0; it < cap; ++it) {
        ValueFunction v = policy_value(mdp, pi);
        GreedyResult g = exact_greedy(mdp, v);
        if (g.policy == pi || (g.backup - v).lpNorm<Eigen::Infinity>() <= 1e-10) return {std::move(v), std::move(pi)};
        pi = std::move(g.policy);
    }
    throw NumericalError("policy iteration exceeded its iteration cap");
}

/// mu (v* - v).
inline double expected_loss(const Distribution& mu, const ValueFunction& v_star, const ValueFunction& v) {
    if (mu.size() != static_cast<std::size_t>(v_star.size()) || v_star.size() != v.size()) {
        throw ConfigError("expected_loss: dimension mismatch");
    }
    return mu.dot(v_star - v);
}

/// (1 - alpha) a + alpha b, state by state.
inline StochasticPolicy mix_policies(const StochasticPolicy& a, const StochasticPolicy& b, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("mix_policies: alpha must lie in [0,1]");
    if (a.probs.rows() != b.probs.rows() || a.probs.cols() != b.probs.cols()) {
        throw ConfigError("mix_policies: dimension mismatch");
    }
    if (alpha == 0.0) return a;
    if (alpha == 1.0) return b;
    return {(1.0 - alpha) * a.probs + alpha * b.probs};
}

inline StochasticPolicy mix_policies(const StochasticPolicy& a, const DeterministicPolicy& b, double alpha) {
    return mix_policies(a, StochasticPolicy::from(b, static_cast<std::size_t>(a.probs.cols())), alpha);
}

}  // namespace apilab
