#pragma once

// Core value types: the finite MDP, distributions, and the policy family.

#include "apilab/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace apilab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Per-state values (v_pi, v_sigma, v*). Only finiteness is required.
using ValueFunction = Eigen::VectorXd;

struct Transition {
    std::size_t next = 0;
    double prob = 0.0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Finite discounted MDP with state-dependent rewards.
///
/// Transitions are stored sparsely, one row per (state, action) in
/// row-major order `s * n_actions + a`. Immutable after construction.
class Mdp {
public:
    static constexpr double row_tolerance = 1e-12;

    Mdp(std::size_t n_states, std::size_t n_actions, std::vector<std::vector<Transition>> rows, Vector rewards,
        double gamma, double r_max)
        : n_states_(n_states),
          n_actions_(n_actions),
          rows_(std::move(rows)),
          rewards_(std::move(rewards)),
          gamma_(gamma),
          r_max_(r_max) {
        validate();
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double gamma() const noexcept { return gamma_; }
    double r_max() const noexcept { return r_max_; }
    double v_max() const noexcept { return r_max_ / (1.0 - gamma_); }
    const Vector& rewards() const noexcept { return rewards_; }

    std::span<const Transition> row(std::size_t s, std::size_t a) const { return rows_[s * n_actions_ + a]; }
    const std::vector<std::vector<Transition>>& rows() const noexcept { return rows_; }

    /// r(s) + gamma * sum_{s'} P(s'|s,a) v(s').
    double backup(const ValueFunction& v, std::size_t s, std::size_t a) const {
        double acc = 0.0;
        for (const auto& t : row(s, a)) acc += t.prob * v[static_cast<Eigen::Index>(t.next)];
        return rewards_[static_cast<Eigen::Index>(s)] + gamma_ * acc;
    }

    /// Same MDP with a different discount factor.
    Mdp with_gamma(double gamma) const { return Mdp(n_states_, n_actions_, rows_, rewards_, gamma, r_max_); }

private:
    void validate() const {
        if (n_states_ == 0 || n_actions_ == 0) throw ConfigError("mdp: n_states and n_actions must be positive");
        if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw ConfigError("mdp: gamma must lie in (0,1)");
        if (!(r_max_ > 0.0) || !std::isfinite(r_max_)) throw ConfigError("mdp: r_max must be positive and finite");
        if (rows_.size() != n_states_ * n_actions_) throw ConfigError("mdp: expected n_states*n_actions transition rows");
        if (static_cast<std::size_t>(rewards_.size()) != n_states_) throw ConfigError("mdp: rewards size mismatch");
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            if (rows_[i].empty()) throw ConfigError("mdp: empty transition row " + std::to_string(i));
            double sum = 0.0;
            for (const auto& t : rows_[i]) {
                if (t.next >= n_states_) throw ConfigError("mdp: successor out of range in row " + std::to_string(i));
                if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
                    throw ConfigError("mdp: probability outside [0,1] in row " + std::to_string(i));
                }
                sum += t.prob;
            }
            if (std::abs(sum - 1.0) > row_tolerance) {
                throw ConfigError("mdp: transition row " + std::to_string(i) + " does not sum to 1");
            }
        }
        for (Eigen::Index s = 0; s < rewards_.size(); ++s) {
            if (!std::isfinite(rewards_[s]) || std::abs(rewards_[s]) > r_max_) {
                throw ConfigError("mdp: reward of state " + std::to_string(s) + " exceeds r_max");
            }
        }
    }

    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<std::vector<Transition>> rows_;
    Vector rewards_;
    double gamma_;
    double r_max_;
};

/// Probability vector over states (mu, nu, d_{pi,nu}).
class Distribution {
public:
    static constexpr double tolerance = 1e-12;

    explicit Distribution(Vector probs) : probs_(std::move(probs)) {
        if (probs_.size() == 0) throw ConfigError("distribution: empty");
        for (Eigen::Index i = 0; i < probs_.size(); ++i) {
            if (!(probs_[i] >= 0.0) || !std::isfinite(probs_[i])) {
                throw ConfigError("distribution: negative or non-finite entry");
            }
        }
        if (std::abs(probs_.sum() - 1.0) > tolerance) throw ConfigError("distribution: entries do not sum to 1");
    }

    static Distribution uniform(std::size_t n) {
        return Distribution(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
    }

    static Distribution point_mass(std::size_t n, std::size_t s) {
        Vector p = Vector::Zero(static_cast<Eigen::Index>(n));
        p[static_cast<Eigen::Index>(s)] = 1.0;
        return Distribution(std::move(p));
    }

    /// Normalizes a nonnegative weight vector.
    static Distribution normalized(Vector weights) {
        const double total = weights.sum();
        if (!(total > 0.0)) throw ConfigError("distribution: weights must have positive mass");
        weights /= total;
        return Distribution(std::move(weights));
    }

    const Vector& probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(probs_.size()); }
    double operator[](std::size_t s) const { return probs_[static_cast<Eigen::Index>(s)]; }
    double min() const { return probs_.minCoeff(); }

    /// Expectation nu . v.
    double dot(const Vector& v) const { return probs_.dot(v); }

private:
    Vector probs_;
};

struct DeterministicPolicy {
    std::vector<std::size_t> action;

    static DeterministicPolicy constant(std::size_t n_states, std::size_t a) {
        return {std::vector<std::size_t>(n_states, a)};
    }

    std::size_t size() const noexcept { return action.size(); }
    friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;
};

/// Per-state action distributions; row s holds pi(.|s).
struct StochasticPolicy {
    Matrix probs;

    static StochasticPolicy from(const DeterministicPolicy& pi, std::size_t n_actions) {
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(pi.size()), static_cast<Eigen::Index>(n_actions));
        for (std::size_t s = 0; s < pi.size(); ++s) {
            m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(pi.action[s])) = 1.0;
        }
        return {std::move(m)};
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(probs.rows()); }
};

/// Finite-horizon policy sigma = pi_1 pi_2 ... pi_k; stages[0] acts first.
struct NonStationaryPolicy {
    std::vector<DeterministicPolicy> stages;

    bool empty() const noexcept { return stages.empty(); }
    std::size_t length() const noexcept { return stages.size(); }
};

struct OptimalSolution {
    ValueFunction v_star;
    DeterministicPolicy pi_star;
};

namespace detail {

inline void check_policy(const Mdp& mdp, const DeterministicPolicy& pi) {
    if (pi.size() != mdp.n_states()) throw ConfigError("policy size does not match the number of states");
    for (auto a : pi.action) {
        if (a >= mdp.n_actions()) throw ConfigError("policy action index out of range");
    }
}

inline void check_policy(const Mdp& mdp, const StochasticPolicy& pi) {
    if (pi.size() != mdp.n_states() || static_cast<std::size_t>(pi.probs.cols()) != mdp.n_actions()) {
        throw ConfigError("stochastic policy shape does not match the mdp");
    }
    for (Eigen::Index s = 0; s < pi.probs.rows(); ++s) {
        if (pi.probs.row(s).minCoeff() < 0.0 || std::abs(pi.probs.row(s).sum() - 1.0) > 1e-12) {
            throw ConfigError("stochastic policy row " + std::to_string(s) + " is not a distribution");
        }
    }
}

inline void check_size(const Mdp& mdp, Eigen::Index n, const char* what) {
    if (static_cast<std::size_t>(n) != mdp.n_states()) {
        throw ConfigError(std::string(what) + " size does not match the number of states");
    }
}

}  // namespace detail

}  // namespace apilab
