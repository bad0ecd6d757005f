#pragma once

// Approximate greedy operator: exact greedy applied to a noisy value estimate
// projected onto a low-dimensional basis in the nu-weighted quadratic norm.
// The achieved error epsilon = nu (T v - T_pi v) is measured exactly against
// the un-noised input v.

#include "apilab/bellman.hpp"
#include "apilab/errors.hpp"
#include "apilab/mdp.hpp"
#include "apilab/rng.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

namespace apilab {

enum class BasisKind { fourier, random_features, identity };
enum class NoiseScale { relative, absolute };

inline std::string to_string(BasisKind b) {
    switch (b) {
        case BasisKind::fourier: return "fourier";
        case BasisKind::random_features: return "random";
        case BasisKind::identity: return "identity";
    }
    return "?";
}

inline BasisKind parse_basis(const std::string& s) {
    if (s == "fourier") return BasisKind::fourier;
    if (s == "random" || s == "random_features") return BasisKind::random_features;
    if (s == "identity") return BasisKind::identity;
    throw ConfigError("unknown basis '" + s + "'");
}

inline std::string to_string(NoiseScale n) { return n == NoiseScale::relative ? "relative" : "absolute"; }

inline NoiseScale parse_noise_scale(const std::string& s) {
    if (s == "relative") return NoiseScale::relative;
    if (s == "absolute") return NoiseScale::absolute;
    throw ConfigError("unknown noise scale '" + s + "'");
}

struct GreedyConfig {
    BasisKind basis = BasisKind::fourier;
    std::size_t n_coeffs = 1;
    double noise = 0.0;  // iota
    NoiseScale noise_scale = NoiseScale::relative;
    std::uint64_t seed = 0;

    void validate(std::size_t n_states) const {
        if (n_coeffs < 1 || n_coeffs > n_states) throw ConfigError("greedy: n_coeffs must lie in [1, n_states]");
        if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("greedy: noise amplitude must be >= 0");
    }

    /// Exact greedy: no noise, full identity basis.
    static GreedyConfig exact(std::size_t n_states) { return {BasisKind::identity, n_states, 0.0, NoiseScale::relative, 0}; }
};

struct EpsilonMeasurement {
    double epsilon = 0.0;
    ValueFunction error_vector;  // T v - T_pi v, componentwise >= 0
};

/// Column j is cos(pi * j * (s + 0.5) / n); column 0 is constant.
inline Matrix fourier_basis(std::size_t n_states, std::size_t n_coeffs) {
    if (n_coeffs < 1 || n_coeffs > n_states) throw ConfigError("fourier_basis: n_coeffs must lie in [1, n_states]");
    Matrix B(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_coeffs));
    const double n = static_cast<double>(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t j = 0; j < n_coeffs; ++j) {
            B(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) =
                j == 0 ? 1.0 : std::cos(std::numbers::pi * static_cast<double>(j) * (static_cast<double>(s) + 0.5) / n);
        }
    }
    return B;
}

/// Basis matrix for a greedy configuration. Random features take the first
/// n_coeffs columns of the Garnet feature matrix.
inline Matrix make_basis(std::size_t n_states, const GreedyConfig& cfg, const std::optional<Matrix>& features = {}) {
    cfg.validate(n_states);
    switch (cfg.basis) {
        case BasisKind::fourier: return fourier_basis(n_states, cfg.n_coeffs);
        case BasisKind::identity: {
            const auto n = static_cast<Eigen::Index>(n_states);
            return Matrix::Identity(n, n).leftCols(static_cast<Eigen::Index>(cfg.n_coeffs));
        }
        case BasisKind::random_features:
            if (!features) throw ConfigError("random-feature basis requires a feature matrix");
            if (static_cast<std::size_t>(features->rows()) != n_states ||
                static_cast<std::size_t>(features->cols()) < cfg.n_coeffs) {
                throw ConfigError("feature matrix has too few columns for n_coeffs");
            }
            return features->leftCols(static_cast<Eigen::Index>(cfg.n_coeffs));
    }
    throw ConfigError("unknown basis");
}

struct Projection {
    ValueFunction fitted;
    std::size_t columns_used = 0;
    bool rank_deficient = false;
};

/// Weighted least squares: argmin over span(basis) of sum_s nu(s) (fit(s) - v(s))^2.
///
/// States with nu(s) = 0 get the extrapolated basis value. If the weighted
/// design is rank deficient, trailing columns are dropped until it is not.
inline Projection project_weighted(const ValueFunction& v, const Matrix& basis, const Distribution& nu) {
    if (basis.rows() != v.size() || nu.size() != static_cast<std::size_t>(v.size())) {
        throw ConfigError("project_weighted: dimension mismatch");
    }
    const Vector w = nu.probs().cwiseSqrt();
    Projection out;
    for (Eigen::Index cols = basis.cols(); cols >= 1; --cols) {
        const Matrix design = w.asDiagonal() * basis.leftCols(cols);
        Eigen::ColPivHouseholderQR<Matrix> qr(design);
        if (qr.rank() < cols) {
            out.rank_deficient = true;
            continue;
        }
        out.columns_used = static_cast<std::size_t>(cols);
        if (cols == v.size() && nu.min() > 0.0) {
            // A square full-rank basis spans everything: the projection is v itself.
            out.fitted = v;
        } else {
            const Vector coeffs = qr.solve(w.cwiseProduct(v));
            out.fitted = basis.leftCols(cols) * coeffs;
        }
        return out;
    }
    // Only reachable when every weighted column vanishes; the zero function is the fit.
    out.fitted = ValueFunction::Zero(v.size());
    return out;
}

/// error(s) = (T v)(s) - (T_pi v)(s) and its nu-average.
inline EpsilonMeasurement measure_epsilon(const Mdp& mdp, const Distribution& nu, const ValueFunction& v,
                                          const DeterministicPolicy& pi) {
    detail::check_policy(mdp, pi);
    detail::check_size(mdp, v.size(), "value function");
    detail::check_size(mdp, static_cast<Eigen::Index>(nu.size()), "distribution");
    const GreedyResult best = exact_greedy(mdp, v);
    EpsilonMeasurement m;
    m.error_vector.resize(v.size());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        // Both terms come from Mdp::backup, so the greedy action gives exactly 0.
        m.error_vector[si] = best.backup[si] - mdp.backup(v, s, pi.action[s]);
    }
    m.epsilon = nu.dot(m.error_vector);
    return m;
}

struct ApproxGreedyResult {
    DeterministicPolicy policy;
    EpsilonMeasurement measurement;
    bool projection_warning = false;
};

/// Uniform white noise of amplitude iota (scaled by max(v) - min(v) in relative mode).
inline Vector greedy_noise(const ValueFunction& v, const GreedyConfig& cfg, std::uint64_t call_id) {
    double amplitude = cfg.noise;
    if (cfg.noise_scale == NoiseScale::relative) amplitude *= v.maxCoeff() - v.minCoeff();
    Vector u = Vector::Zero(v.size());
    if (amplitude <= 0.0) return u;
    Rng rng(derive_seed(cfg.seed, {stream_tag::noise, call_id}));
    for (Eigen::Index s = 0; s < u.size(); ++s) u[s] = rng.uniform(-amplitude, amplitude);
    return u;
}

/// G Pi_{F,nu}(v + u(iota)). `call_id` selects the noise substream; callers
/// pass a distinct id per call (typically the iteration index).
inline ApproxGreedyResult approx_greedy(const Mdp& mdp, const Distribution& nu, const ValueFunction& v,
                                        const GreedyConfig& cfg, const Matrix& basis, std::uint64_t call_id) {
    detail::check_size(mdp, v.size(), "value function");
    const Projection proj = project_weighted(v + greedy_noise(v, cfg, call_id), basis, nu);
    ApproxGreedyResult out;
    out.policy = exact_greedy(mdp, proj.fitted).policy;
    out.measurement = measure_epsilon(mdp, nu, v, out.policy);
    out.projection_warning = proj.rank_deficient;
    return out;
}

}  // namespace apilab
