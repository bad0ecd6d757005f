#pragma once

// Garnet random MDPs G(n_states, n_actions, branching, n_features).

#include "apilab/errors.hpp"
#include "apilab/mdp.hpp"
#include "apilab/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <regex>
#include <string>
#include <utility>
#include <vector>

namespace apilab {

struct GarnetParams {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::size_t branching = 1;
    std::size_t n_features = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_states == 0 || n_actions == 0) throw ConfigError("garnet: n_states and n_actions must be positive");
        if (branching < 1 || branching > n_states) throw ConfigError("garnet: branching must lie in [1, n_states]");
        if (n_features < 1 || n_features > n_states) throw ConfigError("garnet: n_features must lie in [1, n_states]");
    }

    std::string label() const {
        return "G(" + std::to_string(n_states) + "," + std::to_string(n_actions) + "," + std::to_string(branching) +
               "," + std::to_string(n_features) + ")";
    }
};

/// Parses "G(ns,na,b,p)". The seed is left at zero.
inline GarnetParams parse_garnet(const std::string& text) {
    static const std::regex pattern(R"(\s*G\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)\s*)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw ConfigError("garnet: expected G(ns,na,b,p), got '" + text + "'");
    GarnetParams p;
    p.n_states = std::stoul(m[1]);
    p.n_actions = std::stoul(m[2]);
    p.branching = std::stoul(m[3]);
    p.n_features = std::stoul(m[4]);
    return p;
}

/// Splits [0,1] at the given cut points; returns the gaps in order.
inline std::vector<double> cut_point_gaps(std::vector<double> cuts) {
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> gaps;
    gaps.reserve(cuts.size() + 1);
    double prev = 0.0;
    for (double c : cuts) {
        gaps.push_back(c - prev);
        prev = c;
    }
    gaps.push_back(1.0 - prev);
    return gaps;
}

struct Garnet {
    Mdp mdp;
    Matrix features;  // n_states x n_features, entries in [0,1]
};

/// Generates a Garnet. Each (s, a) row, each reward and each feature row has
/// its own substream, so the output depends only on (params, seed).
inline Garnet generate_garnet(const GarnetParams& params, double gamma = 0.99, double r_max = 1.0) {
    params.validate();
    const std::size_t n = params.n_states;
    std::vector<std::vector<Transition>> rows;
    rows.reserve(n * params.n_actions);
    std::vector<std::size_t> pool(n);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < params.n_actions; ++a) {
            Rng rng(derive_seed(params.seed, {stream_tag::transition, s, a}));
            // Partial Fisher-Yates: the first `branching` entries are a uniform
            // sample without replacement.
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            for (std::size_t i = 0; i < params.branching; ++i) {
                const auto j = i + static_cast<std::size_t>(rng.below(n - i));
                std::swap(pool[i], pool[j]);
            }
            std::vector<double> cuts(params.branching - 1);
            for (auto& c : cuts) c = rng.uniform();
            const auto gaps = cut_point_gaps(std::move(cuts));
            std::vector<Transition> row(params.branching);
            for (std::size_t i = 0; i < params.branching; ++i) row[i] = {pool[i], gaps[i]};
            rows.push_back(std::move(row));
        }
    }
    Vector rewards(static_cast<Eigen::Index>(n));
    Matrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(params.n_features));
    for (std::size_t s = 0; s < n; ++s) {
        Rng reward_rng(derive_seed(params.seed, {stream_tag::reward, s}));
        rewards[static_cast<Eigen::Index>(s)] = r_max * reward_rng.uniform();
        Rng feature_rng(derive_seed(params.seed, {stream_tag::feature, s}));
        for (std::size_t j = 0; j < params.n_features; ++j) {
            features(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = feature_rng.uniform();
        }
    }
    return {Mdp(n, params.n_actions, std::move(rows), std::move(rewards), gamma, r_max), std::move(features)};
}

struct DistributionPair {
    Distribution mu;
    Distribution nu;
};

/// Uniform mu and nu.
inline DistributionPair default_distributions(const Mdp& mdp) {
    return {Distribution::uniform(mdp.n_states()), Distribution::uniform(mdp.n_states())};
}

}  // namespace apilab
