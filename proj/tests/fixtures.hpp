#pragma once

// Small hand-checkable MDPs shared by the unit tests.

#include "apilab/apilab.hpp"

#include <vector>

namespace fixtures {

using namespace apilab;

/// Single action, deterministic 0 -> 1 -> 0.
inline Mdp cycle2(double gamma = 0.5, Vector r = Vector{{1.0, 0.0}}) {
    return Mdp(2, 1, {{{1, 1.0}}, {{0, 1.0}}}, std::move(r), gamma, 1.0);
}

/// State 0: a0 stays, a1 moves to 1. State 1 absorbs under both actions.
/// r = [0, 1].
inline Mdp two_by_two(double gamma = 0.5) {
    return Mdp(2, 2, {{{0, 1.0}}, {{1, 1.0}}, {{1, 1.0}}, {{1, 1.0}}}, Vector{{0.0, 1.0}}, gamma, 1.0);
}

inline Mdp single_state(double gamma = 0.99, double r = 1.0) { return Mdp(1, 1, {{{0, 1.0}}}, Vector{{r}}, gamma, 1.0); }

inline Mdp garnet(std::size_t ns, std::size_t na, std::size_t b, std::uint64_t seed, double gamma = 0.99) {
    return generate_garnet({ns, na, b, 1, seed}, gamma).mdp;
}

/// Every deterministic policy of a small MDP.
inline std::vector<DeterministicPolicy> all_policies(const Mdp& m) {
    std::vector<DeterministicPolicy> out;
    DeterministicPolicy pi = DeterministicPolicy::constant(m.n_states(), 0);
    while (true) {
        out.push_back(pi);
        std::size_t s = 0;
        while (s < m.n_states() && ++pi.action[s] == m.n_actions()) pi.action[s++] = 0;
        if (s == m.n_states()) break;
    }
    return out;
}

}  // namespace fixtures
