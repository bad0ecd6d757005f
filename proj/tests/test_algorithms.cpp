#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace apilab;

namespace {

const GreedyConfig exact_cfg(std::size_t n) { return {BasisKind::fourier, n, 0.0, NoiseScale::relative, 0}; }

Problem garnet_problem(std::size_t ns, std::size_t na, std::size_t b, std::uint64_t seed, double gamma) {
    Garnet g = generate_garnet({ns, na, b, 3, seed}, gamma);
    const auto d = default_distributions(g.mdp);
    return Problem::make(std::move(g.mdp), d.mu, d.nu, std::move(g.features));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Byte-compares against tests/golden; APILAB_REGEN_GOLDEN=1 rewrites the file instead.
void expect_golden(const std::string& name, const std::string& text) {
    const std::string path = std::string(APILAB_GOLDEN_DIR) + "/" + name;
    if (const char* regen = std::getenv("APILAB_REGEN_GOLDEN"); regen && std::string(regen) == "1") {
        write_text_file(path, text);
        GTEST_SKIP() << "rewrote " << path;
    }
    const std::string expected = read_file(path);
    ASSERT_FALSE(expected.empty()) << "missing golden file " << path;
    EXPECT_EQ(text, expected) << name;
}

}  // namespace

TEST(CpiStepSize, Formula) {
    EXPECT_NEAR(cpi_step_size(1.0, 0.3, 0.9, 10.0), 0.1 * 0.9 / 36.0, 1e-15);
    EXPECT_NEAR(cpi_step_size(1.0, 0.3, 0.99, 100.0), 2.2727e-5, 1e-9);
    EXPECT_NEAR(cpi_step_size(0.5, 0.1, 0.99, 100.0), 0.01 * (0.5 - 0.1 / 3) / (4 * 0.99 * 100), 1e-18);
}

TEST(CpiStepSize, ClampedToOneAndRejectsNonPositive) {
    EXPECT_EQ(cpi_step_size(100.0, 0.3, 0.5, 2.0), 1.0);
    EXPECT_THROW(cpi_step_size(0.05, 0.3, 0.9, 10.0), NumericalError);
}

TEST(CpiIterationBound, Formula) {
    EXPECT_EQ(cpi_iteration_bound(1.0, 0.5, 2.0), 144u);
    EXPECT_EQ(default_cpi_max_iters(1.0, 0.5, 2.0), 1440u);
}

TEST(EstimateAdvantage, HandExample) {
    // pi = a0 keeps state 0 at reward 0; switching to a1 there gains gamma * v(1) = 1.
    const Mdp m = fixtures::two_by_two();
    const DeterministicPolicy pi = DeterministicPolicy::constant(2, 0);
    const DeterministicPolicy greedy = exact_greedy(m, policy_value(m, pi)).policy;
    EXPECT_EQ(greedy.action[0], 1u);
    const AdvantageEstimate a = estimate_advantage(m, pi, greedy, Distribution::point_mass(2, 0), AdvantageMode::exact);
    EXPECT_NEAR(a.advantage_true, 1.0, 1e-14);
    EXPECT_EQ(a.advantage_hat, a.advantage_true);
}

TEST(EstimateAdvantage, NoisyWithinThirdOfRho) {
    const Mdp m = fixtures::garnet(10, 3, 2, 4, 0.9);
    const DeterministicPolicy pi = DeterministicPolicy::constant(10, 0);
    const DeterministicPolicy greedy = exact_greedy(m, policy_value(m, pi)).policy;
    const auto nu = Distribution::uniform(10);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto a = estimate_advantage(m, pi, greedy, nu, AdvantageMode::noisy, 0.3, seed);
        EXPECT_LE(std::abs(a.advantage_hat - a.advantage_true), 0.1 + 1e-15);
    }
}

TEST(Dpi, ExactGreedyReachesOptimum) {
    const Problem p = garnet_problem(30, 4, 2, 7, 0.95);
    const RunTrace t = run_dpi(p, DeterministicPolicy::constant(30, 0), 30 * 4, exact_cfg(30));
    ASSERT_EQ(t.records.size(), 121u);
    EXPECT_LE(std::abs(t.records.back().loss), 1e-9);
    for (std::size_t k = 1; k < t.records.size(); ++k) {
        EXPECT_EQ(*t.records[k].epsilon, 0.0);
        EXPECT_EQ(*t.records[k].alpha, 1.0);
        // Exact policy iteration never gets worse.
        EXPECT_LE(t.records[k].loss, t.records[k - 1].loss + 1e-10);
    }
}

TEST(Dpi, LossMatchesIndependentEvaluation) {
    const Problem p = garnet_problem(15, 3, 2, 8, 0.9);
    const GreedyConfig cfg{BasisKind::fourier, 3, 0.05, NoiseScale::relative, 2};
    const RunTrace t = run_dpi(p, DeterministicPolicy::constant(15, 0), 5, cfg, {.run_seed = 11});
    // Replay: the greedy stream is a pure function of (config, run seed, call id).
    const GreedyConfig run_cfg = detail::run_greedy_config(cfg, Algorithm::dpi, {.run_seed = 11});
    const Matrix basis = make_basis(15, run_cfg, p.features);
    DeterministicPolicy pi = DeterministicPolicy::constant(15, 0);
    for (std::size_t k = 1; k <= 5; ++k) {
        const Vector v = policy_value(p.mdp, pi);
        const auto g = approx_greedy(p.mdp, p.nu, v, run_cfg, basis, k);
        pi = g.policy;
        EXPECT_EQ(t.records[k].epsilon.value(), g.measurement.epsilon);
        EXPECT_NEAR(t.records[k].loss, p.mu.dot(p.optimum.v_star - policy_value(p.mdp, pi)), 1e-12);
    }
}

TEST(Dpi, DeterministicAndSeedSensitive) {
    const Problem p = garnet_problem(20, 3, 2, 9, 0.95);
    const GreedyConfig cfg{BasisKind::fourier, 3, 0.05, NoiseScale::relative, 1};
    const auto pi0 = DeterministicPolicy::constant(20, 0);
    EXPECT_EQ(trace_to_csv(run_dpi(p, pi0, 10, cfg, {.run_seed = 1})),
              trace_to_csv(run_dpi(p, pi0, 10, cfg, {.run_seed = 1})));
    EXPECT_NE(trace_to_csv(run_dpi(p, pi0, 10, cfg, {.run_seed = 1})),
              trace_to_csv(run_dpi(p, pi0, 10, cfg, {.run_seed = 2})));
}

TEST(Dpi, RejectsZeroIterations) {
    const Problem p = garnet_problem(5, 2, 2, 1, 0.9);
    EXPECT_THROW(run_dpi(p, DeterministicPolicy::constant(5, 0), 0, exact_cfg(5)), ConfigError);
    EXPECT_THROW(run_dpi(p, DeterministicPolicy::constant(4, 0), 3, exact_cfg(5)), ConfigError);
}

TEST(Cpi, StopsImmediatelyAtTheOptimum) {
    const Problem p = garnet_problem(20, 3, 2, 3, 0.95);
    const RunTrace t = run_cpi(p, p.optimum.pi_star, {.rho = 0.01}, exact_cfg(20));
    ASSERT_TRUE(t.stop_iteration);
    EXPECT_EQ(*t.stop_iteration, 0u);
    EXPECT_EQ(t.records.size(), 1u);
    EXPECT_NEAR(*t.stop_advantage_true, 0.0, 1e-10);
    EXPECT_EQ(t.final_policy, "deterministic");
}

TEST(Cpi, MonotoneImprovementAndStopBound) {
    // Exact advantages: every step must raise nu v by more than rho^2/(72 gamma V_max).
    // The first advantage here is about 0.084 against a threshold of 0.067, so the
    // run takes well over a thousand small steps before stopping.
    const Problem p = garnet_problem(20, 2, 2, 2, 0.9);
    const double rho = 0.1 * p.mdp.v_max() * (1 - p.mdp.gamma());
    const RunTrace t = run_cpi(p, DeterministicPolicy::constant(20, 0), {.rho = rho, .max_iters = 5000}, exact_cfg(20), {.run_seed = 3});
    ASSERT_TRUE(t.stop_iteration);
    ASSERT_GE(t.records.size(), 100u);
    const double increment = rho * rho / (72 * 0.9 * p.mdp.v_max());
    for (std::size_t k = 1; k < t.records.size(); ++k) {
        EXPECT_GT(*t.records[k].eta - *t.records[k - 1].eta, increment) << "k " << k;
        EXPECT_GT(*t.records[k].advantage_hat, 2 * rho / 3);
        EXPECT_NEAR(*t.records[k].alpha, cpi_step_size(*t.records[k].advantage_hat, rho, 0.9, p.mdp.v_max()), 1e-15);
    }
    EXPECT_LE(*t.stop_iteration, cpi_iteration_bound(rho, 0.9, p.mdp.v_max()));
    EXPECT_LE(*t.stop_advantage_hat, 2 * rho / 3);
    EXPECT_EQ(*t.stop_iteration, t.records.back().k);
}

TEST(Cpi, NoisyAdvantageStaysDeterministic) {
    const Problem p = garnet_problem(15, 2, 2, 6, 0.9);
    const CpiConfig cfg{.rho = 0.2, .advantage_mode = AdvantageMode::noisy, .max_iters = 50};
    const auto pi0 = DeterministicPolicy::constant(15, 0);
    const RunTrace a = run_cpi(p, pi0, cfg, exact_cfg(15), {.run_seed = 5});
    const RunTrace b = run_cpi(p, pi0, cfg, exact_cfg(15), {.run_seed = 5});
    EXPECT_EQ(trace_to_csv(a), trace_to_csv(b));
    for (std::size_t k = 1; k < a.records.size(); ++k) {
        EXPECT_LE(std::abs(*a.records[k].advantage_hat - *a.records[k].advantage_true), 0.2 / 3 + 1e-15);
    }
}

TEST(CpiPlus, LineSearchNeverTakesLessThanTheAdaptiveStep) {
    const Problem p = garnet_problem(20, 3, 2, 10, 0.95);
    const double rho = 0.05;
    const GreedyConfig cfg{BasisKind::fourier, 3, 0.05, NoiseScale::relative, 1};
    const auto pi0 = DeterministicPolicy::constant(20, 0);
    const RunTrace plus = run_cpi_plus(p, pi0, rho, 30, cfg);
    ASSERT_GE(plus.records.size(), 2u);
    for (std::size_t k = 1; k < plus.records.size(); ++k) {
        const auto& r = plus.records[k];
        EXPECT_GE(*r.alpha, cpi_step_size(*r.advantage_hat, rho, 0.95, p.mdp.v_max()));
        EXPECT_LE(*r.alpha, 1.0);
    }
    EXPECT_EQ(plus.max_iters, 30u);
    EXPECT_LE(plus.records.size(), 31u);
}

TEST(CpiPlus, BeatsAdaptiveStepOnFirstIteration) {
    // Both start from the same policy and the same greedy call, so the line
    // search's first iterate is at least as good in nu v.
    const Problem p = garnet_problem(20, 3, 2, 11, 0.95);
    const auto pi0 = DeterministicPolicy::constant(20, 0);
    const RunTrace plus = run_cpi_plus(p, pi0, 0.05, 5, exact_cfg(20));
    const RunTrace base = run_cpi(p, pi0, {.rho = 0.05, .max_iters = 5}, exact_cfg(20));
    ASSERT_GE(plus.records.size(), 2u);
    ASSERT_GE(base.records.size(), 2u);
    EXPECT_GE(*plus.records[1].eta, *base.records[1].eta - 1e-12);
}

TEST(CpiAlpha, FullStepMatchesExactPolicyIteration) {
    const Problem p = garnet_problem(20, 3, 2, 12, 0.9);
    const auto pi0 = DeterministicPolicy::constant(20, 0);
    const RunTrace one = run_cpi_alpha(p, pi0, 1.0, 10, exact_cfg(20));
    const RunTrace dpi = run_dpi(p, pi0, 10, exact_cfg(20));
    ASSERT_EQ(one.records.size(), dpi.records.size());
    for (std::size_t k = 0; k < one.records.size(); ++k) EXPECT_NEAR(one.records[k].loss, dpi.records[k].loss, 1e-10);
    EXPECT_EQ(one.final_policy, "deterministic");
}

TEST(CpiAlpha, RunsExactlyKStepsWithFixedAlpha) {
    const Problem p = garnet_problem(20, 3, 2, 13, 0.9);
    const RunTrace t = run_cpi_alpha(p, DeterministicPolicy::constant(20, 0), 0.1, 15, exact_cfg(20));
    ASSERT_EQ(t.records.size(), 16u);
    EXPECT_FALSE(t.stop_iteration);
    EXPECT_EQ(*t.fixed_alpha, 0.1);
    for (std::size_t k = 1; k < t.records.size(); ++k) {
        EXPECT_EQ(*t.records[k].alpha, 0.1);
        EXPECT_FALSE(t.records[k].advantage_hat);
    }
    EXPECT_EQ(t.final_policy, "stochastic");
    EXPECT_THROW(run_cpi_alpha(p, DeterministicPolicy::constant(20, 0), 0.0, 5, exact_cfg(20)), ConfigError);
    EXPECT_THROW(run_cpi_alpha(p, DeterministicPolicy::constant(20, 0), 1.5, 5, exact_cfg(20)), ConfigError);
}

TEST(CpiAlpha, MixtureLossMatchesMixedPolicyValue) {
    // One step from pi0 with alpha = 0.3 toward the exact greedy policy.
    const Problem p = garnet_problem(10, 2, 2, 14, 0.9);
    const auto pi0 = DeterministicPolicy::constant(10, 0);
    const RunTrace t = run_cpi_alpha(p, pi0, 0.3, 1, exact_cfg(10));
    const auto greedy = exact_greedy(p.mdp, policy_value(p.mdp, pi0)).policy;
    const StochasticPolicy mixed = mix_policies(StochasticPolicy::from(pi0, 2), greedy, 0.3);
    EXPECT_NEAR(t.records[1].loss, p.mu.dot(p.optimum.v_star - policy_value(p.mdp, mixed)), 1e-12);
}

TEST(Nsdpi, InitialLossIsAgainstTheRewardVector) {
    const Problem p = garnet_problem(15, 3, 2, 15, 0.9);
    const RunTrace t = run_nsdpi(p, 3, exact_cfg(15));
    EXPECT_NEAR(t.records[0].loss, p.mu.dot(p.optimum.v_star - p.mdp.rewards()), 1e-12);
    EXPECT_NEAR(*t.records[0].loss_conservative, t.records[0].loss + p.mdp.v_max(), 1e-12);
}

TEST(Nsdpi, ExactGreedyIsValueIteration) {
    const Problem p = garnet_problem(15, 3, 2, 16, 0.9);
    NonStationaryPolicy sigma;
    const RunTrace t = run_nsdpi(p, 40, exact_cfg(15), {}, &sigma);
    ASSERT_EQ(sigma.length(), 40u);
    Vector v = p.mdp.rewards();
    for (std::size_t k = 1; k <= 40; ++k) {
        v = exact_greedy(p.mdp, v).backup;
        const double g = std::pow(0.9, static_cast<double>(k));
        EXPECT_NEAR(t.records[k].loss, p.mu.dot(p.optimum.v_star - v), 1e-10);
        EXPECT_LE(t.records[k].loss, g * p.mdp.v_max() + 1e-10);
        EXPECT_NEAR(*t.records[k].loss_conservative, t.records[k].loss + g * p.mdp.v_max(), 1e-10);
    }
    EXPECT_NEAR(t.records.back().loss, p.mu.dot(p.optimum.v_star - nonstationary_value(p.mdp, sigma)), 1e-10);
    EXPECT_EQ(t.final_policy, "nonstationary(40)");
}

TEST(Nsdpi, NoisyStagesMatchReplayedValue) {
    const Problem p = garnet_problem(20, 3, 2, 17, 0.95);
    const GreedyConfig cfg{BasisKind::fourier, 3, 0.05, NoiseScale::relative, 2};
    NonStationaryPolicy sigma;
    const RunTrace t = run_nsdpi(p, 10, cfg, {.run_seed = 4}, &sigma);
    EXPECT_NEAR(t.records.back().loss, p.mu.dot(p.optimum.v_star - nonstationary_value(p.mdp, sigma)), 1e-10);
}

TEST(Golden, TracesOnGarnet30) {
    const Problem p = garnet_problem(30, 4, 2, 3, 0.95);
    const GreedyConfig cfg{BasisKind::fourier, 3, 0.05, NoiseScale::relative, 42};
    const auto pi0 = DeterministicPolicy::constant(30, 0);
    const RunOptions opts{.mdp_seed = 3, .run_seed = 7};
    expect_golden("dpi_g30.csv", trace_to_csv(run_dpi(p, pi0, 30, cfg, opts)));
    expect_golden("cpi_alpha_g30.csv", trace_to_csv(run_cpi_alpha(p, pi0, 0.1, 30, cfg, opts)));
    expect_golden("nsdpi_g30.csv", trace_to_csv(run_nsdpi(p, 30, cfg, opts)));
}
