#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace apilab;

namespace {

struct Instance {
    Problem problem;
    ConcentrabilityReport report;
    LossContext ctx;
};

Instance make_instance(std::size_t ns, std::size_t na, std::uint64_t seed, double gamma) {
    Garnet g = generate_garnet({ns, na, 2, 3, seed}, gamma);
    const auto d = default_distributions(g.mdp);
    Problem p = Problem::make(std::move(g.mdp), d.mu, d.nu, std::move(g.features));
    ConcentrabilityReport r = concentrability_report(p.mdp, p.optimum.pi_star, p.mu, p.nu);
    const LossContext ctx{p.mu.dot(p.optimum.v_star), p.mdp.rewards().minCoeff()};
    return {std::move(p), std::move(r), ctx};
}

/// A report with every coefficient equal to `value`.
ConcentrabilityReport flat_report(double value, double gamma) {
    ConcentrabilityReport r;
    r.gamma = gamma;
    const Extended e(value);
    r.c1 = r.c2 = r.c1_pistar = {e, e};
    r.c_pistar_exact = e;
    r.c = r.c_pistar = {e};
    return r;
}

RunTrace synthetic(Algorithm alg, std::vector<double> losses, std::vector<double> eps, double gamma, double v_max) {
    RunTrace t;
    t.algorithm = alg;
    t.gamma = gamma;
    t.v_max = v_max;
    for (std::size_t k = 0; k < losses.size(); ++k) {
        IterationRecord r{.k = k, .loss = losses[k]};
        if (k > 0) {
            r.epsilon = eps[k - 1];
            r.alpha = 1.0;
        }
        t.records.push_back(r);
    }
    return t;
}

std::vector<const BoundRow*> rows_named(const BoundReport& r, const std::string& id) {
    std::vector<const BoundRow*> out;
    for (const auto& row : r.rows)
        if (row.bound_id == id) out.push_back(&row);
    return out;
}

const GreedyConfig noisy{BasisKind::fourier, 3, 0.05, NoiseScale::relative, 9};

}  // namespace

TEST(Classify, ToleranceBands) {
    EXPECT_EQ(detail::classify(1.0, 1.0), BoundStatus::pass);
    EXPECT_EQ(detail::classify(1.0 + 5e-10, 1.0), BoundStatus::pass);
    EXPECT_EQ(detail::classify(1.0 + 1e-8, 1.0), BoundStatus::marginal);
    EXPECT_EQ(detail::classify(1.0 + 1e-5, 1.0), BoundStatus::fail);
    EXPECT_EQ(detail::classify(5.0, std::numeric_limits<double>::infinity()), BoundStatus::vacuous);
}

TEST(Classify, ZeroErrorTimesInfiniteCoefficientIsZero) {
    EXPECT_EQ(detail::scaled(Extended::infinity(), 0.0), 0.0);
    EXPECT_TRUE(std::isinf(detail::scaled(Extended::infinity(), 1e-9)));
    EXPECT_EQ(detail::scaled(Extended(3.0), 2.0), 6.0);
}

TEST(ReportOk, MarginalCountsAgainstInconclusiveDoesNot) {
    BoundReport r;
    r.rows.push_back({"a", 0, 0, 1, BoundStatus::pass});
    r.rows.push_back({"b", 0, 0, 1, BoundStatus::inconclusive});
    r.rows.push_back({"c", 0, 0, 1, BoundStatus::informational});
    r.rows.push_back({"d", 0, 0, 1, BoundStatus::vacuous});
    EXPECT_TRUE(r.ok());
    r.rows.push_back({"e", 0, 1 + 1e-8, 1, BoundStatus::marginal});
    EXPECT_FALSE(r.ok());
}

TEST(VerifyDpi, RightHandSidesMatchHandComputation) {
    // gamma 0.5, V_max 2, C1 = 3, C2 = 5, eps = (0.1, 0.3).
    const RunTrace t = synthetic(Algorithm::dpi, {1.0, 0.8, 0.4}, {0.1, 0.3}, 0.5, 2.0);
    ConcentrabilityReport c = flat_report(1.0, 0.5);
    c.c1 = {Extended(3.0), Extended(3.0)};
    c.c2 = {Extended(5.0), Extended(5.0)};
    const BoundReport r = verify_dpi(t, c, 0.5, 2.0);
    const auto c2 = rows_named(r, "dpi_c2");
    const auto c1 = rows_named(r, "dpi_c1");
    ASSERT_EQ(c2.size(), 3u);
    EXPECT_DOUBLE_EQ(c2[0]->rhs, 2.0);
    EXPECT_DOUBLE_EQ(c2[1]->rhs, 5.0 * 0.1 / 0.25 + 1.0);
    EXPECT_DOUBLE_EQ(c2[2]->rhs, 5.0 * 0.3 / 0.25 + 0.5);
    EXPECT_DOUBLE_EQ(c1[2]->rhs, 3.0 * 0.4 / 0.5 + 0.5);
    EXPECT_TRUE(r.ok());
}

TEST(VerifyDpi, ViolationIsReported) {
    const RunTrace t = synthetic(Algorithm::dpi, {1.0, 5.0}, {0.0}, 0.5, 2.0);
    const BoundReport r = verify_dpi(t, flat_report(1.0, 0.5), 0.5, 2.0);
    EXPECT_EQ(rows_named(r, "dpi_c2")[1]->status, BoundStatus::fail);
    EXPECT_FALSE(r.ok());
}

TEST(VerifyDpi, InfiniteCoefficientIsVacuousOnlyWithError) {
    ConcentrabilityReport c = flat_report(1.0, 0.5);
    c.c1.upper = c.c2.upper = Extended::infinity();
    const BoundReport r = verify_dpi(synthetic(Algorithm::dpi, {1.0, 0.5, 0.2}, {0.0, 0.1}, 0.5, 2.0), c, 0.5, 2.0);
    const auto rows = rows_named(r, "dpi_c2");
    EXPECT_EQ(rows[1]->status, BoundStatus::pass);
    EXPECT_EQ(rows[2]->status, BoundStatus::vacuous);
    EXPECT_TRUE(r.ok());
}

TEST(VerifyDpi, LateRowsAppearPastTheThreshold) {
    // V_max 2, eps 0.01: threshold log(200)/0.5 = 10.6.
    std::vector<double> losses(16, 0.001), eps(15, 0.01);
    const BoundReport r = verify_dpi(synthetic(Algorithm::dpi, losses, eps, 0.5, 2.0), flat_report(1.0, 0.5), 0.5, 2.0);
    const auto cmax = rows_named(r, "dpi_late_max");
    const auto csum = rows_named(r, "dpi_late_sum");
    ASSERT_EQ(cmax.size(), 5u);
    EXPECT_EQ(cmax.front()->k, 11u);
    ASSERT_EQ(csum.size(), 1u);
    EXPECT_EQ(csum[0]->k, 11u);
    EXPECT_DOUBLE_EQ(cmax[0]->rhs, (1.0 / 0.25 + 1.0) * 0.01);
    EXPECT_DOUBLE_EQ(csum[0]->rhs, (11.0 * 1.0 / 0.5 + 1.0) * 0.01);
}

TEST(VerifyDpi, LossRangeRows) {
    const LossContext ctx{3.0, 0.5};  // v_min = 0.5 / 0.5 = 1
    BoundReport r = verify_dpi(synthetic(Algorithm::dpi, {1.5, 2.5}, {0.0}, 0.5, 2.0), flat_report(1.0, 0.5), 0.5, 2.0, ctx);
    const auto range = rows_named(r, "loss_range");
    ASSERT_EQ(range.size(), 2u);
    EXPECT_DOUBLE_EQ(range[0]->rhs, 2.0);
    EXPECT_EQ(range[0]->status, BoundStatus::pass);
    EXPECT_EQ(range[1]->status, BoundStatus::fail);
    r = verify_dpi(synthetic(Algorithm::dpi, {-0.1}, {}, 0.5, 2.0), flat_report(1.0, 0.5), 0.5, 2.0);
    EXPECT_EQ(rows_named(r, "loss_nonnegative")[0]->status, BoundStatus::fail);
}

TEST(VerifyDpi, RealRunsPass) {
    const Instance in = make_instance(30, 4, 3, 0.95);
    for (std::uint64_t run = 0; run < 3; ++run) {
        const RunTrace t = run_dpi(in.problem, DeterministicPolicy::constant(30, 0), 30, noisy, {.run_seed = run});
        const BoundReport r = verify_trace(t, in.report, in.ctx);
        EXPECT_TRUE(r.ok());
        EXPECT_EQ(r.count(BoundStatus::fail), 0u);
    }
}

TEST(VerifyDpi, LongRunExercisesCorollaries) {
    const Instance in = make_instance(20, 3, 4, 0.9);
    const RunTrace t = run_dpi(in.problem, DeterministicPolicy::constant(20, 0), 120, noisy, {.run_seed = 1});
    const BoundReport r = verify_trace(t, in.report, in.ctx);
    EXPECT_TRUE(r.ok());
    double eps_max = 0.0;
    for (const auto& rec : t.records)
        if (rec.epsilon) eps_max = std::max(eps_max, *rec.epsilon);
    ASSERT_GT(eps_max, 0.0);
    if (std::log(in.problem.mdp.v_max() / eps_max) / 0.1 <= 120.0) {
        EXPECT_FALSE(rows_named(r, "dpi_late_max").empty());
        EXPECT_FALSE(rows_named(r, "dpi_late_sum").empty());
    }
}

TEST(VerifyDpi, ScaledLossFails) {
    const Instance in = make_instance(30, 4, 3, 0.95);
    RunTrace t = run_dpi(in.problem, DeterministicPolicy::constant(30, 0), 30, noisy, {.run_seed = 2});
    for (auto& rec : t.records) rec.loss *= 10.0;
    EXPECT_FALSE(verify_trace(t, in.report, in.ctx).ok());
}

TEST(VerifyCpi, RealRunPassesWithMonotoneRows) {
    const Instance in = make_instance(20, 2, 5, 0.9);
    const double rho = 0.05 * in.problem.mdp.v_max() * 0.1;
    const RunTrace t = run_cpi(in.problem, DeterministicPolicy::constant(20, 0), {.rho = rho}, noisy, {.run_seed = 1});
    const BoundReport r = verify_trace(t, in.report, in.ctx);
    EXPECT_TRUE(r.ok());
    const auto mono = rows_named(r, "cpi_monotone");
    EXPECT_EQ(mono.size(), t.records.size() - 1);
    for (const auto* row : mono) EXPECT_EQ(row->status, BoundStatus::pass);
    ASSERT_EQ(rows_named(r, "cpi_stop").size(), 1u);
    EXPECT_EQ(rows_named(r, "cpi_stop")[0]->status, BoundStatus::pass);
    EXPECT_EQ(rows_named(r, "cpi_final").size(), 1u);
    EXPECT_EQ(rows_named(r, "cpi_final_eps").size(), 1u);
}

TEST(VerifyCpi, NoisyMonotoneRowsAreInformational) {
    const Instance in = make_instance(20, 2, 5, 0.9);
    const RunTrace t = run_cpi(in.problem, DeterministicPolicy::constant(20, 0),
                               {.rho = 0.1, .advantage_mode = AdvantageMode::noisy}, noisy, {.run_seed = 2});
    const BoundReport r = verify_trace(t, in.report, in.ctx);
    for (const auto* row : rows_named(r, "cpi_monotone")) EXPECT_EQ(row->status, BoundStatus::informational);
}

TEST(VerifyCpi, StopRowStatus) {
    RunTrace t = synthetic(Algorithm::cpi, {1.0, 0.9}, {0.0}, 0.5, 2.0);
    // Bound 72 * 0.5 * 4 / 1 = 144.
    BoundReport r = verify_cpi(t, flat_report(1.0, 0.5), 1.0, 0.5, 2.0);
    EXPECT_EQ(rows_named(r, "cpi_stop")[0]->status, BoundStatus::inconclusive);
    for (std::size_t k = 2; k <= 150; ++k) t.records.push_back({.k = k, .loss = 0.5, .epsilon = 0.0, .alpha = 0.0});
    r = verify_cpi(t, flat_report(1.0, 0.5), 1.0, 0.5, 2.0);
    EXPECT_EQ(rows_named(r, "cpi_stop")[0]->status, BoundStatus::fail);
    t.records.resize(3);
    t.stop_iteration = 2;
    t.stop_epsilon = 0.0;
    r = verify_cpi(t, flat_report(1.0, 0.5), 1.0, 0.5, 2.0);
    EXPECT_EQ(rows_named(r, "cpi_stop")[0]->status, BoundStatus::pass);
    // Final: loss 0.5 <= C_pi* (eps + rho) / (1-g)^2 = 4.
    EXPECT_DOUBLE_EQ(rows_named(r, "cpi_final")[0]->rhs, 4.0);
}

TEST(VerifyCpi, EnvelopeUsesTheStepSizes) {
    RunTrace t = synthetic(Algorithm::cpi, {1.0, 0.9, 0.8}, {0.2, 0.4}, 0.5, 2.0);
    t.records[1].alpha = 0.25;
    t.records[2].alpha = 0.5;
    ConcentrabilityReport c = flat_report(1.0, 0.5);
    c.c1.upper = Extended(2.0);
    const auto rows = rows_named(verify_cpi(t, c, 0.3, 0.5, 2.0), "cpi_sum_c1");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_DOUBLE_EQ(rows[0]->rhs, 2.0);
    EXPECT_DOUBLE_EQ(rows[2]->rhs, 2.0 * (0.25 * 0.2 + 0.5 * 0.4) / 0.25 + std::exp(-0.5 * 0.75) * 2.0);
}

TEST(VerifyCpiAlpha, RealRunPasses) {
    const Instance in = make_instance(30, 4, 3, 0.95);
    const RunTrace t = run_cpi_alpha(in.problem, DeterministicPolicy::constant(30, 0), 0.1, 30, noisy);
    const BoundReport r = verify_trace(t, in.report, in.ctx);
    EXPECT_TRUE(r.ok());
    EXPECT_EQ(rows_named(r, "cpi_alpha").size(), 31u);
    // K = 30 is far short of log(V_max/eps)/(alpha(1-g)).
    ASSERT_EQ(rows_named(r, "cpi_alpha_late").size(), 1u);
    EXPECT_EQ(rows_named(r, "cpi_alpha_late")[0]->status, BoundStatus::inconclusive);
}

TEST(VerifyCpiAlpha, LateFormAtComputedIteration) {
    // gamma 0.5, V_max 2, eps 0.5, alpha 1: k = ceil(log 4 / 0.5) = 3.
    const RunTrace t = synthetic(Algorithm::cpi_alpha, {1.0, 0.8, 0.6, 0.4, 0.2}, {0.5, 0.5, 0.5, 0.5}, 0.5, 2.0);
    const BoundReport r = verify_cpi_alpha(t, flat_report(1.0, 0.5), 1.0, 0.5, 2.0);
    const auto late = rows_named(r, "cpi_alpha_late");
    ASSERT_EQ(late.size(), 1u);
    EXPECT_EQ(late[0]->k, 3u);
    EXPECT_DOUBLE_EQ(late[0]->rhs, 1.0 * 4.0 * 1.0 / 0.25 * 0.5);
    EXPECT_EQ(rows_named(r, "cpi_alpha_one_vs_dpi")[0]->status, BoundStatus::informational);
}

TEST(VerifyNsdpi, UsesConservativeLoss) {
    RunTrace t = synthetic(Algorithm::nsdpi, {0.1, 0.1}, {0.0}, 0.5, 2.0);
    t.records[0].loss_conservative = 2.1;
    t.records[1].loss_conservative = 1.1;
    const BoundReport r = verify_nsdpi(t, flat_report(1.0, 0.5), 0.5, 2.0);
    const auto rows = rows_named(r, "nsdpi_cpistar");
    EXPECT_DOUBLE_EQ(rows[0]->lhs, 2.1);
    EXPECT_DOUBLE_EQ(rows[0]->rhs, 4.0);
    EXPECT_DOUBLE_EQ(rows[1]->rhs, 2.0);
    EXPECT_TRUE(r.ok());
}

TEST(VerifyNsdpi, FiniteHorizonLossRange) {
    // r_min 0.5, gamma 0.5: v_min at k = 1 is 0.5 (1 + 0.5) = 0.75.
    const RunTrace t = synthetic(Algorithm::nsdpi, {0.1, 0.1}, {0.0}, 0.5, 2.0);
    const BoundReport r = verify_nsdpi(t, flat_report(1.0, 0.5), 0.5, 2.0, LossContext{3.0, 0.5});
    const auto range = rows_named(r, "loss_range");
    EXPECT_DOUBLE_EQ(range[0]->rhs, 2.5);
    EXPECT_DOUBLE_EQ(range[1]->rhs, 2.25);
}

TEST(VerifyNsdpi, RealRunPasses) {
    const Instance in = make_instance(30, 4, 3, 0.95);
    const RunTrace t = run_nsdpi(in.problem, 30, noisy, {.run_seed = 3});
    EXPECT_TRUE(verify_trace(t, in.report, in.ctx).ok());
}

TEST(VerifyNsdpi, LongRunExercisesCorollaries) {
    const Instance in = make_instance(20, 3, 6, 0.9);
    const RunTrace t = run_nsdpi(in.problem, 150, noisy, {.run_seed = 3});
    const BoundReport r = verify_trace(t, in.report, in.ctx);
    EXPECT_TRUE(r.ok());
    EXPECT_FALSE(rows_named(r, "nsdpi_late_max").empty());
}

TEST(BoundCsv, FormatsInfinity) {
    BoundReport r;
    r.rows.push_back({"x", 2, 0.5, std::numeric_limits<double>::infinity(), BoundStatus::vacuous});
    r.rows.push_back({"y", 3, 0.5, 1.0, BoundStatus::pass});
    EXPECT_EQ(bound_report_csv(r), "bound_id,k,lhs,rhs,slack,status\nx,2,0.5,inf,inf,vacuous\ny,3,0.5,1,0.5,pass\n");
    const json s = bound_summary_json(r);
    EXPECT_EQ(s["counts"]["vacuous"], 1);
    EXPECT_TRUE(s["ok"].get<bool>());
}
