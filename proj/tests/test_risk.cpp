#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/math.hpp"
#include "voltcraft/risk.hpp"

using namespace voltcraft;

namespace {

// Ten equally likely P&L outcomes, worst first.
const RiskSample kTen{{-5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, {}};

}  // namespace

TEST(ValueAtRisk, MatchesTheOrderStatisticOnUniformAtoms) {
    // Tail mass 20%: the 0.8-quantile of the loss sits at the second-worst
    // outcome, -2, so the reported risk is 2.
    EXPECT_DOUBLE_EQ(value_at_risk(kTen, 0.8), 2.0);
    // Exactly at an atom boundary the lower quantile rules: 10% tail mass is
    // covered by the single worst outcome.
    EXPECT_DOUBLE_EQ(value_at_risk(kTen, 0.9), 5.0);
    EXPECT_DOUBLE_EQ(value_at_risk(kTen, 0.95), 5.0);
    EXPECT_DOUBLE_EQ(value_at_risk(kTen, 0.05), -6.0);
}

TEST(ValueAtRisk, HonorsExplicitWeights) {
    const RiskSample s{{-10.0, 0.0, 5.0}, {0.05, 0.55, 0.4}};
    EXPECT_DOUBLE_EQ(value_at_risk(s, 0.95), 10.0);
    EXPECT_DOUBLE_EQ(value_at_risk(s, 0.9), -0.0);
    EXPECT_DOUBLE_EQ(value_at_risk(s, 0.3), -5.0);
}

TEST(ValueAtRisk, GaussianSampleMatchesTheNormalQuantile) {
    CounterRng rng(101, 0);
    std::vector<double> outcomes(1000000);
    for (auto& v : outcomes) v = rng.gaussian();
    const double var = value_at_risk(RiskSample{std::move(outcomes), {}}, 0.95);
    EXPECT_NEAR(var, 1.6448536269514722, 0.01);
}

TEST(ExpectedShortfall, AveragesTheTailBeyondTheQuantile) {
    // 20% tail of kTen holds -5 and -2 with equal weight: ES = 3.5.
    EXPECT_DOUBLE_EQ(expected_shortfall(kTen, 0.8), 3.5);
    // ES never sits below the quantile it averages past.
    for (double level : {0.5, 0.8, 0.9, 0.99}) {
        EXPECT_GE(expected_shortfall(kTen, level), value_at_risk(kTen, level) - 1e-12);
    }
}

TEST(ExpectedShortfall, SplitsAtomsProportionally) {
    // Tail mass 15% at level 0.85: all of the worst atom (10%) plus half of
    // the second (5% of 10%): (0.10 * 5 + 0.05 * 2) / 0.15 = 4.
    EXPECT_NEAR(expected_shortfall(kTen, 0.85), 4.0, 1e-12);
}

TEST(Entropic, KnownValuesAndLimits) {
    const RiskSample coin{{-1.0, 1.0}, {}};
    // (1/lambda) log E[e^{-lambda X}] at lambda = 1: log(cosh(1)).
    EXPECT_NEAR(entropic_risk(coin, 1.0), 0.4337808304830272, 1e-14);
    // Small lambda forgets the spread and reports the mean loss.
    EXPECT_NEAR(entropic_risk(kTen, 1e-9), -1.3, 1e-6);
    // Large lambda sees only the worst outcome, less a vanishing entropy fee.
    EXPECT_NEAR(entropic_risk(coin, 1e4), 1.0 - std::log(2.0) / 1e4, 1e-12);
    EXPECT_THROW(entropic_risk(coin, 0.0), InvalidInput);
    EXPECT_THROW(entropic_risk(coin, -1.0), InvalidInput);
}

TEST(Entropic, OverflowProofShifting) {
    const RiskSample wild{{-800.0, 700.0}, {0.5, 0.5}};
    const double v = entropic_risk(wild, 1.0);
    EXPECT_TRUE(std::isfinite(v));
    // Dominated by the -800 outcome at this risk aversion.
    EXPECT_NEAR(v, 800.0 + std::log(0.5), 1e-9);
}

TEST(CoherentRisk, PicksTheWorstMeasure) {
    const std::vector<double> outcomes = {-4.0, 1.0, 3.0};
    const std::vector<std::vector<double>> measures = {
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
        {0.8, 0.1, 0.1},
        {0.0, 0.0, 1.0},
    };
    const CoherentResult r = coherent_risk(outcomes, measures);
    EXPECT_EQ(r.witness_index, 1u);
    EXPECT_NEAR(r.value, 0.8 * 4.0 - 0.1 * 1.0 - 0.1 * 3.0, 1e-15);

    EXPECT_THROW(coherent_risk(outcomes, {}), InvalidInput);
    EXPECT_THROW(coherent_risk(outcomes, {{0.5, 0.5}}), InvalidInput);
    EXPECT_THROW(coherent_risk(outcomes, {{0.5, 0.4, 0.2}}), InvalidInput);
}

TEST(AxiomProbe, ExpectedShortfallIsCoherent) {
    const auto rho = [](const std::vector<double>& x) {
        return expected_shortfall(RiskSample{x, {}}, 0.9);
    };
    const AxiomReport report = check_axioms(rho, 1000);
    EXPECT_TRUE(report.monotone);
    EXPECT_TRUE(report.translation_invariant);
    EXPECT_TRUE(report.positively_homogeneous);
    EXPECT_TRUE(report.subadditive);
    EXPECT_TRUE(report.convex);
    EXPECT_TRUE(report.coherent());
    EXPECT_TRUE(report.witnesses.empty());
}

TEST(AxiomProbe, EntropicIsConvexButNotHomogeneous) {
    const auto rho = [](const std::vector<double>& x) {
        return entropic_risk(RiskSample{x, {}}, 1.0);
    };
    const AxiomReport report = check_axioms(rho, 500);
    EXPECT_TRUE(report.monotone);
    EXPECT_TRUE(report.translation_invariant);
    EXPECT_TRUE(report.convex);
    EXPECT_FALSE(report.positively_homogeneous);
    EXPECT_FALSE(report.coherent());
    // Every failed axiom carries a concrete witness.
    bool saw_homogeneity = false;
    for (const auto& w : report.witnesses) {
        if (w.axiom == "homogeneity") {
            saw_homogeneity = true;
            EXPECT_NE(w.lhs, w.rhs);
            EXPECT_FALSE(w.x.empty());
        }
    }
    EXPECT_TRUE(saw_homogeneity);
}

TEST(AxiomProbe, QuantileRiskFailsSubadditivity) {
    const auto rho = [](const std::vector<double>& x) {
        return value_at_risk(RiskSample{x, {}}, 0.7);
    };
    const AxiomReport report = check_axioms(rho, 1000, 16, 11);
    EXPECT_TRUE(report.monotone);
    EXPECT_TRUE(report.translation_invariant);
    EXPECT_TRUE(report.positively_homogeneous);
    EXPECT_FALSE(report.subadditive);
}

TEST(AxiomProbe, ValidatesItsArguments) {
    const auto rho = [](const std::vector<double>& x) {
        return expected_shortfall(RiskSample{x, {}}, 0.9);
    };
    EXPECT_THROW(check_axioms(rho, 0), InvalidInput);
    EXPECT_THROW(check_axioms(rho, 10, 1), InvalidInput);
}

TEST(SubadditivityWitness, ExactEnumerationFindsTheFailure) {
    const SubadditivityViolation v = var_subadditivity_violation(0.95);
    EXPECT_TRUE(v.found);
    // Each leg alone: the 4% loss probability hides inside the 5% tail, so
    // the quantile reports the gain.
    EXPECT_DOUBLE_EQ(v.var_x, -1.0);
    EXPECT_DOUBLE_EQ(v.var_y, -1.0);
    // Together: losing on at least one leg has probability ~7.8% > 5%.
    EXPECT_DOUBLE_EQ(v.var_sum, 99.0);
    EXPECT_GT(v.var_sum, v.var_x + v.var_y);

    // With the loss made likelier than the tail, each leg already reports
    // the loss and the example collapses.
    const SubadditivityViolation none = var_subadditivity_violation(0.5, 0.5);
    EXPECT_FALSE(none.found);
    EXPECT_THROW(var_subadditivity_violation(0.95, 1.5), InvalidInput);
    EXPECT_THROW(var_subadditivity_violation(0.95, 0.04, -1.0), InvalidInput);
}

TEST(RiskSample, Validation) {
    EXPECT_THROW(value_at_risk(RiskSample{{}, {}}, 0.9), InvalidInput);
    EXPECT_THROW(value_at_risk(RiskSample{{1.0, std::nan("")}, {}}, 0.9), InvalidInput);
    EXPECT_THROW(value_at_risk(RiskSample{{1.0, 2.0}, {0.5}}, 0.9), InvalidInput);
    EXPECT_THROW(value_at_risk(RiskSample{{1.0, 2.0}, {0.7, 0.7}}, 0.9), InvalidInput);
    EXPECT_THROW(value_at_risk(RiskSample{{1.0, 2.0}, {-0.1, 1.1}}, 0.9), InvalidInput);
    EXPECT_THROW(value_at_risk(kTen, 0.0), InvalidInput);
    EXPECT_THROW(value_at_risk(kTen, 1.0), InvalidInput);
}
