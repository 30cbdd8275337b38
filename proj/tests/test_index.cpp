#include <cmath>

#include <gtest/gtest.h>

#include "mdri/index.hpp"

using namespace mdri;

namespace {
const SubIndices kReferenceA{0.127, 0.274, 0.056, 0.0, 0.0};
const SubIndices kReferenceB{0.743, 1.000, 0.667, 0.150, 0.600};
} // namespace

TEST(CoreIndex, GammaZeroIsArithmeticMean) {
    const SubIndices d{0.2, 0.5, 0.8, 0.0, 0.0};
    const auto c = core_index(d, 0.0);
    EXPECT_DOUBLE_EQ(c.linear_term, 0.5);
    EXPECT_DOUBLE_EQ(c.coupling_term, 0.0);
    EXPECT_DOUBLE_EQ(c.core, 0.5);
}

TEST(CoreIndex, GammaOneIsGeometricMean) {
    const SubIndices d{0.2, 0.5, 0.8, 0.0, 0.0};
    const auto c = core_index(d, 1.0);
    EXPECT_DOUBLE_EQ(c.linear_term, 0.0);
    EXPECT_NEAR(c.coupling_term, std::cbrt(0.08), 1e-15);
}

TEST(CoreIndex, ReferenceRowsScenarioA) {
    const auto c = core_index(kReferenceA, 0.381);
    EXPECT_NEAR(c.linear_term, 0.094, 0.0005);
    EXPECT_NEAR(c.coupling_term, 0.048, 0.0005);
    EXPECT_NEAR(c.core, 0.142, 0.0005);
}

TEST(CoreIndex, ReferenceRowsScenarioB) {
    const auto c = core_index(kReferenceB, 0.381);
    EXPECT_NEAR(c.linear_term, 0.497, 0.001);
    EXPECT_NEAR(c.coupling_term, 0.302, 0.001);
    EXPECT_NEAR(c.core, 0.799, 0.001);
}

TEST(CoreIndex, GammaOutsideUnitIsDomainError) {
    EXPECT_THROW(core_index(kReferenceA, -0.01), DomainError);
    EXPECT_THROW(core_index(kReferenceA, 1.01), DomainError);
    EXPECT_THROW(core_index({1.2, 0.0, 0.0, 0.0, 0.0}, 0.5), DomainError);
}

TEST(ExpectedLoss, Examples) {
    const auto e = expected_loss(0.0305, 190.0, 1115.0);
    EXPECT_NEAR(e.kappa, 5.868, 0.0005);
    EXPECT_NEAR(e.r_loss_expected, 0.179, 0.0005);
    const auto same = expected_loss(0.5, 200.0, 200.0);
    EXPECT_DOUBLE_EQ(same.kappa, 1.0);
    EXPECT_DOUBLE_EQ(same.r_loss_expected, 0.5);
    const auto lin = expected_loss(0.1, 100.0, 300.0);
    EXPECT_DOUBLE_EQ(lin.kappa, 3.0);
    EXPECT_NEAR(lin.r_loss_expected, 0.3, 1e-15);
}

TEST(ExpectedLoss, ZeroBaselineIsDegenerate) { EXPECT_THROW(expected_loss(0.1, 0.0, 100.0), DegenerateError); }

TEST(AmplificationRatio, Examples) {
    EXPECT_NEAR(amplification_ratio(1.0080, 0.179), 5.63, 0.005);
    EXPECT_DOUBLE_EQ(amplification_ratio(0.179, 0.179), 1.0);
    EXPECT_DOUBLE_EQ(amplification_ratio(0.358, 0.179), 2.0);
    EXPECT_THROW(amplification_ratio(1.0, 0.0), DegenerateError);
}

TEST(CalibrateGamma, PublishedPairWithRoundedLambda) {
    EXPECT_NEAR(calibrate_gamma(kReferenceA, kReferenceB, 5.63), 0.381, 0.002);
}

TEST(CalibrateGamma, PublishedPairWithFullPrecisionLambda) {
    const auto e = expected_loss(0.0305, 190.0, 1115.0);
    const double lambda = amplification_ratio(1.0080, e.r_loss_expected);
    EXPECT_NEAR(calibrate_gamma(kReferenceA, kReferenceB, lambda), 0.381, 0.002);
}

TEST(CalibrateGamma, IdenticalScenariosHaveNoUniqueSolution) {
    try {
        calibrate_gamma(kReferenceA, kReferenceA, 1.0);
        FAIL() << "expected CalibrationError";
    } catch (const CalibrationError &e) {
        EXPECT_EQ(e.reason(), CalibrationError::Reason::NoUniqueSolution);
        EXPECT_EQ(e.exit_code(), 3);
    }
}

TEST(CalibrateGamma, InfeasibleReportsRawValue) {
    // Lambda far above what any gamma can produce.
    try {
        calibrate_gamma(kReferenceA, kReferenceB, 50.0);
        FAIL() << "expected CalibrationError";
    } catch (const CalibrationError &e) {
        EXPECT_EQ(e.reason(), CalibrationError::Reason::Infeasible);
        const double a_a = endogenous_mean(kReferenceA), g_a = endogenous_geomean(kReferenceA);
        const double a_b = endogenous_mean(kReferenceB), g_b = endogenous_geomean(kReferenceB);
        EXPECT_NEAR(e.raw_gamma(), (50.0 * a_a - a_b) / (50.0 * (a_a - g_a) - (a_b - g_b)), 1e-12);
    }
}

TEST(CalibrateGamma, KnownGammaIsRecovered) {
    const SubIndices a{0.2, 0.3, 0.1, 0.0, 0.0};
    const SubIndices b{0.7, 0.9, 0.5, 0.0, 0.0};
    const double lambda = core_index(b, 0.25).core / core_index(a, 0.25).core;
    EXPECT_NEAR(calibrate_gamma(a, b, lambda), 0.25, 1e-9);
}

TEST(Mdri, Examples) {
    const auto a = mdri_index(0.142, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(a.exogenous_multiplier, 1.0);
    EXPECT_DOUBLE_EQ(a.mdri, 0.142);
    const auto b = mdri_index(0.799, 0.150, 0.600);
    EXPECT_NEAR(b.exogenous_multiplier, 1.84, 1e-12);
    EXPECT_NEAR(b.mdri, 1.470, 0.0005);
    EXPECT_DOUBLE_EQ(mdri_index(1.0, 0.0, 1.0).mdri, 2.0);
}

TEST(Mdri, Errors) {
    EXPECT_THROW(mdri_index(-0.1, 0.0, 0.0), DomainError);
    EXPECT_THROW(mdri_index(0.1, 1.1, 0.0), DomainError);
    EXPECT_THROW(mdri_index(0.1, 0.0, -0.1), DomainError);
}

TEST(CompareScenarios, PublishedFigures) {
    const ScenarioResult a{"A", 0.0305, 190.0, kReferenceA};
    const ScenarioResult b{"B", 1.0080, 1115.0, kReferenceB};
    const auto r = compare_scenarios(a, b);
    EXPECT_NEAR(r.calibration.kappa, 5.868, 0.001);
    EXPECT_NEAR(r.calibration.r_loss_expected, 0.179, 0.001);
    EXPECT_NEAR(r.calibration.lambda, 5.63, 0.01);
    EXPECT_NEAR(r.calibration.gamma, 0.381, 0.002);
    EXPECT_NEAR(r.baseline.mdri, 0.142, 0.002);
    EXPECT_NEAR(r.multi.mdri, 1.470, 0.002);
    EXPECT_NEAR(r.coupling_over_linear, 0.606, 0.01);
    EXPECT_NEAR(r.exogenous_amplification, 0.84, 0.01);
    EXPECT_NEAR(r.core_ratio, r.calibration.lambda, 1e-9);
    EXPECT_NEAR(r.coupling_share_of_core, r.multi.coupling_term / r.multi.core, 1e-15);
}

TEST(CompareScenarios, IdenticalScenariosAreDegenerate) {
    const ScenarioResult a{"A", 0.0305, 190.0, kReferenceA};
    EXPECT_THROW(compare_scenarios(a, a), CalibrationError);
}

TEST(CompareScenarios, ForcedGammaRoundTrip) {
    const SubIndices da{0.3, 0.4, 0.2, 0.0, 0.0};
    const SubIndices db{0.6, 0.9, 0.8, 0.1, 0.3};
    const double lambda = core_index(db, 0.5).core / core_index(da, 0.5).core;
    // pv ratio 2, so r_obs = lambda * 2 * r_a.
    const ScenarioResult a{"A", 0.1, 100.0, da};
    const ScenarioResult b{"B", lambda * 2.0 * 0.1, 200.0, db};
    const auto r = compare_scenarios(a, b);
    EXPECT_NEAR(r.calibration.gamma, 0.5, 1e-9);
    EXPECT_NEAR(r.core_ratio, r.calibration.lambda, 1e-9);
}

TEST(CompareScenarios, TableHasIndexRows) {
    const auto r = compare_scenarios({"A", 0.0305, 190.0, kReferenceA}, {"B", 1.0080, 1115.0, kReferenceB});
    const auto text = format_table(r);
    for (const char *row : {"Linear term", "Coupling term", "M (w/o exogenous factors)", "MDRI", "gamma = 0.38"}) {
        EXPECT_NE(text.find(row), std::string::npos) << row;
    }
}
