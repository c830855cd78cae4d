#include "predsub/error.hpp"
#include "predsub/eval.hpp"
#include "predsub/lowrank.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace predsub;
namespace ts = predsub::testing_support;

TEST(Coherence, IdentityColumnsAreMaximal) {
    const MatrixXd U = MatrixXd::Identity(16, 3);
    EXPECT_DOUBLE_EQ(coherence(U), 4.0);
}

TEST(Coherence, ConstantColumnIsOne) {
    const MatrixXd U = MatrixXd::Constant(25, 1, 1.0 / 5.0);
    EXPECT_NEAR(coherence(U), 1.0, 1e-15);
}

TEST(Coherence, RejectsNonOrthonormal) {
    EXPECT_THROW(coherence(MatrixXd::Ones(5, 2)), InvalidArgument);
}

TEST(Coherence, BoundedAcrossModelSizes) {
    std::vector<double> values;
    for (Index n : {1000, 2000, 4000}) {
        values.push_back(coherence(model_spectrum(generate_mmsb(n, 3, 0.1, 0.5, 31)).vectors));
    }
    EXPECT_LT(*std::max_element(values.begin(), values.end()) / *std::min_element(values.begin(), values.end()),
              2.0);
}

TEST(ConditionNumber, Examples) {
    EXPECT_DOUBLE_EQ(condition_number(std::vector<double>{3.0, -2.0}), 1.5);
    EXPECT_DOUBLE_EQ(condition_number(std::vector<double>{-2.0, 2.0, 2.0}), 1.0);
    EXPECT_THROW(condition_number(std::vector<double>{1.0, 0.0}), InvalidArgument);
    EXPECT_THROW(condition_number(std::vector<double>{}), InvalidArgument);
}

TEST(ConditionNumber, StableAcrossModelSizes) {
    std::vector<double> values;
    for (Index n : {1000, 2000, 4000}) {
        values.push_back(condition_number(model_spectrum(generate_mmsb(n, 3, 0.1, 0.5, 31)).values));
    }
    EXPECT_LT(*std::max_element(values.begin(), values.end()) / *std::min_element(values.begin(), values.end()),
              1.5);
}

TEST(ModelSpectrum, MatchesDenseDecomposition) {
    const auto model = generate_mmsb(200, 3, 0.2, 0.5, 9);
    const auto spectrum = model_spectrum(model);
    const auto emb = model_embedding(model);
    EXPECT_LE((LowRankP(emb).dense() - model.dense()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((spectrum.vectors.transpose() * spectrum.vectors - MatrixXd::Identity(3, 3)).norm(), 1e-10);
}

TEST(InclusionSubsample, FullAndExpectedSize) {
    EXPECT_EQ(inclusion_subsample(10, 10, 1).size(), 10u);
    EXPECT_TRUE(inclusion_subsample(10, 0, 1).empty());
    double total = 0.0;
    for (Seed s = 0; s < 200; ++s) {
        total += static_cast<double>(inclusion_subsample(1000, 100, s).size());
    }
    // Binomial(1000, 0.1): mean 100, SD of the average over 200 draws ~0.67.
    EXPECT_NEAR(total / 200.0, 100.0, 4.0 * std::sqrt(90.0 / 200.0));
}

TEST(EigenScaling, FullInclusionGivesZero) {
    const auto model = generate_mmsb(500, 3, 0.1, 0.5, 2);
    const auto r = eigen_scaling_check(model, 500, 5, 3);
    EXPECT_LE(r.max(), 1e-10);
}

TEST(EigenScaling, SubsampleRankBound) {
    // Singular values of P_S past d vanish: checked densely on one subsample.
    const auto model = generate_mmsb(300, 3, 0.1, 0.5, 4);
    const auto S = inclusion_subsample(300, 100, 7);
    const MatrixXd P = model.restrict_to(S).dense();
    Eigen::JacobiSVD<MatrixXd> svd(P);
    for (Eigen::Index i = 3; i < svd.singularValues().size(); ++i) {
        EXPECT_LE(svd.singularValues()[i], 1e-10);
    }
}

TEST(EigenScaling, DeviationBoundHoldsAtModerateSize) {
    const Index n = 2000;
    const double eps = 0.3;
    const auto m = static_cast<Index>(std::ceil(4.0 * 2.0 * std::log(double(n)) / (eps * eps)));
    const auto r = eigen_scaling_check(generate_mmsb(n, 3, 0.1, 0.5, 5), m, 100, 6);
    EXPECT_GE(r.count_within(eps), 95);
    EXPECT_EQ(r.deviations.size(), 100u);
    EXPECT_EQ(r.sample_sizes.size(), 100u);
}

TEST(EigenScaling, DeterministicPerSeed) {
    const auto model = generate_mmsb(400, 2, 0.1, 0.5, 5);
    EXPECT_EQ(eigen_scaling_check(model, 80, 10, 1).deviations, eigen_scaling_check(model, 80, 10, 1).deviations);
}

TEST(SubsampleSize, Formula) {
    EXPECT_EQ(subsample_size(20000, 2.625), static_cast<Index>(std::ceil(std::pow(std::log(20000.0), 3.625))));
    EXPECT_EQ(subsample_size(100, 10.0), 100);
    EXPECT_THROW(subsample_size(100, -1.0), InvalidArgument);
}

TEST(LogLogSlope, ExactPowerLaw) {
    const std::vector<double> x{1.0, 2.0, 4.0, 8.0};
    std::vector<double> y;
    for (double v : x) {
        y.push_back(3.0 * std::pow(v, -0.5));
    }
    EXPECT_NEAR(log_log_slope(x, y), -0.5, 1e-12);
    EXPECT_THROW(log_log_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), InvalidArgument);
}

TEST(ErrorCurve, NoiselessErrorsVanish) {
    const auto model = generate_mmsb(400, 3, 0.2, 0.5, 8);
    ErrorCurveOptions options;
    options.noiseless = true;
    const std::vector<double> grid{0.5, 1.0, 1.5};
    const auto r = error_curve(model, 3, grid, 4, options);
    ASSERT_EQ(r.points.size(), 3u);
    for (const auto& p : r.points) {
        EXPECT_LE(p.mean_error, 1e-8);
        EXPECT_LE(p.mean_two_inf, 1e-8);
    }
    ASSERT_TRUE(r.baseline.has_value());
    EXPECT_LE(r.baseline->mean_error, 1e-8);
}

TEST(ErrorCurve, ErrorDecreasesInA) {
    const auto model = generate_mmsb(3000, 2, 0.1, 0.5, 3, 1);
    ErrorCurveOptions options;
    options.reps = 5;
    const std::vector<double> grid{1.5, 2.0, 2.5};
    const auto r = error_curve(model, 2, grid, 5, options);
    for (std::size_t k = 1; k < r.points.size(); ++k) {
        EXPECT_LE(r.points[k].mean_error, 1.05 * r.points[k - 1].mean_error);
        EXPECT_GT(r.points[k].m, r.points[k - 1].m);
    }
    EXPECT_EQ(r.points[0].errors.size(), 5u);
    EXPECT_TRUE(std::isnan(r.baseline->a));
}

TEST(ErrorCurve, RejectsEmptyGrid) {
    const auto model = generate_mmsb(100, 2, 0.2, 0.5, 3);
    EXPECT_THROW(error_curve(model, 2, std::vector<double>{}, 1), InvalidArgument);
}

TEST(SubgraphRate, NoiselessLimitAndSlopeSign) {
    MatrixXd pi = MatrixXd::Zero(4000, 2);
    for (Index i = 0; i < 4000; ++i) {
        pi(i, i % 2) = 1.0;
    }
    const ProbabilityModel model(pi, (MatrixXd(2, 2) << 1.0, 0.1, 0.1, 1.0).finished(), 0.2);
    const std::vector<Index> grid{200, 400, 800};
    const auto r = subgraph_rate(model, 2, grid, 3, 1);
    ASSERT_EQ(r.points.size(), 3u);
    EXPECT_LT(r.slope, 0.0);
    EXPECT_GT(r.points[0].mean_error, r.points[2].mean_error);
}

TEST(AssumptionReport, WellSpecifiedModelPasses) {
    const auto model = generate_mmsb(2000, 3, 0.1, 0.5, 3);
    AssumptionOptions options;
    options.a = 2.0;
    const auto m = subsample_size(2000, 2.0);
    const auto r = assumption_report(model, m, options);
    EXPECT_FALSE(r.any_violation());
    for (const char* key : {"rank", "kappa", "coherence", "entry_min_over_rho", "m_rho", "log_m", "implied_a"}) {
        EXPECT_TRUE(r.contains(key)) << key;
    }
    EXPECT_EQ(r.scalars.at("rank").value, 3.0);
}

TEST(AssumptionReport, SparseSubgraphFlagged) {
    const auto model = generate_mmsb(1000, 2, 1e-6, 0.5, 3);
    const auto r = assumption_report(model, 100);
    EXPECT_TRUE(r.flags.at("subgraph_degree").violated);
}

TEST(AssumptionReport, OverDeclaredRankFlagged) {
    const auto model = generate_mmsb(500, 2, 0.1, 0.5, 3);
    AssumptionOptions options;
    options.declared_d = 4;
    const auto r = assumption_report(model, 200, options);
    EXPECT_TRUE(r.flags.at("rank_matches_d").violated);
}

TEST(DiagnosticsReport, RejectsNonFiniteAndUnequalCurves) {
    DiagnosticsReport r;
    EXPECT_THROW(r.add("x", std::nan(""), "t"), InvalidArgument);
    EXPECT_THROW(r.add("c", Curve{{1.0, 2.0}, {1.0}}, "t"), InvalidArgument);
    r.add("ok", 1.0, "t");
    r.flag("f", false, "t");
    EXPECT_TRUE(r.contains("ok"));
    EXPECT_FALSE(r.any_violation());
}
