#include "predsub/error.hpp"
#include "predsub/lowrank.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <numeric>

using namespace predsub;
namespace ts = predsub::testing_support;

namespace {

double rel(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

std::vector<Index> iota_nodes(Index n) {
    std::vector<Index> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

}  // namespace

TEST(Entry, ZeroRowGivesZeroEntries) {
    MatrixXd x = MatrixXd::Ones(4, 2);
    x.row(2).setZero();
    const LowRankP P(x, 1);
    for (Index j = 0; j < 4; ++j) {
        EXPECT_EQ(entry(P, 2, j), 0.0);
    }
}

TEST(Entry, OnesFactor) {
    const LowRankP P(MatrixXd::Ones(2, 1), 1);
    for (Index i = 0; i < 2; ++i) {
        for (Index j = 0; j < 2; ++j) {
            EXPECT_EQ(entry(P, i, j), 1.0);
        }
    }
}

TEST(Entry, MatchesDenseAndIsSymmetric) {
    std::mt19937_64 rng(1);
    const auto P = ts::random_lowrank(100, 4, 2, rng);
    const MatrixXd D = P.dense();
    for (Index i = 0; i < 100; i += 3) {
        for (Index j = 0; j < 100; j += 7) {
            EXPECT_NEAR(entry(P, i, j), D(i, j), 1e-12);
            EXPECT_EQ(entry(P, i, j), entry(P, j, i));
        }
    }
    EXPECT_THROW(entry(P, 100, 0), InvalidArgument);
}

TEST(FrobDistance, Basics) {
    std::mt19937_64 rng(2);
    const auto P = ts::random_lowrank(30, 3, 1, rng);
    EXPECT_EQ(frob_distance(P, P), 0.0);
    const LowRankP ones(MatrixXd::Ones(2, 1), 1);
    const LowRankP zero(MatrixXd::Zero(2, 1), 1);
    EXPECT_NEAR(frob_distance(ones, zero), 2.0, 1e-14);
    EXPECT_THROW(frob_distance(P, ones), InvalidArgument);
}

TEST(FrobDistance, MatchesDense) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const auto a = ts::random_lowrank(300, 5, 3, rng);
        const auto b = ts::random_lowrank(300, 4, 1, rng);
        EXPECT_LE(rel(frob_distance(a, b), (a.dense() - b.dense()).norm()), 1e-10);
    }
}

TEST(FrobDistance, SymmetricAndTriangle) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        const Index n = 10 + static_cast<Index>(rng() % 190);
        const auto a = ts::random_lowrank(n, 2, 1, rng);
        const auto b = ts::random_lowrank(n, 3, 2, rng);
        const auto c = ts::random_lowrank(n, 2, 0, rng);
        EXPECT_NEAR(frob_distance(a, b), frob_distance(b, a), 1e-9);
        EXPECT_LE(frob_distance(a, c), frob_distance(a, b) + frob_distance(b, c) + 1e-9);
    }
}

TEST(TwoInfDistance, Basics) {
    std::mt19937_64 rng(5);
    const auto P = ts::random_lowrank(20, 2, 1, rng);
    EXPECT_EQ(two_inf_distance(P, P), 0.0);
}

TEST(TwoInfDistance, MatchesDenseRowNorms) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const auto a = ts::random_lowrank(200, 3, 2, rng);
        const auto b = ts::random_lowrank(200, 3, 1, rng);
        const double dense = ts::max_row_norm(a.dense() - b.dense());
        EXPECT_LE(rel(two_inf_distance(a, b), dense), 1e-10);
        EXPECT_LE(two_inf_distance(a, b), frob_distance(a, b) + 1e-12);
    }
}

TEST(TwoInfDistance, SingleChangedRowDominates) {
    std::mt19937_64 rng(7);
    const MatrixXd x = ts::random_matrix(50, 3, rng, 0.0, 0.3);
    MatrixXd y = x;
    y.row(17) += ts::random_matrix(1, 3, rng, 2.0, 3.0);
    const LowRankP a(x, 2);
    const LowRankP b(y, 2);
    const MatrixXd diff = a.dense() - b.dense();
    Eigen::Index arg = 0;
    diff.rowwise().norm().maxCoeff(&arg);
    EXPECT_EQ(arg, 17);
    EXPECT_NEAR(two_inf_distance(a, b), diff.row(17).norm(), 1e-10);
}

TEST(Norms, ZeroFactor) {
    const auto n = norms(LowRankP(MatrixXd::Zero(5, 2), 1));
    EXPECT_EQ(n.frobenius, 0.0);
    EXPECT_EQ(n.two_to_infinity, 0.0);
    EXPECT_EQ(n.factor_frobenius, 0.0);
    EXPECT_EQ(n.factor_two_to_infinity, 0.0);
}

TEST(Norms, IdentityFactor) {
    const auto n = norms(LowRankP(MatrixXd::Identity(2, 2), 2));
    EXPECT_NEAR(n.factor_frobenius, std::sqrt(2.0), 1e-15);
    EXPECT_EQ(n.factor_two_to_infinity, 1.0);
    EXPECT_NEAR(n.frobenius, std::sqrt(2.0), 1e-15);
    EXPECT_EQ(n.two_to_infinity, 1.0);
}

TEST(Norms, MatchesDense) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
        const auto P = ts::random_lowrank(150, 4, 2, rng);
        const MatrixXd D = P.dense();
        const auto n = norms(P);
        EXPECT_LE(rel(n.frobenius, D.norm()), 1e-10);
        EXPECT_LE(rel(n.two_to_infinity, ts::max_row_norm(D)), 1e-10);
        EXPECT_LE(rel(n.factor_frobenius, P.factor().norm()), 1e-12);
        EXPECT_LE(rel(n.factor_two_to_infinity, ts::max_row_norm(P.factor())), 1e-12);
    }
}

TEST(PooledAverage, IdempotentMean) {
    std::mt19937_64 rng(9);
    const auto P = ts::random_lowrank(60, 3, 2, rng);
    const auto pooled = pooled_average(P, P);
    EXPECT_EQ(pooled.rank(), 6);
    EXPECT_LE((pooled.dense() - P.dense()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PooledAverage, MatchesDenseMeanAndSignature) {
    std::mt19937_64 rng(10);
    const auto a = ts::random_lowrank(200, 3, 1, rng);
    const auto b = ts::random_lowrank(200, 4, 3, rng);
    const auto pooled = pooled_average(a, b);
    EXPECT_EQ(pooled.p(), 4);
    EXPECT_EQ(pooled.q(), 3);
    EXPECT_LE((pooled.dense() - (a.dense() + b.dense()) / 2.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PooledAverage, OrderIndependent) {
    std::mt19937_64 rng(11);
    const auto a = ts::random_lowrank(40, 2, 1, rng);
    const auto b = ts::random_lowrank(40, 2, 1, rng);
    EXPECT_EQ(pooled_average(a, b), pooled_average(b, a));
}

TEST(SampleBernoulliBlock, ClampedZeroGivesEmpty) {
    const LowRankP P(MatrixXd::Ones(30, 1), 0);  // every entry is -1
    const auto nodes = iota_nodes(30);
    EXPECT_EQ(sample_bernoulli_block(P, nodes, nodes, 1).nnz(), 0);
}

TEST(SampleBernoulliBlock, ClampedOneGivesFullHollowBlock) {
    const LowRankP P(MatrixXd::Constant(30, 1, 2.0), 1);  // every entry is 4
    const auto nodes = iota_nodes(30);
    const auto full = sample_bernoulli_block(P, nodes, nodes, 1);
    EXPECT_EQ(full.nnz(), 30 * 29);
    const std::vector<Index> rows{0, 1, 2};
    const std::vector<Index> cols{5, 6};
    EXPECT_EQ(sample_bernoulli_block(P, rows, cols, 1).nnz(), 6);
}

TEST(SampleBernoulliBlock, OverlapIsSymmetricHollow) {
    std::mt19937_64 rng(12);
    const LowRankP P(ts::random_matrix(80, 2, rng, 0.2, 0.6), 2);
    const auto S = uniform_subsample(80, 25, 3);
    const auto block = sample_bernoulli_block(P, S.order(), S.sample(), 9);
    ASSERT_EQ(block.rows(), 80);
    ASSERT_EQ(block.cols(), 25);
    const MatrixXd D = block.to_dense();
    const MatrixXd top = D.topRows(25);
    EXPECT_EQ(top, top.transpose());
    EXPECT_EQ(top.diagonal().sum(), 0.0);
    const auto whole = sample_bernoulli_block(P, iota_nodes(80), iota_nodes(80), 9).to_dense();
    EXPECT_EQ(whole, whole.transpose());
    EXPECT_EQ(whole.diagonal().sum(), 0.0);
}

TEST(SampleBernoulliBlock, MeanDensityWithinBinomialBand) {
    std::mt19937_64 rng(13);
    // Entries spread over negative, interior and above-one values.
    const MatrixXd x = ts::random_matrix(120, 2, rng, -0.3, 1.1);
    const LowRankP P(x, 1);
    const MatrixXd probs = P.dense().cwiseMax(0.0).cwiseMin(1.0);
    const std::vector<Index> rows = iota_nodes(120);
    const std::vector<Index> cols{3, 10, 50, 77, 99, 110};
    double mean = 0.0;
    double var = 0.0;
    for (Index i : rows) {
        for (Index j : cols) {
            if (i != j) {
                mean += probs(i, j);
                var += probs(i, j) * (1.0 - probs(i, j));
            }
        }
    }
    double total = 0.0;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
        const auto block = sample_bernoulli_block(P, rows, cols, Seed(s));
        total += static_cast<double>(block.nnz());
        const MatrixXd D = block.to_dense();
        for (Index i : rows) {
            for (Index b = 0; b < static_cast<Index>(cols.size()); ++b) {
                const double p = i == cols[b] ? 0.0 : probs(i, cols[b]);
                if (p == 0.0) {
                    EXPECT_EQ(D(i, b), 0.0);
                }
                if (p == 1.0) {
                    EXPECT_EQ(D(i, b), 1.0);
                }
            }
        }
    }
    // Symmetric pairs inside the overlap are drawn once, which inflates the
    // variance of the count by at most a factor of two.
    EXPECT_LE(std::abs(total / seeds - mean), 4.0 * std::sqrt(2.0 * var / seeds));
}

TEST(SampleBernoulliBlock, NegativeBlockRaisesProbability) {
    // Entries 0.01 - 0.25 s_i s_j: pairs of opposite sign have probability
    // 0.26 even though the positive part alone is 0.01.
    const Index n = 200;
    MatrixXd x(n, 2);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = 0.1;
        x(i, 1) = i % 2 == 0 ? 0.5 : -0.5;
    }
    const LowRankP P(x, 1);
    const auto nodes = iota_nodes(n);
    double hits = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        const MatrixXd D = sample_bernoulli_block(P, nodes, nodes, Seed(s)).to_dense();
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if ((i + j) % 2 == 0) {
                    EXPECT_EQ(D(i, j), 0.0);
                } else if (i < j) {
                    hits += D(i, j);
                }
            }
        }
    }
    const double pairs = seeds * (n / 2.0) * (n / 2.0);
    EXPECT_NEAR(hits / pairs, 0.26, 4.0 * std::sqrt(0.26 * 0.74 / pairs));
}

TEST(SampleBernoulliBlock, DeterministicAndThreadInvariant) {
    std::mt19937_64 rng(14);
    const LowRankP P(ts::random_matrix(500, 3, rng, 0.0, 0.3), 3);
    const auto nodes = iota_nodes(500);
    omp_set_num_threads(1);
    const auto one = sample_bernoulli_block(P, nodes, nodes, 5);
    omp_set_num_threads(3);
    const auto three = sample_bernoulli_block(P, nodes, nodes, 5);
    omp_set_num_threads(omp_get_num_procs());
    EXPECT_EQ(one, three);
    EXPECT_NE(one, sample_bernoulli_block(P, nodes, nodes, 6));
}

TEST(RelativeFrobError, ExactZeroAndDense) {
    const auto model = generate_mmsb(200, 3, 0.2, 0.5, 3);
    const auto emb = ase(model_operator(model), 3);
    EXPECT_LE(relative_frob_error(LowRankP(emb), model), 1e-8);
    EXPECT_EQ(relative_frob_error(LowRankP(MatrixXd::Zero(200, 3), 3), model), 1.0);
    std::mt19937_64 rng(15);
    const auto P = ts::random_lowrank(200, 3, 2, rng, 0.1);
    const MatrixXd truth = model.dense();
    EXPECT_LE(rel(relative_frob_error(P, model), (P.dense() - truth).norm() / truth.norm()), 1e-10);
    EXPECT_THROW(relative_frob_error(ts::random_lowrank(10, 3, 2, rng), model), InvalidArgument);
}
