#pragma once

#include "predsub/graph.hpp"
#include "predsub/lowrank.hpp"
#include "predsub/spectral.hpp"
#include "predsub/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace predsub {

enum class StatisticKind { frobenius, two_to_infinity };

/// Accepts "frobenius"/"fro" and "two_to_infinity"/"2inf".
StatisticKind parse_statistic(std::string_view name);
std::string to_string(StatisticKind kind);

/// Normalizing quantities for the two-sample statistics. The unknown
/// universal constants are left out, so the ratios are diagnostics only.
struct Normalizers {
    Index n = 0;
    Index m = 0;
    /// ||X1||_F + ||X2||_F and ||X1||_{2->inf} + ||X2||_{2->inf} over all n rows.
    std::optional<double> R_F;
    std::optional<double> R_2inf;
    /// ||X1||_{2->inf} + ||X2||_{2->inf} for m x m subgraph estimates.
    std::optional<double> R_S;
    /// T_F / (R_F sqrt(n/m)).
    std::optional<double> frobenius_ratio;
    /// T_{2->inf} / (R_{2->inf} sqrt(n log n / m)).
    std::optional<double> two_inf_ratio;
    /// T^S_{2->inf} / (R_S sqrt(log m)).
    std::optional<double> subgraph_ratio;
};

/// Inputs of size n give the full-graph quantities; inputs of size m < n are
/// read as subgraph estimates and give R_S.
Normalizers theorem_normalizers(const LowRankP& P1, const LowRankP& P2, Index n, Index m);

struct TestTimings {
    double estimate = 0.0;
    double bootstrap = 0.0;
};

struct TestReport {
    StatisticKind statistic = StatisticKind::frobenius;
    double T0 = 0.0;
    std::vector<double> boot;
    double p_value = 1.0;
    Normalizers normalizers;
    SubsampleIndex subsample;
    Index p_hat1 = 0;
    Index p_hat2 = 0;
    TestTimings timings;

    [[nodiscard]] Index B() const noexcept { return static_cast<Index>(boot.size()); }
    [[nodiscard]] bool reject(double alpha = 0.05) const noexcept { return p_value <= alpha; }
};

/// Fraction of bootstrap statistics strictly above T0.
double bootstrap_pvalue(double T0, std::span<const double> boots);

double statistic(const LowRankP& P1, const LowRankP& P2, StatisticKind kind);

struct TestOptions {
    StatisticKind statistic = StatisticKind::frobenius;
    EigOptions eig;
};

/// Both graphs embedded by predictive subsampling on one shared S; the
/// bootstrap draws only the blocks that estimator reads.
TestReport predsub_test(const SparseGraph& A1, const SparseGraph& A2, Index m, Index d, Index B, Seed seed,
                        const TestOptions& options = {});

/// Everything on the m x m induced subgraphs.
TestReport puresub_test(const SparseGraph& A1, const SparseGraph& A2, Index m, Index d, Index B, Seed seed,
                        const TestOptions& options = {});

/// Bernoulli draw of the (S, S) and (S^c, S) blocks from an n x n estimate.
SubsampleBlocks bootstrap_blocks(const LowRankP& P, const SubsampleIndex& subsample, Seed seed);

/// Symmetric hollow Bernoulli graph from an estimate over all its nodes.
SparseGraph bootstrap_graph(const LowRankP& P, Seed seed);

}  // namespace predsub
