#pragma once

#include "predsub/graph.hpp"
#include "predsub/lowrank.hpp"
#include "predsub/spectral.hpp"
#include "predsub/types.hpp"

#include <chrono>

namespace predsub {

/// Wall-clock seconds per stage.
struct StageTimings {
    double sample = 0.0;
    double eig = 0.0;
    double out_of_sample = 0.0;
    double assemble = 0.0;

    [[nodiscard]] double total() const noexcept { return sample + eig + out_of_sample + assemble; }
};

struct PredSubResult {
    /// Latent positions for all n nodes in original node order.
    Embedding embedding;
    SubsampleIndex subsample;
    /// Out-of-sample nodes with no edge into S; their rows are zero.
    Index isolated_out_of_sample = 0;
    StageTimings timings;

    [[nodiscard]] Index p_hat() const noexcept { return embedding.p; }
    [[nodiscard]] Index q_hat() const noexcept { return embedding.q(); }
    [[nodiscard]] LowRankP estimate() const { return LowRankP(embedding); }
};

/// C = X_S (X_S^T X_S)^{-1} I_{p,q}. With X_S = U |D|^{1/2} the Gram is |D|,
/// so C = X_S diag(1 / lambda) and no solve is needed.
MatrixXd scaling_matrix(const Embedding& subgraph);

/// Rows cross * C; row i depends only on row i of `cross`.
MatrixXd out_of_sample_rows(const BinaryCsr& cross, const Embedding& subgraph);
MatrixXd out_of_sample_rows(const MatrixXd& cross, const Embedding& subgraph);

/// Subsample, embed A_S, extend to the remaining nodes, and return the
/// estimate in original node order.
PredSubResult predsub_estimate(const SparseGraph& graph, Index m, Index d, Seed seed,
                               const EigOptions& options = {});

/// Same with a caller-chosen subsample.
PredSubResult predsub_estimate(const SparseGraph& graph, const SubsampleIndex& subsample, Index d,
                               const EigOptions& options = {});

/// From pre-extracted blocks (bootstrap resamples only generate these).
PredSubResult predsub_estimate(const SubsampleBlocks& blocks, const SubsampleIndex& subsample, Index d,
                               const EigOptions& options = {});

/// Noise-free route: the true P in place of A, read through the model's
/// factorization so no n x n matrix is formed.
PredSubResult predsub_noiseless(const ProbabilityModel& model, const SubsampleIndex& subsample, Index d,
                                const EigOptions& options = {});

/// Dense symmetric input treated as the adjacency (diagnostic scale).
PredSubResult predsub_dense(const MatrixXd& matrix, const SubsampleIndex& subsample, Index d,
                            const EigOptions& options = {});

namespace detail {

class StageClock {
public:
    StageClock() : last_(std::chrono::steady_clock::now()) {}
    /// Seconds since construction or the previous lap.
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_;
};

}  // namespace detail

}  // namespace predsub
