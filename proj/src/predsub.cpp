#include "predsub/predsub.hpp"

#include "predsub/error.hpp"

#include <string>

namespace predsub {

namespace {

void check_sizes(const SubsampleIndex& subsample, Index d) {
    if (d < 1) {
        throw InvalidArgument("predsub: d must be at least 1");
    }
    if (subsample.m() < d) {
        throw InvalidArgument("predsub: subsample size m=" + std::to_string(subsample.m()) +
                              " is below d=" + std::to_string(d));
    }
}

// Steps shared by every input route: embed the within-S operator, extend
// through `extend(C)` (which returns the (n - m) x d out-of-sample rows in
// complement order), then scatter back to original node order.
// `isolated` counts out-of-sample nodes without edges into S.
template <SymmetricOperator Op, typename Extend, typename IsolatedCount>
PredSubResult run_pipeline(const Op& within, Extend&& extend, IsolatedCount&& isolated,
                           const SubsampleIndex& subsample, Index d, const EigOptions& options,
                           detail::StageClock& clock, StageTimings timings) {
    Embedding in_sample = ase(within, d, options);
    timings.eig = clock.lap();

    const MatrixXd outside = extend(scaling_matrix(in_sample));
    timings.out_of_sample = clock.lap();

    PredSubResult result;
    result.embedding.X.resize(subsample.n(), d);
    const auto sample = subsample.sample();
    const auto complement = subsample.complement();
    for (Index k = 0; k < subsample.m(); ++k) {
        result.embedding.X.row(sample[k]) = in_sample.X.row(k);
    }
    for (Index k = 0; k < static_cast<Index>(complement.size()); ++k) {
        result.embedding.X.row(complement[k]) = outside.row(k);
    }
    result.embedding.values = std::move(in_sample.values);
    result.embedding.p = in_sample.p;
    result.subsample = subsample;
    result.isolated_out_of_sample = isolated(outside);
    timings.assemble = clock.lap();
    result.timings = timings;
    return result;
}

template <typename Rows>
MatrixXd gather(const MatrixXd& source, const Rows& rows) {
    MatrixXd out(static_cast<Eigen::Index>(rows.size()), source.cols());
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        out.row(k) = source.row(rows[static_cast<std::size_t>(k)]);
    }
    return out;
}

}  // namespace

MatrixXd scaling_matrix(const Embedding& subgraph) {
    return subgraph.X * subgraph.values.cwiseInverse().asDiagonal();
}

MatrixXd out_of_sample_rows(const BinaryCsr& cross, const Embedding& subgraph) {
    if (cross.cols() != subgraph.n()) {
        throw InvalidArgument("out_of_sample_rows: cross block has " + std::to_string(cross.cols()) +
                              " columns, subsample has " + std::to_string(subgraph.n()) + " nodes");
    }
    return cross.multiply(scaling_matrix(subgraph));
}

MatrixXd out_of_sample_rows(const MatrixXd& cross, const Embedding& subgraph) {
    if (cross.cols() != subgraph.n()) {
        throw InvalidArgument("out_of_sample_rows: cross block has " + std::to_string(cross.cols()) +
                              " columns, subsample has " + std::to_string(subgraph.n()) + " nodes");
    }
    return cross * scaling_matrix(subgraph);
}

PredSubResult predsub_estimate(const SparseGraph& graph, Index m, Index d, Seed seed, const EigOptions& options) {
    if (m < 1 || m > graph.n()) {
        throw InvalidArgument("predsub_estimate: need 1 <= m <= n, got m=" + std::to_string(m) +
                              " n=" + std::to_string(graph.n()));
    }
    if (m < d) {
        throw InvalidArgument("predsub_estimate: m=" + std::to_string(m) + " is below d=" + std::to_string(d));
    }
    detail::StageClock clock;
    const SubsampleIndex subsample = uniform_subsample(graph.n(), m, seed);
    const double draw = clock.lap();
    PredSubResult result = predsub_estimate(graph, subsample, d, options);
    result.timings.sample += draw;
    return result;
}

PredSubResult predsub_estimate(const SparseGraph& graph, const SubsampleIndex& subsample, Index d,
                               const EigOptions& options) {
    if (subsample.n() != graph.n()) {
        throw InvalidArgument("predsub_estimate: subsample is over " + std::to_string(subsample.n()) +
                              " nodes, graph has " + std::to_string(graph.n()));
    }
    check_sizes(subsample, d);
    detail::StageClock clock;
    const SubsampleBlocks blocks = extract_blocks(graph, subsample);
    const double extract = clock.lap();
    PredSubResult result = predsub_estimate(blocks, subsample, d, options);
    result.timings.sample += extract;
    return result;
}

PredSubResult predsub_estimate(const SubsampleBlocks& blocks, const SubsampleIndex& subsample, Index d,
                               const EigOptions& options) {
    check_sizes(subsample, d);
    if (blocks.within.n() != subsample.m() || blocks.cross.cols() != subsample.m() ||
        blocks.cross.rows() != subsample.n() - subsample.m()) {
        throw InvalidArgument("predsub_estimate: block shapes do not match the subsample");
    }
    detail::StageClock clock;
    const auto& cross = blocks.cross;
    return run_pipeline(
        AdjacencyOperator(blocks.within), [&](const MatrixXd& c) { return cross.multiply(c); },
        [&](const MatrixXd&) {
            Index count = 0;
            for (Index i = 0; i < cross.rows(); ++i) {
                count += cross.row_size(i) == 0 ? 1 : 0;
            }
            return count;
        },
        subsample, d, options, clock, StageTimings{});
}

PredSubResult predsub_noiseless(const ProbabilityModel& model, const SubsampleIndex& subsample, Index d,
                                const EigOptions& options) {
    if (subsample.n() != model.n()) {
        throw InvalidArgument("predsub_noiseless: subsample size does not match the model");
    }
    check_sizes(subsample, d);
    detail::StageClock clock;
    const MatrixXd middle = model.rho() * model.mixing();
    const MatrixXd pi_s = gather(model.memberships(), subsample.sample());
    const MatrixXd pi_c = gather(model.memberships(), subsample.complement());
    StageTimings timings;
    timings.sample = clock.lap();
    const FactoredOperator<double> within(pi_s, middle);
    return run_pipeline(
        within, [&](const MatrixXd& c) -> MatrixXd { return pi_c * (middle * (pi_s.transpose() * c)); },
        [](const MatrixXd& outside) {
            return static_cast<Index>((outside.rowwise().squaredNorm().array() == 0.0).count());
        },
        subsample, d, options, clock, timings);
}

PredSubResult predsub_dense(const MatrixXd& matrix, const SubsampleIndex& subsample, Index d,
                            const EigOptions& options) {
    if (matrix.rows() != matrix.cols() || matrix.rows() != subsample.n()) {
        throw InvalidArgument("predsub_dense: matrix must be n x n for the subsample's n");
    }
    check_sizes(subsample, d);
    detail::StageClock clock;
    const auto sample = subsample.sample();
    const auto complement = subsample.complement();
    const MatrixXd within = matrix(std::vector<Index>(sample.begin(), sample.end()),
                                   std::vector<Index>(sample.begin(), sample.end()));
    const MatrixXd cross = matrix(std::vector<Index>(complement.begin(), complement.end()),
                                  std::vector<Index>(sample.begin(), sample.end()));
    StageTimings timings;
    timings.sample = clock.lap();
    return run_pipeline(
        DenseOperator<double>(within), [&](const MatrixXd& c) -> MatrixXd { return cross * c; },
        [&](const MatrixXd&) {
            Index count = 0;
            for (Eigen::Index i = 0; i < cross.rows(); ++i) {
                count += cross.row(i).isZero(0) ? 1 : 0;
            }
            return count;
        },
        subsample, d, options, clock, timings);
}

}  // namespace predsub
