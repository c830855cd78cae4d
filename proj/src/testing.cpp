#include "predsub/testing.hpp"

#include "predsub/error.hpp"
#include "predsub/predsub.hpp"
#include "predsub/rng.hpp"

#include <cmath>
#include <exception>
#include <numeric>

namespace predsub {

namespace {

std::optional<double> ratio(double t, double r, double scale) {
    if (t == 0.0) {
        return 0.0;
    }
    if (r == 0.0 || scale == 0.0) {
        return std::nullopt;
    }
    return t / (r * scale);
}

constexpr std::uint64_t kFirstSample = 1;
constexpr std::uint64_t kSecondSample = 2;

// Runs B replicates in parallel. `estimate(seed)` draws one bootstrap graph
// from the pooled estimate and re-embeds it.
template <typename Estimate>
std::vector<double> bootstrap_statistics(Index B, Seed seed, StatisticKind kind, const Estimate& estimate) {
    std::vector<double> boot(static_cast<std::size_t>(B), 0.0);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(B));
#pragma omp parallel for schedule(dynamic, 1)
    for (Index b = 0; b < B; ++b) {
        std::uint64_t j = kFirstSample;
        try {
            const LowRankP first = estimate(derive_seed(seed, {stream::kBootstrap, kFirstSample, std::uint64_t(b)}));
            j = kSecondSample;
            const LowRankP second = estimate(derive_seed(seed, {stream::kBootstrap, kSecondSample, std::uint64_t(b)}));
            boot[static_cast<std::size_t>(b)] = statistic(first, second, kind);
        } catch (const RankDeficient& e) {
            errors[static_cast<std::size_t>(b)] = std::make_exception_ptr(RankDeficient(
                "bootstrap replicate " + std::to_string(b) + ", sample " + std::to_string(j) + ": " + e.what()));
        } catch (const ConvergenceError& e) {
            errors[static_cast<std::size_t>(b)] = std::make_exception_ptr(ConvergenceError(
                "bootstrap replicate " + std::to_string(b) + ", sample " + std::to_string(j) + ": " + e.what()));
        } catch (...) {
            errors[static_cast<std::size_t>(b)] = std::current_exception();
        }
    }
    for (const auto& error : errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }
    return boot;
}

void check_test_inputs(const SparseGraph& A1, const SparseGraph& A2, Index m, Index d, Index B) {
    if (A1.n() != A2.n()) {
        throw InvalidArgument("two-sample test: node counts differ (" + std::to_string(A1.n()) + " vs " +
                              std::to_string(A2.n()) + ")");
    }
    if (d < 1 || m < d || m > A1.n()) {
        throw InvalidArgument("two-sample test: need 1 <= d <= m <= n, got d=" + std::to_string(d) +
                              " m=" + std::to_string(m) + " n=" + std::to_string(A1.n()));
    }
    if (B < 1) {
        throw InvalidArgument("two-sample test: B must be at least 1");
    }
}

}  // namespace

StatisticKind parse_statistic(std::string_view name) {
    if (name == "frobenius" || name == "fro") {
        return StatisticKind::frobenius;
    }
    if (name == "two_to_infinity" || name == "2inf") {
        return StatisticKind::two_to_infinity;
    }
    throw InvalidArgument("unknown statistic '" + std::string(name) + "' (expected frobenius or two_to_infinity)");
}

std::string to_string(StatisticKind kind) {
    return kind == StatisticKind::frobenius ? "frobenius" : "two_to_infinity";
}

double bootstrap_pvalue(double T0, std::span<const double> boots) {
    if (boots.empty()) {
        throw InvalidArgument("bootstrap_pvalue: no bootstrap statistics");
    }
    const auto above = std::count_if(boots.begin(), boots.end(), [T0](double t) { return t > T0; });
    return static_cast<double>(above) / static_cast<double>(boots.size());
}

double statistic(const LowRankP& P1, const LowRankP& P2, StatisticKind kind) {
    return kind == StatisticKind::frobenius ? frob_distance(P1, P2) : two_inf_distance(P1, P2);
}

Normalizers theorem_normalizers(const LowRankP& P1, const LowRankP& P2, Index n, Index m) {
    if (P1.n() != P2.n()) {
        throw InvalidArgument("theorem_normalizers: estimates differ in size");
    }
    if (m < 1 || m > n || (P1.n() != n && P1.n() != m)) {
        throw InvalidArgument("theorem_normalizers: estimates must be n x n or m x m");
    }
    Normalizers out;
    out.n = n;
    out.m = m;
    const double x1_inf = two_to_infinity(P1.factor());
    const double x2_inf = two_to_infinity(P2.factor());
    if (P1.n() == n) {
        out.R_F = P1.factor().norm() + P2.factor().norm();
        out.R_2inf = x1_inf + x2_inf;
        const double nn = n;
        const double mm = m;
        out.frobenius_ratio = ratio(frob_distance(P1, P2), *out.R_F, std::sqrt(nn / mm));
        out.two_inf_ratio = ratio(two_inf_distance(P1, P2), *out.R_2inf, std::sqrt(nn * std::log(nn) / mm));
    }
    if (P1.n() == m) {
        out.R_S = x1_inf + x2_inf;
        out.subgraph_ratio = ratio(two_inf_distance(P1, P2), *out.R_S, std::sqrt(std::log(double(m))));
    }
    return out;
}

SubsampleBlocks bootstrap_blocks(const LowRankP& P, const SubsampleIndex& subsample, Seed seed) {
    if (P.n() != subsample.n()) {
        throw InvalidArgument("bootstrap_blocks: estimate and subsample disagree on n");
    }
    const Index m = subsample.m();
    // Rows in (S, S^c) order against S columns: the top m x m part is the
    // symmetric hollow block, the rest is the cross block.
    const BinaryCsr drawn = sample_bernoulli_block(P, subsample.order(), subsample.sample(), seed);
    const auto& offsets = drawn.offsets();
    const auto& indices = drawn.indices();
    const Offset split = offsets[static_cast<std::size_t>(m)];
    std::vector<Offset> within_offsets(offsets.begin(), offsets.begin() + m + 1);
    std::vector<Index> within_indices(indices.begin(), indices.begin() + split);
    std::vector<Offset> cross_offsets(offsets.begin() + m, offsets.end());
    for (auto& o : cross_offsets) {
        o -= split;
    }
    std::vector<Index> cross_indices(indices.begin() + split, indices.end());
    return {SparseGraph::from_symmetric_csr(BinaryCsr(m, m, std::move(within_offsets), std::move(within_indices))),
            BinaryCsr(subsample.n() - m, m, std::move(cross_offsets), std::move(cross_indices))};
}

SparseGraph bootstrap_graph(const LowRankP& P, Seed seed) {
    std::vector<Index> all(static_cast<std::size_t>(P.n()));
    std::iota(all.begin(), all.end(), Index{0});
    return SparseGraph::from_symmetric_csr(sample_bernoulli_block(P, all, all, seed));
}

TestReport predsub_test(const SparseGraph& A1, const SparseGraph& A2, Index m, Index d, Index B, Seed seed,
                        const TestOptions& options) {
    check_test_inputs(A1, A2, m, d, B);
    detail::StageClock clock;
    TestReport report;
    report.statistic = options.statistic;
    report.subsample = uniform_subsample(A1.n(), m, seed);
    const SubsampleIndex& S = report.subsample;

    const PredSubResult first = predsub_estimate(A1, S, d, options.eig);
    const PredSubResult second = A1 == A2 ? first : predsub_estimate(A2, S, d, options.eig);
    const LowRankP P1 = first.estimate();
    const LowRankP P2 = second.estimate();
    report.p_hat1 = first.p_hat();
    report.p_hat2 = second.p_hat();
    report.T0 = statistic(P1, P2, options.statistic);
    report.normalizers = theorem_normalizers(P1, P2, A1.n(), m);
    const LowRankP pooled = pooled_average(P1, P2);
    report.timings.estimate = clock.lap();

    report.boot = bootstrap_statistics(B, seed, options.statistic, [&](Seed s) {
        return predsub_estimate(bootstrap_blocks(pooled, S, s), S, d, options.eig).estimate();
    });
    report.p_value = bootstrap_pvalue(report.T0, report.boot);
    report.timings.bootstrap = clock.lap();
    return report;
}

TestReport puresub_test(const SparseGraph& A1, const SparseGraph& A2, Index m, Index d, Index B, Seed seed,
                        const TestOptions& options) {
    check_test_inputs(A1, A2, m, d, B);
    detail::StageClock clock;
    TestReport report;
    report.statistic = options.statistic;
    report.subsample = uniform_subsample(A1.n(), m, seed);
    const auto sample = report.subsample.sample();

    const Embedding first = ase(induced_subgraph(A1, sample), d, options.eig);
    const Embedding second = A1 == A2 ? first : ase(induced_subgraph(A2, sample), d, options.eig);
    const LowRankP P1(first);
    const LowRankP P2(second);
    report.p_hat1 = first.p;
    report.p_hat2 = second.p;
    report.T0 = statistic(P1, P2, options.statistic);
    report.normalizers = theorem_normalizers(P1, P2, A1.n(), m);
    const LowRankP pooled = pooled_average(P1, P2);
    report.timings.estimate = clock.lap();

    report.boot = bootstrap_statistics(B, seed, options.statistic, [&](Seed s) {
        return LowRankP(ase(bootstrap_graph(pooled, s), d, options.eig));
    });
    report.p_value = bootstrap_pvalue(report.T0, report.boot);
    report.timings.bootstrap = clock.lap();
    return report;
}

}  // namespace predsub
