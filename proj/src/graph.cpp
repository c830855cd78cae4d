#include "predsub/graph.hpp"

#include "predsub/detail/bernoulli.hpp"
#include "predsub/error.hpp"
#include "predsub/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <ranges>
#include <string>

namespace predsub {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Symmetric hollow CSR from per-row lists of strictly-upper neighbors
// (each list ascending). Rows receive their lower neighbors first, in
// ascending order, then their own upper list, so every row stays sorted.
BinaryCsr symmetric_from_upper(Index n, const std::vector<std::vector<Index>>& upper) {
    std::vector<Offset> offsets(static_cast<std::size_t>(n) + 1, 0);
    for (Index i = 0; i < n; ++i) {
        offsets[i + 1] += static_cast<Offset>(upper[i].size());
        for (Index j : upper[i]) {
            offsets[j + 1] += 1;
        }
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<Index> indices(static_cast<std::size_t>(offsets.back()));
    std::vector<Offset> cursor(offsets.begin(), offsets.end() - 1);
    for (Index i = 0; i < n; ++i) {
        for (Index j : upper[i]) {
            indices[cursor[j]++] = i;
        }
        for (Index j : upper[i]) {
            indices[cursor[i]++] = j;
        }
    }
    return BinaryCsr(n, n, std::move(offsets), std::move(indices));
}

void check_model_dims(Index n, Index d, double rho) {
    if (d < 1 || n < d) {
        throw InvalidArgument("generate_mmsb: need n >= d >= 1, got n=" + std::to_string(n) +
                              " d=" + std::to_string(d));
    }
    if (!(rho > 0.0 && rho <= 1.0)) {
        throw InvalidArgument("generate_mmsb: rho must lie in (0, 1], got " + std::to_string(rho));
    }
}

// Transpose by counting sort and compare: O(nnz).
bool is_symmetric_hollow(const BinaryCsr& a) {
    const Index n = a.rows();
    std::vector<Offset> offsets(static_cast<std::size_t>(n) + 1, 0);
    for (Index j : a.indices()) {
        offsets[j + 1] += 1;
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    if (offsets != a.offsets()) {
        return false;
    }
    std::vector<Index> indices(a.indices().size());
    std::vector<Offset> cursor(offsets.begin(), offsets.end() - 1);
    for (Index i = 0; i < n; ++i) {
        for (Index j : a.row(i)) {
            if (j == i) {
                return false;
            }
            indices[cursor[j]++] = i;
        }
    }
    return indices == a.indices();
}

Index count_positive(const MatrixXd& mixing) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(mixing, Eigen::EigenvaluesOnly);
    return static_cast<Index>((solver.eigenvalues().array() > 0.0).count());
}

}  // namespace

// ---------------------------------------------------------------- BinaryCsr

BinaryCsr::BinaryCsr(Index rows, Index cols)
    : rows_(rows), cols_(cols), offsets_(static_cast<std::size_t>(rows) + 1, 0) {
    if (rows < 0 || cols < 0) {
        throw InvalidArgument("BinaryCsr: negative dimension");
    }
}

BinaryCsr::BinaryCsr(Index rows, Index cols, std::vector<Offset> offsets, std::vector<Index> indices)
    : rows_(rows), cols_(cols), offsets_(std::move(offsets)), indices_(std::move(indices)) {
    if (rows < 0 || cols < 0 || offsets_.size() != static_cast<std::size_t>(rows) + 1 ||
        offsets_.front() != 0 || offsets_.back() != static_cast<Offset>(indices_.size())) {
        throw InvalidArgument("BinaryCsr: inconsistent offsets");
    }
    for (Index i = 0; i < rows_; ++i) {
        if (offsets_[i + 1] < offsets_[i]) {
            throw InvalidArgument("BinaryCsr: offsets must be non-decreasing");
        }
        auto r = row(i);
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (r[k] < 0 || r[k] >= cols_ || (k > 0 && r[k] <= r[k - 1])) {
                throw InvalidArgument("BinaryCsr: row " + std::to_string(i) +
                                      " has unsorted, duplicate or out-of-range columns");
            }
        }
    }
}

BinaryCsr BinaryCsr::from_pairs(Index rows, Index cols, std::vector<Edge> pairs) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    std::vector<Offset> offsets(static_cast<std::size_t>(rows) + 1, 0);
    std::vector<Index> indices;
    indices.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        if (i < 0 || i >= rows || j < 0 || j >= cols) {
            throw InvalidArgument("BinaryCsr::from_pairs: index out of range");
        }
        offsets[i + 1] += 1;
        indices.push_back(j);
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return BinaryCsr(rows, cols, std::move(offsets), std::move(indices));
}

bool BinaryCsr::contains(Index i, Index j) const noexcept {
    if (i < 0 || i >= rows_) {
        return false;
    }
    auto r = row(i);
    return std::binary_search(r.begin(), r.end(), j);
}

MatrixXd BinaryCsr::multiply(const MatrixXd& dense) const {
    if (dense.rows() != cols_) {
        throw InvalidArgument("BinaryCsr::multiply: dimension mismatch");
    }
    const Eigen::Index k = dense.cols();
    if (k == 1) {
        const double* x = dense.data();
        MatrixXd out(rows_, 1);
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (Index j : row(i)) {
                s += x[j];
            }
            out(i, 0) = s;
        }
        return out;
    }
    // Row-major copy so each gathered row is contiguous.
    const RowMajorMatrix in = dense;
    RowMajorMatrix out = RowMajorMatrix::Zero(rows_, k);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows_; ++i) {
        double* acc = out.data() + static_cast<Eigen::Index>(i) * k;
        for (Index j : row(i)) {
            const double* src = in.data() + static_cast<Eigen::Index>(j) * k;
            for (Eigen::Index c = 0; c < k; ++c) {
                acc[c] += src[c];
            }
        }
    }
    return out;
}

MatrixXd BinaryCsr::to_dense() const {
    MatrixXd out = MatrixXd::Zero(rows_, cols_);
    for (Index i = 0; i < rows_; ++i) {
        for (Index j : row(i)) {
            out(i, j) = 1.0;
        }
    }
    return out;
}

// -------------------------------------------------------------- SparseGraph

SparseGraph::SparseGraph(Index n) : adjacency_(n, n) {}

SparseGraph SparseGraph::from_edges(Index n, std::span<const Edge> edges) {
    if (n < 0) {
        throw InvalidArgument("SparseGraph: negative node count");
    }
    std::vector<Edge> both;
    both.reserve(edges.size() * 2);
    for (const auto& [i, j] : edges) {
        if (i < 0 || j < 0 || i >= n || j >= n) {
            throw InvalidArgument("SparseGraph: edge (" + std::to_string(i) + ", " + std::to_string(j) +
                                  ") out of range for n=" + std::to_string(n));
        }
        if (i == j) {
            continue;
        }
        both.emplace_back(i, j);
        both.emplace_back(j, i);
    }
    SparseGraph g;
    g.adjacency_ = BinaryCsr::from_pairs(n, n, std::move(both));
    return g;
}

SparseGraph SparseGraph::from_symmetric_csr(BinaryCsr adjacency) {
    if (adjacency.rows() != adjacency.cols()) {
        throw InvalidArgument("SparseGraph: adjacency must be square");
    }
    if (!is_symmetric_hollow(adjacency)) {
        throw InvalidArgument("SparseGraph: adjacency must be symmetric and hollow");
    }
    SparseGraph g;
    g.adjacency_ = std::move(adjacency);
    return g;
}

std::vector<Edge> SparseGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(num_edges()));
    for (Index i = 0; i < n(); ++i) {
        for (Index j : neighbors(i)) {
            if (j > i) {
                out.emplace_back(i, j);
            }
        }
    }
    return out;
}

// --------------------------------------------------------- ProbabilityModel

ProbabilityModel::ProbabilityModel(MatrixXd memberships, MatrixXd mixing, double rho)
    : memberships_(std::move(memberships)), mixing_(std::move(mixing)), rho_(rho) {
    const Eigen::Index d = memberships_.cols();
    if (d < 1 || mixing_.rows() != d || mixing_.cols() != d) {
        throw InvalidArgument("ProbabilityModel: mixing matrix must be d x d with d >= 1");
    }
    if (!(rho_ >= 0.0 && rho_ <= 1.0)) {
        throw InvalidArgument("ProbabilityModel: rho must lie in [0, 1]");
    }
    if ((mixing_ - mixing_.transpose()).cwiseAbs().maxCoeff() > 1e-14) {
        throw InvalidArgument("ProbabilityModel: mixing matrix must be symmetric");
    }
    if ((memberships_.array() < 0.0).any()) {
        throw InvalidArgument("ProbabilityModel: memberships must be nonnegative");
    }
    for (Eigen::Index i = 0; i < memberships_.rows(); ++i) {
        if (std::abs(memberships_.row(i).sum() - 1.0) > 1e-12) {
            throw InvalidArgument("ProbabilityModel: membership row " + std::to_string(i) + " does not sum to 1");
        }
    }
    // Convex memberships keep every entry inside [rho min B, rho max B].
    if (mixing_.minCoeff() < 0.0 || rho_ * mixing_.maxCoeff() > 1.0 + 1e-12) {
        throw InvalidArgument("ProbabilityModel: entries must stay in [0, 1] (need B >= 0 and rho * max B <= 1)");
    }
}

double ProbabilityModel::entry(Index i, Index j) const {
    if (i < 0 || j < 0 || i >= n() || j >= n()) {
        throw InvalidArgument("ProbabilityModel::entry: index out of range");
    }
    return rho_ * memberships_.row(i).dot(mixing_ * memberships_.row(j).transpose());
}

double ProbabilityModel::entry_bound() const noexcept {
    return std::min(1.0, rho_ * mixing_.cwiseAbs().maxCoeff());
}

MatrixXd ProbabilityModel::dense() const {
    return rho_ * memberships_ * mixing_ * memberships_.transpose();
}

ProbabilityModel ProbabilityModel::restrict_to(std::span<const Index> nodes) const {
    MatrixXd rows(static_cast<Eigen::Index>(nodes.size()), d());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k] < 0 || nodes[k] >= n()) {
            throw InvalidArgument("ProbabilityModel::restrict_to: node out of range");
        }
        rows.row(static_cast<Eigen::Index>(k)) = memberships_.row(nodes[k]);
    }
    return ProbabilityModel(std::move(rows), mixing_, rho_);
}

// ----------------------------------------------------------- SubsampleIndex

SubsampleIndex::SubsampleIndex(Index n, std::vector<Index> sample) : n_(n), sample_(std::move(sample)) {
    if (n < 0) {
        throw InvalidArgument("SubsampleIndex: negative n");
    }
    std::sort(sample_.begin(), sample_.end());
    if (std::adjacent_find(sample_.begin(), sample_.end()) != sample_.end()) {
        throw InvalidArgument("SubsampleIndex: duplicate node in subsample");
    }
    if (!sample_.empty() && (sample_.front() < 0 || sample_.back() >= n)) {
        throw InvalidArgument("SubsampleIndex: node out of range");
    }
    position_.assign(static_cast<std::size_t>(n), -1);
    order_.reserve(static_cast<std::size_t>(n));
    for (Index s : sample_) {
        position_[s] = static_cast<Index>(order_.size());
        order_.push_back(s);
    }
    complement_.reserve(static_cast<std::size_t>(n) - sample_.size());
    for (Index v = 0; v < n; ++v) {
        if (position_[v] < 0) {
            position_[v] = static_cast<Index>(order_.size());
            order_.push_back(v);
            complement_.push_back(v);
        }
    }
}

// --------------------------------------------------------------- operations

ProbabilityModel generate_mmsb(Index n, Index d, double rho, double alpha, Seed seed,
                               std::optional<Index> positive_count) {
    check_model_dims(n, d, rho);
    if (!(alpha > 0.0)) {
        throw InvalidArgument("generate_mmsb: alpha must be positive");
    }
    if (positive_count && (*positive_count < 1 || *positive_count > d)) {
        // B always has a positive eigenvalue: its off-diagonal part is 0.5 J.
        throw InvalidArgument("generate_mmsb: positive eigenvalue count must lie in [1, d]");
    }
    Engine engine = make_engine(seed, {stream::kModel});
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    MatrixXd mixing = MatrixXd::Constant(d, d, 0.5);
    constexpr int kMaxAttempts = 100000;
    for (int attempt = 0;; ++attempt) {
        for (Index k = 0; k < d; ++k) {
            mixing(k, k) = uniform(engine);
        }
        if (!positive_count || count_positive(mixing) == *positive_count) {
            break;
        }
        if (attempt + 1 == kMaxAttempts) {
            throw InvalidArgument("generate_mmsb: could not reach the requested eigenvalue signature");
        }
    }

    std::gamma_distribution<double> gamma(alpha, 1.0);
    MatrixXd memberships(n, d);
    for (Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Index k = 0; k < d; ++k) {
            memberships(i, k) = gamma(engine);
            total += memberships(i, k);
        }
        if (total > 0.0) {
            memberships.row(i) /= total;
        } else {
            // All-zero gamma draws only happen for tiny alpha; fall back to a vertex.
            memberships.row(i).setZero();
            memberships(i, 0) = 1.0;
        }
    }
    return ProbabilityModel(std::move(memberships), std::move(mixing), rho);
}

ProbabilityModel perturbed_model(const ProbabilityModel& model, double epsilon) {
    if (!(epsilon >= 0.0)) {
        throw InvalidArgument("perturbed_model: epsilon must be nonnegative");
    }
    MatrixXd mixing = model.mixing().array() + epsilon;
    if (model.rho() * mixing.maxCoeff() > 1.0 + 1e-12) {
        throw InvalidArgument("perturbed_model: perturbation pushes entries above 1");
    }
    return ProbabilityModel(model.memberships(), std::move(mixing), model.rho());
}

SparseGraph sample_adjacency(const ProbabilityModel& model, Seed seed) {
    const Index n = model.n();
    const double bound = model.entry_bound();
    const RowMajorMatrix left = model.rho() * model.memberships() * model.mixing();
    const RowMajorMatrix right = model.memberships();

    std::vector<std::vector<Index>> upper(static_cast<std::size_t>(n));
    if (bound > 0.0) {
        const Index chunks = (n + detail::kRowsPerStream - 1) / detail::kRowsPerStream;
#pragma omp parallel for schedule(dynamic, 1)
        for (Index chunk = 0; chunk < chunks; ++chunk) {
            Engine engine = make_engine(seed, {stream::kAdjacency, static_cast<std::uint64_t>(chunk)});
            const Index stop = std::min(n, (chunk + 1) * detail::kRowsPerStream);
            for (Index i = chunk * detail::kRowsPerStream; i < stop; ++i) {
                auto& row = upper[i];
                const auto li = left.row(i);
                detail::for_each_bernoulli_hit(engine, static_cast<Offset>(n - 1 - i), bound, [&](Offset k) {
                    const Index j = i + 1 + static_cast<Index>(k);
                    const double p = std::clamp(li.dot(right.row(j)), 0.0, 1.0);
                    if (detail::unit_uniform(engine) * bound < p) {
                        row.push_back(j);
                    }
                });
            }
        }
    }
    return SparseGraph::from_symmetric_csr(symmetric_from_upper(n, upper));
}

DegreeFilterResult degree_filter(const SparseGraph& graph, Index min_degree) {
    if (min_degree < 0) {
        throw InvalidArgument("degree_filter: min_degree must be nonnegative");
    }
    std::vector<Index> keep;
    std::vector<Index> old_to_new(static_cast<std::size_t>(graph.n()), -1);
    for (Index v = 0; v < graph.n(); ++v) {
        if (graph.degree(v) >= min_degree) {
            old_to_new[v] = static_cast<Index>(keep.size());
            keep.push_back(v);
        }
    }
    return {induced_subgraph(graph, keep), std::move(old_to_new)};
}

SparseGraph induced_subgraph(const SparseGraph& graph, std::span<const Index> nodes) {
    const Index m = static_cast<Index>(nodes.size());
    std::vector<Index> label(static_cast<std::size_t>(graph.n()), -1);
    for (Index k = 0; k < m; ++k) {
        if (nodes[k] < 0 || nodes[k] >= graph.n() || label[nodes[k]] >= 0) {
            throw InvalidArgument("induced_subgraph: nodes must be distinct and in range");
        }
        label[nodes[k]] = k;
    }
    std::vector<Offset> offsets(static_cast<std::size_t>(m) + 1, 0);
    std::vector<Index> indices;
    for (Index k = 0; k < m; ++k) {
        const auto begin = indices.size();
        for (Index t : graph.neighbors(nodes[k])) {
            if (label[t] >= 0) {
                indices.push_back(label[t]);
            }
        }
        std::sort(indices.begin() + static_cast<std::ptrdiff_t>(begin), indices.end());
        offsets[k + 1] = static_cast<Offset>(indices.size());
    }
    return SparseGraph::from_symmetric_csr(BinaryCsr(m, m, std::move(offsets), std::move(indices)));
}

SubsampleIndex uniform_subsample(Index n, Index m, Seed seed) {
    if (m < 1 || m > n) {
        throw InvalidArgument("uniform_subsample: need 1 <= m <= n, got m=" + std::to_string(m) +
                              " n=" + std::to_string(n));
    }
    Engine engine = make_engine(seed, {stream::kSubsample});
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<Index> sample(static_cast<std::size_t>(m));
    std::ranges::sample(all, sample.begin(), m, engine);
    return SubsampleIndex(n, std::move(sample));
}

SubsampleBlocks extract_blocks(const SparseGraph& graph, const SubsampleIndex& subsample) {
    if (subsample.n() != graph.n()) {
        throw InvalidArgument("extract_blocks: subsample was drawn for a different node count");
    }
    const Index m = subsample.m();
    const Index rest = graph.n() - m;
    const auto sample = subsample.sample();

    // Both blocks are read off the rows of S only: O(sum of degrees over S).
    std::vector<Offset> within_offsets(static_cast<std::size_t>(m) + 1, 0);
    std::vector<Index> within_indices;
    std::vector<Offset> cross_offsets(static_cast<std::size_t>(rest) + 1, 0);
    for (Index a = 0; a < m; ++a) {
        for (Index t : graph.neighbors(sample[a])) {
            const Index pos = subsample.position(t);
            if (pos < m) {
                within_indices.push_back(pos);
            } else {
                cross_offsets[pos - m + 1] += 1;
            }
        }
        within_offsets[a + 1] = static_cast<Offset>(within_indices.size());
    }
    std::partial_sum(cross_offsets.begin(), cross_offsets.end(), cross_offsets.begin());
    std::vector<Index> cross_indices(static_cast<std::size_t>(cross_offsets.back()));
    std::vector<Offset> cursor(cross_offsets.begin(), cross_offsets.end() - 1);
    for (Index a = 0; a < m; ++a) {
        for (Index t : graph.neighbors(sample[a])) {
            const Index pos = subsample.position(t);
            if (pos >= m) {
                cross_indices[cursor[pos - m]++] = a;
            }
        }
    }
    return {SparseGraph::from_symmetric_csr(BinaryCsr(m, m, std::move(within_offsets), std::move(within_indices))),
            BinaryCsr(rest, m, std::move(cross_offsets), std::move(cross_indices))};
}

}  // namespace predsub
