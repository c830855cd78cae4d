#pragma once

#include "predsub/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace predsub {

using Edge = std::pair<Index, Index>;

/// Binary sparse block in compressed-row layout. Column indices within a
/// row are strictly increasing.
class BinaryCsr {
public:
    BinaryCsr() = default;
    BinaryCsr(Index rows, Index cols);
    BinaryCsr(Index rows, Index cols, std::vector<Offset> offsets, std::vector<Index> indices);

    /// Builds from (row, col) pairs in any order; duplicates collapse.
    static BinaryCsr from_pairs(Index rows, Index cols, std::vector<Edge> pairs);

    [[nodiscard]] Index rows() const noexcept { return rows_; }
    [[nodiscard]] Index cols() const noexcept { return cols_; }
    [[nodiscard]] Offset nnz() const noexcept { return static_cast<Offset>(indices_.size()); }

    [[nodiscard]] std::span<const Index> row(Index i) const noexcept {
        return {indices_.data() + offsets_[i], indices_.data() + offsets_[i + 1]};
    }
    [[nodiscard]] Index row_size(Index i) const noexcept {
        return static_cast<Index>(offsets_[i + 1] - offsets_[i]);
    }
    [[nodiscard]] bool contains(Index i, Index j) const noexcept;

    [[nodiscard]] const std::vector<Offset>& offsets() const noexcept { return offsets_; }
    [[nodiscard]] const std::vector<Index>& indices() const noexcept { return indices_; }

    /// this * dense, row i of the result is the sum of the selected rows of
    /// `dense`. Rows are independent and computed in parallel.
    [[nodiscard]] MatrixXd multiply(const MatrixXd& dense) const;

    [[nodiscard]] MatrixXd to_dense() const;

    friend bool operator==(const BinaryCsr&, const BinaryCsr&) = default;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Offset> offsets_{0};
    std::vector<Index> indices_;
};

/// Undirected simple graph: symmetric, hollow, binary adjacency.
class SparseGraph {
public:
    SparseGraph() = default;
    explicit SparseGraph(Index n);

    /// Self-loops are dropped, duplicates and reversed pairs collapse.
    static SparseGraph from_edges(Index n, std::span<const Edge> edges);

    /// Takes ownership of a CSR that must already be symmetric and hollow.
    static SparseGraph from_symmetric_csr(BinaryCsr adjacency);

    [[nodiscard]] Index n() const noexcept { return adjacency_.rows(); }
    [[nodiscard]] Offset num_edges() const noexcept { return adjacency_.nnz() / 2; }
    [[nodiscard]] Index degree(Index i) const noexcept { return adjacency_.row_size(i); }
    [[nodiscard]] std::span<const Index> neighbors(Index i) const noexcept { return adjacency_.row(i); }
    [[nodiscard]] bool has_edge(Index i, Index j) const noexcept { return adjacency_.contains(i, j); }
    [[nodiscard]] const BinaryCsr& adjacency() const noexcept { return adjacency_; }

    /// Edge list with i < j, lexicographically sorted.
    [[nodiscard]] std::vector<Edge> edges() const;

    [[nodiscard]] MatrixXd to_dense() const { return adjacency_.to_dense(); }

    friend bool operator==(const SparseGraph&, const SparseGraph&) = default;

private:
    BinaryCsr adjacency_;
};

/// Mixed-membership factorization P = rho * Pi B Pi^T. Never densified
/// except on request.
class ProbabilityModel {
public:
    ProbabilityModel(MatrixXd memberships, MatrixXd mixing, double rho);

    [[nodiscard]] Index n() const noexcept { return static_cast<Index>(memberships_.rows()); }
    [[nodiscard]] Index d() const noexcept { return static_cast<Index>(memberships_.cols()); }
    [[nodiscard]] double rho() const noexcept { return rho_; }
    [[nodiscard]] const MatrixXd& memberships() const noexcept { return memberships_; }
    [[nodiscard]] const MatrixXd& mixing() const noexcept { return mixing_; }

    [[nodiscard]] double entry(Index i, Index j) const;

    /// Upper bound on every entry: rho * max|B|, since rows of Pi are convex weights.
    [[nodiscard]] double entry_bound() const noexcept;

    /// Full n x n matrix including the diagonal (diagnostic scale only).
    [[nodiscard]] MatrixXd dense() const;

    /// Model on the listed nodes, in the listed order.
    [[nodiscard]] ProbabilityModel restrict_to(std::span<const Index> nodes) const;

private:
    MatrixXd memberships_;
    MatrixXd mixing_;
    double rho_;
};

/// Fixed-size subsample S with the (S, S^c) ordering it induces.
class SubsampleIndex {
public:
    SubsampleIndex() = default;
    /// `sample` must hold distinct indices in [0, n); it is sorted here.
    SubsampleIndex(Index n, std::vector<Index> sample);

    [[nodiscard]] Index n() const noexcept { return n_; }
    [[nodiscard]] Index m() const noexcept { return static_cast<Index>(sample_.size()); }
    [[nodiscard]] std::span<const Index> sample() const noexcept { return sample_; }
    [[nodiscard]] std::span<const Index> complement() const noexcept { return complement_; }

    /// Stacked order (S then S^c): order()[k] is the original node at position k.
    [[nodiscard]] const std::vector<Index>& order() const noexcept { return order_; }
    /// Inverse of order().
    [[nodiscard]] Index position(Index node) const noexcept { return position_[node]; }
    [[nodiscard]] bool contains(Index node) const noexcept { return position_[node] < m(); }

    friend bool operator==(const SubsampleIndex& a, const SubsampleIndex& b) {
        return a.n_ == b.n_ && a.sample_ == b.sample_;
    }

private:
    Index n_ = 0;
    std::vector<Index> sample_;
    std::vector<Index> complement_;
    std::vector<Index> order_;
    std::vector<Index> position_;
};

/// Adjacency split along a subsample: the induced subgraph on S and the
/// (n - m) x m block of edges from S^c rows into S columns. Rows of `cross`
/// follow complement() order, columns follow sample() order.
struct SubsampleBlocks {
    SparseGraph within;
    BinaryCsr cross;
};

struct DegreeFilterResult {
    SparseGraph graph;
    /// old_to_new[i] is the new label of node i, or -1 if removed.
    std::vector<Index> old_to_new;
};

struct EdgeListOptions {
    bool one_based = false;
    /// Overrides both the header and max-index rule when set.
    std::optional<Index> n;
};

/// Membership draws: B has 0.5 off the diagonal and iid Uniform(0, 1) on it,
/// rows of Pi are iid Dirichlet(alpha). When `positive_count` is set the
/// diagonal of B is redrawn until B has exactly that many positive
/// eigenvalues.
ProbabilityModel generate_mmsb(Index n, Index d, double rho, double alpha, Seed seed,
                               std::optional<Index> positive_count = std::nullopt);

/// Replaces B by B + epsilon * J.
ProbabilityModel perturbed_model(const ProbabilityModel& model, double epsilon);

/// Independent Bernoulli(P_ij) for i < j, symmetrized. Rows use their own
/// RNG streams so the result does not depend on the worker count.
SparseGraph sample_adjacency(const ProbabilityModel& model, Seed seed);

SparseGraph load_edge_list(const std::string& path, const EdgeListOptions& options = {});
void save_edge_list(const SparseGraph& graph, const std::string& path);

/// Single pass: keeps nodes whose degree is at least `min_degree`.
DegreeFilterResult degree_filter(const SparseGraph& graph, Index min_degree);

/// Induced subgraph on `nodes` (distinct), relabeled by position in `nodes`.
SparseGraph induced_subgraph(const SparseGraph& graph, std::span<const Index> nodes);

/// m distinct nodes drawn uniformly without replacement.
SubsampleIndex uniform_subsample(Index n, Index m, Seed seed);

SubsampleBlocks extract_blocks(const SparseGraph& graph, const SubsampleIndex& subsample);

}  // namespace predsub
