#pragma once

#include "predsub/error.hpp"
#include "predsub/graph.hpp"
#include "predsub/rng.hpp"
#include "predsub/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace predsub {

/// Eigenpairs of a symmetric operator. Columns of `vectors` are orthonormal
/// and match `values` position by position.
template <typename Scalar>
struct SpectralPair {
    Vector<Scalar> values;
    Matrix<Scalar> vectors;

    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(values.size()); }
};

/// Latent positions X = U |D|^{1/2}. The first `p` columns come from
/// positive eigenvalues, the remaining q = d - p from negative ones; within
/// each block columns are ordered by decreasing |eigenvalue|.
template <typename Scalar>
struct BasicEmbedding {
    Matrix<Scalar> X;
    /// Signed eigenvalue behind each column.
    Vector<Scalar> values;
    Index p = 0;

    [[nodiscard]] Index n() const noexcept { return static_cast<Index>(X.rows()); }
    [[nodiscard]] Index d() const noexcept { return static_cast<Index>(X.cols()); }
    [[nodiscard]] Index q() const noexcept { return d() - p; }

    /// Diagonal of I_{p,q}.
    [[nodiscard]] Vector<Scalar> signature() const {
        Vector<Scalar> s(d());
        s.head(p).setOnes();
        s.tail(q()).setConstant(Scalar(-1));
        return s;
    }
};

using Embedding = BasicEmbedding<double>;

struct EigOptions {
    /// Residual bound relative to the largest returned |eigenvalue|.
    double tol = 1e-10;
    /// Restart cap; 0 means 50 * d.
    int max_restarts = 0;
    /// Sizes at or below this use a dense symmetric decomposition.
    Index dense_cutoff = 512;
    /// Krylov basis size; 0 picks max(2d + 20, 3d).
    Index krylov_dim = 0;
};

/// Relative threshold below which an eigenvalue counts as zero.
inline constexpr double kZeroTol = 1e-10;

/// Anything that can multiply a block of vectors and, for small sizes,
/// materialize itself.
template <typename Op>
concept SymmetricOperator = requires(const Op& op, const Matrix<typename Op::Scalar>& block) {
    typename Op::Scalar;
    { op.size() } -> std::convertible_to<Eigen::Index>;
    { op.apply(block) } -> std::convertible_to<Matrix<typename Op::Scalar>>;
    { op.to_dense() } -> std::convertible_to<Matrix<typename Op::Scalar>>;
};

template <typename ScalarT>
class DenseOperator {
public:
    using Scalar = ScalarT;

    explicit DenseOperator(const Matrix<Scalar>& matrix) : matrix_(&matrix) {
        if (matrix.rows() != matrix.cols()) {
            throw InvalidArgument("DenseOperator: matrix must be square");
        }
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return matrix_->rows(); }
    [[nodiscard]] Matrix<Scalar> apply(const Matrix<Scalar>& block) const { return (*matrix_) * block; }
    [[nodiscard]] Matrix<Scalar> to_dense() const { return *matrix_; }

private:
    const Matrix<Scalar>* matrix_;
};

/// Adjacency matrix of a graph as an operator.
class AdjacencyOperator {
public:
    using Scalar = double;

    explicit AdjacencyOperator(const SparseGraph& graph) : graph_(&graph) {}

    [[nodiscard]] Eigen::Index size() const noexcept { return graph_->n(); }
    [[nodiscard]] MatrixXd apply(const MatrixXd& block) const { return graph_->adjacency().multiply(block); }
    [[nodiscard]] MatrixXd to_dense() const { return graph_->to_dense(); }

private:
    const SparseGraph* graph_;
};

namespace detail {

/// Indices of the `count` entries of `values` largest in modulus. Ties in
/// modulus prefer the positive sign, then the lower position.
template <typename Scalar>
std::vector<Index> largest_modulus(const Vector<Scalar>& values, Index count) {
    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const Scalar ma = std::abs(values[a]);
        const Scalar mb = std::abs(values[b]);
        if (ma != mb) {
            return ma > mb;
        }
        return values[a] > values[b];
    });
    order.resize(static_cast<std::size_t>(std::min<Index>(count, static_cast<Index>(order.size()))));
    return order;
}

/// Flips each column so its largest-magnitude entry (lowest index on ties) is positive.
template <typename Scalar>
void canonicalize_signs(Matrix<Scalar>& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index best = 0;
        Scalar best_abs = Scalar(-1);
        for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
            const Scalar a = std::abs(vectors(r, c));
            if (a > best_abs) {
                best_abs = a;
                best = r;
            }
        }
        if (vectors.rows() > 0 && vectors(best, c) < Scalar(0)) {
            vectors.col(c) = -vectors.col(c);
        }
    }
}

template <typename Scalar>
SpectralPair<Scalar> select_pairs(const Vector<Scalar>& values, const Matrix<Scalar>& vectors,
                                  const std::vector<Index>& picked) {
    SpectralPair<Scalar> out;
    out.values.resize(static_cast<Eigen::Index>(picked.size()));
    out.vectors.resize(vectors.rows(), static_cast<Eigen::Index>(picked.size()));
    for (std::size_t k = 0; k < picked.size(); ++k) {
        out.values[static_cast<Eigen::Index>(k)] = values[picked[k]];
        out.vectors.col(static_cast<Eigen::Index>(k)) = vectors.col(picked[k]);
    }
    canonicalize_signs(out.vectors);
    return out;
}

template <typename Scalar>
SpectralPair<Scalar> dense_top_modulus(const Matrix<Scalar>& matrix, Index d) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(matrix);
    if (solver.info() != Eigen::Success) {
        throw ConvergenceError("truncated_eigs: dense symmetric decomposition failed");
    }
    return select_pairs<Scalar>(solver.eigenvalues(), solver.eigenvectors(),
                                largest_modulus<Scalar>(solver.eigenvalues(), d));
}

/// Orthogonalizes `w` against the first `count` columns of `basis`, twice
/// (classical Gram-Schmidt with one reorthogonalization pass). Returns the
/// accumulated projection coefficients.
template <typename Scalar>
Vector<Scalar> orthogonalize(const Matrix<Scalar>& basis, Eigen::Index count, Vector<Scalar>& w) {
    Vector<Scalar> h = Vector<Scalar>::Zero(count);
    if (count == 0) {
        return h;
    }
    const auto used = basis.leftCols(count);
    for (int pass = 0; pass < 2; ++pass) {
        Vector<Scalar> c = used.transpose() * w;
        w.noalias() -= used * c;
        h += c;
    }
    return h;
}

template <typename Scalar>
Vector<Scalar> start_vector(Eigen::Index n, Seed salt) {
    Engine engine = make_engine(salt, {stream::kStart, static_cast<std::uint64_t>(n)});
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    Vector<Scalar> v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = static_cast<Scalar>(uniform(engine));
    }
    return v / v.norm();
}

}  // namespace detail

/// The d eigenpairs of a symmetric operator largest in modulus, ordered by
/// decreasing modulus (ties: positive first, then solver order). Each
/// eigenvector's largest-magnitude entry is positive.
///
/// Sizes up to `dense_cutoff` are decomposed densely. Larger operators use
/// a thick-restart Lanczos iteration with full reorthogonalization, stopping
/// once every wanted Ritz residual is at most tol * max|theta|.
template <SymmetricOperator Op>
SpectralPair<typename Op::Scalar> truncated_eigs(const Op& op, Index d, const EigOptions& options = {}) {
    using Scalar = typename Op::Scalar;
    const Eigen::Index n = op.size();
    if (d < 1 || d > n) {
        throw InvalidArgument("truncated_eigs: need 1 <= d <= n, got d=" + std::to_string(d) +
                              " n=" + std::to_string(n));
    }
    if (n <= options.dense_cutoff) {
        return detail::dense_top_modulus<Scalar>(op.to_dense(), d);
    }

    const Eigen::Index k = std::min<Eigen::Index>(
        n - 1, options.krylov_dim > 0 ? std::max<Eigen::Index>(options.krylov_dim, d + 2)
                                      : std::max<Eigen::Index>(2 * d + 20, 3 * d));
    const int max_restarts = options.max_restarts > 0 ? options.max_restarts : 50 * d;
    const Index keep = std::min<Index>(static_cast<Index>(k) - 1, d + static_cast<Index>((k - d) / 2));

    Matrix<Scalar> basis(n, k + 1);
    Matrix<Scalar> projected = Matrix<Scalar>::Zero(k, k);
    basis.col(0) = detail::start_vector<Scalar>(n, 0x9d2c5680u);
    Seed refill_salt = 1;
    Index locked = 0;
    Scalar scale = Scalar(0);

    for (int restart = 0; restart <= max_restarts; ++restart) {
        Scalar beta = Scalar(0);
        for (Eigen::Index j = locked; j < k; ++j) {
            Vector<Scalar> w = op.apply(basis.col(j));
            Vector<Scalar> h = detail::orthogonalize<Scalar>(basis, j + 1, w);
            projected.col(j).head(j + 1) = h;
            projected.row(j).head(j + 1) = h.transpose();
            scale = std::max(scale, h.cwiseAbs().maxCoeff());
            beta = w.norm();
            if (beta <= Scalar(1e-13) * std::max(scale, Scalar(1))) {
                // Invariant subspace found: continue from a fresh direction
                // with zero coupling.
                w = detail::start_vector<Scalar>(n, refill_salt++);
                detail::orthogonalize<Scalar>(basis, j + 1, w);
                basis.col(j + 1) = w / w.norm();
                beta = Scalar(0);
            } else {
                basis.col(j + 1) = w / beta;
            }
            if (j + 1 < k) {
                projected(j + 1, j) = beta;
                projected(j, j + 1) = beta;
            }
        }

        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> ritz(projected);
        const Vector<Scalar>& theta = ritz.eigenvalues();
        const Matrix<Scalar>& y = ritz.eigenvectors();
        const std::vector<Index> wanted = detail::largest_modulus<Scalar>(theta, d);
        const Scalar top = std::abs(theta[wanted.front()]);

        bool converged = true;
        for (Index idx : wanted) {
            if (std::abs(beta * y(k - 1, idx)) > static_cast<Scalar>(options.tol) * top) {
                converged = false;
                break;
            }
        }
        if (converged) {
            Matrix<Scalar> ritz_vectors = basis.leftCols(k) * y;
            // Re-pick against the full Ritz set so positions refer to `theta`.
            return detail::select_pairs<Scalar>(theta, ritz_vectors, wanted);
        }

        // Thick restart on the `keep` Ritz pairs largest in modulus.
        const std::vector<Index> kept = detail::largest_modulus<Scalar>(theta, keep);
        Matrix<Scalar> kept_y(k, keep);
        for (Index c = 0; c < keep; ++c) {
            kept_y.col(c) = y.col(kept[c]);
        }
        Matrix<Scalar> new_basis = basis.leftCols(k) * kept_y;
        const Vector<Scalar> residual = basis.col(k);
        basis.leftCols(keep) = new_basis;
        basis.col(keep) = residual;
        projected.setZero();
        for (Index c = 0; c < keep; ++c) {
            projected(c, c) = theta[kept[c]];
        }
        locked = keep;
    }
    throw ConvergenceError("truncated_eigs: no convergence within " + std::to_string(max_restarts) +
                           " restarts (n=" + std::to_string(n) + ", d=" + std::to_string(d) + ")");
}

/// Splits eigenpairs by sign: positives by decreasing value, then negatives
/// by decreasing modulus. Throws RankDeficient if any |value| is at or below
/// zero_tol * max|value|.
template <typename Scalar>
std::pair<Index, SpectralPair<Scalar>> split_signature(const SpectralPair<Scalar>& pairs,
                                                       double zero_tol = kZeroTol) {
    const Index d = pairs.size();
    const Scalar top = d > 0 ? pairs.values.cwiseAbs().maxCoeff() : Scalar(0);
    for (Index i = 0; i < d; ++i) {
        if (!(std::abs(pairs.values[i]) > static_cast<Scalar>(zero_tol) * top) || top == Scalar(0)) {
            throw RankDeficient("split_signature: eigenvalue " + std::to_string(static_cast<double>(pairs.values[i])) +
                                " is numerically zero (rank below " + std::to_string(d) + ")");
        }
    }
    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const Scalar va = pairs.values[a];
        const Scalar vb = pairs.values[b];
        if ((va > 0) != (vb > 0)) {
            return va > 0;
        }
        return std::abs(va) > std::abs(vb);
    });
    SpectralPair<Scalar> out;
    out.values.resize(d);
    out.vectors.resize(pairs.vectors.rows(), d);
    Index positives = 0;
    for (Index c = 0; c < d; ++c) {
        out.values[c] = pairs.values[order[c]];
        out.vectors.col(c) = pairs.vectors.col(order[c]);
        positives += out.values[c] > 0 ? 1 : 0;
    }
    return {positives, std::move(out)};
}

/// Embedding from already computed eigenpairs.
template <typename Scalar>
BasicEmbedding<Scalar> embedding_from_pairs(const SpectralPair<Scalar>& pairs, double zero_tol = kZeroTol) {
    auto [p, ordered] = split_signature(pairs, zero_tol);
    BasicEmbedding<Scalar> out;
    out.X = ordered.vectors * ordered.values.cwiseAbs().cwiseSqrt().asDiagonal();
    out.values = std::move(ordered.values);
    out.p = p;
    return out;
}

/// Adjacency spectral embedding with indefinite signature.
template <SymmetricOperator Op>
BasicEmbedding<typename Op::Scalar> ase(const Op& op, Index d, const EigOptions& options = {}) {
    return embedding_from_pairs(truncated_eigs(op, d, options));
}

inline Embedding ase(const SparseGraph& graph, Index d, const EigOptions& options = {}) {
    return ase(AdjacencyOperator(graph), d, options);
}

template <typename Scalar>
struct Alignment {
    Matrix<Scalar> W;
    Scalar residual;
};

/// Orthogonal Procrustes: the W in O(d) minimizing ||X_hat W - X_ref||_F.
template <typename Scalar>
Alignment<Scalar> align_orthogonal(const Matrix<Scalar>& x_hat, const Matrix<Scalar>& x_ref) {
    if (x_hat.rows() != x_ref.rows() || x_hat.cols() != x_ref.cols()) {
        throw InvalidArgument("align_orthogonal: shape mismatch");
    }
    Matrix<Scalar> cross = x_hat.transpose() * x_ref;
    Eigen::JacobiSVD<Matrix<Scalar>> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Alignment<Scalar> out;
    out.W = svd.matrixU() * svd.matrixV().transpose();
    out.residual = (x_hat * out.W - x_ref).norm();
    return out;
}

template <typename Scalar>
Alignment<Scalar> align_orthogonal(const BasicEmbedding<Scalar>& x_hat, const BasicEmbedding<Scalar>& x_ref) {
    return align_orthogonal<Scalar>(x_hat.X, x_ref.X);
}

/// Largest Euclidean row norm.
template <typename Derived>
typename Derived::Scalar two_to_infinity(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        return typename Derived::Scalar(0);
    }
    return m.rowwise().norm().maxCoeff();
}

}  // namespace predsub
