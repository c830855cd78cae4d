#pragma once

#include "predsub/detail/bernoulli.hpp"
#include "predsub/error.hpp"
#include "predsub/graph.hpp"
#include "predsub/rng.hpp"
#include "predsub/spectral.hpp"
#include "predsub/types.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace predsub {

/// P = X I_{p,q} X^T held by its n x r factor; the first p columns carry +1.
template <typename Scalar>
class BasicLowRankP {
public:
    BasicLowRankP() = default;
    BasicLowRankP(Matrix<Scalar> factor, Index p) : factor_(std::move(factor)), p_(p) {
        if (p < 0 || p > factor_.cols()) {
            throw InvalidArgument("LowRankP: positive count outside [0, r]");
        }
    }
    explicit BasicLowRankP(const BasicEmbedding<Scalar>& embedding) : BasicLowRankP(embedding.X, embedding.p) {}

    [[nodiscard]] Index n() const noexcept { return static_cast<Index>(factor_.rows()); }
    [[nodiscard]] Index rank() const noexcept { return static_cast<Index>(factor_.cols()); }
    [[nodiscard]] Index p() const noexcept { return p_; }
    [[nodiscard]] Index q() const noexcept { return rank() - p_; }
    [[nodiscard]] const Matrix<Scalar>& factor() const noexcept { return factor_; }

    [[nodiscard]] Vector<Scalar> signature() const {
        Vector<Scalar> s(rank());
        s.head(p_).setOnes();
        s.tail(q()).setConstant(Scalar(-1));
        return s;
    }

    [[nodiscard]] Matrix<Scalar> dense() const {
        return factor_ * signature().asDiagonal() * factor_.transpose();
    }

    friend bool operator==(const BasicLowRankP& a, const BasicLowRankP& b) {
        return a.p_ == b.p_ && a.factor_.rows() == b.factor_.rows() && a.factor_.cols() == b.factor_.cols() &&
               a.factor_ == b.factor_;
    }

private:
    Matrix<Scalar> factor_;
    Index p_ = 0;
};

using LowRankP = BasicLowRankP<double>;

/// Symmetric operator Z M Z^T with a small symmetric middle matrix.
template <typename ScalarT>
class FactoredOperator {
public:
    using Scalar = ScalarT;

    FactoredOperator(Matrix<Scalar> z, Matrix<Scalar> middle) : z_(std::move(z)), middle_(std::move(middle)) {
        if (middle_.rows() != z_.cols() || middle_.cols() != z_.cols()) {
            throw InvalidArgument("FactoredOperator: middle matrix must be r x r");
        }
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return z_.rows(); }
    [[nodiscard]] Matrix<Scalar> apply(const Matrix<Scalar>& block) const {
        return z_ * (middle_ * (z_.transpose() * block));
    }
    [[nodiscard]] Matrix<Scalar> to_dense() const { return z_ * middle_ * z_.transpose(); }

    [[nodiscard]] const Matrix<Scalar>& z() const noexcept { return z_; }
    [[nodiscard]] const Matrix<Scalar>& middle() const noexcept { return middle_; }

private:
    Matrix<Scalar> z_;
    Matrix<Scalar> middle_;
};

namespace detail {

/// Z = Q R with Q having orthonormal columns; then Z M Z^T = Q (R M R^T) Q^T
/// and every norm of interest reduces to the small core R M R^T. All-zero
/// columns of Z are dropped first.
template <typename Scalar>
struct FactoredCore {
    Matrix<Scalar> q;
    Matrix<Scalar> core;
};

template <typename Scalar>
FactoredCore<Scalar> factored_core(const Matrix<Scalar>& z, const Matrix<Scalar>& middle) {
    std::vector<Eigen::Index> live;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        if (!z.col(c).isZero(0)) {
            live.push_back(c);
        }
    }
    const auto r = static_cast<Eigen::Index>(live.size());
    Matrix<Scalar> zl(z.rows(), r);
    Matrix<Scalar> ml(r, r);
    for (Eigen::Index a = 0; a < r; ++a) {
        zl.col(a) = z.col(live[a]);
        for (Eigen::Index b = 0; b < r; ++b) {
            ml(a, b) = middle(live[a], live[b]);
        }
    }
    FactoredCore<Scalar> out;
    if (r == 0) {
        out.q = Matrix<Scalar>::Zero(z.rows(), 0);
        out.core = Matrix<Scalar>::Zero(0, 0);
        return out;
    }
    Eigen::HouseholderQR<Matrix<Scalar>> qr(zl);
    const Eigen::Index t = std::min(zl.rows(), r);
    out.q = qr.householderQ() * Matrix<Scalar>::Identity(zl.rows(), t);
    const Matrix<Scalar> rr = qr.matrixQR().topRows(t).template triangularView<Eigen::Upper>();
    out.core = rr * ml * rr.transpose();
    return out;
}

template <typename Scalar>
Scalar factored_frobenius(const Matrix<Scalar>& z, const Matrix<Scalar>& middle) {
    return factored_core(z, middle).core.norm();
}

template <typename Scalar>
Vector<Scalar> factored_row_norms(const Matrix<Scalar>& z, const Matrix<Scalar>& middle) {
    const auto c = factored_core(z, middle);
    if (c.core.size() == 0) {
        return Vector<Scalar>::Zero(z.rows());
    }
    return (c.q * c.core).rowwise().norm();
}

template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> stacked_difference(const BasicLowRankP<Scalar>& a,
                                                             const BasicLowRankP<Scalar>& b) {
    const Index ra = a.rank();
    const Index rb = b.rank();
    Matrix<Scalar> z(a.n(), ra + rb);
    z << a.factor(), b.factor();
    Matrix<Scalar> middle = Matrix<Scalar>::Zero(ra + rb, ra + rb);
    middle.diagonal().head(ra) = a.signature();
    middle.diagonal().tail(rb) = -b.signature();
    return {std::move(z), std::move(middle)};
}

template <typename Scalar>
bool lexicographically_less(const BasicLowRankP<Scalar>& a, const BasicLowRankP<Scalar>& b) {
    if (a.rank() != b.rank()) {
        return a.rank() < b.rank();
    }
    if (a.p() != b.p()) {
        return a.p() < b.p();
    }
    const Scalar* pa = a.factor().data();
    const Scalar* pb = b.factor().data();
    return std::lexicographical_compare(pa, pa + a.factor().size(), pb, pb + b.factor().size());
}

/// Canonical argument order, so symmetric operations give bit-identical
/// results when their inputs are swapped.
template <typename Scalar>
std::pair<const BasicLowRankP<Scalar>*, const BasicLowRankP<Scalar>*> canonical_pair(
    const BasicLowRankP<Scalar>& a, const BasicLowRankP<Scalar>& b) {
    if (lexicographically_less(b, a)) {
        return {&b, &a};
    }
    return {&a, &b};
}

template <typename Scalar>
void check_same_n(const BasicLowRankP<Scalar>& a, const BasicLowRankP<Scalar>& b, const char* who) {
    if (a.n() != b.n()) {
        throw InvalidArgument(std::string(who) + ": size mismatch (" + std::to_string(a.n()) + " vs " +
                              std::to_string(b.n()) + ")");
    }
}

/// Columns of a sampling block with the box and radius that bound any
/// inner product against them.
template <typename Scalar>
struct ColumnGroup {
    std::vector<Index> members;
    RowVector<Scalar> hi;
    RowVector<Scalar> lo;
    Scalar max_norm = Scalar(0);
};

/// Splits the rows of x (one per column position) into coordinate-compact
/// groups by repeated median cuts along the widest coordinate, so that the
/// per-group bounds stay close to the true row maxima.
template <typename Scalar, typename Rows>
std::vector<ColumnGroup<Scalar>> column_groups(const Rows& x) {
    const auto count = static_cast<Index>(x.rows());
    const Index leaf = std::max<Index>(32, count / 8);
    std::vector<Index> order(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) {
        order[k] = k;
    }
    auto make_group = [&](auto first, auto last) {
        ColumnGroup<Scalar> g;
        g.members.assign(first, last);
        std::sort(g.members.begin(), g.members.end());
        g.hi = x.row(g.members.front());
        g.lo = g.hi;
        for (Index b : g.members) {
            g.hi = g.hi.cwiseMax(x.row(b));
            g.lo = g.lo.cwiseMin(x.row(b));
            g.max_norm = std::max(g.max_norm, x.row(b).norm());
        }
        return g;
    };
    std::vector<ColumnGroup<Scalar>> done;
    if (count == 0) {
        return done;
    }
    std::vector<std::pair<std::size_t, std::size_t>> pending{{0, order.size()}};
    while (!pending.empty()) {
        const auto [begin, end] = pending.back();
        pending.pop_back();
        const auto first = order.begin() + static_cast<std::ptrdiff_t>(begin);
        const auto last = order.begin() + static_cast<std::ptrdiff_t>(end);
        ColumnGroup<Scalar> g = make_group(first, last);
        Eigen::Index widest = 0;
        const Scalar width = (g.hi - g.lo).maxCoeff(&widest);
        if (static_cast<Index>(end - begin) <= leaf || !(width > Scalar(0))) {
            done.push_back(std::move(g));
            continue;
        }
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(first, order.begin() + static_cast<std::ptrdiff_t>(mid), last, [&](Index u, Index v) {
            const Scalar xu = x(u, widest);
            const Scalar xv = x(v, widest);
            return xu < xv || (xu == xv && u < v);
        });
        pending.emplace_back(mid, end);
        pending.emplace_back(begin, mid);
    }
    return done;
}

}  // namespace detail

/// Raw signed entry x_i I_{p,q} x_j^T.
template <typename Scalar>
Scalar entry(const BasicLowRankP<Scalar>& P, Index i, Index j) {
    if (i < 0 || j < 0 || i >= P.n() || j >= P.n()) {
        throw InvalidArgument("entry: index out of range");
    }
    const auto& x = P.factor();
    Scalar s = Scalar(0);
    for (Index c = 0; c < P.rank(); ++c) {
        const Scalar t = x(i, c) * x(j, c);
        s += c < P.p() ? t : -t;
    }
    return s;
}

/// ||P1 - P2||_F through the stacked factor; O(n r^2).
template <typename Scalar>
Scalar frob_distance(const BasicLowRankP<Scalar>& P1, const BasicLowRankP<Scalar>& P2) {
    detail::check_same_n(P1, P2, "frob_distance");
    if (P1 == P2) {
        return Scalar(0);
    }
    const auto [a, b] = detail::canonical_pair(P1, P2);
    const auto [z, middle] = detail::stacked_difference(*a, *b);
    return detail::factored_frobenius<Scalar>(z, middle);
}

/// max_i ||row_i(P1 - P2)||_2.
template <typename Scalar>
Scalar two_inf_distance(const BasicLowRankP<Scalar>& P1, const BasicLowRankP<Scalar>& P2) {
    detail::check_same_n(P1, P2, "two_inf_distance");
    if (P1 == P2 || P1.n() == 0) {
        return Scalar(0);
    }
    const auto [a, b] = detail::canonical_pair(P1, P2);
    const auto [z, middle] = detail::stacked_difference(*a, *b);
    return detail::factored_row_norms<Scalar>(z, middle).maxCoeff();
}

template <typename Scalar>
struct LowRankNorms {
    Scalar frobenius;
    Scalar two_to_infinity;
    Scalar factor_frobenius;
    Scalar factor_two_to_infinity;
};

template <typename Scalar>
LowRankNorms<Scalar> norms(const BasicLowRankP<Scalar>& P) {
    const Matrix<Scalar> middle = P.signature().asDiagonal();
    LowRankNorms<Scalar> out{};
    out.frobenius = detail::factored_frobenius<Scalar>(P.factor(), middle);
    out.two_to_infinity =
        P.n() > 0 ? detail::factored_row_norms<Scalar>(P.factor(), middle).maxCoeff() : Scalar(0);
    out.factor_frobenius = P.factor().norm();
    out.factor_two_to_infinity = two_to_infinity(P.factor());
    return out;
}

/// (P1 + P2) / 2 with rank r1 + r2: both factors scaled by 1/sqrt(2),
/// positive columns of both first.
template <typename Scalar>
BasicLowRankP<Scalar> pooled_average(const BasicLowRankP<Scalar>& P1, const BasicLowRankP<Scalar>& P2) {
    detail::check_same_n(P1, P2, "pooled_average");
    const auto [a, b] = detail::canonical_pair(P1, P2);
    const Scalar half = Scalar(1) / std::sqrt(Scalar(2));
    Matrix<Scalar> x(a->n(), a->rank() + b->rank());
    x << a->factor().leftCols(a->p()), b->factor().leftCols(b->p()), a->factor().rightCols(a->q()),
        b->factor().rightCols(b->q());
    x *= half;
    return BasicLowRankP<Scalar>(std::move(x), a->p() + b->p());
}

/// Bernoulli draws over the rows x cols grid of P (node indices), success
/// probability clamp(entry, 0, 1). Positions whose row and column nodes both
/// appear in both lists form a symmetric hollow block: each unordered pair is
/// drawn once and mirrored. The result is |rows| x |cols|, positions
/// following list order.
template <typename Scalar>
BinaryCsr sample_bernoulli_block(const BasicLowRankP<Scalar>& P, std::span<const Index> rows,
                                 std::span<const Index> cols, Seed seed) {
    using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Index n = P.n();
    const auto nr = static_cast<Index>(rows.size());
    const auto nc = static_cast<Index>(cols.size());
    std::vector<Index> row_pos(static_cast<std::size_t>(n), -1);
    std::vector<Index> col_pos(static_cast<std::size_t>(n), -1);
    for (Index a = 0; a < nr; ++a) {
        if (rows[a] < 0 || rows[a] >= n || row_pos[rows[a]] >= 0) {
            throw InvalidArgument("sample_bernoulli_block: row indices must be distinct and in range");
        }
        row_pos[rows[a]] = a;
    }
    for (Index b = 0; b < nc; ++b) {
        if (cols[b] < 0 || cols[b] >= n || col_pos[cols[b]] >= 0) {
            throw InvalidArgument("sample_bernoulli_block: column indices must be distinct and in range");
        }
        col_pos[cols[b]] = b;
    }

    const Index r = P.rank();
    RowMajor xr(nr, r);
    RowMajor xc(nc, r);
    const Vector<Scalar> sig = P.signature();
    for (Index a = 0; a < nr; ++a) {
        xr.row(a) = P.factor().row(rows[a]);
    }
    for (Index b = 0; b < nc; ++b) {
        xc.row(b) = P.factor().row(cols[b]).cwiseProduct(sig.transpose());
    }
    const std::vector<detail::ColumnGroup<Scalar>> groups = detail::column_groups<Scalar>(xc);

    std::vector<std::vector<Index>> direct(static_cast<std::size_t>(nr));
    std::vector<std::vector<Edge>> mirrored(static_cast<std::size_t>(nr));
    const Index chunks = (nr + detail::kRowsPerStream - 1) / detail::kRowsPerStream;
#pragma omp parallel for schedule(dynamic, 1)
    for (Index chunk = 0; chunk < chunks; ++chunk) {
        Engine engine = make_engine(seed, {static_cast<std::uint64_t>(chunk)});
        const Index stop = std::min(nr, (chunk + 1) * detail::kRowsPerStream);
        for (Index a = chunk * detail::kRowsPerStream; a < stop; ++a) {
            const Index i = rows[a];
            const bool row_in_cols = col_pos[i] >= 0;
            const Scalar* xa = xr.data() + static_cast<Eigen::Index>(a) * r;
            const Scalar xi_norm = xr.row(a).norm();
            for (const auto& group : groups) {
                Scalar coordinate = Scalar(0);
                for (Index c = 0; c < r; ++c) {
                    coordinate += std::max(xa[c] * group.hi[c], xa[c] * group.lo[c]);
                }
                const double bound =
                    std::clamp(static_cast<double>(std::min(xi_norm * group.max_norm, coordinate)), 0.0, 1.0);
                detail::for_each_bernoulli_hit(
                    engine, static_cast<Offset>(group.members.size()), bound, [&](Offset k) {
                const Index b = group.members[static_cast<std::size_t>(k)];
                const Index j = cols[b];
                const double u = detail::unit_uniform(engine);
                if (j == i) {
                    return;
                }
                const bool symmetric = row_in_cols && row_pos[j] >= 0;
                if (symmetric && j < i) {
                    return;  // drawn from the other side
                }
                const Scalar* xi = xr.data() + static_cast<Eigen::Index>(a) * r;
                const Scalar* xj = xc.data() + static_cast<Eigen::Index>(b) * r;
                Scalar dot = Scalar(0);
                for (Index c = 0; c < r; ++c) {
                    dot += xi[c] * xj[c];
                }
                const double prob = std::clamp(static_cast<double>(dot), 0.0, 1.0);
                if (u * bound < prob) {
                    direct[a].push_back(b);
                    if (symmetric) {
                        mirrored[a].emplace_back(row_pos[j], col_pos[i]);
                    }
                }
                    });
            }
        }
    }

    std::vector<std::vector<Index>> merged = std::move(direct);
    for (Index a = 0; a < nr; ++a) {
        for (const auto& [ra, cb] : mirrored[a]) {
            merged[ra].push_back(cb);
        }
    }
    std::vector<Offset> offsets(static_cast<std::size_t>(nr) + 1, 0);
    std::vector<Index> indices;
    for (Index a = 0; a < nr; ++a) {
        std::sort(merged[a].begin(), merged[a].end());
        indices.insert(indices.end(), merged[a].begin(), merged[a].end());
        offsets[a + 1] = static_cast<Offset>(indices.size());
    }
    return BinaryCsr(nr, nc, std::move(offsets), std::move(indices));
}

/// ||P_hat - P||_F / ||P||_F against the model's own factorization.
double relative_frob_error(const LowRankP& estimate, const ProbabilityModel& truth);

/// The model as Z M Z^T with Z = Pi and M = rho B.
FactoredOperator<double> model_operator(const ProbabilityModel& model);

}  // namespace predsub
