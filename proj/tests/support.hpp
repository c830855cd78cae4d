#pragma once

#include "predsub/graph.hpp"
#include "predsub/lowrank.hpp"
#include "predsub/spectral.hpp"
#include "predsub/types.hpp"

#include <Eigen/Dense>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

namespace predsub::testing_support {

inline MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                              double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = u(rng);
        }
    }
    return m;
}

inline MatrixXd random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
    const MatrixXd a = random_matrix(n, n, rng);
    return (a + a.transpose()) / 2.0;
}

inline MatrixXd random_orthogonal(Eigen::Index d, std::mt19937_64& rng) {
    Eigen::HouseholderQR<MatrixXd> qr(random_matrix(d, d, rng));
    return qr.householderQ() * MatrixXd::Identity(d, d);
}

inline LowRankP random_lowrank(Index n, Index r, Index p, std::mt19937_64& rng, double scale = 1.0) {
    return LowRankP(scale * random_matrix(n, r, rng), p);
}

// Dense signed rank-d truncation: keep the d eigenpairs largest in modulus.
inline MatrixXd dense_truncation(const MatrixXd& a, Index d) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
    std::vector<Index> idx(static_cast<std::size_t>(a.rows()));
    for (Index i = 0; i < a.rows(); ++i) {
        idx[i] = i;
    }
    std::sort(idx.begin(), idx.end(), [&](Index x, Index y) {
        return std::abs(es.eigenvalues()[x]) > std::abs(es.eigenvalues()[y]);
    });
    MatrixXd out = MatrixXd::Zero(a.rows(), a.cols());
    for (Index k = 0; k < d; ++k) {
        const auto v = es.eigenvectors().col(idx[k]);
        out += es.eigenvalues()[idx[k]] * v * v.transpose();
    }
    return out;
}

inline double max_row_norm(const MatrixXd& m) {
    return m.rows() == 0 ? 0.0 : m.rowwise().norm().maxCoeff();
}

inline std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "predsub_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

}  // namespace predsub::testing_support
