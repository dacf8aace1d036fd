#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "bqda/error.hpp"

namespace bqda {

struct PCAResult {
    Eigen::MatrixXd scores;      // n x m projections of the centered data
    Eigen::MatrixXd components;  // p x m unit loadings, one column per component
    Eigen::VectorXd explained;   // m variance fractions, descending
    Eigen::VectorXd mean;        // p column means used for centering

    // Project new rows onto the fitted components.
    [[nodiscard]] Eigen::MatrixXd transform(const Eigen::Ref<const Eigen::MatrixXd>& rows) const {
        if (rows.cols() != mean.size()) throw DimensionError("pca transform: band count mismatch");
        return (rows.rowwise() - mean.transpose()) * components;
    }
};

// Projection onto the top eigenvectors of the sample covariance. Each
// component's largest-magnitude loading is made positive.
inline PCAResult pca_project(const Eigen::Ref<const Eigen::MatrixXd>& rows, std::size_t num_components = 2) {
    const Eigen::Index n = rows.rows();
    const Eigen::Index p = rows.cols();
    if (n < 2) throw DataError("PCA needs at least 2 observations");
    if (num_components == 0 || static_cast<Eigen::Index>(num_components) > p) {
        throw DataError("PCA: num_components must lie in [1, " + std::to_string(p) + "]");
    }
    PCAResult out;
    out.mean = rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = rows.rowwise() - out.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const double total_variance = cov.trace();
    if (!(total_variance > 0.0)) throw DataError("PCA: data has zero variance");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DataError("PCA: eigen-decomposition failed");
    const Eigen::VectorXd& values = solver.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });

    const auto m = static_cast<Eigen::Index>(num_components);
    out.components.resize(p, m);
    out.explained.resize(m);
    for (Eigen::Index c = 0; c < m; ++c) {
        Eigen::VectorXd v = solver.eigenvectors().col(order[static_cast<std::size_t>(c)]);
        Eigen::Index top = 0;
        v.cwiseAbs().maxCoeff(&top);
        if (v(top) < 0.0) v = -v;
        out.components.col(c) = v;
        out.explained(c) = std::max(0.0, values(order[static_cast<std::size_t>(c)])) / total_variance;
    }
    out.scores = centered * out.components;
    return out;
}

}  // namespace bqda
