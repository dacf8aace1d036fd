#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "bqda/error.hpp"

namespace bqda {

// Symmetric positive-definite matrix with a cached lower Cholesky factor.
// Construction fails (NotPositiveDefinite) rather than regularising.
class SPDMatrix {
public:
    static constexpr double kSymmetryTolerance = 1e-12;
    // A pivot L_ii^2 at or below this fraction of A_ii is treated as singular.
    static constexpr double kRelativePivotTolerance =
        64.0 * std::numeric_limits<double>::epsilon();

    explicit SPDMatrix(Eigen::MatrixXd m) : matrix_(std::move(m)) {
        if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
            throw DimensionError("SPD matrix must be square and non-empty, got " +
                                 std::to_string(matrix_.rows()) + "x" +
                                 std::to_string(matrix_.cols()));
        }
        if (!matrix_.allFinite()) {
            throw NotPositiveDefinite("matrix has non-finite entries");
        }
        const double scale = matrix_.cwiseAbs().maxCoeff();
        const Eigen::Index p = matrix_.rows();
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                if (std::abs(matrix_(i, j) - matrix_(j, i)) > kSymmetryTolerance * scale) {
                    throw NotPositiveDefinite("matrix is not symmetric");
                }
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(matrix_);
        if (llt.info() != Eigen::Success) {
            throw NotPositiveDefinite("Cholesky factorization failed (matrix not positive definite)");
        }
        lower_ = llt.matrixL();
        log_det_ = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            const double pivot = lower_(i, i) * lower_(i, i);
            if (!(pivot > kRelativePivotTolerance * matrix_(i, i))) {
                throw NotPositiveDefinite("matrix is numerically singular (pivot " +
                                          std::to_string(i) + ")");
            }
            log_det_ += std::log(lower_(i, i));
        }
        log_det_ *= 2.0;
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return matrix_.rows(); }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    [[nodiscard]] const Eigen::MatrixXd& cholesky_lower() const noexcept { return lower_; }
    [[nodiscard]] double log_det() const noexcept { return log_det_; }

    // v^T A^{-1} v
    [[nodiscard]] double quadratic_form(const Eigen::Ref<const Eigen::VectorXd>& v) const {
        return lower_.triangularView<Eigen::Lower>().solve(v).squaredNorm();
    }

    // Column-wise quadratic forms for a p x n block of deviations.
    [[nodiscard]] Eigen::VectorXd quadratic_forms(const Eigen::Ref<const Eigen::MatrixXd>& deviations) const {
        const Eigen::MatrixXd z = lower_.triangularView<Eigen::Lower>().solve(deviations);
        return z.colwise().squaredNorm().transpose();
    }

    [[nodiscard]] SPDMatrix scaled(double factor) const {
        if (!(factor > 0.0) || !std::isfinite(factor)) {
            throw NotPositiveDefinite("scale factor must be positive and finite");
        }
        return SPDMatrix(factor * matrix_, std::sqrt(factor) * lower_,
                         log_det_ + static_cast<double>(dim()) * std::log(factor));
    }

private:
    SPDMatrix(Eigen::MatrixXd m, Eigen::MatrixXd lower, double log_det)
        : matrix_(std::move(m)), lower_(std::move(lower)), log_det_(log_det) {}

    Eigen::MatrixXd matrix_;
    Eigen::MatrixXd lower_;
    double log_det_ = 0.0;
};

}  // namespace bqda
