#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "bqda/error.hpp"
#include "bqda/special.hpp"
#include "bqda/spd_matrix.hpp"

namespace bqda {

namespace detail {

inline void require_length(Eigen::Index got, Eigen::Index expected, const char* what) {
    if (got != expected) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                             ", got " + std::to_string(got));
    }
}

}  // namespace detail

// Multivariate normal N(mean, cov).
class GaussianParams {
public:
    GaussianParams(Eigen::VectorXd mean, SPDMatrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
        detail::require_length(mean_.size(), cov_.dim(), "Gaussian mean");
        if (!mean_.allFinite()) throw DataError("Gaussian mean has non-finite entries");
        log_normalizer_ = -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) +
                                  cov_.log_det());
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return mean_.size(); }
    [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
    [[nodiscard]] const SPDMatrix& cov() const noexcept { return cov_; }
    [[nodiscard]] double log_normalizer() const noexcept { return log_normalizer_; }

private:
    Eigen::VectorXd mean_;
    SPDMatrix cov_;
    double log_normalizer_;
};

// Multivariate Student-t T(loc, scale, dof).
class StudentTParams {
public:
    StudentTParams(Eigen::VectorXd loc, SPDMatrix scale, double dof)
        : loc_(std::move(loc)), scale_(std::move(scale)), dof_(dof) {
        detail::require_length(loc_.size(), scale_.dim(), "Student-t location");
        if (!(dof_ > 0.0) || !std::isfinite(dof_)) {
            throw DataError("Student-t degrees of freedom must be positive, got " + std::to_string(dof_));
        }
        if (!loc_.allFinite()) throw DataError("Student-t location has non-finite entries");
        const double p = static_cast<double>(dim());
        log_normalizer_ = log_gamma(0.5 * (dof_ + p)) - log_gamma(0.5 * dof_) -
                          0.5 * p * std::log(std::numbers::pi * dof_) - 0.5 * scale_.log_det();
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return loc_.size(); }
    [[nodiscard]] const Eigen::VectorXd& loc() const noexcept { return loc_; }
    [[nodiscard]] const SPDMatrix& scale() const noexcept { return scale_; }
    [[nodiscard]] double dof() const noexcept { return dof_; }
    [[nodiscard]] bool has_variance() const noexcept { return dof_ > 2.0; }
    [[nodiscard]] double log_normalizer() const noexcept { return log_normalizer_; }

private:
    Eigen::VectorXd loc_;
    SPDMatrix scale_;
    double dof_;
    double log_normalizer_;
};

inline double gaussian_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianParams& params) {
    detail::require_length(x.size(), params.dim(), "gaussian_logpdf input");
    return params.log_normalizer() - 0.5 * params.cov().quadratic_form(x - params.mean());
}

inline double student_t_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x, const StudentTParams& params) {
    detail::require_length(x.size(), params.dim(), "student_t_logpdf input");
    const double nu = params.dof();
    const double p = static_cast<double>(params.dim());
    const double q = params.scale().quadratic_form(x - params.loc());
    return params.log_normalizer() - 0.5 * (nu + p) * std::log1p(q / nu);
}

// Row-wise log densities for an n x p block of observations.
inline Eigen::VectorXd gaussian_logpdf_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                                            const GaussianParams& params) {
    detail::require_length(rows.cols(), params.dim(), "gaussian_logpdf input width");
    const Eigen::MatrixXd dev = rows.transpose().colwise() - params.mean();
    const Eigen::VectorXd q = params.cov().quadratic_forms(dev);
    return (params.log_normalizer() - 0.5 * q.array()).matrix();
}

inline Eigen::VectorXd student_t_logpdf_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                                             const StudentTParams& params) {
    detail::require_length(rows.cols(), params.dim(), "student_t_logpdf input width");
    const double nu = params.dof();
    const double p = static_cast<double>(params.dim());
    const Eigen::MatrixXd dev = rows.transpose().colwise() - params.loc();
    const Eigen::VectorXd q = params.scale().quadratic_forms(dev);
    return (params.log_normalizer() - 0.5 * (nu + p) * (q.array() / nu).log1p()).matrix();
}

}  // namespace bqda
