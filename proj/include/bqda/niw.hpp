#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "bqda/distributions.hpp"
#include "bqda/error.hpp"
#include "bqda/spd_matrix.hpp"

namespace bqda {

// Count, mean and scatter matrix sum_i (x_i - mean)(x_i - mean)^T of a sample.
struct SufficientStats {
    std::size_t count = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd scatter;

    [[nodiscard]] Eigen::Index dim() const noexcept { return mean.size(); }

    // scatter / (N - 1); requires N >= 2.
    [[nodiscard]] Eigen::MatrixXd sample_covariance() const {
        if (count < 2) throw DataError("sample covariance needs at least 2 observations");
        return scatter / static_cast<double>(count - 1);
    }

    // Two-pass over the rows of an N x p block.
    static SufficientStats from_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) {
        SufficientStats s;
        s.count = static_cast<std::size_t>(rows.rows());
        if (s.count == 0) {
            s.mean = Eigen::VectorXd::Zero(rows.cols());
            s.scatter = Eigen::MatrixXd::Zero(rows.cols(), rows.cols());
            return s;
        }
        s.mean = rows.colwise().mean().transpose();
        const Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
        s.scatter = centered.transpose() * centered;
        // Force exact symmetry; the GEMM above does not guarantee it bitwise.
        s.scatter = 0.5 * (s.scatter + s.scatter.transpose()).eval();
        return s;
    }
};

// Normal-Inverse-Wishart NIW(mu0, lambda, Psi, nu):
//   mu | Sigma ~ N(mu0, Sigma / lambda),  Sigma ~ IW(Psi, nu).
// lambda == 0 is admitted as the flat-mean limit.
class NIWParams {
public:
    NIWParams(Eigen::VectorXd mu0, double lambda, SPDMatrix psi, double nu)
        : mu0_(std::move(mu0)), lambda_(lambda), psi_(std::move(psi)), nu_(nu) {
        detail::require_length(mu0_.size(), psi_.dim(), "NIW mu0");
        if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) {
            throw DataError("NIW lambda must be >= 0, got " + std::to_string(lambda_));
        }
        if (!(nu_ > static_cast<double>(dim()) - 1.0) || !std::isfinite(nu_)) {
            throw DataError("NIW nu must exceed p - 1, got " + std::to_string(nu_));
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return mu0_.size(); }
    [[nodiscard]] const Eigen::VectorXd& mu0() const noexcept { return mu0_; }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    [[nodiscard]] const SPDMatrix& psi() const noexcept { return psi_; }
    [[nodiscard]] double nu() const noexcept { return nu_; }

    // Degrees of freedom of the posterior predictive.
    [[nodiscard]] double predictive_dof() const noexcept {
        return nu_ - static_cast<double>(dim()) + 1.0;
    }

    // E[Sigma] = Psi / (nu - p - 1), defined for nu > p + 1.
    [[nodiscard]] Eigen::MatrixXd expected_covariance() const {
        const double denom = nu_ - static_cast<double>(dim()) - 1.0;
        if (!(denom > 0.0)) throw DataError("NIW expected covariance undefined for nu <= p + 1");
        return psi_.matrix() / denom;
    }

private:
    Eigen::VectorXd mu0_;
    double lambda_;
    SPDMatrix psi_;
    double nu_;
};

inline NIWParams niw_posterior(const SufficientStats& stats, const NIWParams& prior) {
    if (stats.count == 0) throw DataError("niw_posterior: empty data");
    detail::require_length(stats.dim(), prior.dim(), "niw_posterior data");
    const double n = static_cast<double>(stats.count);
    const double lambda_n = prior.lambda() + n;
    const double nu_n = prior.nu() + n;
    Eigen::MatrixXd psi_n = prior.psi().matrix() + stats.scatter;
    Eigen::VectorXd mu_n;
    if (prior.lambda() == 0.0) {
        mu_n = stats.mean;
    } else {
        mu_n = (prior.lambda() * prior.mu0() + n * stats.mean) / lambda_n;
        const Eigen::VectorXd dev = stats.mean - prior.mu0();
        psi_n += (prior.lambda() * n / lambda_n) * (dev * dev.transpose());
    }
    return NIWParams(std::move(mu_n), lambda_n, SPDMatrix(std::move(psi_n)), nu_n);
}

inline NIWParams niw_posterior(const Eigen::Ref<const Eigen::MatrixXd>& rows, const NIWParams& prior) {
    if (rows.rows() == 0) throw DataError("niw_posterior: empty data");
    detail::require_length(rows.cols(), prior.dim(), "niw_posterior data width");
    return niw_posterior(SufficientStats::from_rows(rows), prior);
}

// (lambda_N + 1) / (lambda_N (nu_N - p + 1))
inline double predictive_scale_factor(double lambda_n, double nu_n, Eigen::Index p) {
    return (lambda_n + 1.0) / (lambda_n * (nu_n - static_cast<double>(p) + 1.0));
}

// Marginal of a new observation under the NIW: a multivariate Student-t.
inline StudentTParams niw_posterior_predictive(const NIWParams& post) {
    const double dof = post.predictive_dof();
    if (!(dof > 0.0)) {
        throw DataError("posterior predictive needs nu_N - p + 1 > 0, got " + std::to_string(dof));
    }
    if (!(post.lambda() > 0.0)) {
        throw DataError("posterior predictive needs lambda_N > 0");
    }
    const double factor = predictive_scale_factor(post.lambda(), post.nu(), post.dim());
    return StudentTParams(post.mu0(), post.psi().scaled(factor), dof);
}

// Weakly informative data-dependent prior:
//   Psi = diag(S) / (N K^{2/p}), mu0 = mean, nu = p + 2, lambda = 0.
inline NIWParams default_prior(const SufficientStats& stats, std::size_t num_classes) {
    if (stats.count < 2) throw DataError("insufficient data for data-dependent prior");
    if (num_classes == 0) throw DataError("default_prior: number of classes must be positive");
    const Eigen::Index p = stats.dim();
    const Eigen::VectorXd diag = stats.scatter.diagonal();
    for (Eigen::Index b = 0; b < p; ++b) {
        if (!(diag(b) > 0.0)) {
            throw DataError("degenerate scatter (zero variance in band " + std::to_string(b) + ")");
        }
    }
    const double n = static_cast<double>(stats.count);
    const double shrink = n * std::pow(static_cast<double>(num_classes), 2.0 / static_cast<double>(p));
    Eigen::MatrixXd psi = (diag / shrink).asDiagonal();
    return NIWParams(stats.mean, 0.0, SPDMatrix(std::move(psi)), static_cast<double>(p) + 2.0);
}

inline NIWParams default_prior(const Eigen::Ref<const Eigen::MatrixXd>& rows, std::size_t num_classes) {
    if (rows.rows() < 2) throw DataError("insufficient data for data-dependent prior");
    return default_prior(SufficientStats::from_rows(rows), num_classes);
}

}  // namespace bqda
