#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bqda/distributions.hpp"
#include "bqda/error.hpp"
#include "bqda/niw.hpp"

namespace bqda {

using PixelId = std::int64_t;

enum class ModelKind { BQDA, QDA, LDA };

inline std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::BQDA: return "bqda";
        case ModelKind::QDA: return "qda";
        case ModelKind::LDA: return "lda";
    }
    return "unknown";
}

inline ModelKind parse_model_kind(std::string_view name) {
    if (name == "bqda") return ModelKind::BQDA;
    if (name == "qda") return ModelKind::QDA;
    if (name == "lda") return ModelKind::LDA;
    throw ConfigError("unknown model kind '" + std::string(name) + "' (expected bqda, qda or lda)");
}

// Ordered set of K >= 2 distinct class names, sorted lexicographically.
class ClassCatalog {
public:
    explicit ClassCatalog(std::vector<std::string> names) : names_(std::move(names)) {
        std::sort(names_.begin(), names_.end());
        if (std::adjacent_find(names_.begin(), names_.end()) != names_.end()) {
            throw DataError("class catalog has duplicate names");
        }
        if (names_.size() < 2) {
            throw DataError("class catalog needs at least 2 classes, got " + std::to_string(names_.size()));
        }
        for (const auto& n : names_) {
            if (n.empty()) throw DataError("class names must be non-empty");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }
    [[nodiscard]] const std::string& name(std::size_t k) const { return names_.at(k); }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const {
        const auto it = std::lower_bound(names_.begin(), names_.end(), name);
        if (it == names_.end() || *it != name) return std::nullopt;
        return static_cast<std::size_t>(it - names_.begin());
    }

    [[nodiscard]] std::size_t index_of(std::string_view name) const {
        if (auto k = find(name)) return *k;
        throw DataError("unknown class label '" + std::string(name) + "'");
    }

    friend bool operator==(const ClassCatalog&, const ClassCatalog&) = default;

private:
    std::vector<std::string> names_;
};

using ClassStats = SufficientStats;

// Per-pixel class probabilities, one row per pixel, columns in catalog order.
struct ProbabilityTable {
    Eigen::MatrixXd probabilities;
    std::vector<PixelId> pixel_ids;

    [[nodiscard]] Eigen::Index rows() const noexcept { return probabilities.rows(); }
    [[nodiscard]] Eigen::Index num_classes() const noexcept { return probabilities.cols(); }
};

class FittedModel;
inline FittedModel make_model(ModelKind kind, ClassCatalog catalog, std::vector<ClassStats> per_class,
                       std::vector<double> alpha);

// Immutable fitted classifier. Everything beyond (kind, catalog, per-class
// stats, alpha) is derived deterministically by make_model.
class FittedModel {
public:
    using ClassDensity = std::variant<StudentTParams, GaussianParams>;

    [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
    [[nodiscard]] const ClassCatalog& catalog() const noexcept { return catalog_; }
    [[nodiscard]] const std::vector<ClassStats>& per_class() const noexcept { return per_class_; }
    [[nodiscard]] const std::vector<double>& alpha() const noexcept { return alpha_; }
    [[nodiscard]] Eigen::Index num_bands() const noexcept { return num_bands_; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return catalog_.size(); }
    [[nodiscard]] const std::vector<ClassDensity>& densities() const noexcept { return densities_; }
    // Unnormalised log class weights: log(N_k + alpha_k) for BQDA, log N_k otherwise.
    [[nodiscard]] const std::vector<double>& log_weights() const noexcept { return log_weights_; }

    [[nodiscard]] const StudentTParams& student_t(std::size_t k) const {
        return std::get<StudentTParams>(densities_.at(k));
    }
    [[nodiscard]] const GaussianParams& gaussian(std::size_t k) const {
        return std::get<GaussianParams>(densities_.at(k));
    }

    // BQDA only: the scalar multiplying Psi_N in the predictive scale.
    [[nodiscard]] const std::vector<double>& scale_factors() const noexcept { return scale_factors_; }

private:
    FittedModel(ModelKind kind, ClassCatalog catalog) : kind_(kind), catalog_(std::move(catalog)) {}

    friend FittedModel make_model(ModelKind, ClassCatalog, std::vector<ClassStats>, std::vector<double>);

    ModelKind kind_;
    ClassCatalog catalog_;
    std::vector<ClassStats> per_class_;
    std::vector<double> alpha_;
    Eigen::Index num_bands_ = 0;
    std::vector<ClassDensity> densities_;
    std::vector<double> log_weights_;
    std::vector<double> scale_factors_;
};

namespace detail {

inline std::string class_tag(const ClassCatalog& catalog, std::size_t k) {
    return "class '" + catalog.name(k) + "'";
}

}  // namespace detail

inline FittedModel make_model(ModelKind kind, ClassCatalog catalog, std::vector<ClassStats> per_class,
                              std::vector<double> alpha) {
    const std::size_t num_classes = catalog.size();
    if (per_class.size() != num_classes) {
        throw DimensionError("expected stats for " + std::to_string(num_classes) + " classes, got " +
                             std::to_string(per_class.size()));
    }
    if (alpha.empty()) alpha.assign(num_classes, 1.0);
    if (alpha.size() != num_classes) {
        throw ConfigError("alpha must have one entry per class (" + std::to_string(num_classes) + "), got " +
                          std::to_string(alpha.size()));
    }
    for (double a : alpha) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alpha entries must be finite and >= 0");
    }
    const Eigen::Index p = per_class.front().dim();
    if (p == 0) throw DimensionError("model needs at least one band");
    for (const auto& s : per_class) {
        if (s.dim() != p || s.scatter.rows() != p || s.scatter.cols() != p) {
            throw DimensionError("per-class statistics disagree on the number of bands");
        }
    }

    FittedModel model(kind, std::move(catalog));
    model.num_bands_ = p;
    model.alpha_ = std::move(alpha);
    const auto& cat = model.catalog_;

    switch (kind) {
        case ModelKind::BQDA: {
            for (std::size_t k = 0; k < num_classes; ++k) {
                const auto& s = per_class[k];
                if (s.count < 2) {
                    throw FitError(detail::class_tag(cat, k) + " has " + std::to_string(s.count) +
                                   " training observations; BQDA needs at least 2");
                }
                try {
                    const NIWParams post = niw_posterior(s, default_prior(s, num_classes));
                    model.scale_factors_.push_back(predictive_scale_factor(post.lambda(), post.nu(), p));
                    model.densities_.emplace_back(niw_posterior_predictive(post));
                } catch (const DataError& e) {
                    throw FitError(detail::class_tag(cat, k) + ": " + e.what());
                }
                model.log_weights_.push_back(std::log(static_cast<double>(s.count) + model.alpha_[k]));
            }
            break;
        }
        case ModelKind::QDA: {
            for (std::size_t k = 0; k < num_classes; ++k) {
                const auto& s = per_class[k];
                if (s.count < 2) {
                    throw FitError("singular class covariance for " + detail::class_tag(cat, k) + " (" +
                                   std::to_string(s.count) + " training observations)");
                }
                try {
                    model.densities_.emplace_back(GaussianParams(s.mean, SPDMatrix(s.sample_covariance())));
                } catch (const NotPositiveDefinite&) {
                    throw FitError("singular class covariance for " + detail::class_tag(cat, k));
                }
                model.log_weights_.push_back(std::log(static_cast<double>(s.count)));
            }
            break;
        }
        case ModelKind::LDA: {
            std::size_t total = 0;
            Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(p, p);
            for (std::size_t k = 0; k < num_classes; ++k) {
                if (per_class[k].count == 0) {
                    throw FitError(detail::class_tag(cat, k) + " has no training observations");
                }
                total += per_class[k].count;
                pooled += per_class[k].scatter;
            }
            if (total <= num_classes) {
                throw FitError("singular pooled covariance (only " + std::to_string(total) +
                               " observations for " + std::to_string(num_classes) + " classes)");
            }
            pooled /= static_cast<double>(total - num_classes);
            std::optional<SPDMatrix> shared;
            try {
                shared.emplace(std::move(pooled));
            } catch (const NotPositiveDefinite&) {
                throw FitError("singular pooled covariance");
            }
            for (std::size_t k = 0; k < num_classes; ++k) {
                model.densities_.emplace_back(GaussianParams(per_class[k].mean, *shared));
                model.log_weights_.push_back(std::log(static_cast<double>(per_class[k].count)));
            }
            break;
        }
    }
    model.per_class_ = std::move(per_class);
    return model;
}

// Per-class sufficient statistics; labels are catalog indices aligned with rows.
inline std::vector<ClassStats> class_stats(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                                           std::span<const std::size_t> labels, std::size_t num_classes) {
    if (static_cast<std::size_t>(rows.rows()) != labels.size()) {
        throw DimensionError("observation count (" + std::to_string(rows.rows()) +
                             ") does not match label count (" + std::to_string(labels.size()) + ")");
    }
    std::vector<std::vector<Eigen::Index>> members(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) throw DataError("label index out of range at row " + std::to_string(i));
        members[labels[i]].push_back(static_cast<Eigen::Index>(i));
    }
    std::vector<ClassStats> out;
    out.reserve(num_classes);
    for (const auto& idx : members) {
        out.push_back(ClassStats::from_rows(rows(idx, Eigen::all)));
    }
    return out;
}

inline FittedModel fit(ModelKind kind, const Eigen::Ref<const Eigen::MatrixXd>& rows,
                       std::span<const std::size_t> labels, const ClassCatalog& catalog,
                       std::vector<double> alpha = {}) {
    return make_model(kind, catalog, class_stats(rows, labels, catalog.size()), std::move(alpha));
}

inline FittedModel fit_bqda(const Eigen::Ref<const Eigen::MatrixXd>& rows, std::span<const std::size_t> labels,
                            const ClassCatalog& catalog, std::vector<double> alpha = {}) {
    return fit(ModelKind::BQDA, rows, labels, catalog, std::move(alpha));
}

inline FittedModel fit_qda(const Eigen::Ref<const Eigen::MatrixXd>& rows, std::span<const std::size_t> labels,
                           const ClassCatalog& catalog) {
    return fit(ModelKind::QDA, rows, labels, catalog);
}

inline FittedModel fit_lda(const Eigen::Ref<const Eigen::MatrixXd>& rows, std::span<const std::size_t> labels,
                           const ClassCatalog& catalog) {
    return fit(ModelKind::LDA, rows, labels, catalog);
}

// n x K matrix of log(weight_k) + log p(x | class k).
inline Eigen::MatrixXd log_scores(const FittedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& rows) {
    if (rows.cols() != model.num_bands()) {
        throw DimensionError("input has " + std::to_string(rows.cols()) + " bands, model expects " +
                             std::to_string(model.num_bands()));
    }
    const std::size_t num_classes = model.num_classes();
    Eigen::MatrixXd scores(rows.rows(), static_cast<Eigen::Index>(num_classes));
    for (std::size_t k = 0; k < num_classes; ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        std::visit(
            [&](const auto& density) {
                using T = std::decay_t<decltype(density)>;
                if constexpr (std::is_same_v<T, StudentTParams>) {
                    scores.col(col) = student_t_logpdf_rows(rows, density);
                } else {
                    scores.col(col) = gaussian_logpdf_rows(rows, density);
                }
            },
            model.densities()[k]);
        scores.col(col).array() += model.log_weights()[k];
    }
    return scores;
}

// Row-wise softmax via log-sum-exp.
inline Eigen::MatrixXd normalize_log_scores(const Eigen::Ref<const Eigen::MatrixXd>& scores) {
    Eigen::MatrixXd probs(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double top = scores.row(i).maxCoeff();
        if (!std::isfinite(top)) throw EvalError("row " + std::to_string(i) + " has no finite class score");
        probs.row(i) = (scores.row(i).array() - top).exp();
        probs.row(i) /= probs.row(i).sum();
    }
    return probs;
}

inline ProbabilityTable predict_proba(const FittedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& rows) {
    ProbabilityTable table;
    table.probabilities = normalize_log_scores(log_scores(model, rows));
    table.pixel_ids.resize(static_cast<std::size_t>(rows.rows()));
    for (std::size_t i = 0; i < table.pixel_ids.size(); ++i) table.pixel_ids[i] = static_cast<PixelId>(i);
    return table;
}

// Row-wise argmax; ties go to the lowest column (catalog) index.
inline std::vector<std::size_t> argmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    std::vector<std::size_t> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < m.cols(); ++k) {
            if (m(i, k) > m(i, best)) best = k;
        }
        out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return out;
}

inline std::vector<std::size_t> predict(const FittedModel& model, const Eigen::Ref<const Eigen::MatrixXd>& rows) {
    return argmax_rows(predict_proba(model, rows).probabilities);
}

}  // namespace bqda
