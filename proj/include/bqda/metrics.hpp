#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bqda/classifiers.hpp"
#include "bqda/error.hpp"

namespace bqda {

// Probabilities are clipped to [kProbabilityClip, 1 - kProbabilityClip]
// before taking logs in xe_norm.
inline constexpr double kProbabilityClip = 1e-15;

// One-vs-rest tallies and rates for one class.
struct ClassRates {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double tp_rate = 0.0;  // TP / (TP + FN)
    double fn_rate = 0.0;  // FN / (TP + FN)
    double fp_rate = 0.0;  // FP / (FP + TN)
    double tn_rate = 0.0;  // TN / (FP + TN)
};

// Rows are the true class, columns the predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix(ClassCatalog catalog, std::span<const std::size_t> truth,
                    std::span<const std::size_t> predicted)
        : catalog_(std::move(catalog)), k_(catalog_.size()), counts_(k_ * k_, 0) {
        if (truth.size() != predicted.size()) {
            throw DimensionError("truth (" + std::to_string(truth.size()) + ") and predictions (" +
                                 std::to_string(predicted.size()) + ") differ in length");
        }
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] >= k_ || predicted[i] >= k_) {
                throw DataError("label index out of range at position " + std::to_string(i));
            }
            ++counts_[truth[i] * k_ + predicted[i]];
        }
        total_ = truth.size();
    }

    [[nodiscard]] const ClassCatalog& catalog() const noexcept { return catalog_; }
    [[nodiscard]] std::size_t size() const noexcept { return k_; }
    [[nodiscard]] std::size_t total() const noexcept { return total_; }
    [[nodiscard]] std::size_t count(std::size_t truth, std::size_t predicted) const {
        return counts_.at(truth * k_ + predicted);
    }

    [[nodiscard]] std::size_t tp(std::size_t k) const { return count(k, k); }
    [[nodiscard]] std::size_t fn(std::size_t k) const { return row_sum(k) - tp(k); }
    [[nodiscard]] std::size_t fp(std::size_t k) const { return col_sum(k) - tp(k); }
    [[nodiscard]] std::size_t tn(std::size_t k) const { return total_ - tp(k) - fn(k) - fp(k); }

    [[nodiscard]] ClassRates rates(std::size_t k) const {
        ClassRates r{tp(k), fp(k), fn(k), tn(k)};
        auto ratio = [](std::size_t a, std::size_t b) {
            return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
        };
        r.tp_rate = ratio(r.tp, r.tp + r.fn);
        r.fn_rate = ratio(r.fn, r.tp + r.fn);
        r.fp_rate = ratio(r.fp, r.fp + r.tn);
        r.tn_rate = ratio(r.tn, r.fp + r.tn);
        return r;
    }

private:
    [[nodiscard]] std::size_t row_sum(std::size_t k) const {
        std::size_t s = 0;
        for (std::size_t j = 0; j < k_; ++j) s += counts_[k * k_ + j];
        return s;
    }
    [[nodiscard]] std::size_t col_sum(std::size_t k) const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < k_; ++i) s += counts_[i * k_ + k];
        return s;
    }

    ClassCatalog catalog_;
    std::size_t k_;
    std::vector<std::size_t> counts_;
    std::size_t total_ = 0;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                 const ClassCatalog& catalog) {
    return ConfusionMatrix(catalog, truth, predicted);
}

inline ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> predicted,
                                 const ClassCatalog& catalog) {
    std::vector<std::size_t> t, p;
    t.reserve(truth.size());
    p.reserve(predicted.size());
    for (const auto& s : truth) t.push_back(catalog.index_of(s));
    for (const auto& s : predicted) p.push_back(catalog.index_of(s));
    return ConfusionMatrix(catalog, t, p);
}

// Class prior q_k; every entry strictly positive, summing to one.
class PriorClassDistribution {
public:
    explicit PriorClassDistribution(std::vector<double> q) : q_(std::move(q)) {
        if (q_.size() < 2) throw DataError("prior class distribution needs at least 2 classes");
        double total = 0.0;
        for (double v : q_) {
            if (!(v > 0.0)) throw DataError("prior class probabilities must be positive");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-12) throw DataError("prior class probabilities must sum to 1");
    }

    // Label frequencies; a class with no labels is an error.
    static PriorClassDistribution from_labels(std::span<const std::size_t> labels, std::size_t num_classes) {
        std::vector<std::size_t> counts(num_classes, 0);
        for (std::size_t l : labels) {
            if (l >= num_classes) throw DataError("label index out of range");
            ++counts[l];
        }
        std::vector<double> q(num_classes);
        for (std::size_t k = 0; k < num_classes; ++k) {
            if (counts[k] == 0) {
                throw DataError("class index " + std::to_string(k) + " has no labeled pixels; prior undefined");
            }
            q[k] = static_cast<double>(counts[k]) / static_cast<double>(labels.size());
        }
        return PriorClassDistribution(std::move(q));
    }

    [[nodiscard]] std::size_t size() const noexcept { return q_.size(); }
    [[nodiscard]] double operator[](std::size_t k) const { return q_.at(k); }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return q_; }

private:
    std::vector<double> q_;
};

// Prior-weighted macro F-beta. A class that is absent from both truth and
// prediction scores its ideal value 1.
inline double f_beta(const ConfusionMatrix& cm, const PriorClassDistribution& q, double beta) {
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (q.size() != cm.size()) throw DimensionError("prior and confusion matrix disagree on class count");
    const double b2 = beta * beta;
    double score = 0.0;
    for (std::size_t k = 0; k < cm.size(); ++k) {
        const double tp = static_cast<double>(cm.tp(k));
        const double fn = static_cast<double>(cm.fn(k));
        const double fp = static_cast<double>(cm.fp(k));
        const double denom = (b2 + 1.0) * tp + b2 * fn + fp;
        score += q[k] * (denom == 0.0 ? 1.0 : (b2 + 1.0) * tp / denom);
    }
    return score;
}

namespace detail {

inline void check_scoring_inputs(const Eigen::Ref<const Eigen::MatrixXd>& probs, std::span<const std::size_t> truth,
                                 const PriorClassDistribution& q) {
    if (static_cast<std::size_t>(probs.rows()) != truth.size()) {
        throw DimensionError("probability table has " + std::to_string(probs.rows()) + " rows but " +
                             std::to_string(truth.size()) + " labels");
    }
    if (static_cast<std::size_t>(probs.cols()) != q.size()) {
        throw DimensionError("probability table width does not match the class prior");
    }
    if (truth.empty()) throw EvalError("cannot score an empty probability table");
    for (std::size_t l : truth) {
        if (l >= q.size()) throw DataError("label index out of range");
    }
}

}  // namespace detail

// (1/N) sum_i [sum_k y_ik log p_ik] / [sum_k q_k log q_k]; 1 matches the
// prior-only predictor, 0 is a perfect one-hot prediction.
inline double xe_norm(const Eigen::Ref<const Eigen::MatrixXd>& probs, std::span<const std::size_t> truth,
                      const PriorClassDistribution& q) {
    detail::check_scoring_inputs(probs, truth, q);
    double prior_entropy = 0.0;
    for (double v : q.values()) prior_entropy += v * std::log(v);
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double pik = std::clamp(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(truth[i])),
                                      kProbabilityClip, 1.0 - kProbabilityClip);
        total += std::log(pik) / prior_entropy;
    }
    return total / static_cast<double>(truth.size());
}

// (1/N) sum_i [sum_k (y_ik - p_ik)^2] / [sum_k q_k (1 - q_k)]
inline double bs_norm(const Eigen::Ref<const Eigen::MatrixXd>& probs, std::span<const std::size_t> truth,
                      const PriorClassDistribution& q) {
    detail::check_scoring_inputs(probs, truth, q);
    double prior_brier = 0.0;
    for (double v : q.values()) prior_brier += v * (1.0 - v);
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double row = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double y = k == truth[i] ? 1.0 : 0.0;
            const double d = y - probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            row += d * d;
        }
        total += row / prior_brier;
    }
    return total / static_cast<double>(truth.size());
}

}  // namespace bqda
