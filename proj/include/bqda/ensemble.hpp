#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bqda/classifiers.hpp"
#include "bqda/data_cube.hpp"
#include "bqda/error.hpp"

namespace bqda {

// Averaged rows drifting further than this from a unit sum are renormalised.
inline constexpr double kRowSumDrift = 1e-12;

namespace detail {

inline std::vector<PixelId> ids_of(const DataCube& cube, std::span<const std::size_t> pixels) {
    std::vector<PixelId> ids;
    ids.reserve(pixels.size());
    for (std::size_t px : pixels) ids.push_back(cube.pixel_ids().at(px));
    return ids;
}

// Running mean: m += (x - m) / j, which leaves m bit-identical when every
// table is the same.
inline void accumulate_mean(Eigen::MatrixXd& mean, const Eigen::MatrixXd& next, std::size_t j) {
    if (j == 1) {
        mean = next;
        return;
    }
    mean.array() += (next.array() - mean.array()) / static_cast<double>(j);
}

inline void renormalize_drifted_rows(Eigen::MatrixXd& probs) {
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double s = probs.row(i).sum();
        if (std::abs(s - 1.0) > kRowSumDrift) probs.row(i) /= s;
    }
}

inline void check_bands(const FittedModel& model, const DataCube& cube) {
    if (static_cast<std::size_t>(model.num_bands()) != cube.num_bands()) {
        throw DimensionError("model expects " + std::to_string(model.num_bands()) + " bands, cube has " +
                             std::to_string(cube.num_bands()));
    }
}

}  // namespace detail

// Fit on every realization of the training pixels pooled as independent
// observations (N_k becomes R times the pixel count).
inline FittedModel fit_pooled(const DataCube& cube, ModelKind kind, std::span<const std::size_t> train_pixels,
                              const ClassCatalog& catalog, std::vector<double> alpha = {}) {
    const Eigen::MatrixXd rows = cube.pooled_rows(train_pixels);
    std::vector<std::size_t> labels;
    labels.reserve(static_cast<std::size_t>(rows.rows()));
    const auto cube_to_catalog = [&](std::size_t l) { return catalog.index_of(cube.class_names()[l]); };
    for (std::size_t l : cube.label_indices(train_pixels)) {
        labels.insert(labels.end(), cube.num_realizations(), cube_to_catalog(l));
    }
    return fit(kind, rows, labels, catalog, std::move(alpha));
}

// One model per realization r, trained on realization r of the training pixels.
inline std::vector<FittedModel> ensemble_fit(const DataCube& cube, ModelKind kind,
                                             std::span<const std::size_t> train_pixels, const ClassCatalog& catalog,
                                             std::vector<double> alpha = {}) {
    std::vector<std::size_t> labels;
    for (std::size_t l : cube.label_indices(train_pixels)) labels.push_back(catalog.index_of(cube.class_names()[l]));
    std::vector<FittedModel> models;
    models.reserve(cube.num_realizations());
    for (std::size_t r = 0; r < cube.num_realizations(); ++r) {
        try {
            models.push_back(fit(kind, cube.realization_rows(train_pixels, r), labels, catalog, alpha));
        } catch (const FitError& e) {
            throw FitError("realization " + std::to_string(r) + ": " + e.what());
        }
    }
    return models;
}

// Seeded uniform permutation of 0..R-1.
inline std::vector<std::size_t> realization_permutation(std::size_t num_realizations, std::uint64_t seed) {
    std::vector<std::size_t> perm(num_realizations);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = num_realizations; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }
    return perm;
}

// Model j predicts on realization perm[j]; the R tables are averaged.
inline ProbabilityTable ensemble_predict(std::span<const FittedModel> models, const DataCube& cube,
                                         std::span<const std::size_t> pixels, std::uint64_t seed) {
    if (models.size() != cube.num_realizations()) {
        throw EvalError("ensemble has " + std::to_string(models.size()) + " models but the cube has " +
                        std::to_string(cube.num_realizations()) + " realizations");
    }
    const auto perm = realization_permutation(models.size(), seed);
    ProbabilityTable out;
    out.pixel_ids = detail::ids_of(cube, pixels);
    for (std::size_t j = 0; j < models.size(); ++j) {
        detail::check_bands(models[j], cube);
        const Eigen::MatrixXd probs =
            normalize_log_scores(log_scores(models[j], cube.realization_rows(pixels, perm[j])));
        detail::accumulate_mean(out.probabilities, probs, j + 1);
    }
    detail::renormalize_drifted_rows(out.probabilities);
    return out;
}

// One model evaluated on every realization of each pixel, probabilities
// averaged per pixel.
inline ProbabilityTable bqda_predict_averaged(const FittedModel& model, const DataCube& cube,
                                              std::span<const std::size_t> pixels) {
    detail::check_bands(model, cube);
    ProbabilityTable out;
    out.pixel_ids = detail::ids_of(cube, pixels);
    for (std::size_t r = 0; r < cube.num_realizations(); ++r) {
        const Eigen::MatrixXd probs = normalize_log_scores(log_scores(model, cube.realization_rows(pixels, r)));
        detail::accumulate_mean(out.probabilities, probs, r + 1);
    }
    detail::renormalize_drifted_rows(out.probabilities);
    return out;
}

}  // namespace bqda
