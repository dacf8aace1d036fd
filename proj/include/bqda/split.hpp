#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bqda/data_cube.hpp"
#include "bqda/error.hpp"

namespace bqda {

struct SplitSpec {
    double training_fraction = 0.1;
    std::uint64_t seed = 0;
};

// Pixel indices into the cube, each list sorted ascending.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// Number of training pixels: ceil(fraction * N).
inline std::size_t training_count(double fraction, std::size_t num_labeled) {
    const double target = fraction * static_cast<double>(num_labeled);
    // Guard against products like 0.07 * 100 = 7.000000000000001.
    return static_cast<std::size_t>(std::ceil(target - 1e-9 * std::max(1.0, target)));
}

// Unstratified uniform sample (without replacement) of the labeled pixels.
inline Split split_pixels(const DataCube& cube, const SplitSpec& spec) {
    if (!(spec.training_fraction > 0.0 && spec.training_fraction < 1.0)) {
        throw ConfigError("training fraction must lie in (0, 1), got " + std::to_string(spec.training_fraction));
    }
    std::vector<std::size_t> labeled = cube.labeled_pixels();
    if (labeled.empty()) throw DataError("cube has no labeled pixels to split");
    const std::size_t n_train = training_count(spec.training_fraction, labeled.size());
    if (n_train == 0) throw DataError("training set is empty");
    if (n_train >= labeled.size()) {
        throw DataError("training fraction " + std::to_string(spec.training_fraction) +
                        " leaves no validation pixels out of " + std::to_string(labeled.size()));
    }
    std::mt19937_64 rng(spec.seed);
    // Partial Fisher-Yates: the first n_train slots form the sample.
    for (std::size_t i = 0; i < n_train; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, labeled.size() - 1);
        std::swap(labeled[i], labeled[pick(rng)]);
    }
    Split split;
    split.train.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_train), labeled.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

}  // namespace bqda
