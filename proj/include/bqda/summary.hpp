#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bqda/classifiers.hpp"
#include "bqda/data_cube.hpp"

namespace bqda {

struct ClassBandSummary {
    std::string class_name;
    std::size_t band = 0;
    std::size_t count = 0;  // pixels x realizations pooled
    double mean = 0.0;
    double sd = 0.0;
    // Set when fewer than two observations make sd undefined (sd is then 0).
    bool degenerate = false;
};

// Per-class, per-band sample mean and standard deviation over every
// realization of every labeled pixel. Rows are ordered class-major in
// catalog order; classes absent from the cube get flagged zero-count rows.
inline std::vector<ClassBandSummary> class_summary(const DataCube& cube, const ClassCatalog& catalog) {
    if (cube.labeled_pixels().empty()) throw DataError("class_summary needs a labeled cube");
    const std::size_t p = cube.num_bands();
    const std::size_t num_classes = catalog.size();
    std::vector<std::size_t> cube_to_catalog;
    for (const auto& name : cube.class_names()) {
        cube_to_catalog.push_back(catalog.index_of(name));
    }

    // Welford accumulators
    std::vector<std::size_t> counts(num_classes, 0);
    std::vector<double> mean(num_classes * p, 0.0);
    std::vector<double> m2(num_classes * p, 0.0);
    for (std::size_t px = 0; px < cube.num_pixels(); ++px) {
        const int l = cube.labels()[px];
        if (l == DataCube::kUnlabeled) continue;
        const std::size_t k = cube_to_catalog[static_cast<std::size_t>(l)];
        for (std::size_t r = 0; r < cube.num_realizations(); ++r) {
            const double n = static_cast<double>(++counts[k]);
            const auto obs = cube.observation(px, r);
            for (std::size_t b = 0; b < p; ++b) {
                double& m = mean[k * p + b];
                const double delta = obs[b] - m;
                m += delta / n;
                m2[k * p + b] += delta * (obs[b] - m);
            }
        }
    }

    std::vector<ClassBandSummary> out;
    out.reserve(num_classes * p);
    for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t b = 0; b < p; ++b) {
            ClassBandSummary row;
            row.class_name = catalog.name(k);
            row.band = b;
            row.count = counts[k];
            row.mean = mean[k * p + b];
            row.degenerate = counts[k] < 2;
            row.sd = row.degenerate ? 0.0 : std::sqrt(m2[k * p + b] / static_cast<double>(counts[k] - 1));
            out.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace bqda
