#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bqda/data_cube.hpp"
#include "bqda/error.hpp"
#include "bqda/spd_matrix.hpp"

namespace bqda {

// Standard uncertainty of an aerosol optical depth estimate tau:
//   u = (0.1 tau + 0.03) + |0.09 - 0.46 tau|
inline double aod_standard_uncertainty(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) {
        throw DataError("aerosol optical depth must be finite and >= 0, got " + std::to_string(tau));
    }
    return (0.1 * tau + 0.03) + std::abs(-0.46 * tau + 0.09);
}

struct SynthClass {
    std::string name;
    double weight = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd true_cov;  // covariance of the true, unobserved input
};

struct SynthSpec {
    std::vector<SynthClass> classes;
    Eigen::MatrixXd measurement_cov;
    std::size_t num_pixels = 0;
    std::size_t num_realizations = 1;
    std::uint64_t seed = 0;
    // Optional per-realization AOD; realization r then uses
    // measurement_cov * (u(tau_r) / u(0))^2.
    std::vector<double> aod;

    [[nodiscard]] std::size_t num_bands() const {
        return static_cast<std::size_t>(measurement_cov.rows());
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream per (seed, pixel) so any partitioning of pixels
// reproduces the serial output.
inline std::uint64_t pixel_seed(std::uint64_t seed, std::uint64_t pixel) {
    return splitmix64(splitmix64(seed) ^ (pixel * 0xD1B54A32D192ED03ULL + 1));
}

inline Eigen::VectorXd json_vector(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw DataError(what + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw DataError(what + " entries must be numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Eigen::MatrixXd json_matrix(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw DataError(what + " must be a non-empty array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw DataError(what + " rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw DataError(what + " entries must be numbers");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

}  // namespace detail

// JSON layout:
// {"seed": 1, "num_pixels": 1000, "num_realizations": 25,
//  "measurement_cov": [[...]], "aod": [optional per-realization tau],
//  "classes": [{"name": "forest", "weight": 0.5, "mean": [...], "cov": [[...]]}, ...]}
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("synthesis spec must be a JSON object");
    SynthSpec spec;
    try {
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.num_pixels = j.at("num_pixels").get<std::size_t>();
        spec.num_realizations = j.value("num_realizations", std::size_t{1});
        spec.measurement_cov = detail::json_matrix(j.at("measurement_cov"), "measurement_cov");
        if (j.contains("aod")) {
            spec.aod = j.at("aod").get<std::vector<double>>();
        }
        for (const auto& c : j.at("classes")) {
            SynthClass sc;
            sc.name = c.at("name").get<std::string>();
            sc.weight = c.at("weight").get<double>();
            sc.mean = detail::json_vector(c.at("mean"), "class '" + sc.name + "' mean");
            sc.true_cov = detail::json_matrix(c.at("cov"), "class '" + sc.name + "' cov");
            spec.classes.push_back(std::move(sc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid synthesis spec: ") + e.what());
    }
    return spec;
}

inline nlohmann::json to_json(const SynthSpec& spec) {
    nlohmann::json j;
    j["seed"] = spec.seed;
    j["num_pixels"] = spec.num_pixels;
    j["num_realizations"] = spec.num_realizations;
    j["measurement_cov"] = detail::matrix_json(spec.measurement_cov);
    if (!spec.aod.empty()) j["aod"] = spec.aod;
    j["classes"] = nlohmann::json::array();
    for (const auto& c : spec.classes) {
        j["classes"].push_back({{"name", c.name},
                                {"weight", c.weight},
                                {"mean", detail::vector_json(c.mean)},
                                {"cov", detail::matrix_json(c.true_cov)}});
    }
    return j;
}

// Per pixel: class ~ weights, true input chi ~ N(mean_k, true_cov_k) once,
// then each realization x_r ~ N(chi, measurement_cov_r).
inline DataCube synth_cube(const SynthSpec& spec) {
    const std::size_t p = spec.num_bands();
    if (p == 0) throw DataError("measurement_cov must be a non-empty square matrix");
    if (spec.classes.size() < 2) throw DataError("synthesis spec needs at least 2 classes");
    if (spec.num_pixels == 0) throw DataError("num_pixels must be positive");
    if (spec.num_realizations == 0) throw DataError("num_realizations must be positive");
    if (!spec.aod.empty() && spec.aod.size() != spec.num_realizations) {
        throw DataError("aod must list one value per realization");
    }

    Eigen::MatrixXd meas_lower;
    try {
        meas_lower = SPDMatrix(spec.measurement_cov).cholesky_lower();
    } catch (const Error& e) {
        throw DataError(std::string("measurement_cov: ") + e.what());
    }
    std::vector<Eigen::MatrixXd> meas_lower_r(spec.num_realizations, meas_lower);
    if (!spec.aod.empty()) {
        const double u0 = aod_standard_uncertainty(0.0);
        for (std::size_t r = 0; r < spec.num_realizations; ++r) {
            meas_lower_r[r] = meas_lower * (aod_standard_uncertainty(spec.aod[r]) / u0);
        }
    }

    std::vector<std::string> names;
    double total_weight = 0.0;
    std::vector<Eigen::MatrixXd> class_lower;
    for (const auto& c : spec.classes) {
        if (c.name.empty()) throw DataError("class names must be non-empty");
        if (!(c.weight > 0.0)) throw DataError("class '" + c.name + "' weight must be positive");
        if (static_cast<std::size_t>(c.mean.size()) != p) {
            throw DataError("class '" + c.name + "' mean has " + std::to_string(c.mean.size()) + " bands, expected " +
                            std::to_string(p));
        }
        try {
            class_lower.push_back(SPDMatrix(c.true_cov).cholesky_lower());
        } catch (const Error& e) {
            throw DataError("class '" + c.name + "' covariance: " + e.what());
        }
        total_weight += c.weight;
        names.push_back(c.name);
    }
    if (std::abs(total_weight - 1.0) > 1e-9) {
        throw DataError("class weights must sum to 1, got " + std::to_string(total_weight));
    }
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DataError("class names must be unique");
    }
    std::vector<int> label_of_class;
    for (const auto& n : names) {
        label_of_class.push_back(
            static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), n) - sorted.begin()));
    }

    const std::size_t num_r = spec.num_realizations;
    std::vector<double> values(spec.num_pixels * num_r * p);
    std::vector<int> labels(spec.num_pixels);
    std::vector<PixelId> ids(spec.num_pixels);
    Eigen::VectorXd z(static_cast<Eigen::Index>(p));
    for (std::size_t px = 0; px < spec.num_pixels; ++px) {
        std::mt19937_64 rng(detail::pixel_seed(spec.seed, px));
        std::uniform_real_distribution<double> uniform(0.0, total_weight);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double u = uniform(rng);
        std::size_t k = 0;
        double cumulative = spec.classes[0].weight;
        while (k + 1 < spec.classes.size() && u >= cumulative) cumulative += spec.classes[++k].weight;

        for (auto& zi : z) zi = normal(rng);
        const Eigen::VectorXd chi = spec.classes[k].mean + class_lower[k] * z;
        for (std::size_t r = 0; r < num_r; ++r) {
            for (auto& zi : z) zi = normal(rng);
            const Eigen::VectorXd x = chi + meas_lower_r[r] * z;
            std::copy(x.data(), x.data() + p, values.begin() + static_cast<std::ptrdiff_t>((px * num_r + r) * p));
        }
        labels[px] = label_of_class[k];
        ids[px] = static_cast<PixelId>(px);
    }
    return DataCube(p, num_r, std::move(ids), std::move(values), std::move(sorted), std::move(labels));
}

}  // namespace bqda
