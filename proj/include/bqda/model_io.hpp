#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bqda/classifiers.hpp"
#include "bqda/error.hpp"
#include "bqda/synth.hpp"

namespace bqda {

inline constexpr int kModelFormatVersion = 1;

// {kind, classes[], alpha[], per_class[{count, mean[], scatter[][]}], num_bands, format_version}
// Doubles are written in shortest round-trip form (at most 17 significant
// digits), so a reload regenerates bit-identical derived parameters.
inline nlohmann::json to_json(const FittedModel& model) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = std::string(to_string(model.kind()));
    j["classes"] = model.catalog().names();
    j["alpha"] = model.alpha();
    j["num_bands"] = model.num_bands();
    j["per_class"] = nlohmann::json::array();
    for (const auto& s : model.per_class()) {
        j["per_class"].push_back({{"count", s.count},
                                  {"mean", detail::vector_json(s.mean)},
                                  {"scatter", detail::matrix_json(s.scatter)}});
    }
    return j;
}

inline FittedModel model_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw DataError("unsupported model format_version " + std::to_string(version));
        }
        const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
        ClassCatalog catalog(j.at("classes").get<std::vector<std::string>>());
        if (catalog.names() != j.at("classes").get<std::vector<std::string>>()) {
            throw DataError("model classes must be listed in lexicographic order");
        }
        const auto num_bands = j.at("num_bands").get<Eigen::Index>();
        std::vector<ClassStats> per_class;
        for (const auto& c : j.at("per_class")) {
            ClassStats s;
            s.count = c.at("count").get<std::size_t>();
            s.mean = detail::json_vector(c.at("mean"), "per_class mean");
            s.scatter = detail::json_matrix(c.at("scatter"), "per_class scatter");
            if (s.mean.size() != num_bands || s.scatter.rows() != num_bands || s.scatter.cols() != num_bands) {
                throw DataError("per_class entry does not match num_bands");
            }
            per_class.push_back(std::move(s));
        }
        return make_model(kind, std::move(catalog), std::move(per_class), j.at("alpha").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid model file: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("invalid model file: ") + e.what());
    }
}

inline void save_model(const FittedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << to_json(model).dump(1) << '\n';
}

inline FittedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace bqda
