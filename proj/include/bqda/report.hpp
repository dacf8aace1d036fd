#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bqda/classifiers.hpp"
#include "bqda/data_cube.hpp"
#include "bqda/metrics.hpp"

namespace bqda {

struct EvalReport {
    ConfusionMatrix confusion;
    double f1 = 0.0;
    double f2 = 0.0;
    double xe_norm = 0.0;
    double bs_norm = 0.0;
    std::vector<double> prior;
    nlohmann::json metadata = nlohmann::json::object();
};

// Scores a probability table against catalog-index labels.
inline EvalReport evaluate_table(const ProbabilityTable& table, std::span<const std::size_t> truth,
                                 const ClassCatalog& catalog, const PriorClassDistribution& q,
                                 nlohmann::json metadata = nlohmann::json::object()) {
    if (static_cast<std::size_t>(table.num_classes()) != catalog.size()) {
        throw DimensionError("probability table width does not match the class catalog");
    }
    const auto predicted = argmax_rows(table.probabilities);
    EvalReport r{ConfusionMatrix(catalog, truth, predicted), 0.0, 0.0, 0.0, 0.0, {}, {}};
    r.f1 = f_beta(r.confusion, q, 1.0);
    r.f2 = f_beta(r.confusion, q, 2.0);
    r.xe_norm = xe_norm(table.probabilities, truth, q);
    r.bs_norm = bs_norm(table.probabilities, truth, q);
    r.prior = q.values();
    r.metadata = std::move(metadata);
    return r;
}

// {"format_version":1, "metadata":{...}, "num_pixels":N, "classes":[...],
//  "prior":[...], "f1":x, "f2":x, "xe_norm":x, "bs_norm":x,
//  "confusion":[[...]], "per_class":[{"class","tp","fp","fn","tn",
//  "tp_rate","fp_rate","fn_rate","tn_rate"}]}
inline nlohmann::json to_json(const EvalReport& r) {
    const auto& cm = r.confusion;
    nlohmann::json j;
    j["format_version"] = 1;
    j["metadata"] = r.metadata;
    j["num_pixels"] = cm.total();
    j["classes"] = cm.catalog().names();
    j["prior"] = r.prior;
    j["f1"] = r.f1;
    j["f2"] = r.f2;
    j["xe_norm"] = r.xe_norm;
    j["bs_norm"] = r.bs_norm;
    j["confusion"] = nlohmann::json::array();
    j["per_class"] = nlohmann::json::array();
    for (std::size_t t = 0; t < cm.size(); ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t p = 0; p < cm.size(); ++p) row.push_back(cm.count(t, p));
        j["confusion"].push_back(std::move(row));
        const ClassRates rates = cm.rates(t);
        j["per_class"].push_back({{"class", cm.catalog().name(t)},
                                  {"tp", rates.tp},
                                  {"fp", rates.fp},
                                  {"fn", rates.fn},
                                  {"tn", rates.tn},
                                  {"tp_rate", rates.tp_rate},
                                  {"fp_rate", rates.fp_rate},
                                  {"fn_rate", rates.fn_rate},
                                  {"tn_rate", rates.tn_rate}});
    }
    return j;
}

// Header row and column carry class names; rows are the true class.
inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
    out << "true\\predicted";
    for (const auto& n : cm.catalog().names()) out << ',' << n;
    out << '\n';
    for (std::size_t t = 0; t < cm.size(); ++t) {
        out << cm.catalog().name(t);
        for (std::size_t p = 0; p < cm.size(); ++p) out << ',' << cm.count(t, p);
        out << '\n';
    }
}

// pixel_id,label,p_<class0>,...
inline void write_probability_csv(std::ostream& out, const ProbabilityTable& table, const ClassCatalog& catalog,
                                  const std::vector<std::string>& labels) {
    std::string buf = "pixel_id,label";
    for (const auto& n : catalog.names()) buf += ",p_" + n;
    buf += '\n';
    out << buf;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        buf.clear();
        buf += std::to_string(table.pixel_ids[static_cast<std::size_t>(i)]);
        buf += ',';
        if (static_cast<std::size_t>(i) < labels.size()) buf += labels[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < table.num_classes(); ++k) {
            buf += ',';
            detail::append_double(buf, table.probabilities(i, k));
        }
        buf += '\n';
        out << buf;
    }
}

// Reads a table written by write_probability_csv (or an external model with
// the same layout). Columns must match the catalog order.
inline ProbabilityTable parse_probability_csv(std::string_view text, const ClassCatalog& catalog) {
    ProbabilityTable table;
    std::vector<double> flat;
    std::size_t pos = 0, line_no = 0;
    bool header_seen = false;
    const std::size_t k = catalog.size();
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() != k + 2 || fields[0] != "pixel_id" || fields[1] != "label") {
                throw DataError("probability table header must be pixel_id,label,p_<class>...");
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (fields[2 + c] != "p_" + catalog.name(c)) {
                    throw DataError("probability column " + std::to_string(c) + " must be p_" + catalog.name(c));
                }
            }
            continue;
        }
        if (fields.size() != k + 2) throw DataError("line " + std::to_string(line_no) + ": wrong field count");
        PixelId id = 0;
        if (!detail::parse_number(fields[0], id)) throw DataError("line " + std::to_string(line_no) + ": bad pixel_id");
        table.pixel_ids.push_back(id);
        for (std::size_t c = 0; c < k; ++c) {
            double v = 0.0;
            if (!detail::parse_number(fields[2 + c], v) || !(v >= 0.0 && v <= 1.0)) {
                throw DataError("line " + std::to_string(line_no) + ": probability must be in [0, 1]");
            }
            flat.push_back(v);
        }
    }
    if (!header_seen) throw DataError("probability table is empty");
    table.probabilities = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), static_cast<Eigen::Index>(table.pixel_ids.size()), static_cast<Eigen::Index>(k));
    return table;
}

}  // namespace bqda
