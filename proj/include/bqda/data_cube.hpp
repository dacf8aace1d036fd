#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "bqda/classifiers.hpp"
#include "bqda/error.hpp"

namespace bqda {

// Measured inputs: pixels x bands x realizations, with optional labels.
// Storage is pixel-major, then realization, then band, so every band vector
// is contiguous.
class DataCube {
public:
    static constexpr int kUnlabeled = -1;

    DataCube(std::size_t num_bands, std::size_t num_realizations, std::vector<PixelId> pixel_ids,
             std::vector<double> values, std::vector<std::string> class_names, std::vector<int> labels)
        : num_bands_(num_bands),
          num_realizations_(num_realizations),
          pixel_ids_(std::move(pixel_ids)),
          values_(std::move(values)),
          class_names_(std::move(class_names)),
          labels_(std::move(labels)) {
        if (num_bands_ == 0) throw DataError("cube needs at least one band");
        if (num_realizations_ == 0) throw DataError("cube needs at least one realization");
        if (values_.size() != pixel_ids_.size() * num_bands_ * num_realizations_) {
            throw DataError("cube value count does not match its dimensions");
        }
        if (labels_.size() != pixel_ids_.size()) throw DataError("cube label count does not match pixel count");
        if (!std::is_sorted(class_names_.begin(), class_names_.end()) ||
            std::adjacent_find(class_names_.begin(), class_names_.end()) != class_names_.end()) {
            throw DataError("cube class names must be sorted and unique");
        }
        for (int l : labels_) {
            if (l != kUnlabeled && (l < 0 || static_cast<std::size_t>(l) >= class_names_.size())) {
                throw DataError("cube label index out of range");
            }
        }
        for (double v : values_) {
            if (!std::isfinite(v)) throw DataError("cube contains non-finite values");
        }
        index_.reserve(pixel_ids_.size());
        for (std::size_t i = 0; i < pixel_ids_.size(); ++i) {
            if (!index_.emplace(pixel_ids_[i], i).second) {
                throw DataError("duplicate pixel_id " + std::to_string(pixel_ids_[i]));
            }
        }
    }

    [[nodiscard]] std::size_t num_pixels() const noexcept { return pixel_ids_.size(); }
    [[nodiscard]] std::size_t num_bands() const noexcept { return num_bands_; }
    [[nodiscard]] std::size_t num_realizations() const noexcept { return num_realizations_; }
    [[nodiscard]] const std::vector<PixelId>& pixel_ids() const noexcept { return pixel_ids_; }
    [[nodiscard]] const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    [[nodiscard]] bool is_labeled(std::size_t pixel) const { return labels_.at(pixel) != kUnlabeled; }

    [[nodiscard]] std::optional<std::size_t> find_pixel(PixelId id) const {
        const auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] std::span<const double> observation(std::size_t pixel, std::size_t realization) const {
        return {values_.data() + (pixel * num_realizations_ + realization) * num_bands_, num_bands_};
    }

    [[nodiscard]] std::vector<std::size_t> labeled_pixels() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i] != kUnlabeled) out.push_back(i);
        }
        return out;
    }

    // Catalog of the cube's closed class set.
    [[nodiscard]] ClassCatalog catalog() const { return ClassCatalog(class_names_); }

    // |pixels| x p block holding one realization of each pixel.
    [[nodiscard]] Eigen::MatrixXd realization_rows(std::span<const std::size_t> pixels,
                                                   std::size_t realization) const {
        if (realization >= num_realizations_) {
            throw EvalError("realization " + std::to_string(realization) + " out of range (R = " +
                            std::to_string(num_realizations_) + ")");
        }
        Eigen::MatrixXd out(static_cast<Eigen::Index>(pixels.size()), static_cast<Eigen::Index>(num_bands_));
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            const auto obs = observation(pixels[i], realization);
            for (std::size_t b = 0; b < num_bands_; ++b) {
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = obs[b];
            }
        }
        return out;
    }

    // (|pixels| * R) x p block; each realization is its own row.
    [[nodiscard]] Eigen::MatrixXd pooled_rows(std::span<const std::size_t> pixels) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(pixels.size() * num_realizations_),
                            static_cast<Eigen::Index>(num_bands_));
        Eigen::Index row = 0;
        for (std::size_t px : pixels) {
            for (std::size_t r = 0; r < num_realizations_; ++r, ++row) {
                const auto obs = observation(px, r);
                for (std::size_t b = 0; b < num_bands_; ++b) out(row, static_cast<Eigen::Index>(b)) = obs[b];
            }
        }
        return out;
    }

    // Catalog indices of the given labeled pixels, one per pixel.
    [[nodiscard]] std::vector<std::size_t> label_indices(std::span<const std::size_t> pixels) const {
        std::vector<std::size_t> out;
        out.reserve(pixels.size());
        for (std::size_t px : pixels) {
            const int l = labels_.at(px);
            if (l == kUnlabeled) {
                throw DataError("pixel " + std::to_string(pixel_ids_[px]) + " is unlabeled");
            }
            out.push_back(static_cast<std::size_t>(l));
        }
        return out;
    }

private:
    std::size_t num_bands_;
    std::size_t num_realizations_;
    std::vector<PixelId> pixel_ids_;
    std::vector<double> values_;
    std::vector<std::string> class_names_;
    std::vector<int> labels_;
    std::unordered_map<PixelId, std::size_t> index_;
};

// Optional expectations applied while loading.
struct CubeSchema {
    std::optional<std::size_t> num_bands;
    std::optional<std::vector<std::string>> classes;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void append_double(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
    if (field.empty()) return false;
    if constexpr (std::is_floating_point_v<T>) {
        if (field.front() == '+') field.remove_prefix(1);
    }
    const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace detail

// Parses the long-format cube CSV:
//   pixel_id,realization,label,b0,...,b{p-1}
inline DataCube parse_cube(std::string_view text, const CubeSchema& schema = {}) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size()) return false;
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        return true;
    };
    auto fail = [&](const std::string& msg) -> DataError {
        return DataError("line " + std::to_string(line_no) + ": " + msg);
    };

    std::string_view line;
    if (!next_line(line)) throw DataError("cube file is empty");
    const auto header = detail::split_fields(line);
    if (header.size() < 4 || header[0] != "pixel_id" || header[1] != "realization" || header[2] != "label") {
        throw fail("header must start with pixel_id,realization,label followed by band columns");
    }
    const std::size_t p = header.size() - 3;
    for (std::size_t b = 0; b < p; ++b) {
        if (header[3 + b] != "b" + std::to_string(b)) {
            throw fail("band column " + std::to_string(b) + " must be named b" + std::to_string(b));
        }
    }
    if (schema.num_bands && *schema.num_bands != p) {
        throw fail("expected " + std::to_string(*schema.num_bands) + " bands, header has " + std::to_string(p));
    }
    std::optional<std::vector<std::string>> allowed;
    if (schema.classes) {
        allowed = *schema.classes;
        std::sort(allowed->begin(), allowed->end());
    }

    struct PixelRecord {
        std::size_t first_line;
        std::string label;
        std::vector<std::optional<std::vector<double>>> realizations;
    };
    std::vector<PixelRecord> records;
    std::unordered_map<PixelId, std::size_t> where;
    std::vector<PixelId> ids;
    std::size_t max_realization = 0;

    std::vector<double> bands(p);
    while (next_line(line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != p + 3) {
            throw fail("expected " + std::to_string(p + 3) + " fields, got " + std::to_string(fields.size()));
        }
        PixelId id = 0;
        if (!detail::parse_number(fields[0], id)) throw fail("pixel_id '" + std::string(fields[0]) + "' is not an integer");
        std::size_t r = 0;
        if (!detail::parse_number(fields[1], r)) {
            throw fail("realization '" + std::string(fields[1]) + "' is not a non-negative integer");
        }
        for (std::size_t b = 0; b < p; ++b) {
            if (!detail::parse_number(fields[3 + b], bands[b]) || !std::isfinite(bands[b])) {
                throw fail("band b" + std::to_string(b) + " value '" + std::string(fields[3 + b]) +
                           "' is not a finite number");
            }
        }
        const std::string label(fields[2]);
        if (allowed && !label.empty() && !std::binary_search(allowed->begin(), allowed->end(), label)) {
            throw fail("unknown label '" + label + "'");
        }
        auto [it, inserted] = where.emplace(id, records.size());
        if (inserted) {
            records.push_back({line_no, label, {}});
            ids.push_back(id);
        }
        auto& rec = records[it->second];
        if (rec.label != label) {
            throw fail("pixel " + std::to_string(id) + " has inconsistent labels ('" + rec.label + "' vs '" +
                       label + "')");
        }
        if (rec.realizations.size() <= r) rec.realizations.resize(r + 1);
        if (rec.realizations[r]) {
            throw fail("pixel " + std::to_string(id) + " repeats realization " + std::to_string(r));
        }
        rec.realizations[r] = bands;
        max_realization = std::max(max_realization, r);
    }
    if (records.empty()) throw DataError("cube file has no data rows");

    const std::size_t num_r = max_realization + 1;
    std::vector<std::string> class_names;
    if (allowed) {
        class_names = *allowed;
    } else {
        for (const auto& rec : records) {
            if (!rec.label.empty()) class_names.push_back(rec.label);
        }
        std::sort(class_names.begin(), class_names.end());
        class_names.erase(std::unique(class_names.begin(), class_names.end()), class_names.end());
    }

    std::vector<double> values;
    values.reserve(records.size() * num_r * p);
    std::vector<int> labels;
    labels.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        std::size_t present = 0;
        for (const auto& rv : rec.realizations) present += rv.has_value() ? 1 : 0;
        if (present != num_r) {
            throw DataError("pixel " + std::to_string(ids[i]) + " (first seen on line " +
                            std::to_string(rec.first_line) + ") has " + std::to_string(present) + " of " +
                            std::to_string(num_r) + " realizations");
        }
        for (const auto& rv : rec.realizations) values.insert(values.end(), rv->begin(), rv->end());
        if (rec.label.empty()) {
            labels.push_back(DataCube::kUnlabeled);
        } else {
            const auto it = std::lower_bound(class_names.begin(), class_names.end(), rec.label);
            labels.push_back(static_cast<int>(it - class_names.begin()));
        }
    }
    return DataCube(p, num_r, std::move(ids), std::move(values), std::move(class_names), std::move(labels));
}

inline DataCube load_cube(const std::filesystem::path& path, const CubeSchema& schema = {}) {
    const std::string text = detail::read_file(path);
    try {
        return parse_cube(text, schema);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline void write_cube(std::ostream& out, const DataCube& cube) {
    std::string buf = "pixel_id,realization,label";
    for (std::size_t b = 0; b < cube.num_bands(); ++b) buf += ",b" + std::to_string(b);
    buf += '\n';
    out << buf;
    for (std::size_t i = 0; i < cube.num_pixels(); ++i) {
        const int l = cube.labels()[i];
        const std::string& label = l == DataCube::kUnlabeled ? std::string() : cube.class_names()[l];
        for (std::size_t r = 0; r < cube.num_realizations(); ++r) {
            buf.clear();
            buf += std::to_string(cube.pixel_ids()[i]);
            buf += ',';
            buf += std::to_string(r);
            buf += ',';
            buf += label;
            for (double v : cube.observation(i, r)) {
                buf += ',';
                detail::append_double(buf, v);
            }
            buf += '\n';
            out << buf;
        }
    }
}

inline void save_cube(const DataCube& cube, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    write_cube(out, cube);
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

}  // namespace bqda
