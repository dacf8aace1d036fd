#pragma once

// Subcommand implementations behind the `bqda` executable. Kept in a header
// so tests can drive them in-process through run().

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bqda/classifiers.hpp"
#include "bqda/data_cube.hpp"
#include "bqda/ensemble.hpp"
#include "bqda/error.hpp"
#include "bqda/metrics.hpp"
#include "bqda/model_io.hpp"
#include "bqda/pca.hpp"
#include "bqda/report.hpp"
#include "bqda/split.hpp"
#include "bqda/synth.hpp"

namespace bqda::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitFit = 3,
    kExitEval = 4,
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const FitError*>(&e)) return kExitFit;
    if (dynamic_cast<const EvalError*>(&e)) return kExitEval;
    if (dynamic_cast<const DataError*>(&e)) return kExitData;
    return kExitUsage;
}

// ---------------------------------------------------------------------------
// helpers

inline json read_json_file(const fs::path& path, bool config) {
    std::ifstream in(path);
    if (!in) {
        const std::string msg = "cannot open '" + path.string() + "'";
        if (config) throw ConfigError(msg);
        throw DataError(msg);
    }
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        const std::string msg = path.string() + ": " + e.what();
        if (config) throw ConfigError(msg);
        throw DataError(msg);
    }
}

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir.string() + "'");
}

inline void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) ensure_directory(file.parent_path());
}

inline std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

struct SplitManifest {
    std::string cube;
    double fraction = 0.0;
    std::uint64_t seed = 0;
    std::size_t num_labeled = 0;
    std::vector<PixelId> train_pixel_ids;
};

inline json to_json(const SplitManifest& m) {
    return {{"format_version", 1},
            {"cube", m.cube},
            {"fraction", m.fraction},
            {"seed", m.seed},
            {"num_labeled", m.num_labeled},
            {"train_pixel_ids", m.train_pixel_ids}};
}

inline SplitManifest manifest_from_json(const json& j) {
    try {
        SplitManifest m;
        m.cube = j.value("cube", std::string());
        m.fraction = j.value("fraction", 0.0);
        m.seed = j.value("seed", std::uint64_t{0});
        m.num_labeled = j.value("num_labeled", std::size_t{0});
        m.train_pixel_ids = j.at("train_pixel_ids").get<std::vector<PixelId>>();
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid split manifest: ") + e.what());
    }
}

inline std::string ensemble_model_name(std::size_t r) {
    std::ostringstream s;
    s << "model_r" << std::setw(3) << std::setfill('0') << r << ".json";
    return s.str();
}

// Files named directly, or model.json / model_r*.json inside a directory.
inline std::vector<fs::path> expand_model_paths(const std::vector<fs::path>& paths) {
    std::vector<fs::path> out;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                const std::string name = entry.path().filename().string();
                if (name == "model.json" || (name.starts_with("model_r") && name.ends_with(".json"))) {
                    found.push_back(entry.path());
                }
            }
            std::sort(found.begin(), found.end());
            if (found.empty()) throw DataError("no model files in '" + p.string() + "'");
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

inline void require_same_catalog(const FittedModel& model, const ClassCatalog& catalog) {
    if (!(model.catalog() == catalog)) throw EvalError("model classes differ from the cube's classes");
}

// Catalog-index labels of the given pixels.
inline std::vector<std::size_t> truth_labels(const DataCube& cube, std::span<const std::size_t> pixels,
                                             const ClassCatalog& catalog) {
    std::vector<std::size_t> out;
    out.reserve(pixels.size());
    for (std::size_t l : cube.label_indices(pixels)) out.push_back(catalog.index_of(cube.class_names()[l]));
    return out;
}

inline ProbabilityTable prior_only_table(const PriorClassDistribution& q, const DataCube& cube,
                                         std::span<const std::size_t> pixels) {
    ProbabilityTable t;
    t.probabilities.resize(static_cast<Eigen::Index>(pixels.size()), static_cast<Eigen::Index>(q.size()));
    for (std::size_t k = 0; k < q.size(); ++k) t.probabilities.col(static_cast<Eigen::Index>(k)).setConstant(q[k]);
    t.pixel_ids = detail::ids_of(cube, pixels);
    return t;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
    fs::path spec;
    fs::path out;
    std::optional<std::uint64_t> seed;
};

inline void cmd_synth(const SynthOptions& opt, std::ostream& log) {
    SynthSpec spec = synth_spec_from_json(read_json_file(opt.spec, false));
    if (opt.seed) spec.seed = *opt.seed;
    const DataCube cube = synth_cube(spec);
    ensure_parent(opt.out);
    save_cube(cube, opt.out);
    std::vector<std::size_t> counts(cube.class_names().size(), 0);
    for (int l : cube.labels()) ++counts[static_cast<std::size_t>(l)];
    log << "wrote " << opt.out.string() << ": " << cube.num_pixels() << " pixels, " << cube.num_bands() << " bands, "
        << cube.num_realizations() << " realizations\n";
    for (std::size_t k = 0; k < counts.size(); ++k) {
        log << "  " << cube.class_names()[k] << ": " << counts[k] << " pixels\n";
    }
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    fs::path cube;
    ModelKind kind = ModelKind::BQDA;
    double fraction = 0.1;
    std::uint64_t seed = 0;
    std::vector<double> alpha;
    bool ensemble = false;
    fs::path out;
};

inline void cmd_train(const TrainOptions& opt, std::ostream& log) {
    if (opt.ensemble && opt.kind == ModelKind::BQDA) {
        throw ConfigError("--ensemble applies to qda and lda; bqda pools all realizations");
    }
    const DataCube cube = load_cube(opt.cube);
    const ClassCatalog catalog = cube.catalog();
    const Split split = split_pixels(cube, {opt.fraction, opt.seed});

    std::vector<FittedModel> models;
    if (opt.ensemble) {
        models = ensemble_fit(cube, opt.kind, split.train, catalog, opt.alpha);
    } else {
        models.push_back(fit_pooled(cube, opt.kind, split.train, catalog, opt.alpha));
    }

    ensure_directory(opt.out);
    if (opt.ensemble) {
        for (std::size_t r = 0; r < models.size(); ++r) save_model(models[r], opt.out / ensemble_model_name(r));
    } else {
        save_model(models.front(), opt.out / "model.json");
    }
    SplitManifest manifest;
    manifest.cube = opt.cube.string();
    manifest.fraction = opt.fraction;
    manifest.seed = opt.seed;
    manifest.num_labeled = split.train.size() + split.validation.size();
    manifest.train_pixel_ids = detail::ids_of(cube, split.train);
    open_output(opt.out / "split.json") << to_json(manifest).dump(1) << '\n';

    log << "trained " << to_string(opt.kind) << (opt.ensemble ? " ensemble of " + std::to_string(models.size()) : "")
        << " on " << split.train.size() << " of " << manifest.num_labeled << " labeled pixels\n";
    const auto& first = models.front();
    for (std::size_t k = 0; k < catalog.size(); ++k) {
        log << "  " << catalog.name(k) << ": N = " << first.per_class()[k].count << "\n";
    }
    log << "wrote " << (opt.out / (opt.ensemble ? "model_r*.json" : "model.json")).string() << " and "
        << (opt.out / "split.json").string() << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

enum class PriorSource { Cube, Validation };

struct EvaluateOptions {
    fs::path cube;
    fs::path split;
    std::vector<fs::path> models;
    fs::path out;
    bool prior_only = false;
    bool permuted = false;
    std::optional<std::uint64_t> seed;
    PriorSource prior_source = PriorSource::Cube;
};

struct Evaluation {
    ProbabilityTable table;
    std::vector<std::size_t> truth;
    EvalReport report;
};

inline PriorClassDistribution prior_for(const DataCube& cube, const ClassCatalog& catalog,
                                        std::span<const std::size_t> validation, PriorSource source) {
    if (source == PriorSource::Validation) {
        return PriorClassDistribution::from_labels(truth_labels(cube, validation, catalog), catalog.size());
    }
    const auto labeled = cube.labeled_pixels();
    return PriorClassDistribution::from_labels(truth_labels(cube, labeled, catalog), catalog.size());
}

inline Evaluation cmd_evaluate(const EvaluateOptions& opt, std::ostream& log) {
    const DataCube cube = load_cube(opt.cube);
    const ClassCatalog catalog = cube.catalog();
    const SplitManifest manifest = manifest_from_json(read_json_file(opt.split, false));

    std::vector<bool> in_train(cube.num_pixels(), false);
    for (PixelId id : manifest.train_pixel_ids) {
        const auto px = cube.find_pixel(id);
        if (!px) throw DataError("split manifest names pixel " + std::to_string(id) + " which is not in the cube");
        in_train[*px] = true;
    }
    std::vector<std::size_t> validation;
    for (std::size_t px : cube.labeled_pixels()) {
        if (!in_train[px]) validation.push_back(px);
    }
    if (validation.empty()) throw EvalError("no validation pixels (every labeled pixel is in the training split)");

    const auto q = prior_for(cube, catalog, validation, opt.prior_source);
    const std::uint64_t perm_seed = opt.seed.value_or(manifest.seed);

    ProbabilityTable table;
    json meta = {{"cube", opt.cube.string()},
                 {"training_fraction", manifest.fraction},
                 {"split_seed", manifest.seed},
                 {"num_train", manifest.train_pixel_ids.size()},
                 {"num_validation", validation.size()},
                 {"num_realizations", cube.num_realizations()},
                 {"prior_source", opt.prior_source == PriorSource::Cube ? "cube" : "validation"}};

    if (opt.prior_only) {
        table = prior_only_table(q, cube, validation);
        meta["model_kind"] = "prior";
        meta["protocol"] = "prior_only";
        meta["num_models"] = 0;
    } else {
        if (opt.models.empty()) throw ConfigError("evaluate needs --models (or --prior-only)");
        std::vector<FittedModel> models;
        for (const auto& p : expand_model_paths(opt.models)) models.push_back(load_model(p));
        for (const auto& m : models) {
            require_same_catalog(m, catalog);
            detail::check_bands(m, cube);
            if (m.kind() != models.front().kind()) throw EvalError("ensemble mixes model kinds");
        }
        meta["model_kind"] = std::string(to_string(models.front().kind()));
        meta["num_models"] = models.size();
        if (models.size() > 1) {
            table = ensemble_predict(models, cube, validation, perm_seed);
            meta["protocol"] = "ensemble_permuted";
            meta["permutation_seed"] = perm_seed;
        } else if (opt.permuted) {
            const std::vector<FittedModel> copies(cube.num_realizations(), models.front());
            table = ensemble_predict(copies, cube, validation, perm_seed);
            meta["protocol"] = "single_model_permuted";
            meta["permutation_seed"] = perm_seed;
        } else {
            table = bqda_predict_averaged(models.front(), cube, validation);
            meta["protocol"] = "realization_average";
        }
    }

    auto truth = truth_labels(cube, validation, catalog);
    EvalReport report = evaluate_table(table, truth, catalog, q, std::move(meta));
    Evaluation ev{std::move(table), std::move(truth), std::move(report)};

    ensure_directory(opt.out);
    open_output(opt.out / "report.json") << to_json(ev.report).dump(1) << '\n';
    {
        std::vector<std::string> names;
        for (std::size_t t : ev.truth) names.push_back(catalog.name(t));
        auto out = open_output(opt.out / "probabilities.csv");
        write_probability_csv(out, ev.table, catalog, names);
    }
    {
        auto out = open_output(opt.out / "confusion.csv");
        write_confusion_csv(out, ev.report.confusion);
    }
    log << "evaluated " << validation.size() << " validation pixels: f1 = " << ev.report.f1
        << ", f2 = " << ev.report.f2 << ", xe_norm = " << ev.report.xe_norm << ", bs_norm = " << ev.report.bs_norm
        << "\n";
    return ev;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkOverrides {
    std::optional<fs::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> fraction;
    std::optional<ModelKind> model;
    std::optional<std::vector<double>> alpha;
    bool ensemble = false;
};

struct ExternalTable {
    std::string name;
    double fraction = 0.0;
    std::uint64_t seed = 0;
    fs::path probabilities;
};

// Experimental grid: models x fractions x seeds.
struct ExperimentConfig {
    std::optional<fs::path> cube_path;
    std::optional<SynthSpec> cube_synth;
    std::optional<fs::path> eval_cube_path;
    std::optional<SynthSpec> eval_cube_synth;
    std::vector<ModelKind> models;
    std::vector<double> fractions;
    std::vector<std::uint64_t> seeds;
    std::vector<double> alpha;
    bool ensemble = true;
    fs::path out = "benchmark_out";
    std::vector<ExternalTable> external;
};

inline ExperimentConfig experiment_config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("benchmark config must be a JSON object");
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    auto cube_source = [&](const char* key, std::optional<fs::path>& path, std::optional<SynthSpec>& synth) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (v.is_string()) {
            path = resolve(v.get<std::string>());
        } else if (v.is_object() && v.contains("synth")) {
            const auto& s = v.at("synth");
            synth = synth_spec_from_json(s.is_string() ? read_json_file(resolve(s.get<std::string>()), false) : s);
        } else {
            throw ConfigError(std::string("'") + key + "' must be a path or {\"synth\": spec}");
        }
    };
    ExperimentConfig cfg;
    try {
        cube_source("cube", cfg.cube_path, cfg.cube_synth);
        cube_source("eval_cube", cfg.eval_cube_path, cfg.eval_cube_synth);
        for (const auto& m : j.value("models", json::array())) cfg.models.push_back(parse_model_kind(m.get<std::string>()));
        cfg.fractions = j.value("fractions", std::vector<double>{});
        cfg.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
        cfg.alpha = j.value("alpha", std::vector<double>{});
        cfg.ensemble = j.value("ensemble", true);
        if (j.contains("out")) cfg.out = resolve(j.at("out").get<std::string>());
        for (const auto& e : j.value("external", json::array())) {
            cfg.external.push_back({e.at("name").get<std::string>(), e.at("fraction").get<double>(),
                                    e.value("seed", std::uint64_t{0}), resolve(e.at("probabilities").get<std::string>())});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid benchmark config: ") + e.what());
    }
    if (!cfg.cube_path && !cfg.cube_synth) throw ConfigError("benchmark config needs 'cube'");
    return cfg;
}

struct BenchmarkRow {
    std::string model;
    double fraction = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    double f1 = 0.0, f2 = 0.0, xe = 0.0, bs = 0.0;
    std::optional<double> train_seconds;
    std::optional<double> eval_seconds;
    std::string message;
};

inline void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    double fastest_train = std::numeric_limits<double>::infinity();
    double fastest_eval = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        if (!r.ok) continue;
        if (r.train_seconds) fastest_train = std::min(fastest_train, std::max(*r.train_seconds, 1e-9));
        if (r.eval_seconds) fastest_eval = std::min(fastest_eval, std::max(*r.eval_seconds, 1e-9));
    }
    out << "model,fraction,seed,status,n_train,n_validation,f1,f2,xe_norm,bs_norm,train_seconds,eval_seconds,"
           "train_cost_relative,eval_cost_relative,message\n";
    for (const auto& r : rows) {
        out << r.model << ',' << detail::format_double(r.fraction) << ',' << r.seed << ',' << (r.ok ? "ok" : "error")
            << ',' << r.n_train << ',' << r.n_validation << ',';
        if (r.ok) {
            out << detail::format_double(r.f1) << ',' << detail::format_double(r.f2) << ','
                << detail::format_double(r.xe) << ',' << detail::format_double(r.bs) << ',';
        } else {
            out << ",,,,";
        }
        auto field = [&](const std::optional<double>& t, double scale) {
            if (r.ok && t) out << detail::format_double(scale > 0.0 ? std::max(*t, 1e-9) / scale : *t);
            out << ',';
        };
        field(r.train_seconds, 0.0);
        field(r.eval_seconds, 0.0);
        field(r.train_seconds, fastest_train);
        if (r.ok && r.eval_seconds) out << detail::format_double(std::max(*r.eval_seconds, 1e-9) / fastest_eval);
        out << ',' << csv_quote(r.message) << '\n';
    }
}

inline std::vector<BenchmarkRow> cmd_benchmark(const fs::path& config_path, const BenchmarkOverrides& over,
                                               std::ostream& log) {
    ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path, true), config_path.parent_path());
    if (over.out) cfg.out = *over.out;
    if (over.seed) cfg.seeds = {*over.seed};
    if (over.fraction) cfg.fractions = {*over.fraction};
    if (over.model) cfg.models = {*over.model};
    if (over.alpha) cfg.alpha = *over.alpha;
    if (over.ensemble) cfg.ensemble = true;
    if (cfg.models.empty() && cfg.external.empty()) throw ConfigError("benchmark config lists no models");
    if (cfg.fractions.empty() && !cfg.models.empty()) throw ConfigError("benchmark config lists no fractions");
    if (cfg.seeds.empty()) throw ConfigError("benchmark config lists no seeds");
    for (double f : cfg.fractions) {
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("fractions must lie in (0, 1)");
    }
    ensure_directory(cfg.out);

    const DataCube train_cube = cfg.cube_path ? load_cube(*cfg.cube_path) : synth_cube(*cfg.cube_synth);
    std::optional<DataCube> eval_storage;
    if (cfg.eval_cube_path) eval_storage.emplace(load_cube(*cfg.eval_cube_path));
    if (cfg.eval_cube_synth) eval_storage.emplace(synth_cube(*cfg.eval_cube_synth));
    const DataCube& eval_cube = eval_storage ? *eval_storage : train_cube;
    const ClassCatalog catalog = train_cube.catalog();
    if (!(eval_cube.catalog() == catalog)) throw DataError("evaluation cube classes differ from training cube classes");
    if (eval_cube.num_bands() != train_cube.num_bands()) throw DataError("evaluation cube band count differs");
    const auto q = PriorClassDistribution::from_labels(truth_labels(eval_cube, eval_cube.labeled_pixels(), catalog),
                                                       catalog.size());
    log << "benchmark: " << train_cube.num_pixels() << " pixels x " << train_cube.num_bands() << " bands x "
        << train_cube.num_realizations() << " realizations\n";

    // Validation pixels of the evaluation cube matching a training-cube split.
    auto validation_in_eval = [&](const Split& split) {
        std::vector<std::size_t> out;
        out.reserve(split.validation.size());
        for (std::size_t px : split.validation) {
            const PixelId id = train_cube.pixel_ids()[px];
            const auto e = eval_cube.find_pixel(id);
            if (!e || !eval_cube.is_labeled(*e)) {
                throw DataError("validation pixel " + std::to_string(id) + " missing or unlabeled in evaluation cube");
            }
            out.push_back(*e);
        }
        return out;
    };

    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point t0) {
        return std::chrono::duration<double>(clock::now() - t0).count();
    };

    std::vector<BenchmarkRow> rows;
    for (ModelKind kind : cfg.models) {
        for (double fraction : cfg.fractions) {
            for (std::uint64_t seed : cfg.seeds) {
                BenchmarkRow row;
                row.model = std::string(to_string(kind));
                row.fraction = fraction;
                row.seed = seed;
                try {
                    const Split split = split_pixels(train_cube, {fraction, seed});
                    const auto validation = validation_in_eval(split);
                    row.n_train = split.train.size();
                    row.n_validation = validation.size();
                    const bool use_ensemble = cfg.ensemble && kind != ModelKind::BQDA;

                    auto t0 = clock::now();
                    std::vector<FittedModel> models;
                    if (use_ensemble) {
                        models = ensemble_fit(train_cube, kind, split.train, catalog, cfg.alpha);
                    } else {
                        models.push_back(fit_pooled(train_cube, kind, split.train, catalog, cfg.alpha));
                    }
                    row.train_seconds = seconds_since(t0);

                    t0 = clock::now();
                    const ProbabilityTable table = use_ensemble
                                                       ? ensemble_predict(models, eval_cube, validation, seed)
                                                       : bqda_predict_averaged(models.front(), eval_cube, validation);
                    const auto truth = truth_labels(eval_cube, validation, catalog);
                    const EvalReport rep = evaluate_table(table, truth, catalog, q);
                    row.eval_seconds = seconds_since(t0);
                    row.f1 = rep.f1;
                    row.f2 = rep.f2;
                    row.xe = rep.xe_norm;
                    row.bs = rep.bs_norm;
                    row.ok = true;
                } catch (const Error& e) {
                    row.message = e.what();
                }
                log << "  " << row.model << " fraction=" << fraction << " seed=" << seed << ": "
                    << (row.ok ? "bs_norm=" + detail::format_double(row.bs) : "error: " + row.message) << "\n";
                rows.push_back(std::move(row));
            }
        }
    }

    for (const auto& ext : cfg.external) {
        BenchmarkRow row;
        row.model = ext.name;
        row.fraction = ext.fraction;
        row.seed = ext.seed;
        try {
            const ProbabilityTable table = parse_probability_csv(detail::read_file(ext.probabilities), catalog);
            std::vector<std::size_t> pixels;
            for (PixelId id : table.pixel_ids) {
                const auto e = eval_cube.find_pixel(id);
                if (!e || !eval_cube.is_labeled(*e)) {
                    throw DataError("external table pixel " + std::to_string(id) + " missing or unlabeled");
                }
                pixels.push_back(*e);
            }
            row.n_validation = pixels.size();
            const EvalReport rep = evaluate_table(table, truth_labels(eval_cube, pixels, catalog), catalog, q);
            row.f1 = rep.f1;
            row.f2 = rep.f2;
            row.xe = rep.xe_norm;
            row.bs = rep.bs_norm;
            row.ok = true;
        } catch (const Error& e) {
            row.message = e.what();
        }
        rows.push_back(std::move(row));
    }

    auto out = open_output(cfg.out / "metrics.csv");
    write_benchmark_csv(out, rows);
    log << "wrote " << (cfg.out / "metrics.csv").string() << " (" << rows.size() << " rows)\n";
    return rows;
}

// ---------------------------------------------------------------------------
// pca

struct PcaOptions {
    fs::path cube;
    std::size_t realization = 0;
    fs::path out;
    bool pool = false;
    std::size_t components = 2;
};

inline fs::path pca_sidecar_path(const fs::path& out) {
    fs::path side = out;
    side.replace_extension(".explained.csv");
    return side;
}

inline PCAResult cmd_pca(const PcaOptions& opt, std::ostream& log) {
    const DataCube cube = load_cube(opt.cube);
    if (opt.realization >= cube.num_realizations()) {
        throw EvalError("realization " + std::to_string(opt.realization) + " out of range (cube has " +
                        std::to_string(cube.num_realizations()) + ")");
    }
    std::vector<std::size_t> all(cube.num_pixels());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const Eigen::MatrixXd rows = cube.realization_rows(all, opt.realization);
    PCAResult pca = pca_project(opt.pool ? cube.pooled_rows(all) : rows, opt.components);
    const Eigen::MatrixXd scores = opt.pool ? pca.transform(rows) : pca.scores;

    ensure_parent(opt.out);
    {
        auto out = open_output(opt.out);
        std::string buf = "pixel_id,label";
        for (std::size_t c = 0; c < opt.components; ++c) buf += ",pc" + std::to_string(c + 1);
        out << buf << '\n';
        for (std::size_t i = 0; i < cube.num_pixels(); ++i) {
            buf = std::to_string(cube.pixel_ids()[i]) + ',';
            const int l = cube.labels()[i];
            if (l != DataCube::kUnlabeled) buf += cube.class_names()[static_cast<std::size_t>(l)];
            for (Eigen::Index c = 0; c < scores.cols(); ++c) {
                buf += ',';
                detail::append_double(buf, scores(static_cast<Eigen::Index>(i), c));
            }
            out << buf << '\n';
        }
    }
    std::string line = "explained_variance";
    for (Eigen::Index c = 0; c < pca.explained.size(); ++c) line += ',' + detail::format_double(pca.explained(c));
    open_output(pca_sidecar_path(opt.out)) << line << '\n';
    log << line << '\n';
    return pca;
}

// ---------------------------------------------------------------------------
// entry point

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian QDA with measurement-uncertain inputs: synthesis, training, evaluation, benchmarking"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic data cube from a JSON spec");
    SynthOptions synth_opt;
    std::uint64_t synth_seed = 0;
    synth->add_option("spec", synth_opt.spec, "synthesis spec (JSON)")->required();
    synth->add_option("--out", synth_opt.out, "output cube CSV")->required();
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "override the spec's seed");

    auto* train = app.add_subcommand("train", "fit a model on a random training split");
    TrainOptions train_opt;
    std::string train_kind = "bqda";
    train->add_option("--cube", train_opt.cube, "labeled cube CSV")->required();
    train->add_option("--model", train_kind, "bqda, qda or lda")->check(CLI::IsMember({"bqda", "qda", "lda"}));
    train->add_option("--fraction", train_opt.fraction, "training fraction in (0, 1)");
    train->add_option("--seed", train_opt.seed, "split seed");
    train->add_option("--alpha", train_opt.alpha, "Dirichlet hyperparameters, comma separated")->delimiter(',');
    train->add_flag("--ensemble", train_opt.ensemble, "one model per realization (qda/lda)");
    train->add_option("--out", train_opt.out, "output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score models on the validation pixels of a split");
    EvaluateOptions eval_opt;
    std::uint64_t eval_seed = 0;
    std::string prior_source = "cube";
    evaluate->add_option("--cube", eval_opt.cube, "labeled cube CSV")->required();
    evaluate->add_option("--split", eval_opt.split, "split manifest written by train")->required();
    evaluate->add_option("--models", eval_opt.models, "model files or a train output directory");
    evaluate->add_option("--out", eval_opt.out, "output directory")->required();
    evaluate->add_flag("--prior-only", eval_opt.prior_only, "score the prior-class predictor instead of a model");
    evaluate->add_flag("--permuted", eval_opt.permuted, "single model: evaluate via the permuted-ensemble path");
    auto* eval_seed_opt = evaluate->add_option("--seed", eval_seed, "permutation seed (defaults to the split seed)");
    evaluate->add_option("--prior-source", prior_source, "class prior from all cube labels or validation labels")
        ->check(CLI::IsMember({"cube", "validation"}));

    auto* bench = app.add_subcommand("benchmark", "run a models x fractions x seeds grid");
    fs::path bench_config;
    BenchmarkOverrides over;
    std::string bench_out, bench_model;
    std::uint64_t bench_seed = 0;
    double bench_fraction = 0.0;
    std::vector<double> bench_alpha;
    bench->add_option("config", bench_config, "benchmark config (JSON)")->required();
    auto* bench_out_opt = bench->add_option("--out", bench_out, "output directory");
    auto* bench_seed_opt = bench->add_option("--seed", bench_seed, "run a single seed");
    auto* bench_fraction_opt = bench->add_option("--fraction", bench_fraction, "run a single fraction");
    auto* bench_model_opt =
        bench->add_option("--model", bench_model, "run a single model")->check(CLI::IsMember({"bqda", "qda", "lda"}));
    auto* bench_alpha_opt = bench->add_option("--alpha", bench_alpha, "Dirichlet hyperparameters")->delimiter(',');
    bench->add_flag("--ensemble", over.ensemble, "force per-realization ensembles for qda/lda");

    auto* pca = app.add_subcommand("pca", "principal components of one realization");
    PcaOptions pca_opt;
    pca->add_option("--cube", pca_opt.cube, "cube CSV")->required();
    pca->add_option("--realization", pca_opt.realization, "realization index");
    pca->add_option("--out", pca_opt.out, "output CSV")->required();
    pca->add_option("--components", pca_opt.components, "number of components");
    pca->add_flag("--pool", pca_opt.pool, "fit components on all realizations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) {
            if (*synth_seed_opt) synth_opt.seed = synth_seed;
            cmd_synth(synth_opt, out);
        } else if (*train) {
            train_opt.kind = parse_model_kind(train_kind);
            cmd_train(train_opt, out);
        } else if (*evaluate) {
            if (*eval_seed_opt) eval_opt.seed = eval_seed;
            eval_opt.prior_source = prior_source == "validation" ? PriorSource::Validation : PriorSource::Cube;
            cmd_evaluate(eval_opt, out);
        } else if (*bench) {
            if (*bench_out_opt) over.out = fs::path(bench_out);
            if (*bench_seed_opt) over.seed = bench_seed;
            if (*bench_fraction_opt) over.fraction = bench_fraction;
            if (*bench_model_opt) over.model = parse_model_kind(bench_model);
            if (*bench_alpha_opt) over.alpha = bench_alpha;
            cmd_benchmark(bench_config, over, out);
        } else if (*pca) {
            cmd_pca(pca_opt, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitOk;
}

}  // namespace bqda::cli
