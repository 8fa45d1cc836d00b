#pragma once

// Command-line driver: prepare, train, evaluate and predict, all driven by a
// JSON run config. `run` returns the process exit code:
//   0 success, 1 usage or configuration error, 2 I/O or format error,
//   3 numerical divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmf/data.hpp"
#include "dmf/errors.hpp"
#include "dmf/eval.hpp"
#include "dmf/model.hpp"
#include "dmf/quantizer.hpp"
#include "dmf/rng.hpp"
#include "dmf/train.hpp"
#include "json.hpp"

namespace dmf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitDivergence = 3;

// ---------------------------------------------------------------------------
// Run config

struct DataConfig {
    std::string path;
    RatingFormat format = RatingFormat::movielens;
    double min_rating = 1.0;
    double max_rating = 5.0;
    std::size_t levels = 5;
};

struct RunConfig {
    DataConfig data;
    SplitFractions split;
    std::optional<std::pair<double, double>> holdout;  ///< (rows, cols)
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden{512, 128};
    std::size_t latent = 64;
    Activation activation = Activation::selu;
    TrainConfig train;
    std::string output_dir;

    std::uint64_t sub_seed(std::string_view name) const { return derive_seed(seed, name); }
    BranchConfig row_branch(std::size_t input_dim) const { return {input_dim, hidden, latent, activation}; }
    BranchConfig col_branch(std::size_t input_dim) const { return {input_dim, hidden, latent, activation}; }
    RatingScale scale() const { return RatingScale(data.min_rating, data.max_rating); }
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// Parses a run config. Relative paths are resolved against `base_dir`.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir = {}) {
    using detail::read;
    detail::reject_unknown(j, {"data", "split", "areas", "seed", "model", "train", "output_dir"}, "config");
    RunConfig c;
    if (!j.contains("data")) throw ConfigError("config.data is required");
    const json& d = j.at("data");
    detail::reject_unknown(d, {"path", "format", "min_rating", "max_rating", "levels"}, "data");
    read(d, "path", c.data.path, "data");
    if (c.data.path.empty()) throw ConfigError("data.path is required");
    c.data.path = detail::resolve(base_dir, c.data.path).string();
    std::string format = "movielens";
    read(d, "format", format, "data");
    try {
        c.data.format = parse_rating_format(format);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    read(d, "min_rating", c.data.min_rating, "data");
    read(d, "max_rating", c.data.max_rating, "data");
    read(d, "levels", c.data.levels, "data");
    if (!(c.data.max_rating > c.data.min_rating)) throw ConfigError("data.max_rating must exceed data.min_rating");
    if (c.data.levels < 2) throw ConfigError("data.levels must be >= 2");

    if (j.contains("split")) {
        const json& s = j.at("split");
        detail::reject_unknown(s, {"train", "validation", "test"}, "split");
        read(s, "train", c.split.train, "split");
        read(s, "validation", c.split.validation, "split");
        read(s, "test", c.split.test, "split");
    }
    c.split.validate();
    if (j.contains("areas") && !j.at("areas").is_null()) {
        const json& a = j.at("areas");
        detail::reject_unknown(a, {"row_holdout", "col_holdout"}, "areas");
        std::pair<double, double> h{0.0, 0.0};
        read(a, "row_holdout", h.first, "areas");
        read(a, "col_holdout", h.second, "areas");
        if (!(h.first > 0.0 && h.first < 1.0 && h.second > 0.0 && h.second < 1.0))
            throw ConfigError("areas holdout fractions must lie in (0, 1)");
        c.holdout = h;
    }
    read(j, "seed", c.seed, "config");

    if (j.contains("model")) {
        const json& m = j.at("model");
        detail::reject_unknown(m, {"hidden", "latent", "activation"}, "model");
        read(m, "hidden", c.hidden, "model");
        read(m, "latent", c.latent, "model");
        std::string act = activation_name(c.activation);
        read(m, "activation", act, "model");
        try {
            c.activation = parse_activation(act);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (c.latent == 0 || std::find(c.hidden.begin(), c.hidden.end(), 0u) != c.hidden.end())
        throw ConfigError("model layer widths must be >= 1");

    if (j.contains("train")) {
        const json& t = j.at("train");
        detail::reject_unknown(t,
                               {"mode", "gamma", "gamma1", "gamma2", "learning_rate", "boundary_learning_rate",
                                "batch_size", "max_epochs", "early_stop_patience", "lambda_start", "lambda_end",
                                "residual_quantization"},
                               "train");
        std::string mode = mode_name(c.train.mode);
        read(t, "mode", mode, "train");
        c.train.mode = parse_mode(mode);
        read(t, "gamma", c.train.gamma, "train");
        read(t, "gamma1", c.train.gamma1, "train");
        read(t, "gamma2", c.train.gamma2, "train");
        read(t, "learning_rate", c.train.learning_rate, "train");
        read(t, "boundary_learning_rate", c.train.boundary_learning_rate, "train");
        read(t, "batch_size", c.train.batch_size, "train");
        read(t, "max_epochs", c.train.max_epochs, "train");
        read(t, "early_stop_patience", c.train.early_stop_patience, "train");
        read(t, "lambda_start", c.train.lambda_start, "train");
        read(t, "lambda_end", c.train.lambda_end, "train");
        read(t, "residual_quantization", c.train.residual_quantization, "train");
    }
    c.train.validate();
    std::string out;
    read(j, "output_dir", out, "config");
    if (!out.empty()) c.output_dir = detail::resolve(base_dir, out).string();
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(j, fs::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Shared plumbing

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    std::string output_dir;
};

struct Workspace {
    RunConfig config;
    fs::path out;
    bool deterministic = false;

    fs::path file(const std::string& name) const { return out / name; }
};

inline Workspace open_workspace(const Options& o) {
    if (o.config.empty()) throw ConfigError("--config is required");
    Workspace w{load_run_config(o.config), {}, o.deterministic};
    if (o.seed) w.config.seed = *o.seed;
    if (!o.output_dir.empty()) w.config.output_dir = o.output_dir;
    if (w.config.output_dir.empty()) throw ConfigError("no output directory (set output_dir or --output-dir)");
    w.out = w.config.output_dir;
    return w;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string id_map_csv(const char* header, const std::vector<std::string>& ids) {
    std::ostringstream out;
    out << "index," << header << '\n';
    for (std::size_t k = 0; k < ids.size(); ++k) out << k << ',' << ids[k] << '\n';
    return out.str();
}

/// Ratings, splits and model inputs as prepared for a workspace.
struct Prepared {
    RatingMatrix scaled;
    SplitManifest manifest;
    AreaSplit areas;
    InputIndex inputs;
};

inline RatingMatrix load_ratings(const RunConfig& c) {
    if (!fs::exists(c.data.path)) throw IoError("ratings file '" + c.data.path + "' does not exist");
    return parse_movielens(c.data.path, c.data.format, c.scale());
}

inline Prepared load_prepared(const Workspace& w) {
    RatingMatrix scaled = scale(load_ratings(w.config));
    const fs::path manifest_path = w.file("manifest.json");
    if (!fs::exists(manifest_path))
        throw IoError("split manifest '" + manifest_path.string() + "' not found; run 'prepare' first");
    SplitManifest manifest = load_manifest(manifest_path.string());
    AreaSplit areas = manifest.area_split_for(scaled);
    InputIndex inputs(scaled, manifest.split.train, areas.seen_rows, areas.seen_cols);
    return {std::move(scaled), std::move(manifest), std::move(areas), std::move(inputs)};
}

inline void check_model_dims(const DmfModel& model, const InputIndex& inputs) {
    const std::size_t mr = model.row_branch.config.input_dim, mc = model.col_branch.config.input_dim;
    if (mr != inputs.row_dim() || mc != inputs.col_dim()) {
        throw DimensionError("model expects row inputs of length " + std::to_string(mr) + " and column inputs of length " +
                             std::to_string(mc) + "; prepared data has " + std::to_string(inputs.row_dim()) +
                             " seen columns and " + std::to_string(inputs.col_dim()) + " seen rows");
    }
}

inline std::string fixed(double v, int digits = 4) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(digits);
    out << v;
    return out.str();
}

// ---------------------------------------------------------------------------
// Commands

/// Parses the ratings, draws the entry split and (optionally) the row/column
/// holdout, and writes manifest.json, stats.json, users.csv and items.csv.
inline void cmd_prepare(const Workspace& w, std::ostream& log) {
    const RunConfig& c = w.config;
    const RatingMatrix raw = load_ratings(c);
    SplitManifest man;
    man.seed = c.seed;
    man.fractions = c.split;
    man.rows = raw.rows();
    man.cols = raw.cols();
    man.entries = raw.size();
    man.split = random_split(raw, c.split, c.sub_seed("split"));
    if (c.holdout) {
        const AreaSplit a = area_split(raw, c.holdout->first, c.holdout->second, c.sub_seed("areas"));
        man.areas = AreaRecipe{c.holdout->first, c.holdout->second, a.seen_rows.members(), a.seen_cols.members()};
    }
    const AreaSplit areas = man.area_split_for(raw);

    fs::create_directories(w.out);
    save_manifest(man, w.file("manifest.json").string());
    ojson stats;
    stats["rows"] = raw.rows();
    stats["cols"] = raw.cols();
    stats["entries"] = raw.size();
    stats["density"] = static_cast<double>(raw.size()) / (static_cast<double>(raw.rows()) * static_cast<double>(raw.cols()));
    stats["train"] = man.split.train.size();
    stats["validation"] = man.split.validation.size();
    stats["test"] = man.split.test.size();
    stats["seen_rows"] = areas.seen_rows.size();
    stats["seen_cols"] = areas.seen_cols.size();
    for (Area a : kAllAreas) stats["area_entries"][area_name(a)] = areas.area(a).size();
    write_text(w.file("stats.json"), stats.dump(1) + "\n");
    write_text(w.file("users.csv"), id_map_csv("user", raw.row_ids()));
    write_text(w.file("items.csv"), id_map_csv("item", raw.col_ids()));
    log << "prepared " << raw.rows() << "x" << raw.cols() << " matrix, " << raw.size() << " entries (train "
        << man.split.train.size() << ", validation " << man.split.validation.size() << ", test "
        << man.split.test.size() << ")\n";
}

/// Trains on training entries of area (I); validation uses area (I) too.
/// Writes model.bin (best validation weights), checkpoint.bin (final weights
/// and optimizer state), train_report.csv and train_summary.json.
inline void cmd_train(const Workspace& w, const std::string& resume_path, std::ostream& log) {
    const RunConfig& c = w.config;
    const Prepared p = load_prepared(w);
    const auto& area_one = p.areas.area(Area::I);
    TrainingData data{p.scaled, p.inputs, intersect(p.manifest.split.train, area_one),
                      intersect(p.manifest.split.validation, area_one)};

    TrainConfig tc = c.train;
    tc.seed = c.sub_seed("shuffle");
    DmfModel model;
    std::optional<OptimizerSnapshot> resume;
    if (!resume_path.empty()) {
        ModelFile f = load_model_file(resume_path);
        if (!f.optimizer) throw StateError("'" + resume_path + "' has no optimizer state; pass checkpoint.bin");
        if (tc.mode == TrainMode::dmf_d && !f.model.quantizer)
            throw ConfigError("config asks for dmf-d but the checkpoint is a real-valued model");
        model = std::move(f.model);
        resume = std::move(f.optimizer);
        check_model_dims(model, p.inputs);
    } else {
        model = init(c.row_branch(p.inputs.row_dim()), c.col_branch(p.inputs.col_dim()), c.sub_seed("init"), c.scale());
        if (tc.mode == TrainMode::dmf_d)
            model.quantizer = Quantizer::uniform(uniform_levels(-1.0, 1.0, c.data.levels), tc.lambda_start);
    }

    const TrainResult r = train(std::move(model), data, tc, resume ? &*resume : nullptr,
                                [&](const EpochRecord& e, const DmfModel&) {
                                    log << "epoch " << e.epoch << " loss " << fixed(e.train_loss, 6);
                                    if (!std::isnan(e.val_rmse)) log << " val_rmse " << fixed(e.val_rmse);
                                    if (!std::isnan(e.lambda)) log << " lambda " << fixed(e.lambda, 2);
                                    log << '\n';
                                });
    fs::create_directories(w.out);
    save_model(r.best, w.file("model.bin").string());
    save_model(r.last, w.file("checkpoint.bin").string(), &r.optimizer);
    write_text(w.file("train_report.csv"), r.report.to_csv(!w.deterministic));
    write_text(w.file("train_summary.json"), r.report.summary().dump(1) + "\n");
    log << "trained " << r.report.epochs.size() << " epochs";
    if (r.report.best_epoch) log << ", best epoch " << r.report.epochs[*r.report.best_epoch].epoch;
    log << '\n';
}

/// Test-split metrics, overall and per area. A real-valued model yields the
/// real-valued and rounded-baseline reports; a quantized model yields the
/// discrete and real-valued reports. `discrete_only` keeps only the discrete
/// report and requires a quantizer.
inline void cmd_evaluate(const Workspace& w, const std::string& model_path, bool discrete_only, std::ostream& log) {
    const Prepared p = load_prepared(w);
    const std::string path = model_path.empty() ? w.file("model.bin").string() : model_path;
    const DmfModel model = load_model(path);
    if (discrete_only && !model.quantizer) throw StateError("model lacks a quantizer; --discrete needs a dmf-d model");
    check_model_dims(model, p.inputs);
    const AreaSplit test = p.areas.restricted_to(p.manifest.split.test);
    const std::size_t levels = model.quantizer ? model.quantizer->levels().size() : w.config.data.levels;

    std::vector<MetricsReport> reports;
    if (model.quantizer) reports.push_back(evaluate_areas(model, p.inputs, p.scaled, test, EvalMode::discrete, levels));
    if (!discrete_only) {
        reports.push_back(evaluate_areas(model, p.inputs, p.scaled, test, EvalMode::real, levels));
        if (!model.quantizer)
            reports.push_back(evaluate_areas(model, p.inputs, p.scaled, test, EvalMode::rounded, levels));
    }
    fs::create_directories(w.out);
    std::string table;
    for (const MetricsReport& r : reports) {
        const std::string tag = r.mode == EvalMode::real ? "real" : r.mode == EvalMode::discrete ? "discrete" : "rounded";
        write_text(w.file("metrics_" + tag + ".csv"), r.to_csv());
        write_text(w.file("metrics_" + tag + ".json"), r.to_json().dump(1) + "\n");
        const std::string rows = r.area_table(eval_mode_name(r.mode));
        table += table.empty() ? rows : rows.substr(rows.find('\n', rows.find('\n') + 1) + 1);
        log << eval_mode_name(r.mode) << ": RMSE " << fixed(*r.overall.rmse) << " MAE " << fixed(*r.overall.mae)
            << " over " << r.overall.count << " test entries\n";
    }
    write_text(w.file("metrics_table.md"), table);
}

struct PredictRequest {
    std::string model_path;
    std::string user;
    std::string item;
    std::string pairs_file;         ///< CSV "user,item"
    std::string observations_file;  ///< CSV "user,item,rating" for new entities
    std::string out_file;
    bool discrete = false;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::string& path, std::vector<std::string> header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        for (std::string_view cell : dmf::detail::split_on(line, ",")) cells.emplace_back(dmf::detail::trim(cell));
        if (n == 1) {
            if (cells != header) {
                std::string want;
                for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
                throw ParseError(path, n, "expected header '" + want + "'");
            }
            continue;
        }
        if (cells.size() != header.size())
            throw ParseError(path, n, "expected " + std::to_string(header.size()) + " fields");
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline std::map<std::string, std::size_t> index_of(const std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> out;
    for (std::size_t k = 0; k < ids.size(); ++k) out.emplace(ids[k], k);
    return out;
}

}  // namespace detail

/// Predictions for (user, item) pairs, written as CSV
/// `user,item,area,prediction`. Known ids use their training entries as
/// inputs; ids missing from the data use rows of the observations file.
inline void cmd_predict(const Workspace& w, const PredictRequest& req, std::ostream& out) {
    const Prepared p = load_prepared(w);
    const DmfModel model = load_model(req.model_path.empty() ? w.file("model.bin").string() : req.model_path);
    if (req.discrete && !model.quantizer) throw StateError("model lacks a quantizer; --discrete needs a dmf-d model");
    check_model_dims(model, p.inputs);

    std::vector<std::pair<std::string, std::string>> pairs;
    if (!req.pairs_file.empty()) {
        for (auto& row : detail::read_csv(req.pairs_file, {"user", "item"})) pairs.push_back({row[0], row[1]});
    }
    if (!req.user.empty() || !req.item.empty()) {
        if (req.user.empty() || req.item.empty()) throw ConfigError("--user and --item must be given together");
        pairs.push_back({req.user, req.item});
    }
    if (pairs.empty()) throw ConfigError("nothing to predict: give --user/--item or --pairs");

    const auto users = detail::index_of(p.scaled.row_ids());
    const auto items = detail::index_of(p.scaled.col_ids());
    std::map<std::string, std::vector<std::pair<std::size_t, double>>> new_users, new_items;
    if (!req.observations_file.empty()) {
        const RatingScale s = p.scaled.scale();
        std::size_t line = 1;
        for (const auto& row : detail::read_csv(req.observations_file, {"user", "item", "rating"})) {
            ++line;
            const auto value = dmf::detail::to_double(row[2]);
            if (!value || *value < s.alpha() || *value > s.beta())
                throw ParseError(req.observations_file, line, "rating '" + row[2] + "' outside the rating scale");
            const auto u = users.find(row[0]);
            const auto i = items.find(row[1]);
            if (u == users.end() && i != items.end()) new_users[row[0]].push_back({i->second, s.scale(*value)});
            if (i == items.end() && u != users.end()) new_items[row[1]].push_back({u->second, s.scale(*value)});
        }
    }

    std::ostringstream csv;
    csv.precision(17);
    csv << "user,item,area,prediction\n";
    for (const auto& [user, item] : pairs) {
        Tensor x, y;
        bool row_seen = false, col_seen = false;
        if (const auto u = users.find(user); u != users.end()) {
            x = p.inputs.row_vector(u->second);
            row_seen = p.areas.seen_rows.contains(u->second);
        } else {
            const auto obs = p.inputs.external_row(new_users[user]);
            if (obs.empty()) throw ConfigError("cold entity needs observations: user '" + user + "' has none on known items");
            x = InputIndex::densify(obs, p.inputs.row_dim());
        }
        if (const auto i = items.find(item); i != items.end()) {
            y = p.inputs.col_vector(i->second);
            col_seen = p.areas.seen_cols.contains(i->second);
        } else {
            const auto obs = p.inputs.external_col(new_items[item]);
            if (obs.empty()) throw ConfigError("cold entity needs observations: item '" + item + "' has none from known users");
            y = InputIndex::densify(obs, p.inputs.col_dim());
        }
        const double value = req.discrete ? predict_discrete(model, x, y) : model.scale.unscale(predict(model, x, y));
        csv << user << ',' << item << ',' << area_name(area_of(row_seen, col_seen)) << ',' << value << '\n';
    }
    if (req.out_file.empty()) {
        out << csv.str();
    } else {
        write_text(req.out_file, csv.str());
    }
}

// ---------------------------------------------------------------------------
// Entry point

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const NumericError*>(&e)) return kExitDivergence;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const FormatError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
        return kExitIo;
    return kExitConfig;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Deep matrix factorization with real-valued and discrete outputs"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    std::uint64_t seed = 0;
    app.add_option("--config", opt.config, "JSON run config");
    auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
    app.add_flag("--deterministic", opt.deterministic, "Reproducible output files (no wall-clock times)");
    app.add_option("--output-dir", opt.output_dir, "Override the config output directory");

    auto* prepare = app.add_subcommand("prepare", "Split the ratings and write the manifest");
    auto* train_cmd = app.add_subcommand("train", "Train a model on the prepared split");
    std::string resume;
    train_cmd->add_option("--resume", resume, "Continue from a checkpoint.bin");
    auto* evaluate = app.add_subcommand("evaluate", "Test-split metrics, overall and per area");
    std::string eval_model;
    bool eval_discrete = false;
    evaluate->add_option("--model", eval_model, "Model file (default: <output-dir>/model.bin)");
    evaluate->add_flag("--discrete", eval_discrete, "Only the discrete report (dmf-d models)");
    auto* predict_cmd = app.add_subcommand("predict", "Predict ratings for user/item pairs");
    PredictRequest req;
    predict_cmd->add_option("--model", req.model_path, "Model file (default: <output-dir>/model.bin)");
    predict_cmd->add_option("--user", req.user, "User id");
    predict_cmd->add_option("--item", req.item, "Item id");
    predict_cmd->add_option("--pairs", req.pairs_file, "CSV with header user,item");
    predict_cmd->add_option("--observations", req.observations_file,
                            "CSV with header user,item,rating describing new users or items");
    predict_cmd->add_option("--out", req.out_file, "Write predictions here instead of standard output");
    predict_cmd->add_flag("--discrete", req.discrete, "Hard-quantized predictions (dmf-d models)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "dmf: " << e.what() << '\n';
        return kExitConfig;
    }
    if (*seed_opt) opt.seed = seed;

    try {
        const Workspace w = open_workspace(opt);
        if (*prepare) cmd_prepare(w, out);
        if (*train_cmd) cmd_train(w, resume, out);
        if (*evaluate) cmd_evaluate(w, eval_model, eval_discrete, out);
        if (*predict_cmd) cmd_predict(w, req, out);
    } catch (const std::exception& e) {
        err << "dmf: error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitOk;
}

}  // namespace dmf::cli
