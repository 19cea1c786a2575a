#include "gtdl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <omp.h>

#include "gtdl/extract.hpp"
#include "gtdl/io.hpp"
#include "gtdl/metrics.hpp"

namespace gtdl {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> variants{
        {"attn-full-node", true, MaskMode::Full, Readout::Node},
        {"attn-pruned-node", true, MaskMode::Pruned, Readout::Node},
        {"attn-full-graph", true, MaskMode::Full, Readout::Graph},
        {"attn-pruned-graph", true, MaskMode::Pruned, Readout::Graph},
        {"pgm", false, MaskMode::Full, Readout::Node},
    };
    return variants;
}

Variant parse_variant(const std::string& id) {
    for (const auto& v : all_variants())
        if (v.id == id) return v;
    throw UsageError("unknown model variant '" + id + "'");
}

// ------------------------------------------------------------------ tuning

std::vector<ModelConfig> sample_trials(const ModelConfig& base, std::size_t trials, SeededRng& rng) {
    if (trials == 0) throw UsageError("tuning needs at least one trial");
    static constexpr std::size_t kDims[] = {8, 16, 32, 64};
    std::vector<ModelConfig> out;
    ModelConfig first = base;
    first.layers = 3;
    first.dim = 32;
    first.learning_rate = 1e-3;
    out.push_back(first);
    for (std::size_t t = 1; t < trials; ++t) {
        ModelConfig c = base;
        c.layers = 1 + rng.uniform_index(4);
        c.dim = kDims[rng.uniform_index(4)];
        c.learning_rate = std::pow(10.0, rng.uniform(-5.0, -3.0));
        c.seed = derive_seed(base.seed, {t});
        out.push_back(c);
    }
    return out;
}

TuneResult tune_candidates(const Dataset& ds, const SplitPlan& split, const std::vector<ModelConfig>& candidates,
                           const TrainOptions& options) {
    if (candidates.empty()) throw UsageError("tuning needs at least one candidate");
    TuneResult result;
    result.best = candidates.front();
    if (candidates.size() == 1) {
        result.trials.push_back({candidates.front(), 0.0, 0, ""});
        return result;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        TrialRecord trial{candidates[i], std::numeric_limits<double>::infinity(), 0, ""};
        try {
            const auto fit = train(ds, split, candidates[i], options);
            const auto& tm = fit.trained;
            trial.val_hparam_mse = tm.model.loss(tm.inputs(ds, split.val_hparam), tm.targets(ds, split.val_hparam),
                                                 options.exec);
            trial.epochs_run = fit.epochs_run;
        } catch (const NonFiniteLoss&) {
            trial.error = "NonFiniteLoss";
        }
        if (trial.val_hparam_mse < best) {
            best = trial.val_hparam_mse;
            result.best = candidates[i];
            result.best_trial = i;
        }
        result.trials.push_back(std::move(trial));
    }
    return result;
}

TuneResult tune(const Dataset& ds, const SplitPlan& split, std::size_t trials, SeededRng& rng,
                const ModelConfig& base, const TrainOptions& options) {
    return tune_candidates(ds, split, sample_trials(base, trials, rng), options);
}

// ------------------------------------------------------------ config JSON

namespace {

template <class T>
T field(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config field '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw UsageError("unknown key '" + key + "' in " + where);
    }
}

bool valid_id(const std::string& id) {
    return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
}

DatasetEntry dataset_from_json(const json& j) {
    if (!j.is_object()) throw UsageError("each dataset must be a JSON object");
    reject_unknown(j, {"id", "type", "seed", "n", "p", "p_edge", "min_weight", "max_weight", "delta", "n_root",
                       "n_layers", "noise_sd", "clip"},
                   "dataset");
    if (!j.contains("type")) throw UsageError("dataset needs a 'type'");
    const auto type = parse_generator(field<std::string>(j, "type", ""));
    const auto seed = field<std::uint64_t>(j, "seed", 0);
    DatasetSpec s = type == GeneratorType::Mvn ? DatasetSpec::mvn_defaults(seed) : DatasetSpec::scm_defaults(seed);
    s.n = field(j, "n", s.n);
    s.p = field(j, "p", s.p);
    s.p_edge = field(j, "p_edge", s.p_edge);
    s.min_weight = field(j, "min_weight", s.min_weight);
    s.max_weight = field(j, "max_weight", s.max_weight);
    s.delta = field(j, "delta", s.delta);
    s.n_root = field(j, "n_root", s.n_root);
    s.n_layers = field(j, "n_layers", s.n_layers);
    s.noise_sd = field(j, "noise_sd", s.noise_sd);
    s.clip = field(j, "clip", s.clip);
    return {field<std::string>(j, "id", to_string(type) + "-" + std::to_string(seed)), s};
}

json dataset_to_json(const DatasetEntry& d) {
    const auto& s = d.spec;
    json j{{"id", d.id}, {"type", to_string(s.type)}, {"seed", s.seed}, {"n", s.n}, {"p", s.p}, {"p_edge", s.p_edge}};
    if (s.type == GeneratorType::Mvn) {
        j["min_weight"] = s.min_weight;
        j["max_weight"] = s.max_weight;
        j["delta"] = s.delta;
    } else {
        j["n_root"] = s.n_root;
        j["n_layers"] = s.n_layers;
        j["noise_sd"] = s.noise_sd;
        j["clip"] = s.clip;
    }
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw UsageError("experiment config must be a JSON object");
    reject_unknown(j, {"datasets", "variants", "n_train", "tuning_trials", "final_runs", "max_folds", "batch_size",
                       "patience", "max_epochs", "tuning_max_epochs", "pgm_ridge", "write_adjacency", "master_seed",
                       "output_dir"},
                   "experiment config");
    ExperimentConfig c;
    if (!j.contains("datasets") || !j.at("datasets").is_array()) throw UsageError("config needs a 'datasets' array");
    for (const auto& d : j.at("datasets")) c.datasets.push_back(dataset_from_json(d));
    c.variants = field(j, "variants", c.variants);
    c.n_train = field(j, "n_train", c.n_train);
    c.tuning_trials = field(j, "tuning_trials", c.tuning_trials);
    c.final_runs = field(j, "final_runs", c.final_runs);
    if (j.contains("max_folds") && !j.at("max_folds").is_null()) c.max_folds = field<std::size_t>(j, "max_folds", 1);
    c.batch_size = field(j, "batch_size", c.batch_size);
    c.patience = field(j, "patience", c.patience);
    c.max_epochs = field(j, "max_epochs", c.max_epochs);
    c.tuning_max_epochs = field(j, "tuning_max_epochs", c.tuning_max_epochs);
    c.pgm_ridge = field(j, "pgm_ridge", c.pgm_ridge);
    c.write_adjacency = field(j, "write_adjacency", c.write_adjacency);
    c.master_seed = field(j, "master_seed", c.master_seed);
    c.output_dir = field<std::string>(j, "output_dir", c.output_dir.string());
    c.validate();
    return c;
}

json ExperimentConfig::to_json() const {
    json ds = json::array();
    for (const auto& d : datasets) ds.push_back(dataset_to_json(d));
    json j{{"datasets", ds},
           {"variants", variants},
           {"n_train", n_train},
           {"tuning_trials", tuning_trials},
           {"final_runs", final_runs},
           {"max_folds", max_folds ? json(*max_folds) : json(nullptr)},
           {"batch_size", batch_size},
           {"patience", patience},
           {"max_epochs", max_epochs},
           {"tuning_max_epochs", tuning_max_epochs},
           {"pgm_ridge", pgm_ridge},
           {"write_adjacency", write_adjacency},
           {"master_seed", master_seed},
           {"output_dir", output_dir.string()}};
    return j;
}

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw UsageError("experiment needs at least one dataset");
    std::set<std::string> ids;
    for (const auto& d : datasets) {
        if (!valid_id(d.id)) throw UsageError("dataset id '" + d.id + "' must match [A-Za-z0-9._-]+");
        if (!ids.insert(d.id).second) throw UsageError("duplicate dataset id '" + d.id + "'");
    }
    for (const auto& v : variants) parse_variant(v);
    if (n_train.empty()) throw UsageError("n_train grid is empty");
    for (auto n : n_train) {
        try {
            fold_count(n);
        } catch (const DataError&) {
            throw UsageError("n_train must be one of 1000, 2000, 3000, 4000");
        }
    }
    if (tuning_trials == 0) throw UsageError("tuning_trials must be at least 1");
    if (final_runs == 0) throw UsageError("final_runs must be at least 1");
    if (max_folds && *max_folds == 0) throw UsageError("max_folds must be at least 1");
    if (batch_size == 0 || max_epochs == 0 || tuning_max_epochs == 0)
        throw UsageError("batch_size and epoch caps must be positive");
    if (!(pgm_ridge >= 0.0)) throw UsageError("pgm_ridge must be non-negative");
}

// ------------------------------------------------------------ results CSV

std::string run_key(const std::string& dataset_id, const std::string& variant, std::size_t n_train,
                    std::size_t fold, std::uint64_t seed, const std::string& config) {
    const std::string text = dataset_id + "|" + variant + "|" + std::to_string(n_train) + "|" +
                             std::to_string(fold) + "|" + std::to_string(seed) + "|" + config;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

namespace {

const std::vector<std::string> kColumns{"dataset_id", "dataset_type", "model_id", "mask_mode", "readout_level",
                                        "n_train",    "fold",         "seed",     "test_r2",   "roc_auc",
                                        "epochs_run", "wall_time",    "error",    "run_key"};

std::string metric(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::optional<double> parse_metric(const std::string& text) {
    if (text.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0') throw DataError("malformed metric '" + text + "' in results file");
    return v;
}

}  // namespace

std::string results_header() {
    std::string h;
    for (std::size_t i = 0; i < kColumns.size(); ++i) h += (i ? "," : "") + kColumns[i];
    return h + "\n";
}

std::string format_row(const ResultRow& r) {
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_time);
    return r.dataset_id + "," + r.dataset_type + "," + r.model_id + "," + r.mask_mode + "," + r.readout_level + "," +
           std::to_string(r.n_train) + "," + std::to_string(r.fold) + "," + std::to_string(r.seed) + "," +
           metric(r.test_r2) + "," + metric(r.roc_auc) + "," + std::to_string(r.epochs_run) + "," + wall + "," +
           r.error + "," + r.run_key + "\n";
}

std::vector<ResultRow> read_results(const fs::path& csv) {
    std::istringstream in(io::read_text(csv));
    std::string line;
    if (!std::getline(in, line)) throw DataError(csv.string() + " is empty");
    const auto header = split_csv(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const auto& name : kColumns)
        if (!col.count(name)) throw DataError(csv.string() + " lacks column '" + name + "'");

    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw DataError(csv.string() + ":" + std::to_string(line_no) + " has the wrong number of fields");
        const auto get = [&](const char* name) -> const std::string& { return cells[col.at(name)]; };
        ResultRow r;
        try {
            r.dataset_id = get("dataset_id");
            r.dataset_type = get("dataset_type");
            r.model_id = get("model_id");
            r.mask_mode = get("mask_mode");
            r.readout_level = get("readout_level");
            r.n_train = std::stoull(get("n_train"));
            r.fold = std::stoull(get("fold"));
            r.seed = std::stoull(get("seed"));
            r.test_r2 = parse_metric(get("test_r2"));
            r.roc_auc = parse_metric(get("roc_auc"));
            r.epochs_run = std::stoull(get("epochs_run"));
            r.wall_time = std::stod(get("wall_time"));
        } catch (const std::logic_error&) {
            throw DataError(csv.string() + ":" + std::to_string(line_no) + " has a malformed field");
        }
        r.error = get("error");
        r.run_key = get("run_key");
        rows.push_back(std::move(r));
    }
    return rows;
}

void sort_rows(std::vector<ResultRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.dataset_id, a.model_id, a.n_train, a.fold, a.seed, a.run_key) <
               std::tie(b.dataset_id, b.model_id, b.n_train, b.fold, b.seed, b.run_key);
    });
}

void write_results(const std::vector<ResultRow>& rows, const fs::path& csv) {
    std::string text = results_header();
    for (const auto& r : rows) text += format_row(r);
    io::write_text(csv, text);
}

// -------------------------------------------------------------- experiment

namespace {

using Clock = std::chrono::steady_clock;

std::string error_tag(const std::exception& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    return colon == std::string::npos ? "Error" : what.substr(0, colon);
}

/// Serializes appends to results.csv and log lines to stderr.
class ResultWriter {
public:
    ResultWriter(const fs::path& csv, bool quiet) : quiet_(quiet) {
        const bool fresh = !fs::exists(csv);
        out_.open(csv, std::ios::app | std::ios::binary);
        if (!out_) throw DataError("cannot open " + csv.string());
        if (fresh) out_ << results_header() << std::flush;
    }

    void write(const ResultRow& r) {
        std::lock_guard lock(mutex_);
        out_ << format_row(r) << std::flush;
        if (!quiet_) {
            std::cerr << "event=run dataset=" << r.dataset_id << " variant=" << r.model_id << " n_train=" << r.n_train
                      << " fold=" << r.fold << " seed=" << r.seed << " test_r2=" << metric(r.test_r2)
                      << " roc_auc=" << metric(r.roc_auc) << " epochs=" << r.epochs_run << " secs=" << r.wall_time;
            if (!r.error.empty()) std::cerr << " error=" << r.error;
            std::cerr << '\n';
        }
    }

    void plan(const std::string& key) {
        std::lock_guard lock(mutex_);
        planned_.insert(key);
    }
    std::set<std::string> planned() {
        std::lock_guard lock(mutex_);
        return planned_;
    }

    void log(const std::string& line) {
        if (quiet_) return;
        std::lock_guard lock(mutex_);
        std::cerr << line << '\n';
    }

private:
    std::mutex mutex_;
    std::ofstream out_;
    std::set<std::string> planned_;
    bool quiet_;
};

struct Group {
    std::size_t dataset;
    std::size_t n_train;
    Variant variant;
};

struct Shared {
    const ExperimentConfig& cfg;
    const std::vector<Dataset>& data;
    // splits[dataset][n_train index]
    const std::vector<std::vector<std::vector<SplitPlan>>>& splits;
    const std::map<std::string, ResultRow>& done;
    ResultWriter& writer;
    fs::path out;
};

TrainOptions train_options(const ExperimentConfig& cfg, bool tuning) {
    TrainOptions o;
    o.batch_size = cfg.batch_size;
    o.patience = cfg.patience;
    o.max_epochs = tuning ? cfg.tuning_max_epochs : cfg.max_epochs;
    return o;
}

std::string options_tag(const ExperimentConfig& cfg, const DatasetSpec& spec) {
    return ";batch=" + std::to_string(cfg.batch_size) + ";patience=" + std::to_string(cfg.patience) +
           ";epochs=" + std::to_string(cfg.max_epochs) + ";data_seed=" + std::to_string(spec.seed);
}

ModelConfig tuned_config(const Shared& s, const Group& g, const SplitPlan& fold0) {
    const auto& entry = s.cfg.datasets[g.dataset];
    const std::size_t n_train = s.cfg.n_train[g.n_train];
    const std::uint64_t tag = derive_seed(s.cfg.master_seed, {fnv1a64(entry.id), n_train, fnv1a64(g.variant.id)});
    const fs::path cache = s.out / "tuning" /
                           (entry.id + "_" + g.variant.id + "_" + std::to_string(n_train) + ".json");
    const std::string cache_key = std::to_string(s.cfg.tuning_trials) + ";" +
                                  std::to_string(s.cfg.tuning_max_epochs) + options_tag(s.cfg, entry.spec) + ";" +
                                  std::to_string(tag);
    if (fs::exists(cache)) {
        const json j = io::read_json(cache);
        if (j.value("key", "") == cache_key) return io::config_from_json(j.at("best"));
    }

    ModelConfig base;
    base.readout = g.variant.readout;
    base.mask_mode = g.variant.mask_mode;
    base.seed = derive_seed(tag, {fnv1a64("tune-model")});
    SeededRng rng(derive_seed(tag, {fnv1a64("tune")}));
    const auto t0 = Clock::now();
    const auto result = tune(s.data[g.dataset], fold0, s.cfg.tuning_trials, rng, base, train_options(s.cfg, true));

    json trials = json::array();
    for (const auto& t : result.trials) {
        json tj{{"config", io::config_to_json(t.config)}, {"epochs_run", t.epochs_run}};
        tj["val_hparam_mse"] = std::isfinite(t.val_hparam_mse) ? json(t.val_hparam_mse) : json(nullptr);
        if (!t.error.empty()) tj["error"] = t.error;
        trials.push_back(tj);
    }
    io::write_text(cache, json{{"key", cache_key},
                               {"best_trial", result.best_trial},
                               {"best", io::config_to_json(result.best)},
                               {"trials", trials}}
                                  .dump(2) + "\n");
    s.writer.log("event=tuned dataset=" + entry.id + " variant=" + g.variant.id + " n_train=" +
                 std::to_string(n_train) + " best=" + result.best.describe() + " secs=" +
                 std::to_string(std::chrono::duration<double>(Clock::now() - t0).count()));
    return result.best;
}

std::uint64_t run_seed(const ExperimentConfig& cfg, const std::string& dataset_id, std::size_t n_train,
                       std::size_t fold, std::size_t run) {
    return derive_seed(cfg.master_seed, {fnv1a64(dataset_id), n_train, fold, run, fnv1a64("run")});
}

void run_group(const Shared& s, const Group& g) {
    const auto& entry = s.cfg.datasets[g.dataset];
    const auto& ds = s.data[g.dataset];
    const std::size_t n_train = s.cfg.n_train[g.n_train];
    const auto& plans = s.splits[g.dataset][g.n_train];

    ResultRow proto;
    proto.dataset_id = entry.id;
    proto.dataset_type = to_string(entry.spec.type);
    proto.model_id = g.variant.id;
    proto.mask_mode = g.variant.attention ? to_string(g.variant.mask_mode) : "none";
    proto.readout_level = g.variant.attention ? to_string(g.variant.readout) : "none";
    proto.n_train = n_train;

    const auto emit_adjacency = [&](const ResultRow& row, const WeightedAdjacency& adj) {
        if (!s.cfg.write_adjacency) return;
        io::write_adjacency(adj,
                            json{{"dataset_id", row.dataset_id},
                                 {"model_id", row.model_id},
                                 {"n_train", row.n_train},
                                 {"fold", row.fold},
                                 {"seed", row.seed},
                                 {"run_key", row.run_key}},
                            s.out / "adjacency" / (row.run_key + ".json"));
    };

    if (!g.variant.attention) {
        const std::string config = "pgm;ridge=" + io::format_double(s.cfg.pgm_ridge) + options_tag(s.cfg, entry.spec);
        for (std::size_t fold = 0; fold < plans.size(); ++fold) {
            std::optional<WeightedAdjacency> adj;
            std::string error;
            double secs = 0.0;
            for (std::size_t run = 0; run < s.cfg.final_runs; ++run) {
                ResultRow row = proto;
                row.fold = fold;
                row.seed = run_seed(s.cfg, entry.id, n_train, fold, run);
                row.run_key = run_key(entry.id, g.variant.id, n_train, fold, row.seed, config);
                s.writer.plan(row.run_key);
                if (s.done.count(row.run_key)) continue;
                // The baseline is deterministic given the fold's training rows.
                if (!adj && error.empty()) {
                    const auto t0 = Clock::now();
                    try {
                        adj = partial_correlation_adjacency(ds.rows(plans[fold].train), s.cfg.pgm_ridge);
                    } catch (const Error& e) {
                        error = error_tag(e);
                    }
                    secs = std::chrono::duration<double>(Clock::now() - t0).count();
                }
                row.wall_time = secs;
                row.error = error;
                if (adj) {
                    try {
                        row.roc_auc = roc_auc(*adj, ds.truth);
                    } catch (const Error& e) {
                        row.error = error_tag(e);
                    }
                    emit_adjacency(row, *adj);
                }
                s.writer.write(row);
            }
        }
        return;
    }

    std::optional<ModelConfig> tuned;
    for (std::size_t fold = 0; fold < plans.size(); ++fold) {
        for (std::size_t run = 0; run < s.cfg.final_runs; ++run) {
            if (!tuned) tuned = tuned_config(s, g, plans.front());
            ModelConfig cfg = *tuned;
            ResultRow row = proto;
            row.fold = fold;
            row.seed = cfg.seed = run_seed(s.cfg, entry.id, n_train, fold, run);
            row.run_key = run_key(entry.id, g.variant.id, n_train, fold, row.seed,
                                  cfg.describe() + options_tag(s.cfg, entry.spec));
            s.writer.plan(row.run_key);
            if (s.done.count(row.run_key)) continue;

            const auto t0 = Clock::now();
            try {
                const auto fit = train(ds, plans[fold], cfg, train_options(s.cfg, false));
                row.epochs_run = fit.epochs_run;
                const auto& test = plans[fold].test;
                const Vector pred = fit.trained.predict(ds, test);
                std::vector<double> truth(test.size());
                for (std::size_t i = 0; i < test.size(); ++i)
                    truth[i] = ds.values(static_cast<Eigen::Index>(test[i]), static_cast<Eigen::Index>(ds.target_index));
                row.test_r2 = r2(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())), truth);
                const Matrix avg = average_attention(fit.trained.record_attention(ds, test));
                const auto adj = attention_adjacency(avg, ds.p(), ds.target_index, cfg.readout);
                row.roc_auc = roc_auc(adj, ds.truth);
                emit_adjacency(row, adj);
            } catch (const Error& e) {
                row.error = error_tag(e);
            }
            row.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
            s.writer.write(row);
        }
    }
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& options) {
    cfg.validate();
    if (options.workers == 0) throw UsageError("workers must be at least 1");
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);
    io::write_text(out / "config.json", cfg.to_json().dump(2) + "\n");
    const fs::path csv = out / "results.csv";

    std::map<std::string, ResultRow> done;
    if (fs::exists(csv))
        for (auto& r : read_results(csv)) done.emplace(r.run_key, std::move(r));

    std::vector<Variant> variants;
    if (cfg.variants.empty()) {
        variants = all_variants();
    } else {
        for (const auto& v : cfg.variants) variants.push_back(parse_variant(v));
    }

    std::vector<Dataset> data;
    std::vector<std::vector<std::vector<SplitPlan>>> splits;
    for (const auto& entry : cfg.datasets) {
        data.push_back(make_dataset(entry.spec));
        auto& per_n = splits.emplace_back();
        for (auto n_train : cfg.n_train) {
            std::size_t folds = fold_count(n_train);
            if (cfg.max_folds) folds = std::min(folds, *cfg.max_folds);
            SeededRng rng(derive_seed(cfg.master_seed, {fnv1a64(entry.id), n_train, fnv1a64("splits")}));
            per_n.push_back(make_splits(data.back().n(), n_train, folds, rng));
        }
    }

    std::vector<Group> groups;
    for (std::size_t d = 0; d < cfg.datasets.size(); ++d)
        for (std::size_t n = 0; n < cfg.n_train.size(); ++n)
            for (const auto& v : variants) groups.push_back({d, n, v});

    std::set<std::string> planned;
    {
        ResultWriter writer(csv, options.quiet);
        const Shared shared{cfg, data, splits, done, writer, out};
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        const auto worker = [&] {
            // Several workers each get one OpenMP thread; a single worker
            // parallelizes inside the training kernels instead.
            if (options.workers > 1) omp_set_num_threads(1);
            for (std::size_t i; (i = next.fetch_add(1)) < groups.size();) {
                try {
                    run_group(shared, groups[i]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = groups.size();
                }
            }
        };
        const std::size_t n_threads = std::min(options.workers, groups.size());
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);
        planned = writer.planned();
    }

    // Keep only rows belonging to this configuration, in canonical order.
    for (auto& r : read_results(csv)) done.insert_or_assign(r.run_key, std::move(r));
    std::vector<ResultRow> rows;
    for (const auto& key : planned) rows.push_back(done.at(key));
    sort_rows(rows);
    write_results(rows, csv);
    return rows;
}

// ------------------------------------------------------------- aggregation

namespace {

struct Stats {
    std::optional<double> mean, std;
};

Stats mean_std(const std::vector<double>& values) {
    if (values.empty()) return {};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

std::string opt(const std::optional<double>& v) { return metric(v); }

}  // namespace

std::vector<AggregateRow> aggregate(std::vector<ResultRow> rows) {
    if (rows.empty()) throw DataError("no results to aggregate");
    sort_rows(rows);

    // dataset x variant x n_train -> means over folds and seeds
    struct Cell {
        std::string type;
        std::vector<double> roc, r2;
        std::size_t runs = 0;
    };
    using CellKey = std::tuple<std::string, std::string, std::size_t>;  // dataset, variant, n_train
    std::map<CellKey, Cell> cells;
    for (const auto& r : rows) {
        auto& c = cells[{r.dataset_id, r.model_id, r.n_train}];
        c.type = r.dataset_type;
        if (!r.error.empty()) continue;
        ++c.runs;
        if (r.roc_auc && std::isfinite(*r.roc_auc)) c.roc.push_back(*r.roc_auc);
        if (r.test_r2 && std::isfinite(*r.test_r2)) c.r2.push_back(*r.test_r2);
    }

    std::map<CellKey, double> roc_mean, r2_mean, nr2;
    std::map<std::pair<std::string, std::size_t>, std::map<std::string, double>> by_dataset;
    for (const auto& [key, c] : cells) {
        if (auto s = mean_std(c.roc); s.mean) roc_mean[key] = *s.mean;
        if (auto s = mean_std(c.r2); s.mean) {
            r2_mean[key] = *s.mean;
            by_dataset[{std::get<0>(key), std::get<2>(key)}][std::get<1>(key)] = *s.mean;
        }
    }
    for (const auto& [dk, scores] : by_dataset) {
        if (scores.size() < 2) continue;
        for (const auto& [variant, value] : normalized_r2(scores)) nr2[{dk.first, variant, dk.second}] = value;
    }

    struct Group {
        std::vector<double> roc, r2, nr2;
        std::size_t datasets = 0, runs = 0;
    };
    using GroupKey = std::tuple<std::string, std::string, std::size_t>;  // type, variant, n_train
    std::map<GroupKey, Group> groups;
    for (const auto& [key, c] : cells) {
        auto& g = groups[{c.type, std::get<1>(key), std::get<2>(key)}];
        ++g.datasets;
        g.runs += c.runs;
        if (roc_mean.count(key)) g.roc.push_back(roc_mean.at(key));
        if (r2_mean.count(key)) g.r2.push_back(r2_mean.at(key));
        if (nr2.count(key)) g.nr2.push_back(nr2.at(key));
    }

    std::vector<AggregateRow> out;
    for (const auto& [key, g] : groups) {
        AggregateRow a;
        std::tie(a.dataset_type, a.model_id, a.n_train) = key;
        a.datasets = g.datasets;
        a.runs = g.runs;
        const auto roc = mean_std(g.roc), r2s = mean_std(g.r2), n = mean_std(g.nr2);
        a.roc_mean = roc.mean;
        a.roc_std = roc.std;
        a.r2_mean = r2s.mean;
        a.r2_std = r2s.std;
        a.nr2_mean = n.mean;
        a.nr2_std = n.std;
        out.push_back(a);
    }
    return out;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string svg_text(double x, double y, const std::string& text, const char* anchor = "middle", int size = 12) {
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" + std::to_string(size) +
           "\" text-anchor=\"" + anchor + "\" font-family=\"sans-serif\">" + text + "</text>\n";
}

/// One panel per dataset type: normalized R2 against n_train, one line per variant.
std::string r2_chart(const std::vector<AggregateRow>& agg) {
    std::map<std::string, std::map<std::string, std::vector<std::pair<std::size_t, double>>>> series;
    std::set<std::size_t> ns;
    for (const auto& a : agg) {
        if (!a.nr2_mean) continue;
        series[a.dataset_type][a.model_id].emplace_back(a.n_train, *a.nr2_mean);
        ns.insert(a.n_train);
    }
    const double pw = 360, ph = 260, ml = 50, mt = 30, mb = 40;
    const double width = std::max<std::size_t>(1, series.size()) * (pw + ml) + 170;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
                      fmt(ph + mt + mb) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (ns.empty()) return svg + svg_text(width / 2, 40, "no R2 data") + "</svg>\n";
    const double nmin = static_cast<double>(*ns.begin()), nmax = static_cast<double>(*ns.rbegin());
    std::map<std::string, const char*> colour;
    double panel_x = ml;
    for (const auto& [type, lines] : series) {
        const auto px = [&](double n) { return panel_x + (nmax > nmin ? (n - nmin) / (nmax - nmin) : 0.5) * pw; };
        const auto py = [&](double v) { return mt + (1.0 - v) * ph; };
        svg += "<rect x=\"" + fmt(panel_x) + "\" y=\"" + fmt(mt) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
               "\" fill=\"none\" stroke=\"#444\"/>\n";
        svg += svg_text(panel_x + pw / 2, mt - 10, type);
        for (double v : {0.0, 0.5, 1.0}) svg += svg_text(panel_x - 6, py(v) + 4, fmt(v), "end", 10);
        for (auto n : ns) svg += svg_text(px(static_cast<double>(n)), mt + ph + 16, std::to_string(n), "middle", 10);
        svg += svg_text(panel_x + pw / 2, mt + ph + 34, "n_train", "middle", 11);
        for (const auto& [variant, pts] : lines) {
            if (!colour.count(variant)) colour[variant] = kPalette[colour.size() % 6];
            std::string path;
            for (const auto& [n, v] : pts)
                path += (path.empty() ? "" : " ") + fmt(px(static_cast<double>(n))) + "," + fmt(py(v));
            svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour[variant]) + "\" stroke-width=\"2\" points=\"" +
                   path + "\"/>\n";
        }
        panel_x += pw + ml;
    }
    double ly = mt + 10;
    for (const auto& [variant, c] : colour) {
        svg += "<rect x=\"" + fmt(panel_x) + "\" y=\"" + fmt(ly - 9) + "\" width=\"12\" height=\"12\" fill=\"" + c +
               "\"/>\n";
        svg += svg_text(panel_x + 18, ly + 1, variant, "start", 11);
        ly += 18;
    }
    return svg + "</svg>\n";
}

/// Grouped bars of mean ROC per dataset type and variant (largest n_train).
std::string roc_chart(const std::vector<AggregateRow>& bars) {
    const double bw = 26, gap = 30, ph = 240, mt = 30, ml = 50, mb = 90;
    const double width = ml + static_cast<double>(bars.size()) * bw + 4 * gap + 40;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
                      fmt(ph + mt + mb) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const auto py = [&](double v) { return mt + (1.0 - v) * ph; };
    for (double v : {0.0, 0.5, 1.0}) {
        svg += "<line x1=\"" + fmt(ml) + "\" x2=\"" + fmt(width - 10) + "\" y1=\"" + fmt(py(v)) + "\" y2=\"" +
               fmt(py(v)) + "\" stroke=\"#ccc\"/>\n";
        svg += svg_text(ml - 6, py(v) + 4, fmt(v), "end", 10);
    }
    double x = ml + 10;
    std::string last_type;
    std::map<std::string, const char*> colour;
    for (const auto& b : bars) {
        if (!last_type.empty() && b.dataset_type != last_type) x += gap;
        if (b.dataset_type != last_type) svg += svg_text(x, mt + ph + 70, b.dataset_type, "start", 12);
        last_type = b.dataset_type;
        if (!colour.count(b.model_id)) colour[b.model_id] = kPalette[colour.size() % 6];
        const double v = b.roc_mean.value_or(0.0);
        svg += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(py(v)) + "\" width=\"" + fmt(bw - 4) + "\" height=\"" +
               fmt(ph * v) + "\" fill=\"" + colour[b.model_id] + "\"/>\n";
        svg += "<text transform=\"translate(" + fmt(x + bw / 2) + "," + fmt(mt + ph + 6) +
               ") rotate(60)\" font-size=\"10\" font-family=\"sans-serif\">" + b.model_id + "</text>\n";
        x += bw;
    }
    return svg + svg_text(width / 2, 18, "structure ROC-AUC") + "</svg>\n";
}

}  // namespace

std::vector<AggregateRow> aggregate_and_report(const std::vector<ResultRow>& rows, const fs::path& out) {
    const auto agg = aggregate(rows);
    fs::create_directories(out);

    std::string all = "dataset_type,model_id,n_train,datasets,runs,roc_mean,roc_std,r2_mean,r2_std,nr2_mean,nr2_std\n";
    std::string roc = "dataset_type,model_id,n_train,roc_mean,roc_std,datasets\n";
    std::string r2 = "dataset_type,model_id,n_train,nr2_mean,nr2_std,r2_mean,r2_std,datasets\n";
    std::map<std::pair<std::string, std::string>, AggregateRow> roc_bars;  // largest n_train per type x variant
    for (const auto& a : agg) {
        const std::string head = a.dataset_type + "," + a.model_id + "," + std::to_string(a.n_train);
        all += head + "," + std::to_string(a.datasets) + "," + std::to_string(a.runs) + "," + opt(a.roc_mean) + "," +
               opt(a.roc_std) + "," + opt(a.r2_mean) + "," + opt(a.r2_std) + "," + opt(a.nr2_mean) + "," +
               opt(a.nr2_std) + "\n";
        // Pruned masks confine attention to true edges, so their ROC is 1 by construction.
        if (a.roc_mean && a.model_id.find("pruned") == std::string::npos) {
            roc += head + "," + opt(a.roc_mean) + "," + opt(a.roc_std) + "," + std::to_string(a.datasets) + "\n";
            roc_bars[{a.dataset_type, a.model_id}] = a;
        }
        if (a.r2_mean)
            r2 += head + "," + opt(a.nr2_mean) + "," + opt(a.nr2_std) + "," + opt(a.r2_mean) + "," + opt(a.r2_std) +
                  "," + std::to_string(a.datasets) + "\n";
    }
    io::write_text(out / "aggregate.csv", all);
    io::write_text(out / "roc_by_variant.csv", roc);
    io::write_text(out / "r2_vs_ntrain.csv", r2);

    std::vector<AggregateRow> bars;
    for (const auto& [key, a] : roc_bars) bars.push_back(a);
    io::write_text(out / "r2_vs_ntrain.svg", r2_chart(agg));
    io::write_text(out / "roc_by_variant.svg", roc_chart(bars));
    return agg;
}

}  // namespace gtdl
