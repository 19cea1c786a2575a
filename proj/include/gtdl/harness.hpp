#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gtdl/core.hpp"
#include "gtdl/generate.hpp"
#include "gtdl/model.hpp"
#include "gtdl/splits.hpp"
#include "gtdl/train.hpp"

namespace gtdl {

// ---------------------------------------------------------------- variants

struct Variant {
    std::string id;  // attn-full-node, attn-pruned-node, attn-full-graph, attn-pruned-graph, pgm
    bool attention = true;
    MaskMode mask_mode = MaskMode::Full;
    Readout readout = Readout::Node;
};

const std::vector<Variant>& all_variants();
Variant parse_variant(const std::string& id);

// ------------------------------------------------------------------ tuning

struct TrialRecord {
    ModelConfig config;
    double val_hparam_mse = 0.0;  // standardized target scale, +inf on failure
    std::size_t epochs_run = 0;
    std::string error;
};

struct TuneResult {
    ModelConfig best;
    std::size_t best_trial = 0;
    std::vector<TrialRecord> trials;
};

/// Trial 0 is `base` with the default L=3, d=32, lr=1e-3; the rest draw
/// L in [1..4], d in {8,16,32,64}, lr ~ LogUniform[1e-5, 1e-3]. Readout, mask
/// and heads are taken from `base`; each trial gets its own derived seed.
std::vector<ModelConfig> sample_trials(const ModelConfig& base, std::size_t trials, SeededRng& rng);

/// Trains every candidate on split.train / split.val_earlystop and keeps the
/// one with the lowest val_hparam MSE (earliest wins ties).
TuneResult tune_candidates(const Dataset& ds, const SplitPlan& split, const std::vector<ModelConfig>& candidates,
                           const TrainOptions& options = {});

/// Random search: tune_candidates(sample_trials(base, trials, rng)).
TuneResult tune(const Dataset& ds, const SplitPlan& split, std::size_t trials, SeededRng& rng,
                const ModelConfig& base = {}, const TrainOptions& options = {});

// -------------------------------------------------------------- experiment

struct DatasetEntry {
    std::string id;
    DatasetSpec spec;
};

struct ExperimentConfig {
    std::vector<DatasetEntry> datasets;
    std::vector<std::string> variants;  // defaults to all five
    std::vector<std::size_t> n_train{1000};
    std::size_t tuning_trials = 15;
    std::size_t final_runs = 3;
    std::optional<std::size_t> max_folds;  // caps the fold table
    std::size_t batch_size = 256;
    std::size_t patience = 10;
    std::size_t max_epochs = 400;
    std::size_t tuning_max_epochs = 400;
    double pgm_ridge = 1e-3;
    bool write_adjacency = true;
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir = "experiment";

    /// Throws UsageError on schema violations.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct ResultRow {
    std::string dataset_id;
    std::string dataset_type;
    std::string model_id;
    std::string mask_mode;      // full | pruned | none
    std::string readout_level;  // node | graph | none
    std::size_t n_train = 0;
    std::size_t fold = 0;
    std::uint64_t seed = 0;
    std::optional<double> test_r2;
    std::optional<double> roc_auc;
    std::size_t epochs_run = 0;
    double wall_time = 0.0;
    std::string error;  // empty on success, else the error class
    std::string run_key;
};

/// Hex FNV-1a of (dataset_id, variant, n_train, fold, seed, config).
std::string run_key(const std::string& dataset_id, const std::string& variant, std::size_t n_train,
                    std::size_t fold, std::uint64_t seed, const std::string& config);

std::string results_header();
std::string format_row(const ResultRow& row);
std::vector<ResultRow> read_results(const std::filesystem::path& csv);
void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& csv);
/// Canonical order: dataset_id, model_id, n_train, fold, seed, run_key.
void sort_rows(std::vector<ResultRow>& rows);

struct ExperimentOptions {
    std::size_t workers = 1;
    bool quiet = false;
};

/// Runs (or resumes) the experiment; rows already in OUT/results.csv with a
/// matching run key are kept and not recomputed. Returns all rows in
/// canonical order and rewrites OUT/results.csv in that order.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& options = {});

// ------------------------------------------------------------- aggregation

struct AggregateRow {
    std::string dataset_type;
    std::string model_id;
    std::size_t n_train = 0;
    std::size_t datasets = 0;  // datasets contributing
    std::size_t runs = 0;      // successful rows contributing
    std::optional<double> roc_mean, roc_std;
    std::optional<double> r2_mean, r2_std;
    std::optional<double> nr2_mean, nr2_std;
};

/// Per dataset x variant x n_train the mean over folds and seeds, normalized
/// R2 across variants within each dataset x n_train, then mean and population
/// std over datasets per dataset_type x variant x n_train. Independent of the
/// input row order.
std::vector<AggregateRow> aggregate(std::vector<ResultRow> rows);

/// Writes aggregate.csv, roc_by_variant.csv (pruned variants excluded),
/// r2_vs_ntrain.csv and SVG charts into `out`.
std::vector<AggregateRow> aggregate_and_report(const std::vector<ResultRow>& rows, const std::filesystem::path& out);

}  // namespace gtdl
