#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "gtdl/core.hpp"
#include "gtdl/model.hpp"
#include "gtdl/train.hpp"

namespace gtdl::io {

namespace fs = std::filesystem;

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);

// Dataset: DIR/data.csv (header f0..f{p-1}) and DIR/meta.json sidecar.
void write_dataset(const Dataset& ds, const fs::path& dir);
Dataset read_dataset(const fs::path& dir);
nlohmann::json dataset_meta(const Dataset& ds);

// Adjacency JSON: {"p":…, "entries":[[…]], "provenance":{…}}.
void write_adjacency(const WeightedAdjacency& a, const nlohmann::json& provenance, const fs::path& path);
WeightedAdjacency read_weighted_adjacency(const fs::path& path);
/// Accepts a dataset meta.json ("adjacency") or an adjacency file ("entries").
BinaryAdjacency read_truth(const fs::path& path);

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// Run directory written by `train`:
//   params.bin / params.json   flat float64 parameters + manifest
//   log.csv                    epoch,train_mse,val_mse
//   attention.bin / .json      float64 tensor + shape manifest
//   run.json                   provenance, target, token layout, metrics
void write_parameters(const Model& model, const fs::path& dir);
void read_parameters(Model& model, const fs::path& dir);
void write_log(const std::vector<EpochLog>& log, const fs::path& path);
void write_attention(const AttentionRecord& record, const fs::path& dir);
AttentionRecord read_attention(const fs::path& dir);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
nlohmann::json read_json(const fs::path& path);

}  // namespace gtdl::io
