#include "gtdl/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gtdl::io {

using nlohmann::json;

std::string format_double(double value) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw DataError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

namespace {

void write_binary(const fs::path& path, const std::vector<double>& values) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_binary(const fs::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
        throw DataError(path.string() + " is shorter than its manifest");
    return values;
}

Matrix matrix_from_json(const json& rows) {
    if (!rows.is_array()) throw DataError("matrix must be a JSON array of rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& row = rows.at(static_cast<std::size_t>(j));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw DataError("matrix is not square");
        for (Eigen::Index k = 0; k < n; ++k) m(j, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

}  // namespace

json dataset_meta(const Dataset& ds) {
    json params = json::object();
    for (const auto& [k, v] : ds.meta.params) params[k] = v;
    return json{{"p", ds.p()},
                {"n", ds.n()},
                {"target_index", ds.target_index},
                {"seed", ds.meta.seed},
                {"generator", ds.meta.generator},
                {"adjacency", ds.truth.to_rows()},
                {"params", params}};
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
    ds.validate();
    fs::create_directories(dir);
    std::string csv;
    for (std::size_t c = 0; c < ds.p(); ++c) csv += (c ? ",f" : "f") + std::to_string(c);
    csv += '\n';
    for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
        for (Eigen::Index c = 0; c < ds.values.cols(); ++c) {
            if (c) csv += ',';
            csv += format_double(ds.values(i, c));
        }
        csv += '\n';
    }
    write_text(dir / "data.csv", csv);
    write_text(dir / "meta.json", dataset_meta(ds).dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
    const json meta = read_json(dir / "meta.json");
    Dataset ds;
    try {
        const auto p = meta.at("p").get<std::size_t>();
        const auto n = meta.at("n").get<std::size_t>();
        ds.target_index = meta.at("target_index").get<std::size_t>();
        ds.meta.seed = meta.at("seed").get<std::uint64_t>();
        ds.meta.generator = meta.at("generator").get<std::string>();
        const json params = meta.value("params", json::object());
        for (const auto& [k, v] : params.items()) ds.meta.params[k] = v.get<double>();
        ds.truth = BinaryAdjacency::from_rows(meta.at("adjacency").get<std::vector<std::vector<int>>>());

        std::istringstream in(read_text(dir / "data.csv"));
        std::string line;
        std::getline(in, line);
        ds.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line)) throw DataError("data.csv has fewer rows than meta.json declares");
            const char* cursor = line.c_str();
            for (std::size_t c = 0; c < p; ++c) {
                char* end = nullptr;
                ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = std::strtod(cursor, &end);
                if (end == cursor) throw DataError("malformed number in data.csv row " + std::to_string(i + 1));
                cursor = *end == ',' ? end + 1 : end;
            }
        }
    } catch (const json::exception& e) {
        throw DataError("invalid dataset metadata: " + std::string(e.what()));
    }
    ds.validate();
    return ds;
}

void write_adjacency(const WeightedAdjacency& a, const json& provenance, const fs::path& path) {
    json entries = json::array();
    for (std::size_t j = 0; j < a.p(); ++j) {
        json row = json::array();
        for (std::size_t k = 0; k < a.p(); ++k) row.push_back(a(j, k));
        entries.push_back(row);
    }
    write_text(path, json{{"p", a.p()}, {"entries", entries}, {"provenance", provenance}}.dump(2) + "\n");
}

WeightedAdjacency read_weighted_adjacency(const fs::path& path) {
    const json j = read_json(path);
    if (!j.contains("entries")) throw DataError(path.string() + " has no 'entries'");
    try {
        return WeightedAdjacency(matrix_from_json(j.at("entries")));
    } catch (const json::exception& e) {
        throw DataError("invalid adjacency file: " + std::string(e.what()));
    }
}

BinaryAdjacency read_truth(const fs::path& path) {
    const json j = read_json(path);
    const char* key = j.contains("adjacency") ? "adjacency" : "entries";
    if (!j.contains(key)) throw DataError(path.string() + " has neither 'adjacency' nor 'entries'");
    try {
        return BinaryAdjacency::from_rows(j.at(key).get<std::vector<std::vector<int>>>());
    } catch (const json::exception& e) {
        throw DataError("truth adjacency must hold integer 0/1 entries: " + std::string(e.what()));
    }
}

json config_to_json(const ModelConfig& cfg) {
    return json{{"layers", cfg.layers},
                {"dim", cfg.dim},
                {"heads", cfg.heads},
                {"readout", to_string(cfg.readout)},
                {"mask_mode", to_string(cfg.mask_mode)},
                {"ffn_factor", cfg.ffn_factor},
                {"learning_rate", cfg.learning_rate},
                {"seed", cfg.seed}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    try {
        cfg.layers = j.value("layers", cfg.layers);
        cfg.dim = j.value("dim", cfg.dim);
        cfg.heads = j.value("heads", cfg.heads);
        cfg.readout = parse_readout(j.value("readout", to_string(cfg.readout)));
        cfg.mask_mode = parse_mask_mode(j.value("mask_mode", to_string(cfg.mask_mode)));
        cfg.ffn_factor = j.value("ffn_factor", cfg.ffn_factor);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        throw UsageError("invalid model config: " + std::string(e.what()));
    }
    cfg.validate();
    return cfg;
}

void write_parameters(const Model& model, const fs::path& dir) {
    const auto params = model.parameters();
    write_binary(dir / "params.bin", std::vector<double>(params.begin(), params.end()));
    json blocks = json::array();
    for (const auto& b : model.blocks()) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
    const json manifest{{"dtype", "float64"},
                        {"byte_order", "little"},
                        {"count", params.size()},
                        {"n_inputs", model.inputs()},
                        {"config", config_to_json(model.config())},
                        {"blocks", blocks}};
    write_text(dir / "params.json", manifest.dump(2) + "\n");
}

void read_parameters(Model& model, const fs::path& dir) {
    const json manifest = read_json(dir / "params.json");
    const auto count = manifest.at("count").get<std::size_t>();
    if (count != model.parameters().size()) throw DataError("parameter count does not match the model");
    const auto values = read_binary(dir / "params.bin", count);
    std::copy(values.begin(), values.end(), model.parameters().begin());
}

void write_log(const std::vector<EpochLog>& log, const fs::path& path) {
    std::string csv = "epoch,train_mse,val_mse\n";
    for (const auto& e : log)
        csv += std::to_string(e.epoch) + "," + format_double(e.train_mse) + "," + format_double(e.val_mse) + "\n";
    write_text(path, csv);
}

void write_attention(const AttentionRecord& record, const fs::path& dir) {
    write_binary(dir / "attention.bin", record.data);
    const json manifest{{"dtype", "float64"},
                        {"byte_order", "little"},
                        {"layout", "row-major"},
                        {"axes", {"sample", "layer", "head", "query_token", "key_token"}},
                        {"shape", {record.samples, record.layers, record.heads, record.tokens, record.tokens}}};
    write_text(dir / "attention.json", manifest.dump(2) + "\n");
}

AttentionRecord read_attention(const fs::path& dir) {
    const json manifest = read_json(dir / "attention.json");
    const auto shape = manifest.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 5 || shape[3] != shape[4]) throw DataError("attention manifest has an invalid shape");
    AttentionRecord rec;
    rec.samples = shape[0];
    rec.layers = shape[1];
    rec.heads = shape[2];
    rec.tokens = shape[3];
    rec.data = read_binary(dir / "attention.bin", rec.samples * rec.layers * rec.heads * rec.tokens * rec.tokens);
    return rec;
}

}  // namespace gtdl::io
