#include "gtdl/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gtdl/rng.hpp"
#include "model_layout.hpp"

namespace gtdl {

Readout parse_readout(const std::string& name) {
    if (name == "node") return Readout::Node;
    if (name == "graph") return Readout::Graph;
    throw UsageError("unknown readout level '" + name + "' (expected node or graph)");
}

MaskMode parse_mask_mode(const std::string& name) {
    if (name == "full") return MaskMode::Full;
    if (name == "pruned") return MaskMode::Pruned;
    throw UsageError("unknown mask mode '" + name + "' (expected full or pruned)");
}

std::string to_string(Readout readout) { return readout == Readout::Node ? "node" : "graph"; }
std::string to_string(MaskMode mode) { return mode == MaskMode::Full ? "full" : "pruned"; }

std::size_t ModelConfig::ffn_dim() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(dim) * ffn_factor)));
}

void ModelConfig::validate() const {
    if (layers == 0) throw UsageError("model needs at least one layer");
    if (dim == 0 || heads == 0 || dim % heads != 0) throw UsageError("embedding size must be a multiple of heads");
    if (!(ffn_factor > 0.0)) throw UsageError("ffn_factor must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw UsageError("invalid learning rate");
}

std::string ModelConfig::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "L=" << layers << ";d=" << dim << ";H=" << heads << ";ffn=" << ffn_factor << ";lr=" << learning_rate
       << ";readout=" << to_string(readout) << ";mask=" << to_string(mask_mode);
    return os.str();
}

AttentionMask AttentionMask::full(std::size_t tokens) {
    AttentionMask m;
    m.t_ = tokens;
    m.allowed_.assign(tokens * tokens, 1);
    return m;
}

AttentionMask AttentionMask::diagonal(std::size_t tokens) {
    AttentionMask m;
    m.t_ = tokens;
    m.allowed_.assign(tokens * tokens, 0);
    for (std::size_t j = 0; j < tokens; ++j) m.allowed_[j * tokens + j] = 1;
    return m;
}

AttentionMask AttentionMask::from_table(const std::vector<std::vector<bool>>& allowed) {
    AttentionMask m = diagonal(allowed.size());
    for (std::size_t j = 0; j < allowed.size(); ++j) {
        if (allowed[j].size() != allowed.size()) throw DataError("attention mask table is not square");
        for (std::size_t k = 0; k < allowed.size(); ++k)
            if (allowed[j][k]) m.allowed_[j * m.t_ + k] = 1;
    }
    return m;
}

bool AttentionMask::all_allowed() const {
    return std::all_of(allowed_.begin(), allowed_.end(), [](auto v) { return v != 0; });
}

std::vector<std::size_t> token_columns(std::size_t p, std::size_t target_index, Readout readout) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < p; ++c)
        if (c != target_index) cols.push_back(c);
    if (readout == Readout::Node) cols.push_back(target_index);
    return cols;
}

AttentionMask make_mask(const ModelConfig& cfg, const BinaryAdjacency& truth, std::size_t target_index) {
    const auto cols = token_columns(truth.p(), target_index, cfg.readout);
    if (cfg.mask_mode == MaskMode::Full) return AttentionMask::full(cols.size());
    const auto sym = symmetrize(truth);
    std::vector<std::vector<bool>> table(cols.size(), std::vector<bool>(cols.size(), false));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t k = 0; k < cols.size(); ++k) table[j][k] = sym(cols[j], cols[k]);
    return AttentionMask::from_table(table);
}

namespace detail {

Offsets compute_offsets(const ModelConfig& cfg, std::size_t n_inputs, std::vector<ParameterBlock>* blocks) {
    const std::size_t d = cfg.dim;
    const std::size_t h = cfg.ffn_dim();
    std::size_t cursor = 0;
    auto take = [&](const std::string& name, std::size_t size) {
        const std::size_t at = cursor;
        cursor += size;
        if (blocks && size > 0) blocks->push_back({name, at, size});
        return at;
    };
    Offsets o{};
    o.tok_weight = take("tokenizer.weight", n_inputs * d);
    o.tok_bias = take("tokenizer.bias", n_inputs * d);
    o.target_token = take("target_token", cfg.readout == Readout::Node ? d : 0);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        LayerOffsets lo{};
        lo.ln1_gain = take(pre + "norm1.gain", d);
        lo.ln1_bias = take(pre + "norm1.bias", d);
        lo.wq = take(pre + "query.weight", d * d);
        lo.bq = take(pre + "query.bias", d);
        lo.wk = take(pre + "key.weight", d * d);
        lo.bk = take(pre + "key.bias", d);
        lo.wv = take(pre + "value.weight", d * d);
        lo.bv = take(pre + "value.bias", d);
        lo.wo = take(pre + "output.weight", d * d);
        lo.bo = take(pre + "output.bias", d);
        lo.ln2_gain = take(pre + "norm2.gain", d);
        lo.ln2_bias = take(pre + "norm2.bias", d);
        lo.w1 = take(pre + "ffn1.weight", d * h);
        lo.b1 = take(pre + "ffn1.bias", h);
        lo.w2 = take(pre + "ffn2.weight", h * d);
        lo.b2 = take(pre + "ffn2.bias", d);
        o.layers.push_back(lo);
    }
    o.lnf_gain = take("final_norm.gain", d);
    o.lnf_bias = take("final_norm.bias", d);
    o.head_weight = take("head.weight", d);
    o.head_bias = take("head.bias", 1);
    o.total = cursor;
    return o;
}

}  // namespace detail

Model::Model(ModelConfig cfg, std::size_t n_inputs, AttentionMask mask)
    : cfg_(std::move(cfg)), n_inputs_(n_inputs), mask_(std::move(mask)) {
    cfg_.validate();
    if (n_inputs_ == 0) throw UsageError("model needs at least one input feature");
    const std::size_t expected_tokens = n_inputs_ + (cfg_.readout == Readout::Node ? 1 : 0);
    if (mask_.tokens() != expected_tokens)
        throw UsageError("attention mask has " + std::to_string(mask_.tokens()) + " tokens, expected " +
                         std::to_string(expected_tokens));

    const auto o = detail::compute_offsets(cfg_, n_inputs_, &blocks_);
    params_.assign(o.total, 0.0);

    SeededRng rng(derive_seed(cfg_.seed, {fnv1a64("init")}));
    const std::size_t d = cfg_.dim;
    const std::size_t h = cfg_.ffn_dim();
    auto fill_uniform = [&](std::size_t at, std::size_t size, double bound) {
        for (std::size_t i = 0; i < size; ++i) params_[at + i] = rng.uniform(-bound, bound);
    };
    auto fill = [&](std::size_t at, std::size_t size, double value) {
        std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(at), size, value);
    };
    const double tok_bound = 1.0 / std::sqrt(static_cast<double>(d));
    fill_uniform(o.tok_weight, n_inputs_ * d, tok_bound);
    fill_uniform(o.tok_bias, n_inputs_ * d, tok_bound);
    if (cfg_.readout == Readout::Node) fill_uniform(o.target_token, d, tok_bound);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(d));
    const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(h));
    for (const auto& lo : o.layers) {
        fill(lo.ln1_gain, d, 1.0);
        fill(lo.ln2_gain, d, 1.0);
        fill_uniform(lo.wq, d * d, in_bound);
        fill_uniform(lo.wk, d * d, in_bound);
        fill_uniform(lo.wv, d * d, in_bound);
        fill_uniform(lo.wo, d * d, in_bound);
        fill_uniform(lo.w1, d * h, in_bound);
        fill_uniform(lo.w2, h * d, hidden_bound);
    }
    fill(o.lnf_gain, d, 1.0);
    fill_uniform(o.head_weight, d, in_bound);
}

const ParameterBlock& Model::block(const std::string& name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return b;
    throw UsageError("unknown parameter block '" + name + "'");
}

std::span<double> Model::block_values(const std::string& name) {
    const auto& b = block(name);
    return std::span<double>(params_).subspan(b.offset, b.size);
}

Matrix Model::tokenize(std::span<const double> row) const {
    if (row.size() != n_inputs_) throw DataError("input row has wrong length");
    const auto o = detail::compute_offsets(cfg_, n_inputs_);
    const auto d = static_cast<Eigen::Index>(cfg_.dim);
    Matrix out(static_cast<Eigen::Index>(tokens()), d);
    for (std::size_t j = 0; j < n_inputs_; ++j)
        for (Eigen::Index c = 0; c < d; ++c)
            out(static_cast<Eigen::Index>(j), c) =
                row[j] * params_[o.tok_weight + j * cfg_.dim + static_cast<std::size_t>(c)] +
                params_[o.tok_bias + j * cfg_.dim + static_cast<std::size_t>(c)];
    if (cfg_.readout == Readout::Node)
        for (Eigen::Index c = 0; c < d; ++c)
            out(static_cast<Eigen::Index>(n_inputs_), c) = params_[o.target_token + static_cast<std::size_t>(c)];
    return out;
}

double Model::predict_row(std::span<const double> row) const {
    if (row.size() != n_inputs_) throw DataError("input row has wrong length");
    Matrix x(1, static_cast<Eigen::Index>(n_inputs_));
    for (std::size_t j = 0; j < n_inputs_; ++j) x(0, static_cast<Eigen::Index>(j)) = row[j];
    return predict(x, Exec::Serial)(0);
}

}  // namespace gtdl
