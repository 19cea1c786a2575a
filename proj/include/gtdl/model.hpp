#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gtdl/core.hpp"

namespace gtdl {

enum class Readout { Node, Graph };
enum class MaskMode { Full, Pruned };

Readout parse_readout(const std::string& name);
MaskMode parse_mask_mode(const std::string& name);
std::string to_string(Readout readout);
std::string to_string(MaskMode mode);

struct ModelConfig {
    std::size_t layers = 3;
    std::size_t dim = 32;
    std::size_t heads = 4;
    Readout readout = Readout::Node;
    MaskMode mask_mode = MaskMode::Full;
    double ffn_factor = 4.0 / 3.0;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    std::size_t head_dim() const noexcept { return dim / heads; }
    std::size_t ffn_dim() const;
    /// Throws UsageError for an inconsistent configuration.
    void validate() const;
    /// Compact textual form used in run keys and manifests.
    std::string describe() const;
};

/// Which token pairs may attend to each other. The diagonal is always allowed.
class AttentionMask {
public:
    AttentionMask() = default;
    static AttentionMask full(std::size_t tokens);
    static AttentionMask diagonal(std::size_t tokens);
    /// allowed(j,k) from a token x token boolean table; the diagonal is forced on.
    static AttentionMask from_table(const std::vector<std::vector<bool>>& allowed);

    std::size_t tokens() const noexcept { return t_; }
    bool allowed(std::size_t j, std::size_t k) const { return allowed_[j * t_ + k] != 0; }
    bool all_allowed() const;

private:
    std::size_t t_ = 0;
    std::vector<std::uint8_t> allowed_;
};

/// Dataset column behind each token: input features in column order with the
/// target skipped, then the target column itself for the node-level token.
std::vector<std::size_t> token_columns(std::size_t p, std::size_t target_index, Readout readout);

/// Full mask, or for pruned mode the symmetrized truth restricted to the
/// tokens (the target token uses the target feature's row and column).
AttentionMask make_mask(const ModelConfig& cfg, const BinaryAdjacency& truth, std::size_t target_index);

/// samples x layers x heads x tokens x tokens, last axis row-stochastic.
struct AttentionRecord {
    std::size_t samples = 0;
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::size_t tokens = 0;
    std::vector<double> data;

    std::size_t index(std::size_t s, std::size_t l, std::size_t h, std::size_t j, std::size_t k) const {
        return (((s * layers + l) * heads + h) * tokens + j) * tokens + k;
    }
    double at(std::size_t s, std::size_t l, std::size_t h, std::size_t j, std::size_t k) const {
        return data[index(s, l, h, j, k)];
    }
};

struct ParameterBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

enum class Exec { Serial, Parallel };

/// Pre-norm transformer encoder over feature tokens with a linear per-feature
/// tokenizer and a scalar regression head. Inputs are rows of n_inputs
/// (= p - 1) standardized features in token order.
class Model {
public:
    Model(ModelConfig cfg, std::size_t n_inputs, AttentionMask mask);

    const ModelConfig& config() const noexcept { return cfg_; }
    const AttentionMask& mask() const noexcept { return mask_; }
    std::size_t inputs() const noexcept { return n_inputs_; }
    std::size_t tokens() const noexcept { return mask_.tokens(); }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }
    const std::vector<ParameterBlock>& blocks() const noexcept { return blocks_; }
    const ParameterBlock& block(const std::string& name) const;
    std::span<double> block_values(const std::string& name);

    /// Predictions for every row of x (rows x n_inputs).
    Vector predict(const Matrix& x, Exec exec = Exec::Parallel) const;
    double predict_row(std::span<const double> row) const;

    /// Token embeddings fed to the first layer for one input row (t x d).
    Matrix tokenize(std::span<const double> row) const;

    /// Mean squared error over the batch; grad (same size as parameters()) is
    /// overwritten with its gradient.
    double loss_and_gradient(const Matrix& x, const Vector& y, std::span<double> grad,
                             Exec exec = Exec::Parallel) const;
    double loss(const Matrix& x, const Vector& y, Exec exec = Exec::Parallel) const;

    AttentionRecord record_attention(const Matrix& x, Exec exec = Exec::Parallel) const;

private:
    friend struct ChunkKernel;

    ModelConfig cfg_;
    std::size_t n_inputs_;
    AttentionMask mask_;
    AlignedBuffer params_;
    std::vector<ParameterBlock> blocks_;
};

}  // namespace gtdl
