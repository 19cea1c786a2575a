#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gtdl/model.hpp"

namespace gtdl::detail {

struct LayerOffsets {
    std::size_t ln1_gain, ln1_bias;
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln2_gain, ln2_bias;
    std::size_t w1, b1, w2, b2;
};

// Offsets into the flat parameter vector. Matrices are stored row-major as
// (in x out), so a linear map is y = x * W + b.
struct Offsets {
    std::size_t tok_weight, tok_bias, target_token;
    std::vector<LayerOffsets> layers;
    std::size_t lnf_gain, lnf_bias, head_weight, head_bias;
    std::size_t total;
};

Offsets compute_offsets(const ModelConfig& cfg, std::size_t n_inputs, std::vector<ParameterBlock>* blocks = nullptr);

}  // namespace gtdl::detail
