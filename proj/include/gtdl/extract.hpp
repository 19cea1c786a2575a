#pragma once

#include <cstddef>

#include "gtdl/core.hpp"
#include "gtdl/model.hpp"

namespace gtdl {

/// Mean over samples, layers and heads: a t x t row-stochastic matrix.
Matrix average_attention(const AttentionRecord& record, Exec exec = Exec::Parallel);

/// Zero the diagonal, then divide each row by its maximum. Rows without a
/// positive off-diagonal entry stay zero.
WeightedAdjacency denormalize(const Matrix& average);

/// Inserts a zero row and column at target_index.
WeightedAdjacency pad_target(const WeightedAdjacency& a, std::size_t target_index);

/// Weighted adjacency over the p dataset columns from a model's averaged
/// attention. Node-level token order is mapped back to column order;
/// graph-level maps are padded with a zero target row and column.
WeightedAdjacency attention_adjacency(const Matrix& average, std::size_t p, std::size_t target_index,
                                      Readout readout);

/// Ridge-regularized partial correlations: K = inverse(R + ridge * I) on the
/// sample correlation matrix R, A_jk = |K_jk| / sqrt(K_jj K_kk), then the
/// same diagonal-zeroing and row-max scaling as denormalize.
WeightedAdjacency partial_correlation_adjacency(const Dataset& ds, double ridge = 1e-3);

}  // namespace gtdl
