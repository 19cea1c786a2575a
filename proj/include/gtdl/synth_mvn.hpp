#pragma once

#include "gtdl/core.hpp"
#include "gtdl/rng.hpp"

namespace gtdl {

/// Sparse precision matrix whose off-diagonal zero pattern is exactly the
/// graph's non-edges.
struct PrecisionMatrix {
    Matrix entries;
    BinaryAdjacency graph;
};

struct PrecisionOptions {
    double min_weight = 0.1;
    double max_weight = 1.0;
    double delta = 0.1;  // diagonal surplus, lower bound on the smallest eigenvalue
};

/// Diagonally dominant construction: edge weights s*u with u ~ U[min,max] and a
/// random sign, diagonal = sum of |row off-diagonals| + delta.
PrecisionMatrix sample_precision(const BinaryAdjacency& graph, SeededRng& rng, const PrecisionOptions& options = {});

/// n draws from N(0, inverse(precision)); the target column is drawn
/// uniformly before the samples.
Dataset sample_mvn(const PrecisionMatrix& precision, std::size_t n, SeededRng& rng);

}  // namespace gtdl
