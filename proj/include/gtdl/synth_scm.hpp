#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "gtdl/core.hpp"
#include "gtdl/graphs.hpp"
#include "gtdl/rng.hpp"

namespace gtdl {

/// One entry of the fixed table of nonlinear parent -> child maps. Three maps
/// exist for each arity 1, 2 and 3; map_id is 0..2 within an arity.
struct ComputationalMap {
    int arity = 1;
    int map_id = 0;

    std::string_view formula() const;
    friend bool operator==(const ComputationalMap&, const ComputationalMap&) = default;
};

/// Throws ArityMismatch when parents.size() != map.arity.
double eval_map(const ComputationalMap& map, std::span<const double> parents);

/// Uniform map of matching arity for every child, indexed by child position
/// (node id - n_root). A child with more than three parents keeps a random
/// subset of three; the dropped edges are removed from the DAG.
std::vector<ComputationalMap> assign_maps(LayeredDag& dag, SeededRng& rng);

struct ScmOptions {
    double noise_sd = 0.70710678118654752;  // sqrt(0.5): noise variance 0.5
    double clip = 3.0;
};

struct ScmSample {
    Dataset dataset;
    Matrix normalized;  // n x p child columns after normalization, before noise
};

/// Roots ~ N(0,1); children evaluated in topological order as
/// clip(normalize(f(parents)) + noise, -clip, clip). Normalization uses the
/// population mean and standard deviation over the n samples. All random
/// numbers are drawn before evaluation, so the result does not depend on which
/// valid topological order is used. Throws DegenerateColumn on a zero-variance
/// child column.
ScmSample generate_scm_detailed(const LayeredDag& dag, const std::vector<ComputationalMap>& maps, std::size_t n,
                                SeededRng& rng, const ScmOptions& options = {},
                                const std::vector<std::size_t>* order = nullptr);

Dataset generate_scm(const LayeredDag& dag, const std::vector<ComputationalMap>& maps, std::size_t n, SeededRng& rng,
                     const ScmOptions& options = {});

}  // namespace gtdl
