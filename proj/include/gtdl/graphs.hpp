#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gtdl/core.hpp"
#include "gtdl/rng.hpp"

namespace gtdl {

/// Undirected Erdos-Renyi graph: each unordered pair is an edge with
/// probability p_edge. Connectivity is not enforced.
BinaryAdjacency sample_er_graph(std::size_t p, double p_edge, SeededRng& rng);

/// DAG with n_root cause nodes in layer 0 and p child nodes spread over
/// n_layers further layers. Node ids: roots are 0..n_root-1, children follow
/// in layer order. Edges only connect consecutive layers.
struct LayeredDag {
    std::size_t n_root = 0;
    std::size_t p = 0;
    std::vector<std::vector<std::size_t>> layers;  // layers[0] holds the roots
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // (parent, child)

    std::size_t node_count() const noexcept { return n_root + p; }
    bool is_root(std::size_t node) const noexcept { return node < n_root; }
    /// Sorted parent ids of a node.
    std::vector<std::size_t> parents(std::size_t node) const;
    /// Layer index of every node.
    std::vector<std::size_t> layer_of() const;
};

struct DagLayout {
    std::size_t p = 10;
    std::size_t n_root = 3;
    std::size_t n_layers = 3;
    double p_edge = 0.5;
};

/// Sizes of the child layers: differ by at most one, larger layers first.
/// Throws InvalidLayout when p < 3 * n_layers.
std::vector<std::size_t> layer_sizes(std::size_t p, std::size_t n_layers);

/// Bernoulli(p_edge) edges between consecutive layers; a child left without a
/// parent gets one uniformly drawn from the previous layer.
LayeredDag sample_layered_dag(const DagLayout& layout, SeededRng& rng);

/// Child-to-child edges as a p x p directed adjacency (roots dropped).
BinaryAdjacency dag_to_adjacency(const LayeredDag& dag);

/// Kahn topological order over all nodes, ties broken by smallest id.
std::vector<std::size_t> topological_order(const LayeredDag& dag);

}  // namespace gtdl
