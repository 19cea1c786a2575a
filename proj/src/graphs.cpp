#include "gtdl/graphs.hpp"

#include <algorithm>
#include <queue>
#include <string>

namespace gtdl {

BinaryAdjacency sample_er_graph(std::size_t p, double p_edge, SeededRng& rng) {
    if (p < 2) throw DataError("graph needs at least two nodes");
    if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw DataError("p_edge must lie in [0,1]");
    BinaryAdjacency g(p);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j + 1; k < p; ++k) {
            if (rng.bernoulli(p_edge)) {
                g.set(j, k, true);
                g.set(k, j, true);
            }
        }
    }
    return g;
}

std::vector<std::size_t> LayeredDag::parents(std::size_t node) const {
    std::vector<std::size_t> out;
    for (const auto& [from, to] : edges)
        if (to == node) out.push_back(from);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> LayeredDag::layer_of() const {
    std::vector<std::size_t> out(node_count(), 0);
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (auto node : layers[l]) out[node] = l;
    return out;
}

std::vector<std::size_t> layer_sizes(std::size_t p, std::size_t n_layers) {
    if (n_layers == 0 || p < 3 * n_layers)
        throw InvalidLayout("cannot place " + std::to_string(p) + " nodes on " + std::to_string(n_layers) +
                            " layers with at least 3 nodes each");
    std::vector<std::size_t> sizes(n_layers, p / n_layers);
    for (std::size_t l = 0; l < p % n_layers; ++l) ++sizes[l];
    return sizes;
}

LayeredDag sample_layered_dag(const DagLayout& layout, SeededRng& rng) {
    if (!(layout.p_edge >= 0.0 && layout.p_edge <= 1.0)) throw DataError("p_edge must lie in [0,1]");
    if (layout.n_root == 0) throw InvalidLayout("at least one root node is required");
    const auto sizes = layer_sizes(layout.p, layout.n_layers);

    LayeredDag dag;
    dag.n_root = layout.n_root;
    dag.p = layout.p;
    std::size_t next_id = 0;
    dag.layers.emplace_back();
    for (std::size_t r = 0; r < layout.n_root; ++r) dag.layers[0].push_back(next_id++);
    for (auto size : sizes) {
        dag.layers.emplace_back();
        for (std::size_t i = 0; i < size; ++i) dag.layers.back().push_back(next_id++);
    }

    for (std::size_t l = 1; l < dag.layers.size(); ++l) {
        const auto& previous = dag.layers[l - 1];
        for (auto child : dag.layers[l]) {
            bool has_parent = false;
            for (auto parent : previous) {
                if (rng.bernoulli(layout.p_edge)) {
                    dag.edges.emplace_back(parent, child);
                    has_parent = true;
                }
            }
            if (!has_parent) {
                const auto pick = previous[static_cast<std::size_t>(rng.uniform_index(previous.size()))];
                dag.edges.emplace_back(pick, child);
            }
        }
    }
    return dag;
}

BinaryAdjacency dag_to_adjacency(const LayeredDag& dag) {
    BinaryAdjacency a(dag.p);
    for (const auto& [from, to] : dag.edges)
        if (!dag.is_root(from) && !dag.is_root(to)) a.set(from - dag.n_root, to - dag.n_root, true);
    return a;
}

std::vector<std::size_t> topological_order(const LayeredDag& dag) {
    const auto n = dag.node_count();
    std::vector<std::size_t> in_degree(n, 0);
    std::vector<std::vector<std::size_t>> children(n);
    for (const auto& [from, to] : dag.edges) {
        ++in_degree[to];
        children[from].push_back(to);
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t v = 0; v < n; ++v)
        if (in_degree[v] == 0) ready.push(v);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const auto v = ready.top();
        ready.pop();
        order.push_back(v);
        for (auto c : children[v])
            if (--in_degree[c] == 0) ready.push(c);
    }
    if (order.size() != n) throw DataError("graph contains a cycle");
    return order;
}

}  // namespace gtdl
