#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gtdl/graphs.hpp"

using namespace gtdl;

TEST_CASE("ER graph extremes") {
    SeededRng rng(1);
    CHECK(sample_er_graph(6, 0.0, rng).edge_count() == 0);
    const auto full = sample_er_graph(3, 1.0, rng);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 3; ++k) CHECK(full(j, k) == (j != k));
    CHECK_THROWS_AS(sample_er_graph(1, 0.5, rng), DataError);
    CHECK_THROWS_AS(sample_er_graph(4, 1.5, rng), DataError);
}

TEST_CASE("ER graph is symmetric and hollow with the right edge rate") {
    SeededRng rng(2024);
    const int draws = 10000;
    const double q = 0.267;
    double total = 0;
    for (int i = 0; i < draws; ++i) {
        const auto g = sample_er_graph(10, q, rng);
        REQUIRE(g.is_symmetric());
        for (std::size_t j = 0; j < 10; ++j) REQUIRE_FALSE(g(j, j));
        total += static_cast<double>(g.edge_count()) / 2.0;
    }
    // Undirected edge count ~ Binomial(45, q).
    const double mean = 45 * q;
    const double sd_of_mean = std::sqrt(45 * q * (1 - q) / draws);
    CHECK(std::abs(total / draws - mean) < 3 * sd_of_mean);
}

TEST_CASE("layer sizes") {
    CHECK(layer_sizes(10, 3) == std::vector<std::size_t>{4, 3, 3});
    CHECK(layer_sizes(11, 3) == std::vector<std::size_t>{4, 4, 3});
    CHECK(layer_sizes(9, 3) == std::vector<std::size_t>{3, 3, 3});
    CHECK(layer_sizes(6, 1) == std::vector<std::size_t>{6});
    CHECK_THROWS_AS(layer_sizes(5, 3), InvalidLayout);
    SeededRng rng(0);
    CHECK_THROWS_AS(sample_layered_dag({5, 3, 3, 0.5}, rng), InvalidLayout);
}

TEST_CASE("layered DAG invariants hold for many seeds") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        SeededRng rng(seed);
        const DagLayout layout{10 + seed % 5, 1 + seed % 4, 2 + seed % 2, 0.1 + 0.8 * double(seed % 7) / 6.0};
        const auto dag = sample_layered_dag(layout, rng);
        REQUIRE(dag.layers.size() == layout.n_layers + 1);
        REQUIRE(dag.layers[0].size() == layout.n_root);
        std::size_t lo = dag.layers[1].size(), hi = lo;
        for (std::size_t l = 1; l < dag.layers.size(); ++l) {
            CHECK(dag.layers[l].size() >= 3);
            lo = std::min(lo, dag.layers[l].size());
            hi = std::max(hi, dag.layers[l].size());
        }
        CHECK(hi - lo <= 1);

        const auto layer = dag.layer_of();
        for (const auto& [parent, child] : dag.edges) CHECK(layer[child] == layer[parent] + 1);
        for (std::size_t node = dag.n_root; node < dag.node_count(); ++node) CHECK(!dag.parents(node).empty());

        const auto order = topological_order(dag);
        REQUIRE(order.size() == dag.node_count());
        std::vector<std::size_t> pos(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
        for (const auto& [parent, child] : dag.edges) CHECK(pos[parent] < pos[child]);
    }
}

TEST_CASE("p_edge = 1 connects every consecutive-layer pair") {
    SeededRng rng(4);
    const auto dag = sample_layered_dag({10, 3, 3, 1.0}, rng);
    for (std::size_t l = 1; l < dag.layers.size(); ++l)
        for (auto child : dag.layers[l]) CHECK(dag.parents(child) == dag.layers[l - 1]);
    std::size_t expected = 0;
    for (std::size_t l = 1; l < dag.layers.size(); ++l) expected += dag.layers[l].size() * dag.layers[l - 1].size();
    CHECK(dag.edges.size() == expected);
}

TEST_CASE("p_edge = 0 still gives every child exactly one parent") {
    SeededRng rng(4);
    const auto dag = sample_layered_dag({10, 3, 3, 0.0}, rng);
    for (std::size_t node = 3; node < dag.node_count(); ++node) CHECK(dag.parents(node).size() == 1);
}

TEST_CASE("dag_to_adjacency") {
    // Hand-built three-layer DAG: roots {0,1}; children 2,3,4 | 5,6,7.
    LayeredDag dag;
    dag.n_root = 2;
    dag.p = 6;
    dag.layers = {{0, 1}, {2, 3, 4}, {5, 6, 7}};
    dag.edges = {{0, 2}, {1, 3}, {1, 4}};
    CHECK(dag_to_adjacency(dag).edge_count() == 0);

    dag.edges.push_back({2, 5});
    auto a = dag_to_adjacency(dag);
    CHECK(a.edge_count() == 1);
    CHECK(a(0, 3));  // child ids shift by n_root

    dag.edges.push_back({3, 6});
    dag.edges.push_back({4, 6});
    dag.edges.push_back({4, 7});
    a = dag_to_adjacency(dag);
    const std::vector<std::vector<int>> expected{
        {0, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, 1, 1},
        {0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0},
    };
    CHECK(a.to_rows() == expected);
    CHECK(topological_order(dag) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("DAG sampling is deterministic") {
    SeededRng a(77), b(77);
    const auto x = sample_layered_dag({}, a);
    const auto y = sample_layered_dag({}, b);
    CHECK(x.edges == y.edges);
    CHECK(x.layers == y.layers);
}
