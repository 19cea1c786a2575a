#include "gtdl/synth_scm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gtdl {

std::string_view ComputationalMap::formula() const {
    static constexpr std::string_view table[3][3] = {
        {"x1^2/3", "0.5*x1^2+3*x1", "-|x1|+4*x1"},
        {"(x1*x2+x1^2)/2", "x1^2+x2^2-x1*x2", "-(x1+x2)^2+x1*x2"},
        {"(x1*x2+x3^2)/3", "-x1^2+x2*x3+x3", "(x1+x2+x3)+x1*x3"},
    };
    return table[arity - 1][map_id];
}

double eval_map(const ComputationalMap& map, std::span<const double> x) {
    if (map.arity < 1 || map.arity > 3 || map.map_id < 0 || map.map_id > 2)
        throw ArityMismatch("unknown computational map");
    if (x.size() != static_cast<std::size_t>(map.arity))
        throw ArityMismatch("map of arity " + std::to_string(map.arity) + " given " + std::to_string(x.size()) +
                            " parents");
    switch (map.arity * 3 + map.map_id) {
        case 3: return x[0] * x[0] / 3.0;
        case 4: return 0.5 * x[0] * x[0] + 3.0 * x[0];
        case 5: return -std::abs(x[0]) + 4.0 * x[0];
        case 6: return (x[0] * x[1] + x[0] * x[0]) / 2.0;
        case 7: return x[0] * x[0] + x[1] * x[1] - x[0] * x[1];
        case 8: return -(x[0] + x[1]) * (x[0] + x[1]) + x[0] * x[1];
        case 9: return (x[0] * x[1] + x[2] * x[2]) / 3.0;
        case 10: return -x[0] * x[0] + x[1] * x[2] + x[2];
        default: return (x[0] + x[1] + x[2]) + x[0] * x[2];
    }
}

std::vector<ComputationalMap> assign_maps(LayeredDag& dag, SeededRng& rng) {
    std::vector<ComputationalMap> maps(dag.p);
    for (std::size_t c = 0; c < dag.p; ++c) {
        const std::size_t node = dag.n_root + c;
        auto parents = dag.parents(node);
        if (parents.empty()) throw DataError("child node " + std::to_string(node) + " has no parent");
        if (parents.size() > 3) {
            const auto keep = rng.sample_without_replacement(parents.size(), 3);
            std::vector<std::size_t> kept;
            for (auto i : keep) kept.push_back(parents[i]);
            std::erase_if(dag.edges, [&](const auto& e) {
                return e.second == node && std::find(kept.begin(), kept.end(), e.first) == kept.end();
            });
            parents = dag.parents(node);
        }
        maps[c].arity = static_cast<int>(parents.size());
        maps[c].map_id = static_cast<int>(rng.uniform_index(3));
    }
    return maps;
}

ScmSample generate_scm_detailed(const LayeredDag& dag, const std::vector<ComputationalMap>& maps, std::size_t n,
                                SeededRng& rng, const ScmOptions& options, const std::vector<std::size_t>* order) {
    if (n < 2) throw DataError("SCM generation needs at least two samples");
    if (maps.size() != dag.p) throw DataError("one computational map per child is required");
    const auto rows = static_cast<Eigen::Index>(n);
    const auto nodes = static_cast<Eigen::Index>(dag.node_count());

    // Draw order: target, roots (row-major), noise (row-major over children).
    ScmSample out;
    out.dataset.target_index = static_cast<std::size_t>(rng.uniform_index(dag.p));
    Matrix x(rows, nodes);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(dag.n_root); ++r) x(i, r) = rng.normal();
    Matrix noise(rows, static_cast<Eigen::Index>(dag.p));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(i, c) = rng.normal(0.0, options.noise_sd);

    out.normalized.resize(rows, static_cast<Eigen::Index>(dag.p));
    const auto topo = order ? *order : topological_order(dag);
    std::vector<double> h(n);
    for (auto node : topo) {
        if (dag.is_root(node)) continue;
        const auto c = static_cast<Eigen::Index>(node - dag.n_root);
        const auto parents = dag.parents(node);
        const auto& map = maps[static_cast<std::size_t>(c)];
        std::vector<double> args(parents.size());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < parents.size(); ++a)
                args[a] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(parents[a]));
            h[i] = eval_map(map, args);
        }
        double mean = 0.0;
        for (double v : h) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : h) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))) || !std::isfinite(sd))
            throw DegenerateColumn("child node " + std::to_string(node) + " has zero variance before noise");
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const double normalized = (h[i] - mean) / sd;
            out.normalized(row, c) = normalized;
            x(row, static_cast<Eigen::Index>(node)) =
                std::clamp(normalized + noise(row, c), -options.clip, options.clip);
        }
    }

    out.dataset.values = x.rightCols(static_cast<Eigen::Index>(dag.p));
    out.dataset.truth = dag_to_adjacency(dag);
    out.dataset.meta.generator = "scm";
    return out;
}

Dataset generate_scm(const LayeredDag& dag, const std::vector<ComputationalMap>& maps, std::size_t n, SeededRng& rng,
                     const ScmOptions& options) {
    return generate_scm_detailed(dag, maps, n, rng, options).dataset;
}

}  // namespace gtdl
