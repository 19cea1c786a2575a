#include "gtdl/synth_mvn.hpp"

#include <cmath>

#include "gtdl/linalg.hpp"

namespace gtdl {

PrecisionMatrix sample_precision(const BinaryAdjacency& graph, SeededRng& rng, const PrecisionOptions& options) {
    if (!graph.is_symmetric()) throw DataError("precision graph must be undirected");
    if (!(options.min_weight > 0.0 && options.min_weight <= options.max_weight))
        throw DataError("edge weight range must satisfy 0 < min <= max");
    if (!(options.delta > 0.0)) throw DataError("delta must be positive");

    const auto p = graph.p();
    const auto size = static_cast<Eigen::Index>(p);
    PrecisionMatrix out{Matrix::Zero(size, size), graph};
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j + 1; k < p; ++k) {
            if (!graph(j, k)) continue;
            const double magnitude = rng.uniform(options.min_weight, options.max_weight);
            const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
            out.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = sign * magnitude;
            out.entries(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = sign * magnitude;
        }
    }
    for (Eigen::Index j = 0; j < size; ++j)
        out.entries(j, j) = out.entries.row(j).cwiseAbs().sum() + options.delta;
    return out;
}

Dataset sample_mvn(const PrecisionMatrix& precision, std::size_t n, SeededRng& rng) {
    if (n == 0) throw DataError("sample count must be positive");
    const Matrix covariance = invert_spd(precision.entries);
    const Matrix lower = cholesky(covariance);
    const auto p = precision.graph.p();

    Dataset ds;
    ds.target_index = static_cast<std::size_t>(rng.uniform_index(p));
    Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
    ds.values = z * lower.transpose();
    ds.truth = precision.graph;
    ds.meta.generator = "mvn";
    return ds;
}

}  // namespace gtdl
