#include "gtdl/extract.hpp"

#include <cmath>
#include <vector>

#include "gtdl/linalg.hpp"

namespace gtdl {

Matrix average_attention(const AttentionRecord& record, Exec exec) {
    if (record.samples == 0 || record.layers == 0 || record.heads == 0 || record.tokens == 0)
        throw DataError("attention record is empty");
    const std::size_t t = record.tokens;
    const std::size_t maps = record.samples * record.layers * record.heads;
    if (record.data.size() != maps * t * t) throw DataError("attention record has inconsistent shape");

    // Fixed 64-map blocks summed in block order keep the result independent of
    // the thread count.
    constexpr std::size_t kBlock = 64;
    const std::size_t blocks = (maps + kBlock - 1) / kBlock;
    std::vector<double> partial(blocks * t * t, 0.0);
    const auto body = [&](std::ptrdiff_t b) {
        double* acc = partial.data() + static_cast<std::size_t>(b) * t * t;
        const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
        const std::size_t end = std::min(maps, begin + kBlock);
        for (std::size_t m = begin; m < end; ++m) {
            const double* src = record.data.data() + m * t * t;
            for (std::size_t i = 0; i < t * t; ++i) acc[i] += src[i];
        }
    };
    const auto count = static_cast<std::ptrdiff_t>(blocks);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < count; ++b) body(b);
    } else {
        for (std::ptrdiff_t b = 0; b < count; ++b) body(b);
    }

    Matrix avg = Matrix::Zero(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t i = 0; i < t * t; ++i)
            avg(static_cast<Eigen::Index>(i / t), static_cast<Eigen::Index>(i % t)) += partial[b * t * t + i];
    return avg / static_cast<double>(maps);
}

WeightedAdjacency denormalize(const Matrix& average) {
    if (average.rows() != average.cols()) throw DataError("attention map is not square");
    if ((average.array() < 0.0).any() || !average.allFinite())
        throw DataError("attention map entries must be finite and non-negative");
    Matrix a = average;
    a.diagonal().setZero();
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        const double peak = a.row(j).maxCoeff();
        if (peak > 0.0) a.row(j) /= peak;
    }
    return WeightedAdjacency(std::move(a));
}

WeightedAdjacency pad_target(const WeightedAdjacency& a, std::size_t target_index) {
    const std::size_t p = a.p() + 1;
    if (target_index >= p) throw DataError("target_index out of range for padding");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    auto src = [&](std::size_t i) { return i < target_index ? i : i - 1; };
    for (std::size_t j = 0; j < p; ++j) {
        if (j == target_index) continue;
        for (std::size_t k = 0; k < p; ++k) {
            if (k == target_index) continue;
            out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = a(src(j), src(k));
        }
    }
    return WeightedAdjacency(std::move(out));
}

WeightedAdjacency attention_adjacency(const Matrix& average, std::size_t p, std::size_t target_index,
                                      Readout readout) {
    const auto cols = token_columns(p, target_index, readout);
    if (static_cast<std::size_t>(average.rows()) != cols.size())
        throw DataError("attention map size does not match the token layout");
    if (readout == Readout::Graph) return pad_target(denormalize(average), target_index);
    Matrix reordered(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t k = 0; k < cols.size(); ++k)
            reordered(static_cast<Eigen::Index>(cols[j]), static_cast<Eigen::Index>(cols[k])) =
                average(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    return denormalize(reordered);
}

WeightedAdjacency partial_correlation_adjacency(const Dataset& ds, double ridge) {
    const auto n = ds.values.rows();
    const auto p = ds.values.cols();
    if (n <= p) throw DataError("partial correlations need more samples than columns");
    if (!(ridge >= 0.0)) throw DataError("ridge must be non-negative");
    const Eigen::RowVectorXd mean = ds.values.colwise().mean();
    const Matrix centered = ds.values.rowwise() - mean;
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);
    const Vector sd = cov.diagonal().cwiseSqrt();
    if ((sd.array() <= 0.0).any()) throw NotPositiveDefinite("a column has zero variance");
    Matrix corr = cov.array() / (sd * sd.transpose()).array();
    corr = 0.5 * (corr + corr.transpose());
    // trace(R)/p == 1, so the ridge is ridge * trace / p on the correlation scale.
    corr.diagonal().array() += ridge;
    const Matrix k = invert_spd(corr);
    Matrix partial(p, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index c = 0; c < p; ++c) partial(j, c) = std::abs(k(j, c)) / std::sqrt(k(j, j) * k(c, c));
    return denormalize(partial);
}

}  // namespace gtdl
