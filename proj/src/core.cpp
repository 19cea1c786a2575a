#include "gtdl/core.hpp"

#include <cmath>

namespace gtdl {

BinaryAdjacency BinaryAdjacency::from_rows(const std::vector<std::vector<int>>& rows) {
    BinaryAdjacency a(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].size() != rows.size()) throw DataError("adjacency is not square");
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const int v = rows[j][k];
            if (v != 0 && v != 1) throw DataError("adjacency entries must be 0 or 1");
            if (j == k && v != 0) throw DataError("adjacency diagonal must be zero");
            a.entries_[j * a.p_ + k] = static_cast<std::uint8_t>(v);
        }
    }
    return a;
}

void BinaryAdjacency::set(std::size_t j, std::size_t k, bool value) {
    if (j == k) {
        if (value) throw DataError("self-interactions are not allowed");
        return;
    }
    entries_[j * p_ + k] = value ? 1 : 0;
}

bool BinaryAdjacency::is_symmetric() const {
    for (std::size_t j = 0; j < p_; ++j)
        for (std::size_t k = j + 1; k < p_; ++k)
            if ((*this)(j, k) != (*this)(k, j)) return false;
    return true;
}

std::size_t BinaryAdjacency::edge_count() const {
    std::size_t count = 0;
    for (auto e : entries_) count += e;
    return count;
}

std::vector<std::vector<int>> BinaryAdjacency::to_rows() const {
    std::vector<std::vector<int>> rows(p_, std::vector<int>(p_, 0));
    for (std::size_t j = 0; j < p_; ++j)
        for (std::size_t k = 0; k < p_; ++k) rows[j][k] = (*this)(j, k) ? 1 : 0;
    return rows;
}

WeightedAdjacency::WeightedAdjacency(Matrix values) : values_(std::move(values)) {
    if (values_.rows() != values_.cols()) throw DataError("weighted adjacency is not square");
    for (Eigen::Index j = 0; j < values_.rows(); ++j) {
        for (Eigen::Index k = 0; k < values_.cols(); ++k) {
            const double v = values_(j, k);
            if (!(v >= 0.0 && v <= 1.0)) throw DataError("weighted adjacency entry outside [0,1]");
            if (j == k && v != 0.0) throw DataError("weighted adjacency diagonal must be zero");
        }
    }
}

BinaryAdjacency symmetrize(const BinaryAdjacency& a) {
    BinaryAdjacency out(a.p());
    for (std::size_t j = 0; j < a.p(); ++j)
        for (std::size_t k = 0; k < a.p(); ++k)
            if (j != k && (a(j, k) || a(k, j))) out.set(j, k, true);
    return out;
}

void Dataset::validate() const {
    if (p() == 0) throw DataError("dataset has no columns");
    if (target_index >= p()) throw DataError("target_index out of range");
    if (truth.p() != p()) throw DataError("truth adjacency size does not match p");
    if (!values.allFinite()) throw DataError("dataset contains non-finite values");
}

Dataset Dataset::rows(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.values.resize(static_cast<Eigen::Index>(indices.size()), values.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(indices[i]));
    out.target_index = target_index;
    out.truth = truth;
    out.meta = meta;
    return out;
}

}  // namespace gtdl
