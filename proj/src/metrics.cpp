#include "gtdl/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace gtdl {

double roc_auc(const WeightedAdjacency& learned, const BinaryAdjacency& truth, bool directed) {
    if (learned.p() != truth.p()) throw DataError("learned and true adjacency differ in size");
    const BinaryAdjacency labels = directed ? truth : symmetrize(truth);
    std::vector<std::pair<double, bool>> scored;
    for (std::size_t j = 0; j < labels.p(); ++j)
        for (std::size_t k = 0; k < labels.p(); ++k)
            if (j != k) scored.emplace_back(learned(j, k), labels(j, k));

    std::uint64_t positives = 0;
    for (const auto& s : scored) positives += s.second ? 1 : 0;
    const std::uint64_t negatives = scored.size() - positives;
    if (positives == 0 || negatives == 0)
        throw UndefinedAUC("truth needs at least one edge and one non-edge");

    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    // Twice the U statistic, kept integral: each edge earns 2 per lower-scored
    // non-edge and 1 per tied non-edge.
    std::uint64_t twice_u = 0;
    std::uint64_t negatives_below = 0;
    for (std::size_t i = 0; i < scored.size();) {
        std::size_t end = i;
        std::uint64_t pos = 0, neg = 0;
        while (end < scored.size() && scored[end].first == scored[i].first) {
            (scored[end].second ? pos : neg) += 1;
            ++end;
        }
        twice_u += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = end;
    }
    return static_cast<double>(twice_u) / static_cast<double>(2 * positives * negatives);
}

double r2(std::span<const double> y_pred, std::span<const double> y_true) {
    if (y_pred.size() != y_true.size()) throw DataError("prediction and target lengths differ");
    if (y_true.size() < 2) throw DataError("R2 needs at least two samples");
    double mean = 0.0;
    for (double v : y_true) mean += v;
    mean /= static_cast<double>(y_true.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
        ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
    }
    if (ss_tot <= 0.0) throw ZeroVariance("target has zero variance");
    return 1.0 - ss_res / ss_tot;
}

std::map<std::string, double> normalized_r2(const std::map<std::string, double>& scores) {
    if (scores.size() < 2) throw DataError("normalization needs at least two models");
    double lo = scores.begin()->second, hi = lo;
    for (const auto& [name, value] : scores) {
        lo = std::min(lo, value);
        hi = std::max(hi, value);
    }
    std::map<std::string, double> out;
    for (const auto& [name, value] : scores) out[name] = hi == lo ? 0.5 : (value - lo) / (hi - lo);
    return out;
}

}  // namespace gtdl
