#pragma once

#include <map>
#include <span>
#include <string>

#include "gtdl/core.hpp"

namespace gtdl {

/// Mann-Whitney AUC over all ordered off-diagonal pairs: probability that a
/// true edge outscores a non-edge, ties counted as one half. The truth is
/// symmetrized first unless `directed` is set. Throws UndefinedAUC when the
/// truth has no edges or no non-edges.
double roc_auc(const WeightedAdjacency& learned, const BinaryAdjacency& truth, bool directed = false);

/// 1 - SS_res / SS_tot. Throws ZeroVariance for constant y_true.
double r2(std::span<const double> y_pred, std::span<const double> y_true);

/// Min-max rescaling across models; all 0.5 when every score is equal.
std::map<std::string, double> normalized_r2(const std::map<std::string, double>& scores);

}  // namespace gtdl
