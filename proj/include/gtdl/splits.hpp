#pragma once

#include <cstddef>
#include <vector>

#include "gtdl/rng.hpp"

namespace gtdl {

/// Four disjoint row-index sets. val_hparam and test are shared by all folds;
/// train and val_earlystop are redrawn per fold.
struct SplitPlan {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val_earlystop;
    std::vector<std::size_t> val_hparam;
    std::vector<std::size_t> test;
};

struct SplitSizes {
    std::size_t n_val_hparam = 2500;
    std::size_t n_test = 2500;
};

/// Number of cross-validation folds for a training size:
/// 1000 -> 4, 2000 -> 3, 3000 -> 2, 4000 -> 1. Throws DataError otherwise.
std::size_t fold_count(std::size_t n_train);

std::size_t earlystop_size(std::size_t n_train);

/// Throws InsufficientSamples when n < n_train + floor(n_train/4) + n_val_hparam + n_test.
std::vector<SplitPlan> make_splits(std::size_t n, std::size_t n_train, std::size_t folds, SeededRng& rng,
                                   const SplitSizes& sizes = {});

/// True when the four index sets are pairwise disjoint and within [0, n).
bool is_disjoint(const SplitPlan& plan, std::size_t n);

}  // namespace gtdl
