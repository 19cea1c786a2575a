#include "gtdl/splits.hpp"

#include <string>

#include "gtdl/core.hpp"

namespace gtdl {

std::size_t fold_count(std::size_t n_train) {
    switch (n_train) {
        case 1000: return 4;
        case 2000: return 3;
        case 3000: return 2;
        case 4000: return 1;
        default: throw DataError("no fold count defined for n_train=" + std::to_string(n_train));
    }
}

std::size_t earlystop_size(std::size_t n_train) { return n_train / 4; }

std::vector<SplitPlan> make_splits(std::size_t n, std::size_t n_train, std::size_t folds, SeededRng& rng,
                                   const SplitSizes& sizes) {
    const std::size_t n_es = earlystop_size(n_train);
    const std::size_t needed = n_train + n_es + sizes.n_val_hparam + sizes.n_test;
    if (n < needed)
        throw InsufficientSamples("need " + std::to_string(needed) + " rows, dataset has " + std::to_string(n));
    if (folds == 0) throw DataError("at least one fold is required");

    const auto perm = rng.permutation(n);
    std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sizes.n_test));
    std::vector<std::size_t> val_hparam(perm.begin() + static_cast<std::ptrdiff_t>(sizes.n_test),
                                        perm.begin() + static_cast<std::ptrdiff_t>(sizes.n_test + sizes.n_val_hparam));
    const std::vector<std::size_t> pool(perm.begin() + static_cast<std::ptrdiff_t>(sizes.n_test + sizes.n_val_hparam),
                                        perm.end());

    std::vector<SplitPlan> plans;
    for (std::size_t f = 0; f < folds; ++f) {
        const auto pick = rng.sample_without_replacement(pool.size(), n_train + n_es);
        SplitPlan plan;
        plan.test = test;
        plan.val_hparam = val_hparam;
        for (std::size_t i = 0; i < n_train; ++i) plan.train.push_back(pool[pick[i]]);
        for (std::size_t i = n_train; i < n_train + n_es; ++i) plan.val_earlystop.push_back(pool[pick[i]]);
        plans.push_back(std::move(plan));
    }
    return plans;
}

bool is_disjoint(const SplitPlan& plan, std::size_t n) {
    std::vector<int> owner(n, -1);
    int id = 0;
    for (const auto* set : {&plan.train, &plan.val_earlystop, &plan.val_hparam, &plan.test}) {
        for (auto i : *set) {
            if (i >= n || owner[i] != -1) return false;
            owner[i] = id;
        }
        ++id;
    }
    return true;
}

}  // namespace gtdl
