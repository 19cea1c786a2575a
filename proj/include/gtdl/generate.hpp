#pragma once

#include <cstdint>
#include <string>

#include "gtdl/core.hpp"

namespace gtdl {

enum class GeneratorType { Mvn, Scm };

GeneratorType parse_generator(const std::string& name);
std::string to_string(GeneratorType type);

/// Everything needed to regenerate a dataset bit-for-bit.
struct DatasetSpec {
    GeneratorType type = GeneratorType::Mvn;
    std::uint64_t seed = 0;
    std::size_t n = 10000;
    std::size_t p = 10;
    double p_edge = 0.267;  // 0.267 for MVN, 0.5 for SCM
    // MVN precision construction
    double min_weight = 0.1;
    double max_weight = 1.0;
    double delta = 0.1;
    // SCM layout and noise
    std::size_t n_root = 3;
    std::size_t n_layers = 3;
    double noise_sd = 0.70710678118654752;
    double clip = 3.0;

    static DatasetSpec mvn_defaults(std::uint64_t seed);
    static DatasetSpec scm_defaults(std::uint64_t seed);
};

/// Runs the full MVN or SCM pipeline. For SCM a zero-variance child column
/// triggers one redraw of the computational maps before failing.
Dataset make_dataset(const DatasetSpec& spec);

}  // namespace gtdl
