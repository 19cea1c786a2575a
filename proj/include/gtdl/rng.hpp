#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace gtdl {

/// xoshiro256** seeded through splitmix64. Distributions are implemented here
/// rather than taken from <random> so that streams are identical across
/// standard libraries.
class SeededRng {
public:
    static constexpr std::string_view algorithm = "xoshiro256starstar-splitmix64";

    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    bool bernoulli(double prob) { return uniform() < prob; }
    /// Standard normal (Box-Muller, second value cached).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);
    /// k distinct indices from 0..n-1, in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic child seed from a parent seed and a sequence of tags.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags);
/// 64-bit FNV-1a hash of a string, used to turn names into seed tags and keys.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace gtdl
