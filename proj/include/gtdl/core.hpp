#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gtdl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
/// Heap buffer with Eigen's alignment. Vectorized reductions over Maps peel
/// according to the runtime address, so buffers seen through Maps use this to
/// keep results bit-identical across processes.
using AlignedBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

// Numeric tolerances shared by the library and its tests.
struct Tolerances {
    static constexpr double spd_symmetry = 1e-10;
    static constexpr double reconstruction = 1e-8;
    static constexpr double row_sum = 1e-6;
};

// ---------------------------------------------------------------------------
// Errors. Every library failure derives from gtdl::Error; the kind decides the
// CLI exit code (usage 1, data 2, numeric 3).

enum class ErrorKind { Usage, Data, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define GTDL_DEFINE_ERROR(Name, Kind)                                                      \
    class Name : public Error {                                                            \
    public:                                                                                \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, #Name ": " + what) {} \
    }

GTDL_DEFINE_ERROR(UsageError, Usage);
GTDL_DEFINE_ERROR(DataError, Data);
GTDL_DEFINE_ERROR(InvalidLayout, Data);
GTDL_DEFINE_ERROR(ArityMismatch, Data);
GTDL_DEFINE_ERROR(DegenerateColumn, Data);
GTDL_DEFINE_ERROR(UndefinedAUC, Data);
GTDL_DEFINE_ERROR(ZeroVariance, Data);
GTDL_DEFINE_ERROR(InsufficientSamples, Data);
GTDL_DEFINE_ERROR(NotPositiveDefinite, Numeric);
GTDL_DEFINE_ERROR(NonFiniteLoss, Numeric);

#undef GTDL_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Adjacency matrices over the p features of a table.

/// Ground-truth graph: entries in {0,1}, zero diagonal. Directed graphs (SCM)
/// store parent -> child as entry (parent, child).
class BinaryAdjacency {
public:
    BinaryAdjacency() = default;
    explicit BinaryAdjacency(std::size_t p) : p_(p), entries_(p * p, 0) {}
    /// Validates the invariants; throws DataError on violation.
    static BinaryAdjacency from_rows(const std::vector<std::vector<int>>& rows);

    std::size_t p() const noexcept { return p_; }
    bool operator()(std::size_t j, std::size_t k) const { return entries_[j * p_ + k] != 0; }
    /// Setting a diagonal entry is rejected.
    void set(std::size_t j, std::size_t k, bool value);

    bool is_symmetric() const;
    std::size_t edge_count() const;  // nonzero ordered entries
    std::vector<std::vector<int>> to_rows() const;

    friend bool operator==(const BinaryAdjacency&, const BinaryAdjacency&) = default;

private:
    std::size_t p_ = 0;
    std::vector<std::uint8_t> entries_;
};

/// Learned interaction strengths: entries in [0,1], zero diagonal.
class WeightedAdjacency {
public:
    WeightedAdjacency() = default;
    explicit WeightedAdjacency(std::size_t p) : values_(Matrix::Zero(p, p)) {}
    /// Validates the invariants; throws DataError on violation.
    explicit WeightedAdjacency(Matrix values);

    std::size_t p() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    double operator()(std::size_t j, std::size_t k) const { return values_(j, k); }
    const Matrix& values() const noexcept { return values_; }

private:
    Matrix values_;
};

/// result(j,k) = max(a(j,k), a(k,j)).
BinaryAdjacency symmetrize(const BinaryAdjacency& a);

// ---------------------------------------------------------------------------

struct GeneratorMeta {
    std::string generator;  // "mvn" | "scm"
    std::uint64_t seed = 0;
    std::map<std::string, double> params;
};

/// n x p table with a designated target column and its ground-truth graph.
struct Dataset {
    Matrix values;
    std::size_t target_index = 0;
    BinaryAdjacency truth;
    GeneratorMeta meta;

    std::size_t n() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t p() const noexcept { return static_cast<std::size_t>(values.cols()); }

    /// Throws DataError when an invariant is broken.
    void validate() const;
    /// Copy of the selected rows with the same target and truth.
    Dataset rows(const std::vector<std::size_t>& indices) const;
};

}  // namespace gtdl
