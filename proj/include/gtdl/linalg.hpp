#pragma once

#include "gtdl/core.hpp"

namespace gtdl {

/// Lower-triangular L with L * L^T == m. Requires m symmetric within
/// Tolerances::spd_symmetry (relative to its largest entry); throws
/// NotPositiveDefinite when a pivot is not positive.
Matrix cholesky(const Matrix& m);

/// Inverse of a symmetric positive definite matrix, symmetrized on output.
Matrix invert_spd(const Matrix& m);

}  // namespace gtdl
