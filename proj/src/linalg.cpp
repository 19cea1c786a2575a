#include "gtdl/linalg.hpp"

#include <Eigen/Cholesky>

namespace gtdl {

namespace {

void require_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) throw DataError("matrix is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > Tolerances::spd_symmetry * scale)
        throw NotPositiveDefinite("matrix is not symmetric");
}

}  // namespace

Matrix cholesky(const Matrix& m) {
    require_symmetric(m);
    Eigen::LLT<Matrix, Eigen::Lower> llt(m);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("non-positive pivot in Cholesky factorization");
    Matrix lower = llt.matrixL();
    return lower;
}

Matrix invert_spd(const Matrix& m) {
    require_symmetric(m);
    Eigen::LLT<Matrix, Eigen::Lower> llt(m);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("non-positive pivot in Cholesky factorization");
    Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
    return 0.5 * (inv + inv.transpose());
}

}  // namespace gtdl
