#pragma once

// Recursive identification: Sigma = P P' with P lower triangular, so a shock
// to variable j has no impact on variables ordered before j.

#include "vastvar/common.hpp"

#include <stdexcept>
#include <string>

namespace vastvar {

struct StructuralFactor {
  Matrix Pmat;          // lower triangular, positive diagonal
  int shock_index = -1;
  Vector s;             // unconditional sds in reporting units
};

inline StructuralFactor cholesky_identify(const Matrix& Sigma) {
  if (Sigma.rows() != Sigma.cols() || Sigma.rows() == 0) throw std::invalid_argument("Sigma must be square");
  if (!Sigma.isApprox(Sigma.transpose(), 1e-12)) throw NumericalError("Sigma is not symmetric");
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all())
    throw NumericalError("Sigma is not positive definite");
  StructuralFactor f;
  f.Pmat = llt.matrixL();
  return f;
}

inline StructuralFactor cholesky_identify(const Matrix& Sigma, int shock_index, Vector s) {
  StructuralFactor f = cholesky_identify(Sigma);
  if (shock_index < 0 || shock_index >= Sigma.rows()) throw std::out_of_range("shock index out of range");
  if (s.size() != Sigma.rows()) throw std::invalid_argument("scale vector length must equal M");
  f.shock_index = shock_index;
  f.s = std::move(s);
  return f;
}

/// Impact of a shock of size sigma (in unconditional sds of variable j):
/// sigma * s_j * P e_j / P_jj. Element j equals sigma * s_j exactly.
inline Vector scaled_impact(const StructuralFactor& f, double sigma) {
  if (sigma == 0.0) throw std::invalid_argument("shock scale must be nonzero");
  const int j = f.shock_index;
  if (j < 0 || j >= f.Pmat.rows()) throw std::out_of_range("structural factor has no valid shock index");
  Vector col = f.Pmat.col(j) / f.Pmat(j, j);
  col(j) = 1.0;
  return (sigma * f.s(j)) * col;
}

}  // namespace vastvar
