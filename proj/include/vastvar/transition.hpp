#pragma once

#include "vastvar/common.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace vastvar {

/// One weak learner: logistic switch on column `sel` of X with threshold `mu`
/// and speed `phi`.
struct TransitionSpec {
  int sel = 0;
  double mu = 0.0;
  double phi = 1.0;

  bool operator==(const TransitionSpec&) const = default;
};

inline constexpr double kExponentClamp = 500.0;

inline double eval_transition(const TransitionSpec& spec, double z) {
  const double e = -spec.phi * (z - spec.mu);
  if (e > kExponentClamp) return 0.0;
  if (e < -kExponentClamp) return 1.0;
  return 1.0 / (1.0 + std::exp(e));
}

inline Vector eval_transition(const TransitionSpec& spec, const Eigen::Ref<const Vector>& z) {
  Vector s(z.size());
  for (Eigen::Index t = 0; t < z.size(); ++t) s(t) = eval_transition(spec, z(t));
  return s;
}

/// The R learners and the T_eff x 2R basis W with columns (S_1, 1-S_1, ...).
struct BasisState {
  std::vector<TransitionSpec> specs;
  Matrix W;

  int R() const { return static_cast<int>(specs.size()); }
};

namespace detail {
inline void check_sel(const TransitionSpec& s, Eigen::Index K) {
  if (s.sel < 0 || s.sel >= K)
    throw std::out_of_range("transition selects column " + std::to_string(s.sel) + " of a " + std::to_string(K) +
                            "-column design");
  if (!(s.phi > 0.0)) throw std::invalid_argument("transition speed phi must be positive");
}
}  // namespace detail

inline void fill_pair(Matrix& W, int r, const Vector& s) {
  W.col(2 * r) = s;
  W.col(2 * r + 1) = (1.0 - s.array()).matrix();
}

inline BasisState build_basis(const Matrix& X, std::vector<TransitionSpec> specs) {
  BasisState b;
  b.W.resize(X.rows(), 2 * static_cast<Eigen::Index>(specs.size()));
  for (std::size_t r = 0; r < specs.size(); ++r) {
    detail::check_sel(specs[r], X.cols());
    fill_pair(b.W, static_cast<int>(r), eval_transition(specs[r], X.col(specs[r].sel)));
  }
  b.specs = std::move(specs);
  return b;
}

/// Returns a copy of `basis` with learner r swapped for `spec`; only columns
/// 2r and 2r+1 differ.
inline BasisState replace_learner(const BasisState& basis, int r, const TransitionSpec& spec, const Matrix& X) {
  if (r < 0 || r >= basis.R()) throw std::out_of_range("learner index " + std::to_string(r) + " out of range");
  detail::check_sel(spec, X.cols());
  BasisState out = basis;
  out.specs[r] = spec;
  fill_pair(out.W, r, eval_transition(spec, X.col(spec.sel)));
  return out;
}

/// Conditional mean of the additive model at lag state x:
/// sum_r S_r * B.row(2r) + (1 - S_r) * B.row(2r+1).
inline Vector vast_mean(const std::vector<TransitionSpec>& specs, const Matrix& B, const Eigen::Ref<const Vector>& x) {
  Vector f = Vector::Zero(B.cols());
  for (std::size_t r = 0; r < specs.size(); ++r) {
    const double s = eval_transition(specs[r], x(specs[r].sel));
    f.noalias() += s * B.row(2 * r).transpose() + (1.0 - s) * B.row(2 * r + 1).transpose();
  }
  return f;
}

}  // namespace vastvar
