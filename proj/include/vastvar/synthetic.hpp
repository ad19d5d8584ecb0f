#pragma once

// Simulation from a known additive smooth-transition DGP (optionally with
// linear lag terms) for validation; the returned TrueModel exposes the true
// conditional mean for ground-truth GIRFs.

#include "vastvar/common.hpp"
#include "vastvar/data.hpp"
#include "vastvar/rng.hpp"
#include "vastvar/transition.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vastvar {

struct SyntheticLearner {
  TransitionSpec spec;
  Vector beta0;  // loading on S
  Vector beta1;  // loading on 1 - S
};

struct DgpSpec {
  int M = 3;
  int T = 400;
  int P = 2;
  int burn_in = 200;
  Vector intercept;  // length M, zero if empty
  std::vector<SyntheticLearner> learners;
  Matrix linear;  // M x MP lag coefficients, none if empty
  Matrix Sigma;   // identity if empty
  std::vector<std::string> names;
  int ebp_index = -1;  // -1: variable 1 (or 0 when M == 1)

  void validate() const {
    if (M < 1 || P < 1 || T < 3 || burn_in < 0) throw std::invalid_argument("DGP dimensions must be positive");
    if (intercept.size() != 0 && intercept.size() != M) throw std::invalid_argument("intercept must have length M");
    if (linear.size() != 0 && (linear.rows() != M || linear.cols() != M * P))
      throw std::invalid_argument("linear coefficients must be M x MP");
    if (Sigma.size() != 0 && (Sigma.rows() != M || Sigma.cols() != M)) throw std::invalid_argument("Sigma must be M x M");
    for (const auto& l : learners) {
      if (l.spec.sel < 0 || l.spec.sel >= M * P) throw std::invalid_argument("learner selects a column outside 0..MP-1");
      if (!(l.spec.phi > 0.0)) throw std::invalid_argument("learner speed must be positive");
      if (l.beta0.size() != M || l.beta1.size() != M) throw std::invalid_argument("learner loadings must have length M");
    }
    if (!names.empty() && static_cast<int>(names.size()) != M) throw std::invalid_argument("names must have length M");
    if (ebp_index >= M) throw std::invalid_argument("ebp_index out of range");
  }

  int resolved_ebp() const { return ebp_index >= 0 ? ebp_index : (M > 1 ? 1 : 0); }
  Matrix resolved_sigma() const { return Sigma.size() ? Sigma : Matrix::Identity(M, M); }
};

/// True conditional mean in raw (simulation) units.
struct TrueModel {
  DgpSpec spec;

  Vector operator()(const Eigen::Ref<const Vector>& x) const {
    Vector f = spec.intercept.size() ? spec.intercept : Vector::Zero(spec.M);
    for (const auto& l : spec.learners) {
      const double s = eval_transition(l.spec, x(l.spec.sel));
      f += s * l.beta0 + (1.0 - s) * l.beta1;
    }
    if (spec.linear.size()) f.noalias() += spec.linear * x;
    return f;
  }
};

/// The true model seen through a standardization (x_raw = mean + sd * x).
struct StandardizedTruth {
  const TrueModel* truth;
  Vector mean;
  Vector sd;

  Vector operator()(const Eigen::Ref<const Vector>& x_std) const {
    const Eigen::Index M = mean.size();
    Vector x(x_std.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = mean(k % M) + sd(k % M) * x_std(k);
    return ((*truth)(x).array() - mean.array()).matrix().cwiseQuotient(sd);
  }

  Matrix sigma() const {
    const Vector inv = sd.cwiseInverse();
    return inv.asDiagonal() * truth->spec.resolved_sigma() * inv.asDiagonal();
  }
};

struct SyntheticData {
  PanelDataset data;
  RawTable raw;
  TrueModel truth;

  StandardizedTruth standardized() const {
    Vector mean(data.M()), sd(data.M());
    for (int m = 0; m < data.M(); ++m) {
      mean(m) = data.meta[m].scale_mean;
      sd(m) = data.meta[m].scale_sd;
    }
    return {&truth, mean, sd};
  }
};

inline std::vector<VariableMeta> synthetic_schema(const DgpSpec& spec) {
  std::vector<VariableMeta> meta;
  const int j = spec.resolved_ebp();
  for (int m = 0; m < spec.M; ++m) {
    VariableMeta v;
    v.name = spec.names.empty() ? "y" + std::to_string(m) : spec.names[m];
    v.block = m < j ? Block::macro : (m == j ? Block::ebp : Block::equity);
    v.order_index = m;
    meta.push_back(v);
  }
  return meta;
}

inline SyntheticData generate_synthetic(const DgpSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int M = spec.M;
  TrueModel truth{spec};
  const Eigen::LLT<Matrix> llt(spec.resolved_sigma());
  if (llt.info() != Eigen::Success) throw std::invalid_argument("DGP Sigma is not positive definite");
  const Matrix L = llt.matrixL();
  StreamRng rng(seed, {0x5157});
  Vector x = Vector::Zero(M * spec.P);
  Vector z(M);
  SyntheticData out;
  out.truth = truth;
  out.raw.meta = synthetic_schema(spec);
  out.raw.values.resize(spec.T, M);
  YearMonth date{2000, 1};
  for (int t = -spec.burn_in; t < spec.T; ++t) {
    for (int m = 0; m < M; ++m) z(m) = rng.normal();
    const Vector y = truth(x) + L * z;
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e6)
      throw NumericalError("synthetic series exploded at step " + std::to_string(t) +
                           "; use smaller lag coefficients or loadings");
    if (M * spec.P > M) x.tail(M * spec.P - M) = x.head(M * spec.P - M).eval();
    x.head(M) = y;
    if (t >= 0) {
      out.raw.values.row(t) = y.transpose();
      out.raw.dates.push_back(date);
      date = date.month == 12 ? YearMonth{date.year + 1, 1} : YearMonth{date.year, date.month + 1};
    }
  }
  out.data = transform_and_standardize(out.raw);
  return out;
}

}  // namespace vastvar
