#pragma once

// Linear BVAR baseline with a Minnesota-style conjugate NIW prior.
//
// Under the Kronecker prior Var(vec B | Sigma) = Sigma (x) V0, the coefficient
// on variable l at lag p in equation m has prior variance
//   Sigma_mm * (lambda1 / (p^lambda3 * sigma_l))^2,
// which is the Minnesota cross-variable form with E[Sigma_mm] = sigma_m^2.
// An equation-specific own/cross split (lambda2 < 1) cannot be expressed
// with a Kronecker prior; lambda2 is carried in the config and reported but
// does not enter V0.

#include "vastvar/common.hpp"
#include "vastvar/data.hpp"
#include "vastvar/identification.hpp"
#include "vastvar/niw.hpp"
#include "vastvar/rng.hpp"

#include <cmath>
#include <vector>

namespace vastvar {

struct MinnesotaConfig {
  double lambda1 = 0.2;  // overall tightness
  double lambda2 = 0.5;  // cross-variable tightness (see header note)
  double lambda3 = 2.0;  // lag decay
  double lambda4 = 100.0;  // intercept looseness
  int P = 12;

  void validate() const {
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0 && lambda2 <= 1.0) || !(lambda3 > 0.0) || !(lambda4 > 0.0))
      throw std::invalid_argument("Minnesota hyperparameters must be positive (lambda2 in (0, 1])");
    if (P < 1) throw std::invalid_argument("P must be at least 1");
  }
};

/// A: M x (MP + 1) with the intercept in the last column.
struct LinearVarDraw {
  Matrix A;
  Matrix Sigma;

  int M() const { return static_cast<int>(A.rows()); }
  int K() const { return static_cast<int>(A.cols()) - 1; }

  Vector mean(const Eigen::Ref<const Vector>& x) const { return A.leftCols(K()) * x + A.col(K()); }
};

/// Prior mean of the first own lag: 1 for level-type series, 0 for differenced.
inline Vector own_lag_means(const std::vector<VariableMeta>& meta) {
  Vector v(meta.size());
  for (std::size_t m = 0; m < meta.size(); ++m) v(m) = meta[m].transform == Transform::log_diff ? 0.0 : 1.0;
  return v;
}

/// Regressors [X, 1].
inline Matrix with_intercept(const Matrix& X) {
  Matrix Z(X.rows(), X.cols() + 1);
  Z.leftCols(X.cols()) = X;
  Z.col(X.cols()).setOnes();
  return Z;
}

/// Residual sds of univariate AR(P) regressions with intercept, by OLS.
inline Vector ar_residual_sd(const DesignMatrix& d) {
  const int M = d.M();
  const int T = d.T_eff();
  const int dof = T - d.P - 1;
  if (dof < 1) throw std::invalid_argument("sample too short for univariate AR scale estimates");
  Vector sd(M);
  for (int m = 0; m < M; ++m) {
    Matrix Z(T, d.P + 1);
    for (int p = 0; p < d.P; ++p) Z.col(p) = d.X.col(p * M + m);
    Z.col(d.P).setOnes();
    const auto llt = spd_cholesky(Z.transpose() * Z, "AR normal equations");
    const Vector coef = llt.solve(Z.transpose() * d.Y.col(m));
    const double rss = (d.Y.col(m) - Z * coef).squaredNorm();
    sd(m) = std::sqrt(rss / dof);
    if (!(sd(m) > 0.0)) throw NumericalError("univariate AR residual variance is zero for variable " + std::to_string(m));
  }
  return sd;
}

inline NiwPrior minnesota_prior(const DesignMatrix& d, const MinnesotaConfig& cfg, const Vector& own_mean) {
  cfg.validate();
  if (cfg.P != d.P) throw std::invalid_argument("Minnesota lag order does not match the design");
  const int M = d.M();
  const int K = d.K();
  if (own_mean.size() != M) throw std::invalid_argument("own-lag prior mean vector must have length M");
  const Vector sd = ar_residual_sd(d);
  NiwPrior prior;
  prior.v0 = M + 2.0;
  prior.S0 = sd.array().square().matrix().asDiagonal();
  prior.S0 *= prior.v0 - M - 1.0;
  prior.B0 = Matrix::Zero(K + 1, M);
  for (int m = 0; m < M; ++m) prior.B0(m, m) = own_mean(m);
  prior.V0 = Matrix::Zero(K + 1, K + 1);
  for (int p = 1; p <= d.P; ++p)
    for (int l = 0; l < M; ++l) {
      const double v = cfg.lambda1 / (std::pow(p, cfg.lambda3) * sd(l));
      prior.V0((p - 1) * M + l, (p - 1) * M + l) = v * v;
    }
  prior.V0(K, K) = std::pow(cfg.lambda1 * cfg.lambda4, 2);
  return prior;
}

inline NiwPosterior minnesota_posterior(const DesignMatrix& d, const MinnesotaConfig& cfg, const Vector& own_mean) {
  return update(minnesota_prior(d, cfg, own_mean), with_intercept(d.X), d.Y);
}

inline std::vector<LinearVarDraw> estimate_bvar(const DesignMatrix& d, const MinnesotaConfig& cfg, const Vector& own_mean,
                                                int n_draws, std::uint64_t seed) {
  const NiwPosterior post = minnesota_posterior(d, cfg, own_mean);
  StreamRng rng(seed, {0x4D4E});
  std::vector<LinearVarDraw> draws;
  draws.reserve(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    PosteriorDraw pd = sample(post, rng);
    draws.push_back({pd.B.transpose(), std::move(pd.Sigma)});
  }
  return draws;
}

/// Companion matrix of the lag coefficients (MP x MP).
inline Matrix companion(const LinearVarDraw& draw) {
  const int M = draw.M();
  const int K = draw.K();
  Matrix C = Matrix::Zero(K, K);
  C.topRows(M) = draw.A.leftCols(K);
  if (K > M) C.bottomLeftCorner(K - M, K - M).setIdentity();
  return C;
}

/// Impulse responses of the linear VAR to a recursively identified shock of
/// size sigma, propagated by companion powers. `scale` converts estimation
/// units to reporting units per variable (the impact normalization uses
/// s_j = 1 in estimation units).
inline Matrix linear_irf(const LinearVarDraw& draw, int shock, double sigma, int H, const Vector& scale) {
  const int M = draw.M();
  const StructuralFactor f = cholesky_identify(draw.Sigma, shock, Vector::Ones(M));
  const Matrix C = companion(draw);
  Vector state = Vector::Zero(draw.K());
  state.head(M) = scaled_impact(f, sigma);
  Matrix out(H + 1, M);
  for (int h = 0; h <= H; ++h) {
    if (h > 0) state = C * state;
    out.row(h) = (state.head(M).array() * scale.array()).transpose();
  }
  return out;
}

}  // namespace vastvar
