#pragma once

// Conjugate Normal-inverse-Wishart regression Y = W B + E, rows of E ~ N(0, Sigma):
//   Sigma ~ IW(v0, S0),  B | Sigma ~ MN(B0, V0, Sigma)  (vec B ~ N(vec B0, Sigma (x) V0)).
// Every inverse goes through a Cholesky factor.

#include "vastvar/common.hpp"
#include "vastvar/rng.hpp"

#include <numbers>
#include <optional>
#include <string>

namespace vastvar {

struct NiwPrior {
  double v0 = 1.0;
  Matrix S0;
  Matrix B0;
  Matrix V0;

  int M() const { return static_cast<int>(S0.rows()); }
  int N() const { return static_cast<int>(V0.rows()); }
};

/// Prior for the additive model with R learners: v0 = M, S0 = xi I, B0 = 0,
/// V0 = I / J with J = 2R unless given.
inline NiwPrior vast_prior(int M, int R, double xi = 0.01, std::optional<double> J = std::nullopt) {
  const double j = J.value_or(2.0 * R);
  return NiwPrior{static_cast<double>(M), xi * Matrix::Identity(M, M), Matrix::Zero(2 * R, M),
                  Matrix::Identity(2 * R, 2 * R) / j};
}

struct NiwPosterior {
  double vN = 0.0;
  Matrix SN;
  Matrix BN;
  Matrix VN;
  double logml = 0.0;

  NiwPrior as_prior() const { return NiwPrior{vN, SN, BN, VN}; }
};

struct PosteriorDraw {
  Matrix B;      // rows: regressors, columns: equations
  Matrix Sigma;  // M x M
};

/// Sufficient statistics of (W, Y).
struct CrossProducts {
  Matrix WtW;
  Matrix WtY;
  Matrix YtY;
  int T = 0;

  static CrossProducts of(const Matrix& W, const Matrix& Y) {
    if (W.rows() != Y.rows()) throw std::invalid_argument("W and Y row counts differ");
    CrossProducts c;
    c.WtW.noalias() = W.transpose() * W;
    c.WtY.noalias() = W.transpose() * Y;
    c.YtY.noalias() = Y.transpose() * Y;
    c.T = static_cast<int>(W.rows());
    return c;
  }
};

/// Cholesky of an SPD matrix; one retry with a 1e-8 trace-scaled ridge.
inline Eigen::LLT<Matrix> spd_cholesky(const Matrix& A, const char* name) {
  auto ok = [](const Eigen::LLT<Matrix>& l) {
    return l.info() == Eigen::Success && l.matrixLLT().diagonal().allFinite() &&
           (l.matrixLLT().diagonal().array() > 0.0).all();
  };
  Eigen::LLT<Matrix> llt(A);
  if (ok(llt)) return llt;
  const Eigen::Index n = A.rows();
  double scale = A.trace() / static_cast<double>(n);
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  llt.compute(A + 1e-8 * scale * Matrix::Identity(n, n));
  if (!ok(llt)) throw NumericalError(std::string(name) + " is not symmetric positive definite");
  return llt;
}

inline double log_det_from_cholesky(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// log of the multivariate gamma function Gamma_M(a).
inline double lmvgamma(int M, double a) {
  double s = 0.25 * M * (M - 1) * std::log(std::numbers::pi);
  for (int i = 1; i <= M; ++i) s += std::lgamma(a + 0.5 * (1 - i));
  return s;
}

inline Matrix spd_inverse(const Eigen::LLT<Matrix>& llt) {
  return llt.solve(Matrix::Identity(llt.rows(), llt.cols()));
}

/// Prior with its Cholesky-derived constants cached, for repeated evaluation
/// against many candidate bases.
class PreparedPrior {
 public:
  explicit PreparedPrior(NiwPrior prior) : p_(std::move(prior)) {
    if (p_.S0.rows() != p_.S0.cols() || p_.V0.rows() != p_.V0.cols() || p_.B0.rows() != p_.V0.rows() ||
        p_.B0.cols() != p_.S0.rows())
      throw std::invalid_argument("inconsistent NIW prior dimensions");
    if (!(p_.v0 > p_.M() - 1)) throw std::invalid_argument("prior degrees of freedom must exceed M - 1");
    const auto v0_llt = spd_cholesky(p_.V0, "prior covariance V0");
    const auto s0_llt = spd_cholesky(p_.S0, "prior scale S0");
    V0inv_ = spd_inverse(v0_llt);
    V0inv_ = (0.5 * (V0inv_ + V0inv_.transpose())).eval();
    V0invB0_.noalias() = V0inv_ * p_.B0;
    B0V0invB0_.noalias() = p_.B0.transpose() * V0invB0_;
    logdet_V0_ = log_det_from_cholesky(v0_llt);
    logdet_S0_ = log_det_from_cholesky(s0_llt);
  }

  const NiwPrior& prior() const { return p_; }
  const Matrix& V0_inverse() const { return V0inv_; }

  double log_marginal(const CrossProducts& c) const {
    if (c.T == 0) return 0.0;
    return core(c, false).logml;
  }

  NiwPosterior update(const CrossProducts& c) const {
    if (c.T == 0) return NiwPosterior{p_.v0, p_.S0, p_.B0, p_.V0, 0.0};
    return core(c, true);
  }

 private:
  NiwPosterior core(const CrossProducts& c, bool full) const {
    const int M = p_.M();
    check_dims(c);
    const Matrix precision = V0inv_ + c.WtW;
    const auto L = spd_cholesky(precision, "posterior precision V0^-1 + W'W");
    Matrix rhs = V0invB0_ + c.WtY;
    const Matrix Q = L.matrixL().solve(rhs);
    Matrix SN = p_.S0 + c.YtY + B0V0invB0_;
    SN.noalias() -= Q.transpose() * Q;
    SN = (0.5 * (SN + SN.transpose())).eval();
    const auto SN_llt = spd_cholesky(SN, "posterior scale SN");

    NiwPosterior post;
    post.vN = p_.v0 + c.T;
    const double logdet_prec = log_det_from_cholesky(L);
    const double logdet_SN = log_det_from_cholesky(SN_llt);
    post.logml = -0.5 * c.T * M * std::log(std::numbers::pi) + lmvgamma(M, 0.5 * post.vN) - lmvgamma(M, 0.5 * p_.v0) +
                 0.5 * p_.v0 * logdet_S0_ - 0.5 * post.vN * logdet_SN + 0.5 * M * (-logdet_prec - logdet_V0_);
    if (!std::isfinite(post.logml)) throw NumericalError("log marginal likelihood is not finite");
    if (full) {
      post.BN = L.matrixU().solve(Q);
      post.VN = spd_inverse(L);
      post.VN = (0.5 * (post.VN + post.VN.transpose())).eval();
      post.SN = std::move(SN);
    }
    return post;
  }

  void check_dims(const CrossProducts& c) const {
    if (c.WtW.rows() != p_.N() || c.WtW.cols() != p_.N() || c.WtY.rows() != p_.N() || c.WtY.cols() != p_.M() ||
        c.YtY.rows() != p_.M())
      throw std::invalid_argument("cross-product dimensions do not match the prior");
  }

  NiwPrior p_;
  Matrix V0inv_;
  Matrix V0invB0_;
  Matrix B0V0invB0_;
  double logdet_V0_ = 0.0;
  double logdet_S0_ = 0.0;
};

inline NiwPosterior update(const NiwPrior& prior, const Matrix& W, const Matrix& Y) {
  return PreparedPrior(prior).update(CrossProducts::of(W, Y));
}

inline double log_marginal(const NiwPrior& prior, const Matrix& W, const Matrix& Y) {
  return PreparedPrior(prior).log_marginal(CrossProducts::of(W, Y));
}

/// Sigma ~ IW(vN, SN) by the Bartlett decomposition, then B | Sigma ~ MN(BN, VN, Sigma).
inline PosteriorDraw sample(const NiwPosterior& post, StreamRng& rng) {
  const Eigen::Index M = post.SN.rows();
  const Eigen::Index N = post.VN.rows();
  const auto C = spd_cholesky(post.SN, "posterior scale SN");
  Matrix A = Matrix::Zero(M, M);
  for (Eigen::Index i = 0; i < M; ++i) {
    A(i, i) = std::sqrt(rng.chi_squared(post.vN - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  // Sigma^-1 = C^-T A A' C^-1, so Sigma = G G' with G = C A^-T.
  const Matrix Ct = C.matrixL().transpose();
  const Matrix Gt = A.triangularView<Eigen::Lower>().solve(Ct);
  PosteriorDraw d;
  d.Sigma.noalias() = Gt.transpose() * Gt;
  d.Sigma = (0.5 * (d.Sigma + d.Sigma.transpose())).eval();

  const auto Lv = spd_cholesky(post.VN, "posterior covariance VN");
  Matrix Z(N, M);
  for (Eigen::Index j = 0; j < M; ++j)
    for (Eigen::Index i = 0; i < N; ++i) Z(i, j) = rng.normal();
  d.B = post.BN;
  d.B.noalias() += Matrix(Lv.matrixL()) * Z * Gt;
  require_finite(d.Sigma, "Sigma draw");
  require_finite(d.B, "coefficient draw");
  return d;
}

}  // namespace vastvar
