#pragma once

// Generalized impulse responses: the difference between the predictive mean
// of Y_{t+h} after a scaled structural shock at origin t and the predictive
// mean without it, by Monte Carlo through the conditional mean F.
//
// Layout of GirfResult::responses is [draw][origin][sigma][h][variable].

#include "vastvar/common.hpp"
#include "vastvar/data.hpp"
#include "vastvar/identification.hpp"
#include "vastvar/minnesota.hpp"
#include "vastvar/parallel.hpp"
#include "vastvar/rng.hpp"
#include "vastvar/sampler.hpp"
#include "vastvar/transition.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vastvar {

struct GirfRequest {
  int shock_index = -1;  // -1 selects the ebp variable
  std::vector<double> sigmas;
  int H = 24;
  std::vector<int> origins;  // data row indices; empty selects every valid origin
  int origin_step = 1;       // thinning applied when origins is empty
  int n_sim = 100;
  int draw_thin = 1;
  std::uint64_t seed = 0;
  std::vector<double> quantile_levels{0.16, 0.50, 0.84};
  bool zero_noise = false;  // propagate means without shocks; for linear oracle checks only
  bool common_random_numbers = true;
  int threads = 1;

  void validate() const {
    if (H < 0) throw std::invalid_argument("H must be >= 0");
    if (n_sim < 2) throw std::invalid_argument("n_sim must be at least 2");
    if (draw_thin < 1 || origin_step < 1) throw std::invalid_argument("thinning factors must be >= 1");
    if (sigmas.empty()) throw std::invalid_argument("sigma grid is empty");
    for (double s : sigmas)
      if (s == 0.0 || !std::isfinite(s)) throw std::invalid_argument("sigma grid entries must be finite and nonzero");
    for (double q : quantile_levels)
      if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile levels must lie in [0, 1]");
  }
};

/// The grid used for the peak figures: -6..-0.1 and 0.1..6 standard deviations.
inline std::vector<double> standard_sigma_grid() {
  std::vector<double> pos{0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0};
  std::vector<double> grid;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) grid.push_back(-*it);
  grid.insert(grid.end(), pos.begin(), pos.end());
  return grid;
}

struct GirfResult {
  int n_draws = 0;
  int n_origins = 0;
  int n_sigma = 0;
  int n_h = 0;
  int M = 0;
  int shock_index = 0;
  std::vector<int> origins;
  std::vector<double> sigmas;
  std::vector<double> quantile_levels;
  std::vector<double> responses;  // [draw][origin][sigma][h][m]
  std::vector<double> time_avg;   // [draw][sigma][h][m]
  std::vector<double> quantiles;  // [level][sigma][h][m], over draws of time_avg

  std::size_t idx(int d, int o, int s, int h, int m) const {
    return ((((static_cast<std::size_t>(d) * n_origins + o) * n_sigma + s) * n_h + h) * M) + m;
  }
  std::size_t avg_idx(int d, int s, int h, int m) const {
    return (((static_cast<std::size_t>(d) * n_sigma + s) * n_h + h) * M) + m;
  }
  std::size_t q_idx(int q, int s, int h, int m) const {
    return (((static_cast<std::size_t>(q) * n_sigma + s) * n_h + h) * M) + m;
  }

  double response(int d, int o, int s, int h, int m) const { return responses[idx(d, o, s, h, m)]; }

  Matrix path(int d, int o, int s) const {
    Matrix p(n_h, M);
    for (int h = 0; h < n_h; ++h)
      for (int m = 0; m < M; ++m) p(h, m) = response(d, o, s, h, m);
    return p;
  }

  Matrix avg_path(int d, int s) const {
    Matrix p(n_h, M);
    for (int h = 0; h < n_h; ++h)
      for (int m = 0; m < M; ++m) p(h, m) = time_avg[avg_idx(d, s, h, m)];
    return p;
  }

  void allocate() {
    responses.assign(static_cast<std::size_t>(n_draws) * n_origins * n_sigma * n_h * M, 0.0);
    time_avg.assign(static_cast<std::size_t>(n_draws) * n_sigma * n_h * M, 0.0);
  }

  /// Fills time_avg (pairwise mean over origins) and quantiles over draws.
  void aggregate() {
    std::vector<double> buf(n_origins);
    for (int d = 0; d < n_draws; ++d)
      for (int s = 0; s < n_sigma; ++s)
        for (int h = 0; h < n_h; ++h)
          for (int m = 0; m < M; ++m) {
            for (int o = 0; o < n_origins; ++o) buf[o] = response(d, o, s, h, m);
            time_avg[avg_idx(d, s, h, m)] = pairwise_sum(buf) / n_origins;
          }
    quantiles.assign(quantile_levels.size() * n_sigma * n_h * M, 0.0);
    std::vector<double> xs(n_draws);
    for (int s = 0; s < n_sigma; ++s)
      for (int h = 0; h < n_h; ++h)
        for (int m = 0; m < M; ++m) {
          for (int d = 0; d < n_draws; ++d) xs[d] = time_avg[avg_idx(d, s, h, m)];
          for (std::size_t q = 0; q < quantile_levels.size(); ++q)
            quantiles[q_idx(static_cast<int>(q), s, h, m)] = quantile_type7(xs, quantile_levels[q]);
        }
  }
};

struct GirfOptions {
  bool zero_noise = false;
  bool common_random_numbers = true;
};

namespace detail {
inline void push_lag(Vector& x, const Vector& y) {
  const Eigen::Index M = y.size();
  const Eigen::Index K = x.size();
  if (K > M) x.tail(K - M) = x.head(K - M).eval();
  x.head(M) = y;
}
}  // namespace detail

/// Response path at one origin for one parameter draw. `F` maps a lag state
/// (Y'_{t-1}, ..., Y'_{t-P})' to the conditional mean; `chol_sigma` is the
/// lower Cholesky factor of the innovation covariance; `impact` is the
/// scaled impact in estimation units and `scale` converts to reporting units.
/// The shocked branch adds `impact` to the realized Y_t; both branches share
/// history up to t and, with common random numbers, every innovation.
template <class MeanFn>
Matrix girf_one(const MeanFn& F, const Matrix& chol_sigma, const Matrix& data, int origin, int P, const Vector& impact,
                const Vector& scale, int H, int n_sim, StreamRng& rng, GirfOptions opt = {}) {
  const int M = static_cast<int>(data.cols());
  if (origin < P || origin >= data.rows()) throw std::out_of_range("origin lacks a full lag history");
  Matrix out = Matrix::Zero(H + 1, M);
  out.row(0) = (impact.array() * scale.array()).transpose();
  if (H == 0) return out;

  const Vector x0 = lag_state(data, origin + 1, P);
  Vector x_shock0 = x0;
  x_shock0.head(M) += impact;

  if (opt.zero_noise) {
    Vector xb = x0, xs = x_shock0;
    for (int h = 1; h <= H; ++h) {
      const Vector yb = F(xb);
      const Vector ys = F(xs);
      out.row(h) = ((ys - yb).array() * scale.array()).transpose();
      detail::push_lag(xb, yb);
      detail::push_lag(xs, ys);
    }
    return out;
  }

  Matrix acc = Matrix::Zero(H, M);
  Vector z(M), z2(M);
  for (int path = 0; path < n_sim; ++path) {
    Vector xb = x0, xs = x_shock0;
    for (int h = 1; h <= H; ++h) {
      for (int m = 0; m < M; ++m) z(m) = rng.normal();
      const Vector eb = chol_sigma * z;
      Vector es = eb;
      if (!opt.common_random_numbers) {
        for (int m = 0; m < M; ++m) z2(m) = rng.normal();
        es = chol_sigma * z2;
      }
      const Vector yb = F(xb) + eb;
      const Vector ys = F(xs) + es;
      acc.row(h - 1) += (ys - yb).transpose();
      detail::push_lag(xb, yb);
      detail::push_lag(xs, ys);
    }
  }
  for (int h = 1; h <= H; ++h) out.row(h) = ((acc.row(h - 1).array() / n_sim) * scale.transpose().array());
  return out;
}

inline std::vector<int> resolve_origins(const GirfRequest& req, int T, int P) {
  std::vector<int> origins = req.origins;
  if (origins.empty())
    for (int t = P; t < T; t += req.origin_step) origins.push_back(t);
  for (int t : origins)
    if (t < P || t >= T) throw std::out_of_range("origin " + std::to_string(t) + " lacks a full lag history");
  if (origins.empty()) throw std::invalid_argument("no valid GIRF origins");
  return origins;
}

/// Generic batch driver. `model(d)` returns {mean functor, Sigma} for the d-th
/// kept draw. Tasks are (draw, origin) pairs with streams keyed by
/// (seed, draw, origin); every sigma of a task reuses the same stream.
template <class ModelAt>
GirfResult girf_batch_generic(int n_kept, ModelAt&& model, const Matrix& data, int P, const Vector& scale, int shock,
                              const GirfRequest& req) {
  req.validate();
  if (n_kept < 1) throw std::invalid_argument("no posterior draws for GIRFs");
  const int M = static_cast<int>(data.cols());
  if (shock < 0 || shock >= M) throw std::out_of_range("shock index out of range");
  GirfResult res;
  res.origins = resolve_origins(req, static_cast<int>(data.rows()), P);
  res.n_draws = n_kept;
  res.n_origins = static_cast<int>(res.origins.size());
  res.n_sigma = static_cast<int>(req.sigmas.size());
  res.n_h = req.H + 1;
  res.M = M;
  res.shock_index = shock;
  res.sigmas = req.sigmas;
  res.quantile_levels = req.quantile_levels;
  res.allocate();

  const GirfOptions opt{req.zero_noise, req.common_random_numbers};
  const std::size_t tasks = static_cast<std::size_t>(n_kept) * res.n_origins;
  parallel_for(tasks, req.threads, [&](std::size_t task) {
    const int d = static_cast<int>(task / res.n_origins);
    const int o = static_cast<int>(task % res.n_origins);
    const auto [F, Sigma] = model(d);
    const StructuralFactor f = cholesky_identify(Sigma, shock, Vector::Ones(M));
    for (int s = 0; s < res.n_sigma; ++s) {
      StreamRng rng(req.seed, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(res.origins[o])});
      const Matrix path = girf_one(F, f.Pmat, data, res.origins[o], P, scaled_impact(f, res.sigmas[s]), scale, req.H,
                                   req.n_sim, rng, opt);
      for (int h = 0; h < res.n_h; ++h)
        for (int m = 0; m < M; ++m) res.responses[res.idx(d, o, s, h, m)] = path(h, m);
    }
  });
  res.aggregate();
  return res;
}

/// Conditional mean of one retained draw of the additive model.
struct VastMeanFn {
  const std::vector<TransitionSpec>* specs;
  const Matrix* B;
  Vector operator()(const Eigen::Ref<const Vector>& x) const { return vast_mean(*specs, *B, x); }
};

struct LinearMeanFn {
  const LinearVarDraw* draw;
  Vector operator()(const Eigen::Ref<const Vector>& x) const { return draw->mean(x); }
};

inline int resolve_shock(const GirfRequest& req, const PanelDataset& data) {
  const int j = req.shock_index >= 0 ? req.shock_index : data.ebp_index();
  if (j < 0) throw std::invalid_argument("no shock index given and the dataset has no ebp variable");
  return j;
}

inline GirfResult girf_batch(const McmcChain& chain, const PanelDataset& data, int P, const GirfRequest& req) {
  if (chain.draws.empty()) throw std::invalid_argument("chain has no retained draws");
  const int thin = std::max(1, req.draw_thin);
  const int kept = (static_cast<int>(chain.draws.size()) + thin - 1) / thin;
  auto model = [&](int d) {
    const ChainDraw& cd = chain.draws[static_cast<std::size_t>(d) * thin];
    return std::pair{VastMeanFn{&cd.specs, &cd.params.B}, cd.params.Sigma};
  };
  return girf_batch_generic(kept, model, data.values, P, data.scale_sd(), resolve_shock(req, data), req);
}

/// Linear draws pushed through the simulation engine (zero_noise gives the
/// analytic linear responses).
inline GirfResult girf_batch(const std::vector<LinearVarDraw>& draws, const PanelDataset& data, int P,
                             const GirfRequest& req) {
  if (draws.empty()) throw std::invalid_argument("no linear draws");
  const int thin = std::max(1, req.draw_thin);
  const int kept = (static_cast<int>(draws.size()) + thin - 1) / thin;
  auto model = [&](int d) {
    const LinearVarDraw& ld = draws[static_cast<std::size_t>(d) * thin];
    return std::pair{LinearMeanFn{&ld}, ld.Sigma};
  };
  return girf_batch_generic(kept, model, data.values, P, data.scale_sd(), resolve_shock(req, data), req);
}

/// Linear responses by companion powers for every kept draw; identical across
/// origins since the linear model has no state dependence.
inline GirfResult linear_girf_batch(const std::vector<LinearVarDraw>& draws, const PanelDataset& data, int P,
                                    const GirfRequest& req) {
  req.validate();
  if (draws.empty()) throw std::invalid_argument("no linear draws");
  const int thin = std::max(1, req.draw_thin);
  GirfResult res;
  res.origins = resolve_origins(req, data.T(), P);
  res.n_draws = (static_cast<int>(draws.size()) + thin - 1) / thin;
  res.n_origins = static_cast<int>(res.origins.size());
  res.n_sigma = static_cast<int>(req.sigmas.size());
  res.n_h = req.H + 1;
  res.M = data.M();
  res.shock_index = resolve_shock(req, data);
  res.sigmas = req.sigmas;
  res.quantile_levels = req.quantile_levels;
  res.allocate();
  const Vector scale = data.scale_sd();
  for (int d = 0; d < res.n_draws; ++d)
    for (int s = 0; s < res.n_sigma; ++s) {
      const Matrix irf = linear_irf(draws[static_cast<std::size_t>(d) * thin], res.shock_index, res.sigmas[s], req.H, scale);
      for (int o = 0; o < res.n_origins; ++o)
        for (int h = 0; h < res.n_h; ++h)
          for (int m = 0; m < res.M; ++m) res.responses[res.idx(d, o, s, h, m)] = irf(h, m);
    }
  res.aggregate();
  return res;
}

}  // namespace vastvar
