#pragma once

// MCMC for the additive smooth-transition model. Each sweep, for every learner
// r: draw the threshold variable from its discrete posterior (beta and Sigma
// integrated out), then a block random-walk MH step on (mu_r, log phi_r).
// Sigma and beta are drawn last from their NIW conditional.

#include "vastvar/common.hpp"
#include "vastvar/data.hpp"
#include "vastvar/niw.hpp"
#include "vastvar/parallel.hpp"
#include "vastvar/rng.hpp"
#include "vastvar/transition.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace vastvar {

struct SamplerConfig {
  int R = 50;
  int P = 12;
  int n_draws = 30000;
  int n_burn = 15000;
  int thin = 1;
  std::uint64_t seed = 0;
  double mh_step_mu = 0.5;
  double mh_step_logphi = 0.5;
  bool adapt = true;
  int candidate_subsample = 0;  // 0: every column is a candidate each sweep
  double target_accept = 0.30;
  int verify_every = 1000;  // recompute the marginal likelihood from scratch; 0 disables
  int threads = 1;

  void validate() const {
    if (R < 1) throw std::invalid_argument("R must be at least 1");
    if (P < 1) throw std::invalid_argument("P must be at least 1");
    if (thin < 1) throw std::invalid_argument("thin must be at least 1");
    if (n_burn < 0 || n_burn >= n_draws) throw std::invalid_argument("need 0 <= n_burn < n_draws");
    if (!(mh_step_mu > 0.0) || !(mh_step_logphi > 0.0)) throw std::invalid_argument("MH step sizes must be positive");
    if (candidate_subsample < 0) throw std::invalid_argument("candidate_subsample must be >= 0");
  }

  int retained() const { return (n_draws - n_burn) / thin; }
};

struct ChainDraw {
  PosteriorDraw params;
  std::vector<TransitionSpec> specs;
};

struct McmcChain {
  std::vector<ChainDraw> draws;
  std::vector<double> accept_rate_mu_phi;  // per learner, post burn-in
  std::vector<double> logml_trace;         // one entry per sweep
  std::vector<double> step_scale;          // adapted multiplier per learner
};

/// Independent priors on the transition parameters.
namespace transition_prior {
inline constexpr double kMuVariance = 100.0;
inline constexpr double kPhiShape = 0.01;
inline constexpr double kPhiRate = 0.01;

inline double log_mu(double mu) { return -0.5 * mu * mu / kMuVariance; }
inline double log_phi(double phi) { return (kPhiShape - 1.0) * std::log(phi) - kPhiRate * phi; }
}  // namespace transition_prior

/// Basis, cached cross products and current log marginal likelihood.
class SamplerState {
 public:
  /// Result of swapping one learner: new pair columns and the statistics
  /// needed to commit them without recomputation.
  struct PairEval {
    TransitionSpec spec;
    Matrix C;    // T x 2 new pair columns
    Matrix WtC;  // 2R x 2 against the current basis (pair rows replaced)
    Matrix CtY;  // 2 x M
    double logml = 0.0;
  };

  SamplerState(Matrix X, Matrix Y, const PreparedPrior& prior, std::vector<TransitionSpec> specs)
      : X_(std::move(X)), Y_(std::move(Y)), prior_(&prior) {
    basis_ = build_basis(X_, std::move(specs));
    cross_ = CrossProducts::of(basis_.W, Y_);
    logml_ = prior_->log_marginal(cross_);
  }

  const BasisState& basis() const { return basis_; }
  const Matrix& X() const { return X_; }
  const Matrix& Y() const { return Y_; }
  const CrossProducts& cross() const { return cross_; }
  double logml() const { return logml_; }
  int R() const { return basis_.R(); }
  int K() const { return static_cast<int>(X_.cols()); }

  PairEval evaluate(int r, const TransitionSpec& spec) const {
    PairEval e;
    e.spec = spec;
    const Vector s = eval_transition(spec, X_.col(spec.sel));
    e.C.resize(X_.rows(), 2);
    e.C.col(0) = s;
    e.C.col(1) = (1.0 - s.array()).matrix();
    e.WtC.noalias() = basis_.W.transpose() * e.C;
    e.WtC.middleRows(2 * r, 2).noalias() = e.C.transpose() * e.C;
    e.CtY.noalias() = e.C.transpose() * Y_;
    CrossProducts c = cross_;
    apply(c, r, e);
    e.logml = prior_->log_marginal(c);
    return e;
  }

  void commit(int r, PairEval&& e) {
    apply(cross_, r, e);
    basis_.W.middleCols(2 * r, 2) = e.C;
    basis_.specs[r] = e.spec;
    logml_ = e.logml;
  }

  /// Replaces the response (used by joint-distribution tests).
  void set_response(Matrix Y) {
    Y_ = std::move(Y);
    cross_ = CrossProducts::of(basis_.W, Y_);
    logml_ = prior_->log_marginal(cross_);
  }

  NiwPosterior posterior() const { return prior_->update(cross_); }

  double scratch_logml() const { return log_marginal(prior_->prior(), build_basis(X_, basis_.specs).W, Y_); }

 private:
  static void apply(CrossProducts& c, int r, const PairEval& e) {
    c.WtW.middleCols(2 * r, 2) = e.WtC;
    c.WtW.middleRows(2 * r, 2) = e.WtC.transpose();
    c.WtY.middleRows(2 * r, 2) = e.CtY;
  }

  Matrix X_;
  Matrix Y_;
  const PreparedPrior* prior_;
  BasisState basis_;
  CrossProducts cross_;
  double logml_ = 0.0;
};

/// Draws learner r's threshold variable from its discrete posterior over the
/// candidate support by Gumbel-max. The Gumbel noise for candidate n is the
/// counter-based uniform (gumbel_key, n), so the draw does not depend on the
/// evaluation schedule. With subsample m > 0 the support is the incumbent plus
/// m other columns chosen uniformly by `rng`.
inline TransitionSpec sample_delta(int r, SamplerState& state, std::uint64_t gumbel_key, StreamRng& rng,
                                   int subsample = 0, int threads = 1) {
  const int K = state.K();
  const TransitionSpec current = state.basis().specs.at(r);
  std::vector<int> support;
  if (subsample <= 0 || subsample >= K - 1) {
    support.resize(K);
    std::iota(support.begin(), support.end(), 0);
  } else {
    std::vector<int> others;
    for (int n = 0; n < K; ++n)
      if (n != current.sel) others.push_back(n);
    for (int i = 0; i < subsample; ++i) {
      const auto j = i + static_cast<int>(rng.below(others.size() - i));
      std::swap(others[i], others[j]);
    }
    support.push_back(current.sel);
    support.insert(support.end(), others.begin(), others.begin() + subsample);
  }
  if (support.size() == 1) return current;

  std::vector<SamplerState::PairEval> evals(support.size());
  parallel_for(support.size(), threads, [&](std::size_t i) {
    if (support[i] == current.sel) {
      evals[i].spec = current;
      evals[i].logml = state.logml();
    } else {
      evals[i] = state.evaluate(r, TransitionSpec{support[i], current.mu, current.phi});
    }
  });
  const double log_prior = -std::log(static_cast<double>(K));
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double u = counter_uniform(gumbel_key, static_cast<std::uint64_t>(support[i]));
    const double score = evals[i].logml + log_prior - std::log(-std::log(u));
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  if (support[best] != current.sel) state.commit(r, std::move(evals[best]));
  return state.basis().specs[r];
}

struct MhSteps {
  double mu = 0.5;
  double logphi = 0.5;
};

/// Block random-walk MH on (mu_r, log phi_r) with beta and Sigma integrated
/// out. Returns the resulting spec and whether the proposal was accepted.
inline std::pair<TransitionSpec, bool> sample_mu_phi(int r, SamplerState& state, StreamRng& rng, MhSteps steps) {
  const TransitionSpec cur = state.basis().specs.at(r);
  const double z_mu = rng.normal();
  const double z_phi = rng.normal();
  const double u = rng.uniform();
  TransitionSpec prop = cur;
  prop.mu = cur.mu + steps.mu * z_mu;
  const double dlog_phi = steps.logphi * z_phi;
  prop.phi = cur.phi * std::exp(dlog_phi);
  if (!(prop.phi > 0.0) || !std::isfinite(prop.phi)) return {cur, false};
  if (prop == cur) return {cur, true};

  auto e = state.evaluate(r, prop);
  const double log_alpha = (e.logml - state.logml()) +
                           (transition_prior::log_mu(prop.mu) - transition_prior::log_mu(cur.mu)) +
                           (transition_prior::log_phi(prop.phi) - transition_prior::log_phi(cur.phi)) +
                           dlog_phi;
  if (std::log(u) < log_alpha) {
    state.commit(r, std::move(e));
    return {prop, true};
  }
  return {cur, false};
}

/// Sweep-level driver shared by `run_chain` and the joint-distribution tests.
class VastSampler {
 public:
  VastSampler(const Matrix& X, const Matrix& Y, const NiwPrior& prior, const SamplerConfig& cfg)
      : cfg_(cfg), prior_(prior), rng_(cfg.seed, {0x5A3B}) {
    cfg_.validate();
    if (Y.rows() != X.rows()) throw std::invalid_argument("X and Y row counts differ");
    if (X.rows() <= 2 * cfg_.R + 2)
      throw std::invalid_argument("effective sample " + std::to_string(X.rows()) + " too short for R = " +
                                  std::to_string(cfg_.R) + " (need T_eff > 2R + 2)");
    if (prior.N() != 2 * cfg_.R || prior.M() != Y.cols()) throw std::invalid_argument("prior dimensions do not match R, M");
    std::vector<TransitionSpec> specs(cfg_.R);
    for (auto& s : specs) s = TransitionSpec{static_cast<int>(rng_.below(X.cols())), 0.0, 1.0};
    state_.emplace(X, Y, prior_, std::move(specs));
    log_scale_.assign(cfg_.R, 0.0);
    accepted_.assign(cfg_.R, 0);
  }

  VastSampler(const VastSampler&) = delete;
  VastSampler& operator=(const VastSampler&) = delete;

  /// One full sweep; returns the (Sigma, beta) draw taken at its end.
  PosteriorDraw sweep() {
    const int it = iteration_++;
    for (int r = 0; r < cfg_.R; ++r) {
      try {
        const std::uint64_t key = derive_key(cfg_.seed, {0x6D31, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(r)});
        sample_delta(r, *state_, key, rng_, cfg_.candidate_subsample, cfg_.threads);
        const double scale = std::exp(log_scale_[r]);
        const auto [spec, acc] = sample_mu_phi(r, *state_, rng_, {cfg_.mh_step_mu * scale, cfg_.mh_step_logphi * scale});
        if (it < cfg_.n_burn) {
          if (cfg_.adapt) {
            const double gain = 1.0 / std::pow(it + 1.0, 0.6);
            log_scale_[r] = std::clamp(log_scale_[r] + gain * ((acc ? 1.0 : 0.0) - cfg_.target_accept),
                                       std::log(1e-3), std::log(1e3));
          }
        } else if (acc) {
          ++accepted_[r];
        }
      } catch (const NumericalError& e) {
        throw NumericalError("iteration " + std::to_string(it) + ", learner " + std::to_string(r) + ": " + e.what());
      }
    }
    if (cfg_.verify_every > 0 && (it + 1) % cfg_.verify_every == 0) verify(it);
    try {
      return sample(state_->posterior(), rng_);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ", (Sigma, beta) draw: " + e.what());
    }
  }

  void verify(int it) const {
    const double scratch = state_->scratch_logml();
    if (std::abs(scratch - state_->logml()) > 1e-8 * std::max(1.0, std::abs(scratch)))
      throw NumericalError("iteration " + std::to_string(it) + ": cached log marginal " +
                           std::to_string(state_->logml()) + " disagrees with recomputation " + std::to_string(scratch));
  }

  SamplerState& state() { return *state_; }
  const SamplerState& state() const { return *state_; }
  StreamRng& rng() { return rng_; }
  int iteration() const { return iteration_; }
  const std::vector<double>& log_step_scale() const { return log_scale_; }
  const std::vector<long>& accepted_after_burn() const { return accepted_; }

 private:
  SamplerConfig cfg_;
  PreparedPrior prior_;
  StreamRng rng_;
  std::optional<SamplerState> state_;
  std::vector<double> log_scale_;
  std::vector<long> accepted_;
  int iteration_ = 0;
};

inline McmcChain run_chain(const DesignMatrix& data, const NiwPrior& prior, const SamplerConfig& config) {
  VastSampler sampler(data.X, data.Y, prior, config);
  McmcChain chain;
  chain.draws.reserve(config.retained());
  chain.logml_trace.reserve(config.n_draws);
  for (int it = 0; it < config.n_draws; ++it) {
    PosteriorDraw d = sampler.sweep();
    chain.logml_trace.push_back(sampler.state().logml());
    if (it >= config.n_burn && (it - config.n_burn + 1) % config.thin == 0)
      chain.draws.push_back({std::move(d), sampler.state().basis().specs});
  }
  const double kept = config.n_draws - config.n_burn;
  for (int r = 0; r < config.R; ++r) {
    chain.accept_rate_mu_phi.push_back(sampler.accepted_after_burn()[r] / kept);
    chain.step_scale.push_back(std::exp(sampler.log_step_scale()[r]));
  }
  return chain;
}

/// Posterior mean of F(X_t) for every row of X.
inline Matrix posterior_mean_fit(const McmcChain& chain, const Matrix& X) {
  if (chain.draws.empty()) throw std::invalid_argument("empty chain");
  Matrix acc = Matrix::Zero(X.rows(), chain.draws.front().params.B.cols());
  for (const auto& d : chain.draws) acc.noalias() += build_basis(X, d.specs).W * d.params.B;
  return acc / static_cast<double>(chain.draws.size());
}

}  // namespace vastvar
