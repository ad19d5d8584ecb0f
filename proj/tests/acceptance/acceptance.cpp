// Acceptance checks. Each criterion computes its reference values first,
// then runs the library and prints one line: "criterion N: PASS|FAIL ...".
// Exit status is nonzero if any selected criterion fails.

#include "vastvar.hpp"

#include "analytics_props.hpp"
#include "geweke.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace vastvar;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---- 1: conjugacy ---------------------------------------------------------

constexpr double kEvidenceRelTol = 1e-4;
constexpr double kMomentTol = 1e-10;

Verdict conjugacy() {
  oracle::ScalarFixture f;
  f.W.resize(3, 2);
  f.W << 0.9, 0.1, 0.3, 0.7, 0.55, 0.45;
  f.y.resize(3);
  f.y << 1.2, -0.4, 0.3;
  f.v0 = 3.0;
  f.s0 = 0.8;
  f.b0 << 0.2, -0.1;
  f.V0 << 0.5, 0.1, 0.1, 0.4;

  const double quad = oracle::log_evidence_quadrature(f);
  const Matrix V0i = f.V0.inverse();
  const Matrix VN = (V0i + f.W.transpose() * f.W).inverse();
  const Vector BN = VN * (V0i * f.b0 + f.W.transpose() * f.y);
  const double SN = f.s0 + f.y.squaredNorm() + f.b0.dot(V0i * f.b0) - BN.dot(VN.inverse() * BN);
  const double vN = f.v0 + 3.0;

  NiwPrior p;
  p.v0 = f.v0;
  p.S0 = Matrix::Constant(1, 1, f.s0);
  p.B0 = f.b0;
  p.V0 = f.V0;
  const Matrix Y = f.y;
  const double lm = log_marginal(p, f.W, Y);
  const NiwPosterior post = update(p, f.W, Y);

  const double ev_rel = std::abs(lm - quad) / std::abs(quad);
  const double mom = std::max({(post.VN - VN).cwiseAbs().maxCoeff(), (post.BN.col(0) - BN).cwiseAbs().maxCoeff(),
                               std::abs(post.SN(0, 0) - SN), std::abs(post.vN - vN),
                               // posterior mean of sigma2
                               std::abs(post.SN(0, 0) / (post.vN - 2.0) - SN / (vN - 2.0))});
  return {ev_rel < kEvidenceRelTol && mom < kMomentTol,
          "log evidence " + num(lm) + " vs quadrature " + num(quad) + " (rel " + num(ev_rel) + " < " +
              num(kEvidenceRelTol) + "), posterior moments max gap " + num(mom) + " < " + num(kMomentTol)};
}

// ---- 2: Geweke joint test -------------------------------------------------

constexpr double kGewekeZ = 4.0;

Verdict geweke_test() {
  const geweke::Options o;  // 200k sweeps
  const auto moments = geweke::run(o);
  double worst = 0.0;
  std::string which;
  for (const auto& m : moments)
    if (std::abs(m.z()) > worst) {
      worst = std::abs(m.z());
      which = m.name;
    }
  return {worst < kGewekeZ, std::to_string(moments.size()) + " moments over " + std::to_string(o.sweeps) +
                                " sweeps, max |z| = " + num(worst) + " (" + which + ") < " + num(kGewekeZ)};
}

// ---- 3: linear nesting ----------------------------------------------------

constexpr double kNestingRelTol = 1e-8;

Verdict linear_nesting() {
  DgpSpec s;
  s.M = 3;
  s.T = 240;
  s.P = 2;
  s.linear = Matrix::Zero(3, 6);
  s.linear << 0.5, 0.1, 0.0, 0.1, 0.0, 0.0,  //
      0.0, 0.6, 0.1, 0.0, 0.1, 0.0,          //
      0.2, 0.0, 0.4, 0.0, 0.0, 0.1;
  const SyntheticData sd = generate_synthetic(s, 31);
  MinnesotaConfig mc;
  mc.P = 2;
  const auto draws = estimate_bvar(build_design(sd.data, 2), mc, own_lag_means(sd.data.meta), 200, 32);

  GirfRequest req;
  req.sigmas = standard_sigma_grid();
  req.H = 24;
  req.origin_step = 23;
  req.zero_noise = true;
  const GirfResult sim = girf_batch(draws, sd.data, 2, req);
  const GirfResult exact = linear_girf_batch(draws, sd.data, 2, req);
  double worst = 0.0;
  for (std::size_t i = 0; i < sim.responses.size(); ++i)
    worst = std::max(worst, std::abs(sim.responses[i] - exact.responses[i]) / std::max(1.0, std::abs(exact.responses[i])));

  const Vector scale = sd.data.scale_sd();
  const int j = sd.data.ebp_index();
  std::size_t asym = 0, inhom = 0;
  for (const auto& d : draws)
    for (double sigma : req.sigmas) {
      const Matrix up = linear_irf(d, j, sigma, req.H, scale);
      if (linear_irf(d, j, -sigma, req.H, scale) != Matrix(-up)) ++asym;
      if (linear_irf(d, j, 2 * sigma, req.H, scale) != Matrix(2 * up)) ++inhom;
    }
  return {worst < kNestingRelTol && asym == 0 && inhom == 0,
          std::to_string(draws.size()) + " draws: zero-noise GIRF vs companion IRF max rel gap " + num(worst) + " < " +
              num(kNestingRelTol) + "; antisymmetry violations " + std::to_string(asym) + ", homogeneity violations " +
              std::to_string(inhom) + " (exact)"};
}

// ---- 4: identification ----------------------------------------------------

constexpr double kReconstructTol = 1e-12;

Verdict identification() {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  double worst = 0.0;
  int impact_bad = 0, pre_bad = 0, cases = 0;
  for (int n = 1; n <= 20; ++n)
    for (int rep = 0; rep < 10; ++rep, ++cases) {
      const Matrix S = oracle::random_spd(n, gen);
      const Matrix ref = oracle::cholesky_reference(S);
      const int j = rep % n;
      Vector sc(n);
      for (int i = 0; i < n; ++i) sc(i) = u(gen);
      const StructuralFactor f = cholesky_identify(S, j, sc);
      const double scale = S.cwiseAbs().maxCoeff();
      worst = std::max(worst, (f.Pmat * f.Pmat.transpose() - S).cwiseAbs().maxCoeff() / scale);
      worst = std::max(worst, (f.Pmat - ref).cwiseAbs().maxCoeff() / std::sqrt(scale));
      for (double sigma : {-6.0, -1.0, -0.1, 0.1, 0.75, 6.0}) {
        const Vector imp = scaled_impact(f, sigma);
        if (imp(j) != sigma * sc(j)) ++impact_bad;
        for (int i = 0; i < j; ++i)
          if (imp(i) != 0.0) ++pre_bad;
      }
    }
  return {worst < kReconstructTol && impact_bad == 0 && pre_bad == 0,
          std::to_string(cases) + " SPD matrices up to 20x20: max rel reconstruction error " + num(worst) + " < " +
              num(kReconstructTol) + "; impact mismatches " + std::to_string(impact_bad) +
              ", nonzero pre-ordered impacts " + std::to_string(pre_bad)};
}

// ---- 5: synthetic recovery ------------------------------------------------

constexpr double kMinR2 = 0.8;
constexpr double kMinSelection = 0.5;
constexpr double kActiveContrast = 0.05;

Verdict recovery() {
  DgpSpec s;
  s.M = 3;
  s.T = 400;
  s.P = 2;
  // two learners on the first lag of variable 0 (design column 0)
  s.learners.push_back({{0, 0.0, 2.0}, (Vector(3) << 0.8, 0.5, -0.6).finished(), (Vector(3) << -0.8, -0.5, 0.6).finished()});
  s.learners.push_back({{0, 1.0, 4.0}, (Vector(3) << 0.6, 0.0, 0.4).finished(), Vector::Zero(3)});
  s.Sigma = Matrix::Identity(3, 3) * 0.25;
  const SyntheticData sd = generate_synthetic(s, 51);
  const DesignMatrix design = build_design(sd.data, s.P);

  SamplerConfig cfg;
  cfg.R = 6;
  cfg.P = s.P;
  cfg.n_draws = 4000;
  cfg.n_burn = 2000;
  cfg.seed = 52;
  const McmcChain chain = run_chain(design, vast_prior(s.M, cfg.R), cfg);

  const StandardizedTruth truth = sd.standardized();
  const Matrix fit = posterior_mean_fit(chain, design.X);
  Matrix target(fit.rows(), fit.cols());
  for (Eigen::Index t = 0; t < target.rows(); ++t) target.row(t) = truth(design.X.row(t).transpose()).transpose();
  const Matrix centered = target.rowwise() - target.colwise().mean();
  const double r2 = 1.0 - (fit - target).squaredNorm() / centered.squaredNorm();

  long active = 0, on_true = 0;
  for (const auto& d : chain.draws) {
    const BasisState b = build_basis(design.X, d.specs);
    for (int r = 0; r < cfg.R; ++r) {
      const Vector S = b.W.col(2 * r);
      const double sd_s = std::sqrt((S.array() - S.mean()).square().mean());
      const double contrast = sd_s * (d.params.B.row(2 * r) - d.params.B.row(2 * r + 1)).norm();
      if (contrast < kActiveContrast) continue;
      ++active;
      if (d.specs[r].sel == 0) ++on_true;
    }
  }
  const double sel = active ? double(on_true) / active : 0.0;
  return {r2 >= kMinR2 && sel > kMinSelection,
          "R^2 vs true mean " + num(r2) + " >= " + num(kMinR2) + "; true threshold column chosen by " + num(sel) +
              " of active learner draws > " + num(kMinSelection) + " (" + std::to_string(active) + " active)"};
}

// ---- 6: asymmetry ---------------------------------------------------------

constexpr double kMinAsymmetryProb = 0.9;

Verdict asymmetry() {
  DgpSpec s;
  s.M = 2;
  s.T = 500;
  s.P = 1;
  s.names = {"activity", "spread"};
  s.ebp_index = 1;
  s.linear = (Matrix(2, 2) << 0.5, 0.0, 0.0, 0.7).finished();
  // adverse spread states (above 2, about one month in eight) push activity
  // down and keep the spread high
  s.learners.push_back({{1, 2.0, 20.0}, (Vector(2) << -2.0, 0.5).finished(), Vector::Zero(2)});
  const SyntheticData sd = generate_synthetic(s, 61);
  const DesignMatrix design = build_design(sd.data, s.P);

  SamplerConfig cfg;
  cfg.R = 6;
  cfg.P = s.P;
  cfg.n_draws = 4000;
  cfg.n_burn = 2000;
  cfg.seed = 62;
  const McmcChain chain = run_chain(design, vast_prior(s.M, cfg.R), cfg);

  GirfRequest req;
  req.sigmas = {-6.0, 6.0};
  req.H = 24;
  req.origin_step = 5;
  req.n_sim = 100;
  req.draw_thin = 10;
  req.seed = 63;
  const GirfResult g = girf_batch(chain, sd.data, s.P, req);
  auto peak_abs = [](const GirfResult& r, int d, int s_idx) {
    return std::abs(peak_response(Vector(r.avg_path(d, s_idx).col(0))).value);
  };
  int wins = 0;
  for (int d = 0; d < g.n_draws; ++d)
    if (peak_abs(g, d, 1) > peak_abs(g, d, 0)) ++wins;
  const double prob = double(wins) / g.n_draws;

  MinnesotaConfig mc;
  mc.P = s.P;
  const auto lin = estimate_bvar(design, mc, own_lag_means(sd.data.meta), 400, 64);
  req.draw_thin = 2;
  const GirfResult lg = linear_girf_batch(lin, sd.data, s.P, req);
  int unequal = 0;
  for (int d = 0; d < lg.n_draws; ++d)
    if (peak_abs(lg, d, 1) != peak_abs(lg, d, 0)) ++unequal;
  return {prob > kMinAsymmetryProb && unequal == 0,
          "P(|adverse peak| > |benign peak|) for activity at sigma = +/-6: " + num(prob) + " > " +
              num(kMinAsymmetryProb) + " over " + std::to_string(g.n_draws) + " draws; linear BVAR unequal peaks " +
              std::to_string(unequal) + " of " + std::to_string(lg.n_draws)};
}

// ---- 7: analytics identities ----------------------------------------------

Verdict analytics() {
  const int cases = 10000;
  const auto bad = props::check(cases, 71);
  return {bad.empty(), std::to_string(cases) + " randomized cases, " + std::to_string(bad.size()) + " violations" +
                           (bad.empty() ? "" : " (first: " + bad.front() + ")")};
}

// ---- 8: determinism -------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict determinism() {
  oracle::TempDir scratch("acceptance");
  const fs::path config = fs::path(VASTVAR_DEMO_DIR) / "demo.json";
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("'") + VASTVAR_CLI + "' run --config '" + config.string() + "' --out '" +
                            (scratch.path() / run).string() + "' > '" + (scratch.path() / (std::string(run) + ".log")).string() +
                            "' 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      return {false, std::string("run ") + run + " failed: " + slurp(scratch.path() / (std::string(run) + ".log"))};
  }
  const fs::path a = scratch.path() / "a", b = scratch.path() / "b";
  int files = 0;
  std::vector<std::string> differ;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    ++files;
    if (rel == "metadata.json") {
      // wall time and the output location legitimately differ
      auto strip = [](const fs::path& p) {
        auto j = nlohmann::json::parse(slurp(p));
        j.erase("wall_time_seconds");
        j["config"].erase("output_dir");
        return j;
      };
      if (strip(e.path()) != strip(b / rel)) differ.push_back(rel.string());
    } else if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) {
      differ.push_back(rel.string());
    }
  }
  std::string detail = std::to_string(files) + " output files compared byte for byte (metadata.json without wall time";
  detail += " and output_dir), " + std::to_string(differ.size()) + " differ";
  if (!differ.empty()) detail += " (first: " + differ.front() + ")";
  return {files >= 8 && differ.empty(), detail};
}

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criterion number(s) 1-8; default all")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::vector<Criterion> all{
      {"conjugacy oracle", 1, conjugacy},        {"sampler joint distribution", 600, geweke_test},
      {"linear nesting", 60, linear_nesting},    {"identification", 1, identification},
      {"synthetic recovery", 900, recovery},     {"asymmetry reproduction", 1200, asymmetry},
      {"analytics identities", 30, analytics},   {"determinism", 600, determinism}};

  int failures = 0;
  for (int n : which) {
    const Criterion& c = all[n - 1];
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = v.pass && in_time;
    std::cout << "criterion " << n << ": " << (pass ? "PASS" : "FAIL") << " [" << c.name << "] " << v.detail << "; "
              << num(secs) << " s (budget " << num(c.budget_seconds) << " s" << (in_time ? "" : ", exceeded") << ")"
              << std::endl;
    if (!pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
