#pragma once

// Stage functions behind the CLI subcommands and the `run` orchestrator.

#include "vastvar/analytics.hpp"
#include "vastvar/config.hpp"
#include "vastvar/data.hpp"
#include "vastvar/girf.hpp"
#include "vastvar/io.hpp"
#include "vastvar/minnesota.hpp"
#include "vastvar/niw.hpp"
#include "vastvar/parallel.hpp"
#include "vastvar/sampler.hpp"
#include "vastvar/synthetic.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#ifndef VASTVAR_VERSION
#define VASTVAR_VERSION "0.1.0-unknown"
#endif

namespace vastvar {

namespace fs = std::filesystem;

inline const char* version() { return VASTVAR_VERSION; }

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigFailure = 2, kLoadFailure = 3, kNumericalFailure = 4 };

inline std::vector<VariableMeta> schema_for(const DataConfig& d) {
  return d.schema.empty() ? default_schema() : load_schema(d.schema);
}

inline PanelDataset ingest(const DataConfig& d) { return transform_and_standardize(load_csv(d.csv, schema_for(d))); }

/// Resolved config embedded in chain files. The output location is left out
/// so the same run written to two directories gives identical bytes.
inline nlohmann::json chain_config_json(const RunConfig& c) {
  nlohmann::json j = config_to_json(c);
  j.erase("output_dir");
  return j;
}

inline ChainFile estimate_vast(const PanelDataset& data, const RunConfig& c, int threads) {
  SamplerConfig sc = c.sampler;
  sc.threads = threads;
  const DesignMatrix design = build_design(data, sc.P);
  ChainFile out;
  out.kind = ModelKind::vast;
  out.data = data;
  out.P = sc.P;
  out.config = chain_config_json(c);
  out.vast = run_chain(design, vast_prior(data.M(), sc.R, c.prior.xi, c.prior.J), sc);
  return out;
}

inline ChainFile estimate_linear(const PanelDataset& data, const RunConfig& c) {
  const DesignMatrix design = build_design(data, c.minnesota.P);
  ChainFile out;
  out.kind = ModelKind::linear;
  out.data = data;
  out.P = c.minnesota.P;
  out.config = chain_config_json(c);
  out.linear = estimate_bvar(design, c.minnesota, own_lag_means(data.meta), c.linear_draws, c.linear_seed);
  return out;
}

inline GirfFile compute_girf(const ChainFile& chain, GirfRequest req, bool linear_simulate, int threads) {
  req.threads = threads;
  GirfFile f;
  f.kind = chain.kind;
  f.variables = chain.data.meta;
  if (chain.kind == ModelKind::vast) {
    f.result = girf_batch(chain.vast, chain.data, chain.P, req);
  } else if (linear_simulate) {
    f.result = girf_batch(chain.linear, chain.data, chain.P, req);
  } else {
    f.result = linear_girf_batch(chain.linear, chain.data, chain.P, req);
  }
  for (int t : f.result.origins) f.origin_dates.push_back(chain.data.dates.at(t));
  nlohmann::json r = {{"shock_index", req.shock_index}, {"sigmas", req.sigmas},      {"H", req.H},
                      {"origin_step", req.origin_step}, {"n_sim", req.n_sim},        {"draw_thin", req.draw_thin},
                      {"seed", req.seed},               {"quantiles", req.quantile_levels},
                      {"common_random_numbers", req.common_random_numbers},
                      {"propagation", chain.kind == ModelKind::linear && !linear_simulate ? "companion powers"
                                                                                            : "Monte Carlo"}};
  if (!req.origins.empty()) r["origins"] = req.origins;
  f.request = r;
  return f;
}

struct RunPaths {
  fs::path dir;
  fs::path chain() const { return dir / "chain.bin"; }
  fs::path girf() const { return dir / "girf.bin"; }
  fs::path girf_manifest() const { return dir / "girf.json"; }
  fs::path tables() const { return dir / "tables"; }
  fs::path metadata() const { return dir / "metadata.json"; }
  fs::path failed() const { return dir / "failed"; }
};

/// The resolved plan, without touching the filesystem beyond reads.
inline nlohmann::json run_plan(const RunConfig& c) {
  const RunPaths paths{c.output_dir};
  nlohmann::json steps = nlohmann::json::array();
  steps.push_back({{"stage", "ingest"}, {"csv", c.data.csv}, {"schema", c.data.schema.empty() ? "<built-in>" : c.data.schema}});
  if (c.wants("estimate"))
    steps.push_back({{"stage", "estimate"},
                     {"model", c.model == ModelKind::vast ? "vast" : "linear"},
                     {"out", paths.chain().string()}});
  if (c.wants("girf"))
    steps.push_back({{"stage", "girf"}, {"chain", paths.chain().string()}, {"out", paths.girf().string()}});
  if (c.wants("summarize"))
    steps.push_back({{"stage", "summarize"}, {"girf", paths.girf().string()}, {"out", paths.tables().string()}});
  if (c.emit_metadata) steps.push_back({{"stage", "metadata"}, {"out", paths.metadata().string()}});
  return {{"version", version()}, {"steps", steps}, {"config", config_to_json(c)}, {"assumed", c.assumed}};
}

namespace detail {

/// Moves this run's outputs (and any stray temporaries) into failed/.
inline void quarantine(const RunPaths& paths, const std::vector<fs::path>& produced, const std::string& message) {
  std::error_code ec;
  fs::create_directories(paths.failed(), ec);
  std::vector<fs::path> candidates = produced;
  if (fs::exists(paths.dir, ec))
    for (const auto& e : fs::recursive_directory_iterator(paths.dir, ec))
      if (e.path().extension() == ".tmp") candidates.push_back(e.path());
  for (const auto& p : candidates) {
    if (!fs::exists(p, ec)) continue;
    const fs::path rel = fs::relative(p, paths.dir, ec);
    const fs::path dest = paths.failed() / (ec ? p.filename() : rel);
    fs::create_directories(dest.parent_path(), ec);
    fs::remove_all(dest, ec);
    fs::rename(p, dest, ec);
  }
  std::ofstream(paths.failed() / "error.txt") << message << "\n";
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigFailure;
  if (dynamic_cast<const LoadError*>(&e)) return kLoadFailure;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumericalFailure;
  return kFailure;
}

}  // namespace detail

/// ingest -> estimate -> girf -> summarize as configured. Returns an exit code;
/// stage failures quarantine partial outputs under output_dir/failed/.
inline int run_pipeline(const RunConfig& c, std::ostream& log, int threads_flag = 0) {
  const auto start = std::chrono::steady_clock::now();
  const int threads = resolve_threads(threads_flag > 0 ? threads_flag : c.threads);
  const RunPaths paths{c.output_dir};
  std::vector<fs::path> produced;
  std::string stage = "ingest";
  try {
    fs::create_directories(paths.dir);
    fs::remove_all(paths.failed());
    const PanelDataset data = ingest(c.data);
    log << "ingest: T=" << data.T() << " M=" << data.M() << " (" << data.dates.front().str() << " to "
        << data.dates.back().str() << ")\n";

    std::optional<ChainFile> chain;
    if (c.wants("estimate")) {
      stage = "estimate";
      chain = c.model == ModelKind::vast ? estimate_vast(data, c, threads) : estimate_linear(data, c);
      produced.push_back(paths.chain());
      write_chain(paths.chain(), *chain);
      log << "estimate: " << chain->n_draws() << " retained draws -> " << paths.chain().string() << "\n";
    }

    std::optional<GirfFile> girf;
    if (c.wants("girf")) {
      stage = "girf";
      if (!chain) chain = read_chain(paths.chain());
      girf = compute_girf(*chain, c.girf, c.girf_linear_simulate, threads);
      produced.push_back(paths.girf());
      produced.push_back(paths.girf_manifest());
      write_girf(paths.girf(), *girf);
      log << "girf: " << girf->result.n_draws << " draws x " << girf->result.n_origins << " origins x "
          << girf->result.n_sigma << " sizes -> " << paths.girf().string() << "\n";
    }

    std::vector<std::string> tables;
    if (c.wants("summarize")) {
      stage = "summarize";
      if (!girf) girf = read_girf(paths.girf());
      produced.push_back(paths.tables());
      tables = write_tables(paths.tables(), *girf, c.analytics);
      log << "summarize: " << tables.size() << " files -> " << paths.tables().string() << "\n";
    }

    if (c.emit_metadata) {
      stage = "metadata";
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::vector<std::string> outputs;
      for (const auto& p : produced) outputs.push_back(fs::relative(p, paths.dir).string());
      nlohmann::json meta = {
          {"version", version()},
          {"command", "run"},
          {"config", config_to_json(c)},
          {"seeds",
           {{"root", c.seed}, {"sampler", c.sampler.seed}, {"girf", c.girf.seed}, {"linear", c.linear_seed}}},
          {"threads", threads},
          {"wall_time_seconds", wall},
          {"assumed", c.assumed},
          {"data", {{"T", data.T()}, {"M", data.M()}, {"first", data.dates.front().str()}, {"last", data.dates.back().str()}}},
          {"outputs", outputs},
          {"notes",
           {{"minnesota", "lambda defaults are conventional values; lambda2 is recorded but a Kronecker prior "
                          "cannot apply a separate cross-variable tightness"},
            {"bands", "per-origin envelopes use peaks of the posterior-median path, min/max over sigma only"},
            {"girf_streams", "one random stream per (draw, origin), shared by every sigma"}}}};
      produced.push_back(paths.metadata());
      detail::write_text(paths.metadata(), meta.dump(2) + "\n");
    }
    return kOk;
  } catch (const std::exception& e) {
    const std::string message = stage + " failed: " + e.what();
    log << "error: " << message << "\n";
    detail::quarantine(paths, produced, message);
    return detail::exit_code_for(e);
  }
}

// ---- synthetic data files -------------------------------------------------

/// DGP spec from JSON: {M, T, P, burn_in, intercept, linear, Sigma, names,
/// ebp_index, learners: [{sel, mu, phi, beta0, beta1}]}. Matrices are lists
/// of rows.
inline DgpSpec parse_dgp(const nlohmann::json& j) {
  std::vector<std::string> assumed;
  FieldReader r(j, "", assumed);
  DgpSpec s;
  s.M = r.get("M", s.M);
  s.T = r.get("T", s.T);
  s.P = r.get("P", s.P);
  s.burn_in = r.get("burn_in", s.burn_in);
  s.ebp_index = r.get("ebp_index", s.ebp_index);
  s.names = r.get("names", std::vector<std::string>{});
  auto matrix = [&](const std::string& key) {
    const auto rows = r.require<std::vector<std::vector<double>>>(key);
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != static_cast<std::size_t>(m.cols())) throw ConfigError(r.field(key), "ragged matrix");
      for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
    }
    return m;
  };
  auto vec = [&](const std::vector<double>& v) { return Vector(Eigen::Map<const Vector>(v.data(), v.size())); };
  if (r.has("intercept")) s.intercept = vec(r.require<std::vector<double>>("intercept"));
  if (r.has("linear")) s.linear = matrix("linear");
  if (r.has("Sigma")) s.Sigma = matrix("Sigma");
  if (r.has("learners")) {
    const auto& arr = r.raw("learners");
    if (!arr.is_array()) throw ConfigError("learners", "expected a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      FieldReader l(arr[i], "learners[" + std::to_string(i) + "]", assumed);
      SyntheticLearner sl;
      sl.spec.sel = l.require<int>("sel");
      sl.spec.mu = l.get("mu", 0.0);
      sl.spec.phi = l.get("phi", 1.0);
      sl.beta0 = vec(l.require<std::vector<double>>("beta0"));
      sl.beta1 = vec(l.require<std::vector<double>>("beta1"));
      l.reject_unknown();
      s.learners.push_back(sl);
    }
  }
  r.optional<std::uint64_t>("seed");
  r.reject_unknown();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("<dgp>", e.what());
  }
  return s;
}

/// Writes data.csv (raw units) and schema.json for a simulated panel.
inline void write_synthetic(const fs::path& dir, const SyntheticData& sd) {
  fs::create_directories(dir);
  std::string csv = "date";
  for (const auto& v : sd.raw.meta) csv += "," + v.name;
  csv += "\n";
  for (Eigen::Index t = 0; t < sd.raw.values.rows(); ++t) {
    csv += sd.raw.dates[t].str();
    for (Eigen::Index m = 0; m < sd.raw.values.cols(); ++m) csv += "," + detail::fmt(sd.raw.values(t, m));
    csv += "\n";
  }
  detail::write_text(dir / "data.csv", csv);
  nlohmann::json schema = {{"variables", nlohmann::json::array()}};
  for (const auto& v : sd.raw.meta)
    schema["variables"].push_back(
        {{"name", v.name}, {"country", v.country}, {"transform", v.transform}, {"block", v.block}, {"order_index", v.order_index}});
  detail::write_text(dir / "schema.json", schema.dump(2) + "\n");
}

}  // namespace vastvar
