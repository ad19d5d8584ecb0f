#pragma once

// RunConfig: JSON-backed settings for the CLI. Every field that falls back to
// its default is recorded under `assumed` so metadata can flag it.

#include "vastvar/common.hpp"
#include "vastvar/girf.hpp"
#include "vastvar/io.hpp"
#include "vastvar/minnesota.hpp"
#include "vastvar/rng.hpp"
#include "vastvar/sampler.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vastvar {

/// Walks a JSON object while tracking the dotted field path, recording
/// defaulted fields and rejecting unknown keys.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string path, std::vector<std::string>& assumed)
      : j_(&j), path_(std::move(path)), assumed_(&assumed) {
    if (!j_->is_object() && !j_->is_null()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const {
    seen_.insert(key);
    return j_->is_object() && j_->contains(key) && !(*j_)[key].is_null();
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) {
      assumed_->push_back(field(key));
      return fallback;
    }
    return convert<T>(key);
  }

  template <class T>
  T require(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    return convert<T>(key);
  }

  template <class T>
  std::optional<T> optional(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return convert<T>(key);
  }

  const nlohmann::json& raw(const std::string& key) const {
    seen_.insert(key);
    return j_->at(key);
  }

  FieldReader child(const std::string& key) const {
    seen_.insert(key);
    static const nlohmann::json null_json;
    const nlohmann::json& sub = (j_->is_object() && j_->contains(key)) ? (*j_)[key] : null_json;
    return FieldReader(sub, field(key), *assumed_);
  }

  void reject_unknown() const {
    if (!j_->is_object()) return;
    for (const auto& [k, v] : j_->items())
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown field");
  }

 private:
  template <class T>
  T convert(const std::string& key) const {
    const auto& v = (*j_)[key];
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            throw ConfigError(field(key), "expected a nonnegative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  const nlohmann::json* j_;
  std::string path_;
  std::vector<std::string>* assumed_;
  mutable std::set<std::string> seen_;
};

struct DataConfig {
  std::string csv;     // absolute after resolution
  std::string schema;  // empty: built-in 18-variable schema
};

struct PriorConfig {
  double xi = 0.01;
  std::optional<double> J;  // empty: 2R
};

struct RunConfig {
  DataConfig data;
  ModelKind model = ModelKind::vast;
  std::vector<std::string> stages{"estimate", "girf", "summarize"};
  std::uint64_t seed = 0;
  SamplerConfig sampler;
  PriorConfig prior;
  MinnesotaConfig minnesota;
  int linear_draws = 1000;
  std::uint64_t linear_seed = 0;
  GirfRequest girf;
  bool girf_linear_simulate = false;  // linear model: simulate instead of companion powers
  TableOptions analytics;
  std::string output_dir;
  bool emit_metadata = true;
  int threads = 1;

  std::vector<std::string> assumed;

  bool wants(const std::string& stage) const { return std::find(stages.begin(), stages.end(), stage) != stages.end(); }
};

inline const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> s{"estimate", "girf", "summarize"};
  return s;
}

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal().string();
}

inline SizeRange read_range(const FieldReader& r, SizeRange fallback) {
  SizeRange out;
  out.lo = r.get("lo", fallback.lo);
  out.hi = r.get("hi", fallback.hi);
  out.lo_closed = r.get("lo_closed", fallback.lo_closed);
  out.hi_closed = r.get("hi_closed", fallback.hi_closed);
  r.reject_unknown();
  if (!(out.lo >= 0.0) || !(out.hi > out.lo)) throw ConfigError(r.field("hi"), "range must satisfy 0 <= lo < hi");
  return out;
}

}  // namespace detail

/// The "girf" section; also the format of a standalone request file.
inline GirfRequest parse_girf_section(const FieldReader& g, std::uint64_t default_seed, bool* linear_simulate) {
  GirfRequest gr;
  gr.shock_index = g.get("shock_index", -1);
  if (g.has("sigmas") && g.raw("sigmas").is_string()) {
    if (g.raw("sigmas").get<std::string>() != "standard") throw ConfigError(g.field("sigmas"), "expected a list or \"standard\"");
    gr.sigmas = standard_sigma_grid();
  } else if (g.has("sigmas")) {
    gr.sigmas = g.require<std::vector<double>>("sigmas");
  } else {
    gr.sigmas = g.get("sigmas", standard_sigma_grid());
  }
  gr.H = g.get("H", gr.H);
  gr.origins = g.get("origins", std::vector<int>{});
  gr.origin_step = g.get("origin_step", gr.origin_step);
  gr.n_sim = g.get("n_sim", gr.n_sim);
  gr.draw_thin = g.get("draw_thin", gr.draw_thin);
  gr.seed = g.get("seed", default_seed);
  gr.quantile_levels = g.get("quantiles", gr.quantile_levels);
  gr.common_random_numbers = g.get("common_random_numbers", gr.common_random_numbers);
  const bool sim = g.get("linear_simulate", false);
  if (linear_simulate) *linear_simulate = sim;
  g.reject_unknown();
  if (gr.shock_index < -1) throw ConfigError(g.field("shock_index"), "must be >= 0 (or -1 for the ebp variable)");
  if (gr.H < 0) throw ConfigError(g.field("H"), "must be >= 0");
  if (gr.n_sim < 2) throw ConfigError(g.field("n_sim"), "must be >= 2");
  if (gr.draw_thin < 1) throw ConfigError(g.field("draw_thin"), "must be >= 1");
  if (gr.origin_step < 1) throw ConfigError(g.field("origin_step"), "must be >= 1");
  if (gr.sigmas.empty()) throw ConfigError(g.field("sigmas"), "must not be empty");
  for (double s : gr.sigmas)
    if (s == 0.0 || !std::isfinite(s)) throw ConfigError(g.field("sigmas"), "entries must be finite and nonzero");
  for (double q : gr.quantile_levels)
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError(g.field("quantiles"), "levels must lie in [0, 1]");
  return gr;
}

inline TableOptions parse_analytics_section(const FieldReader& a) {
  TableOptions t;
  t.flip_benign = a.get("flip_benign", true);
  t.small = detail::read_range(a.child("small"), default_small_range());
  t.large = detail::read_range(a.child("large"), default_large_range());
  t.band_variables = a.get("band_variables", std::vector<int>{});
  a.reject_unknown();
  return t;
}

/// Parses and validates a config object. Relative paths resolve against
/// `base_dir`. Errors carry the dotted field path.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  auto& assumed = c.assumed;
  FieldReader root(j, "", assumed);

  c.seed = root.require<std::uint64_t>("seed");
  c.output_dir = detail::resolve_path(base_dir, root.get<std::string>("output_dir", "out"));
  c.emit_metadata = root.get("emit_metadata", true);
  c.threads = root.get("threads", 1);
  if (c.threads < 1) throw ConfigError("threads", "must be >= 1");

  const std::string model = root.get<std::string>("model", "vast");
  if (model == "vast") c.model = ModelKind::vast;
  else if (model == "linear") c.model = ModelKind::linear;
  else throw ConfigError("model", "must be \"vast\" or \"linear\", got \"" + model + "\"");

  if (root.has("stages")) {
    c.stages = root.require<std::vector<std::string>>("stages");
    for (const auto& s : c.stages)
      if (std::find(known_stages().begin(), known_stages().end(), s) == known_stages().end())
        throw ConfigError("stages", "unknown stage \"" + s + "\" (expected estimate, girf, summarize)");
  } else {
    assumed.push_back("stages");
  }

  {
    FieldReader d = root.child("data");
    c.data.csv = detail::resolve_path(base_dir, d.require<std::string>("csv"));
    c.data.schema = detail::resolve_path(base_dir, d.get<std::string>("schema", ""));
    d.reject_unknown();
    if (!std::filesystem::exists(c.data.csv)) throw ConfigError("data.csv", "file does not exist: " + c.data.csv);
    if (!c.data.schema.empty() && !std::filesystem::exists(c.data.schema))
      throw ConfigError("data.schema", "file does not exist: " + c.data.schema);
  }

  const std::uint64_t s_sampler = derive_key(c.seed, {1});
  const std::uint64_t s_girf = derive_key(c.seed, {2});
  const std::uint64_t s_linear = derive_key(c.seed, {3});

  {
    FieldReader s = root.child("sampler");
    SamplerConfig& sc = c.sampler;
    sc.R = s.get("R", sc.R);
    sc.P = s.get("P", sc.P);
    sc.n_draws = s.get("n_draws", sc.n_draws);
    sc.n_burn = s.get("n_burn", sc.n_burn);
    sc.thin = s.get("thin", sc.thin);
    sc.seed = s.get("seed", s_sampler);
    sc.mh_step_mu = s.get("mh_step_mu", sc.mh_step_mu);
    sc.mh_step_logphi = s.get("mh_step_logphi", sc.mh_step_logphi);
    sc.adapt = s.get("adapt", sc.adapt);
    sc.candidate_subsample = s.get("candidate_subsample", sc.candidate_subsample);
    sc.target_accept = s.get("target_accept", sc.target_accept);
    sc.verify_every = s.get("verify_every", sc.verify_every);
    s.reject_unknown();
    if (sc.R < 1) throw ConfigError("sampler.R", "must be >= 1");
    if (sc.P < 1) throw ConfigError("sampler.P", "must be >= 1");
    if (sc.thin < 1) throw ConfigError("sampler.thin", "must be >= 1");
    if (sc.n_draws < 1) throw ConfigError("sampler.n_draws", "must be >= 1");
    if (sc.n_burn < 0 || sc.n_burn >= sc.n_draws) throw ConfigError("sampler.n_burn", "must satisfy 0 <= n_burn < n_draws");
    if (!(sc.mh_step_mu > 0.0)) throw ConfigError("sampler.mh_step_mu", "must be > 0");
    if (!(sc.mh_step_logphi > 0.0)) throw ConfigError("sampler.mh_step_logphi", "must be > 0");
    if (sc.candidate_subsample < 0) throw ConfigError("sampler.candidate_subsample", "must be >= 0");
    if (!(sc.target_accept > 0.0 && sc.target_accept < 1.0)) throw ConfigError("sampler.target_accept", "must lie in (0, 1)");
    if (sc.verify_every < 0) throw ConfigError("sampler.verify_every", "must be >= 0");
    if (sc.retained() < 1) throw ConfigError("sampler.thin", "no draws would be retained");
  }

  {
    FieldReader p = root.child("prior");
    c.prior.xi = p.get("xi", c.prior.xi);
    c.prior.J = p.optional<double>("J");
    if (!c.prior.J) assumed.push_back("prior.J");
    p.reject_unknown();
    if (!(c.prior.xi > 0.0)) throw ConfigError("prior.xi", "must be > 0");
    if (c.prior.J && !(*c.prior.J > 0.0)) throw ConfigError("prior.J", "must be > 0");
  }

  {
    FieldReader m = root.child("minnesota");
    MinnesotaConfig& mc = c.minnesota;
    mc.lambda1 = m.get("lambda1", mc.lambda1);
    mc.lambda2 = m.get("lambda2", mc.lambda2);
    mc.lambda3 = m.get("lambda3", mc.lambda3);
    mc.lambda4 = m.get("lambda4", mc.lambda4);
    mc.P = m.get("P", c.sampler.P);
    c.linear_draws = m.get("n_draws", c.linear_draws);
    c.linear_seed = m.get("seed", s_linear);
    m.reject_unknown();
    if (!(mc.lambda1 > 0.0)) throw ConfigError("minnesota.lambda1", "must be > 0");
    if (!(mc.lambda3 > 0.0)) throw ConfigError("minnesota.lambda3", "must be > 0");
    if (!(mc.lambda4 > 0.0)) throw ConfigError("minnesota.lambda4", "must be > 0");
    if (!(mc.lambda2 > 0.0 && mc.lambda2 <= 1.0)) throw ConfigError("minnesota.lambda2", "must lie in (0, 1]");
    if (mc.P < 1) throw ConfigError("minnesota.P", "must be >= 1");
    if (c.linear_draws < 1) throw ConfigError("minnesota.n_draws", "must be >= 1");
  }

  c.girf = parse_girf_section(root.child("girf"), s_girf, &c.girf_linear_simulate);
  c.analytics = parse_analytics_section(root.child("analytics"));
  root.reject_unknown();
  return c;
}

/// Fully resolved config; parses back to an identical RunConfig.
inline nlohmann::json config_to_json(const RunConfig& c) {
  const SamplerConfig& s = c.sampler;
  const GirfRequest& g = c.girf;
  nlohmann::json j = {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"emit_metadata", c.emit_metadata},
      {"threads", c.threads},
      {"model", c.model == ModelKind::vast ? "vast" : "linear"},
      {"stages", c.stages},
      {"data", {{"csv", c.data.csv}, {"schema", c.data.schema}}},
      {"sampler",
       {{"R", s.R},
        {"P", s.P},
        {"n_draws", s.n_draws},
        {"n_burn", s.n_burn},
        {"thin", s.thin},
        {"seed", s.seed},
        {"mh_step_mu", s.mh_step_mu},
        {"mh_step_logphi", s.mh_step_logphi},
        {"adapt", s.adapt},
        {"candidate_subsample", s.candidate_subsample},
        {"target_accept", s.target_accept},
        {"verify_every", s.verify_every}}},
      {"prior", {{"xi", c.prior.xi}}},
      {"minnesota",
       {{"lambda1", c.minnesota.lambda1},
        {"lambda2", c.minnesota.lambda2},
        {"lambda3", c.minnesota.lambda3},
        {"lambda4", c.minnesota.lambda4},
        {"P", c.minnesota.P},
        {"n_draws", c.linear_draws},
        {"seed", c.linear_seed}}},
      {"girf",
       {{"shock_index", g.shock_index},
        {"sigmas", g.sigmas},
        {"H", g.H},
        {"origins", g.origins},
        {"origin_step", g.origin_step},
        {"n_sim", g.n_sim},
        {"draw_thin", g.draw_thin},
        {"seed", g.seed},
        {"quantiles", g.quantile_levels},
        {"common_random_numbers", g.common_random_numbers},
        {"linear_simulate", c.girf_linear_simulate}}},
      {"analytics",
       {{"flip_benign", c.analytics.flip_benign},
        {"small", range_json(c.analytics.small)},
        {"large", range_json(c.analytics.large)},
        {"band_variables", c.analytics.band_variables}}},
  };
  if (c.prior.J) j["prior"]["J"] = *c.prior.J;
  if (c.data.schema.empty()) j["data"].erase("schema");
  if (g.origins.empty()) j["girf"].erase("origins");
  return j;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<file>", path.string() + ": " + e.what());
  }
}

/// Loads a run config or a metadata.json written by a previous run (which
/// embeds the resolved config under "config").
inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j = read_json_file(path);
  const auto base = std::filesystem::absolute(path).parent_path();
  if (j.is_object() && j.contains("config") && j.contains("version")) {
    RunConfig c = parse_run_config(j.at("config"), base);
    if (j.contains("assumed")) c.assumed = j.at("assumed").get<std::vector<std::string>>();
    return c;
  }
  return parse_run_config(j, base);
}

}  // namespace vastvar
