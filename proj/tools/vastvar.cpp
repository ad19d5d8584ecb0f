#include "vastvar.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace vastvar;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

/// Reads a run config (or a previous run's metadata.json), applying --seed.
/// A seed override also drops explicit per-stage seeds so they re-derive.
RunConfig load_config(const Common& o) {
  nlohmann::json j = read_json_file(o.config);
  const fs::path base = fs::absolute(o.config).parent_path();
  std::vector<std::string> carried;
  if (j.is_object() && j.contains("config") && j.contains("version")) {
    if (j.contains("assumed")) carried = j["assumed"].get<std::vector<std::string>>();
    j = j["config"];
  }
  if (o.seed) {
    j["seed"] = *o.seed;
    for (const char* section : {"sampler", "girf", "minnesota"})
      if (j.contains(section) && j[section].is_object()) j[section].erase("seed");
  }
  RunConfig c = parse_run_config(j, base);
  if (!carried.empty()) c.assumed = carried;
  return c;
}

int report(const std::exception& e) {
  std::cerr << "vastvar: " << e.what() << "\n";
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigFailure;
  if (dynamic_cast<const LoadError*>(&e)) return kLoadFailure;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumericalFailure;
  return kFailure;
}

void add_common(CLI::App* app, Common& o, bool config_required) {
  auto* opt = app->add_option("--config", o.config, "run configuration JSON (or a previous metadata.json)");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "override the root seed");
  app->add_option("--threads", o.threads, "thread budget (VASTVAR_THREADS takes precedence)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VAST nonlinear VAR: estimation, generalized impulse responses and summaries"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  Common o;
  bool check = false, dry_run = false, no_flip = false;
  std::string data_csv, schema_path, chain_path, req_path, girf_path;
  int lags = 0;

  auto* ingest_cmd = app.add_subcommand("ingest", "load, transform and validate a dataset");
  ingest_cmd->add_option("--config", o.config, "run configuration JSON");
  ingest_cmd->add_option("--data", data_csv, "CSV file (instead of --config)");
  ingest_cmd->add_option("--schema", schema_path, "schema JSON (default: built-in 18 variables)");
  ingest_cmd->add_option("--lags", lags, "lag order P for K = M*P (default: config sampler.P or 12)");
  ingest_cmd->add_flag("--check", check, "validate and print T, M, K");

  auto* est_cmd = app.add_subcommand("estimate", "run the VAST sampler and write a chain file");
  add_common(est_cmd, o, true);
  est_cmd->add_option("--out", o.out, "chain file (default: <output_dir>/chain.bin)");

  auto* lin_cmd = app.add_subcommand("estimate-linear", "draw from the Minnesota BVAR posterior");
  add_common(lin_cmd, o, true);
  lin_cmd->add_option("--out", o.out, "chain file (default: <output_dir>/chain.bin)");

  auto* girf_cmd = app.add_subcommand("girf", "generalized impulse responses from a chain file");
  girf_cmd->add_option("--chain", chain_path, "chain file")->required()->check(CLI::ExistingFile);
  girf_cmd->add_option("--req", req_path, "request JSON (fields of the config's girf section)");
  add_common(girf_cmd, o, false);
  girf_cmd->add_option("--out", o.out, "output .bin (a .json manifest is written beside it)")->required();

  auto* sum_cmd = app.add_subcommand("summarize", "peak, band and activeness tables from a GIRF file");
  sum_cmd->add_option("--girf", girf_path, "GIRF file")->required()->check(CLI::ExistingFile);
  sum_cmd->add_option("--config", o.config, "take analytics settings from this config");
  sum_cmd->add_option("--out", o.out, "output directory")->required();
  sum_cmd->add_flag("--no-flip", no_flip, "report benign rows with their own sign");

  auto* synth_cmd = app.add_subcommand("synth", "simulate a panel from a DGP spec");
  synth_cmd->add_option("--config", o.config, "DGP JSON")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", o.out, "output directory for data.csv and schema.json")->required();
  synth_cmd->add_option("--seed", o.seed, "simulation seed (default: the DGP file's seed, else 0)");

  auto* run_cmd = app.add_subcommand("run", "ingest, estimate, girf and summarize per the config");
  add_common(run_cmd, o, true);
  run_cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
  run_cmd->add_flag("--dry-run", dry_run, "print the resolved plan and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      DataConfig d;
      int P = lags > 0 ? lags : 12;
      if (!o.config.empty()) {
        const RunConfig c = load_config(o);
        d = c.data;
        if (lags <= 0) P = c.sampler.P;
      } else {
        if (data_csv.empty()) throw ConfigError("--data", "give --config or --data");
        d.csv = data_csv;
        d.schema = schema_path;
      }
      const PanelDataset data = ingest(d);
      const DesignMatrix design = build_design(data, P);
      std::cout << "T=" << data.T() << " M=" << data.M() << " K=" << design.K() << "\n";
      if (!check)
        for (const auto& v : data.meta)
          std::cout << "  " << v.order_index << " " << v.name << " mean=" << v.scale_mean << " sd=" << v.scale_sd << "\n";
      return kOk;
    }

    if (*est_cmd || *lin_cmd) {
      const RunConfig c = load_config(o);
      const fs::path out = o.out.empty() ? RunPaths{c.output_dir}.chain() : fs::path(o.out);
      const PanelDataset data = ingest(c.data);
      const int threads = resolve_threads(o.threads > 0 ? o.threads : c.threads);
      const ChainFile chain = *est_cmd ? estimate_vast(data, c, threads) : estimate_linear(data, c);
      write_chain(out, chain);
      std::cout << chain.n_draws() << " draws -> " << out.string() << "\n";
      return kOk;
    }

    if (*girf_cmd) {
      const ChainFile chain = read_chain(chain_path);
      std::vector<std::string> assumed;
      bool linear_simulate = false;
      GirfRequest req;
      const std::uint64_t default_seed = o.seed ? derive_key(*o.seed, {2}) : chain.config.value("girf", nlohmann::json::object()).value("seed", std::uint64_t{0});
      if (!req_path.empty()) {
        nlohmann::json j = read_json_file(req_path);
        if (o.seed) j.erase("seed");
        req = parse_girf_section(FieldReader(j, "", assumed), default_seed, &linear_simulate);
      } else if (!o.config.empty()) {
        const RunConfig c = load_config(o);
        req = c.girf;
        linear_simulate = c.girf_linear_simulate;
      } else {
        req = parse_girf_section(FieldReader(chain.config.value("girf", nlohmann::json::object()), "girf", assumed),
                                 default_seed, &linear_simulate);
      }
      const GirfFile g = compute_girf(chain, req, linear_simulate, resolve_threads(o.threads));
      write_girf(o.out, g);
      std::cout << g.result.n_draws << " draws x " << g.result.n_origins << " origins x " << g.result.n_sigma
                << " sizes -> " << o.out << "\n";
      return kOk;
    }

    if (*sum_cmd) {
      TableOptions t;
      if (!o.config.empty()) {
        std::vector<std::string> assumed;
        const nlohmann::json j = read_json_file(o.config);
        const nlohmann::json& cfg = j.contains("config") && j.contains("version") ? j["config"] : j;
        t = parse_analytics_section(FieldReader(cfg.value("analytics", nlohmann::json::object()), "analytics", assumed));
      }
      if (no_flip) t.flip_benign = false;
      const auto files = write_tables(o.out, read_girf(girf_path), t);
      for (const auto& f : files) std::cout << (fs::path(o.out) / f).string() << "\n";
      return kOk;
    }

    if (*synth_cmd) {
      const nlohmann::json j = read_json_file(o.config);
      const DgpSpec spec = parse_dgp(j);
      const std::uint64_t seed = o.seed ? *o.seed : j.value("seed", std::uint64_t{0});
      write_synthetic(o.out, generate_synthetic(spec, seed));
      std::cout << "T=" << spec.T << " M=" << spec.M << " -> " << o.out << "\n";
      return kOk;
    }

    if (*run_cmd) {
      RunConfig c = load_config(o);
      if (!o.out.empty()) c.output_dir = fs::absolute(o.out).lexically_normal().string();
      if (dry_run) {
        std::cout << run_plan(c).dump(2) << "\n";
        return kOk;
      }
      return run_pipeline(c, std::cout, o.threads);
    }
  } catch (const std::exception& e) {
    return report(e);
  }
  return kOk;
}
