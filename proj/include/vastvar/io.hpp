#pragma once

// On-disk formats.
//
// Binary files share one container: 8-byte magic, uint32 format version,
// uint64 header length, JSON header, uint64 raw payload length (doubles),
// uint64 compressed length, zlib-compressed little-endian doubles.
// Writes go to a temporary sibling and are renamed into place.

#include "vastvar/analytics.hpp"
#include "vastvar/common.hpp"
#include "vastvar/data.hpp"
#include "vastvar/girf.hpp"
#include "vastvar/minnesota.hpp"
#include "vastvar/sampler.hpp"

#include <json.hpp>
#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace vastvar {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kChainMagic = "VASTCHN\x01";
inline constexpr std::string_view kGirfMagic = "VASTGIR\x01";

struct Blob {
  nlohmann::json header;
  std::vector<double> payload;
};

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw LoadError(path + ": truncated file");
  return v;
}

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline void write_blob(const std::filesystem::path& path, std::string_view magic, const Blob& blob) {
  const std::string header = blob.header.dump();
  const auto raw_bytes = static_cast<uLong>(blob.payload.size() * sizeof(double));
  uLongf packed_len = compressBound(raw_bytes);
  std::vector<unsigned char> packed(packed_len);
  if (compress2(packed.data(), &packed_len, reinterpret_cast<const Bytef*>(blob.payload.data()), raw_bytes, 6) != Z_OK)
    throw Error("zlib compression failed for '" + path.string() + "'");

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    detail::put<std::uint32_t>(out, kFormatVersion);
    detail::put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    detail::put<std::uint64_t>(out, blob.payload.size());
    detail::put<std::uint64_t>(out, packed_len);
    out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed_len));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Blob read_blob(const std::filesystem::path& path, std::string_view magic) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + p + "'");
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic)
    throw LoadError(p + ": not a " + std::string(magic.substr(0, 7)) + " file");
  const auto version = detail::take<std::uint32_t>(in, p);
  if (version != kFormatVersion)
    throw LoadError(p + ": unsupported format version " + std::to_string(version));
  const auto header_len = detail::take<std::uint64_t>(in, p);
  if (header_len > (1ULL << 32)) throw LoadError(p + ": corrupt header length");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) throw LoadError(p + ": truncated header");
  const auto n = detail::take<std::uint64_t>(in, p);
  const auto packed_len = detail::take<std::uint64_t>(in, p);
  if (n > (1ULL << 36) || packed_len > (1ULL << 40)) throw LoadError(p + ": corrupt payload length");
  std::vector<unsigned char> packed(packed_len);
  if (!in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed_len)))
    throw LoadError(p + ": truncated payload");

  Blob blob;
  try {
    blob.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(p + ": bad header: " + e.what());
  }
  blob.payload.resize(n);
  uLongf out_len = static_cast<uLongf>(n * sizeof(double));
  if (uncompress(reinterpret_cast<Bytef*>(blob.payload.data()), &out_len, packed.data(), packed_len) != Z_OK ||
      out_len != n * sizeof(double))
    throw LoadError(p + ": payload failed to decompress");
  return blob;
}

/// Sequential reader over a payload with bounds checks.
class PayloadCursor {
 public:
  PayloadCursor(const std::vector<double>& data, std::string source) : data_(&data), source_(std::move(source)) {}

  double next() {
    if (pos_ >= data_->size()) throw LoadError(source_ + ": payload shorter than the header declares");
    return (*data_)[pos_++];
  }

  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = next();
    return m;
  }

  std::vector<double> vec(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = next();
    return v;
  }

  void expect_end() const {
    if (pos_ != data_->size()) throw LoadError(source_ + ": payload longer than the header declares");
  }

 private:
  const std::vector<double>* data_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline void append(std::vector<double>& out, const Matrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(m(r, c));
}

// ---- datasets -------------------------------------------------------------

inline nlohmann::json dataset_header(const PanelDataset& d) {
  std::vector<std::string> dates;
  for (const auto& ym : d.dates) dates.push_back(ym.str());
  return {{"T", d.T()}, {"M", d.M()}, {"dates", dates}, {"variables", d.meta}};
}

inline PanelDataset read_dataset(const nlohmann::json& h, PayloadCursor& cur) {
  PanelDataset d;
  for (const auto& s : h.at("dates")) {
    auto ym = YearMonth::parse(s.get<std::string>());
    if (!ym) throw LoadError("bad date in file header");
    d.dates.push_back(*ym);
  }
  d.meta = h.at("variables").get<std::vector<VariableMeta>>();
  d.values = cur.matrix(h.at("T").get<int>(), h.at("M").get<int>());
  return d;
}

// ---- chains ---------------------------------------------------------------

enum class ModelKind { vast, linear };
NLOHMANN_JSON_SERIALIZE_ENUM(ModelKind, {{ModelKind::vast, "vast"}, {ModelKind::linear, "linear"}})

/// Posterior output of either model plus the data it was fitted on, so that
/// GIRFs can be computed from the file alone.
struct ChainFile {
  ModelKind kind = ModelKind::vast;
  PanelDataset data;
  int P = 1;
  McmcChain vast;
  std::vector<LinearVarDraw> linear;
  nlohmann::json config = nlohmann::json::object();

  std::size_t n_draws() const { return kind == ModelKind::vast ? vast.draws.size() : linear.size(); }
};

inline void write_chain(const std::filesystem::path& path, const ChainFile& c) {
  Blob blob;
  auto& h = blob.header;
  h["kind"] = c.kind;
  h["P"] = c.P;
  h["dataset"] = dataset_header(c.data);
  h["config"] = c.config;
  h["n_draws"] = c.n_draws();
  auto& out = blob.payload;
  append(out, c.data.values);
  if (c.kind == ModelKind::vast) {
    const int R = c.vast.draws.empty() ? static_cast<int>(c.vast.accept_rate_mu_phi.size())
                                       : static_cast<int>(c.vast.draws.front().specs.size());
    h["R"] = R;
    h["n_trace"] = c.vast.logml_trace.size();
    for (const auto& d : c.vast.draws) {
      for (const auto& s : d.specs) {
        out.push_back(s.sel);
        out.push_back(s.mu);
        out.push_back(s.phi);
      }
      append(out, d.params.B);
      append(out, d.params.Sigma);
    }
    out.insert(out.end(), c.vast.logml_trace.begin(), c.vast.logml_trace.end());
    if (c.vast.accept_rate_mu_phi.size() != static_cast<std::size_t>(R) || c.vast.step_scale.size() != static_cast<std::size_t>(R))
      throw Error("chain diagnostics do not match R");
    out.insert(out.end(), c.vast.accept_rate_mu_phi.begin(), c.vast.accept_rate_mu_phi.end());
    out.insert(out.end(), c.vast.step_scale.begin(), c.vast.step_scale.end());
  } else {
    for (const auto& d : c.linear) {
      append(out, d.A);
      append(out, d.Sigma);
    }
  }
  write_blob(path, kChainMagic, blob);
}

inline ChainFile read_chain(const std::filesystem::path& path) {
  const Blob blob = read_blob(path, kChainMagic);
  const auto& h = blob.header;
  PayloadCursor cur(blob.payload, path.string());
  ChainFile c;
  try {
    c.kind = h.at("kind").get<ModelKind>();
    c.P = h.at("P").get<int>();
    c.config = h.value("config", nlohmann::json::object());
    c.data = read_dataset(h.at("dataset"), cur);
    const int M = c.data.M();
    const auto n = h.at("n_draws").get<std::size_t>();
    if (c.kind == ModelKind::vast) {
      const int R = h.at("R").get<int>();
      c.vast.draws.resize(n);
      for (auto& d : c.vast.draws) {
        d.specs.resize(R);
        for (auto& s : d.specs) {
          s.sel = static_cast<int>(cur.next());
          s.mu = cur.next();
          s.phi = cur.next();
        }
        d.params.B = cur.matrix(2 * R, M);
        d.params.Sigma = cur.matrix(M, M);
      }
      c.vast.logml_trace = cur.vec(h.at("n_trace").get<std::size_t>());
      c.vast.accept_rate_mu_phi = cur.vec(R);
      c.vast.step_scale = cur.vec(R);
    } else {
      c.linear.resize(n);
      for (auto& d : c.linear) {
        d.A = cur.matrix(M, M * c.P + 1);
        d.Sigma = cur.matrix(M, M);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": bad header: " + e.what());
  }
  cur.expect_end();
  return c;
}

// ---- GIRFs ----------------------------------------------------------------

/// A GIRF result together with the labels needed to interpret it.
struct GirfFile {
  GirfResult result;
  std::vector<VariableMeta> variables;
  std::vector<YearMonth> origin_dates;
  ModelKind kind = ModelKind::vast;
  nlohmann::json request = nlohmann::json::object();
};

inline nlohmann::json girf_manifest(const GirfFile& f) {
  const GirfResult& g = f.result;
  std::vector<std::string> dates;
  for (const auto& d : f.origin_dates) dates.push_back(d.str());
  return {{"model", f.kind},
          {"dims", {{"n_draws", g.n_draws}, {"n_origins", g.n_origins}, {"n_sigma", g.n_sigma}, {"n_h", g.n_h}, {"M", g.M}}},
          {"layout",
           {{"responses", "[draw][origin][sigma][h][variable]"},
            {"time_avg", "[draw][sigma][h][variable]"},
            {"quantiles", "[level][sigma][h][variable]"}}},
          {"shock_index", g.shock_index},
          {"shock_variable", f.variables.at(g.shock_index).name},
          {"sigmas", g.sigmas},
          {"quantile_levels", g.quantile_levels},
          {"origins", g.origins},
          {"origin_dates", dates},
          {"variables", f.variables},
          {"units", "transformed series units (standardized responses multiplied by scale_sd)"},
          {"request", f.request}};
}

inline void write_girf(const std::filesystem::path& path, const GirfFile& f) {
  Blob blob;
  blob.header = girf_manifest(f);
  const GirfResult& g = f.result;
  blob.payload.reserve(g.responses.size() + g.time_avg.size() + g.quantiles.size());
  blob.payload.insert(blob.payload.end(), g.responses.begin(), g.responses.end());
  blob.payload.insert(blob.payload.end(), g.time_avg.begin(), g.time_avg.end());
  blob.payload.insert(blob.payload.end(), g.quantiles.begin(), g.quantiles.end());
  write_blob(path, kGirfMagic, blob);
  auto manifest = blob.header;
  manifest["binary"] = path.filename().string();
  detail::write_text(std::filesystem::path(path).replace_extension(".json"), manifest.dump(2) + "\n");
}

inline GirfFile read_girf(const std::filesystem::path& path) {
  const Blob blob = read_blob(path, kGirfMagic);
  const auto& h = blob.header;
  GirfFile f;
  GirfResult& g = f.result;
  try {
    const auto& dims = h.at("dims");
    g.n_draws = dims.at("n_draws");
    g.n_origins = dims.at("n_origins");
    g.n_sigma = dims.at("n_sigma");
    g.n_h = dims.at("n_h");
    g.M = dims.at("M");
    g.shock_index = h.at("shock_index");
    g.sigmas = h.at("sigmas").get<std::vector<double>>();
    g.quantile_levels = h.at("quantile_levels").get<std::vector<double>>();
    g.origins = h.at("origins").get<std::vector<int>>();
    f.variables = h.at("variables").get<std::vector<VariableMeta>>();
    f.kind = h.at("model").get<ModelKind>();
    f.request = h.value("request", nlohmann::json::object());
    for (const auto& s : h.at("origin_dates")) {
      auto ym = YearMonth::parse(s.get<std::string>());
      if (!ym) throw LoadError(path.string() + ": bad origin date");
      f.origin_dates.push_back(*ym);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": bad header: " + e.what());
  }
  PayloadCursor cur(blob.payload, path.string());
  g.responses = cur.vec(static_cast<std::size_t>(g.n_draws) * g.n_origins * g.n_sigma * g.n_h * g.M);
  g.time_avg = cur.vec(static_cast<std::size_t>(g.n_draws) * g.n_sigma * g.n_h * g.M);
  g.quantiles = cur.vec(g.quantile_levels.size() * g.n_sigma * g.n_h * g.M);
  cur.expect_end();
  return f;
}

// ---- tables ---------------------------------------------------------------

struct TableOptions {
  bool flip_benign = true;
  SizeRange small = default_small_range();
  SizeRange large = default_large_range();
  std::vector<int> band_variables;  // empty: every variable
};

inline nlohmann::json range_json(const SizeRange& r) {
  return {{"lo", r.lo}, {"hi", r.hi}, {"lo_closed", r.lo_closed}, {"hi_closed", r.hi_closed}};
}

/// Writes peaks.csv, bands.csv, activeness.csv and tables.json into `dir`.
/// Returns the written file names.
inline std::vector<std::string> write_tables(const std::filesystem::path& dir, const GirfFile& f,
                                             const TableOptions& opt) {
  using detail::fmt;
  const GirfResult& g = f.result;
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  std::string peaks = "variable,sigma,statistic,value\n";
  for (const auto& row : peak_table(g, opt.flip_benign)) {
    const std::string prefix = f.variables[row.variable].name + "," + fmt(row.sigma) + ",";
    peaks += prefix + "peak_value," + fmt(row.peak_value) + "\n";
    peaks += prefix + "peak_h," + std::to_string(row.peak_h) + "\n";
    peaks += prefix + "p16," + fmt(row.p16) + "\n";
    peaks += prefix + "p50," + fmt(row.p50) + "\n";
    peaks += prefix + "p84," + fmt(row.p84) + "\n";
  }
  detail::write_text(dir / "peaks.csv", peaks);
  written.push_back("peaks.csv");

  std::vector<int> vars = opt.band_variables;
  if (vars.empty())
    for (int m = 0; m < g.M; ++m) vars.push_back(m);
  std::map<int, std::string> date_of;
  for (int o = 0; o < g.n_origins; ++o)
    date_of[g.origins[o]] = o < static_cast<int>(f.origin_dates.size()) ? f.origin_dates[o].str() : "";

  std::string bands = "variable,origin,date,regime,sign,statistic,value\n";
  std::string active = "variable,origin,date,sign,value\n";
  nlohmann::json skipped = nlohmann::json::array();
  for (int m : vars) {
    for (ShockSign sign : {ShockSign::adverse, ShockSign::benign}) {
      std::vector<BandSummary> b;
      try {
        b = size_bands(g, m, sign, opt.small, opt.large);
      } catch (const std::invalid_argument& e) {
        skipped.push_back({{"variable", f.variables[m].name}, {"sign", to_string(sign)}, {"reason", e.what()}});
        continue;
      }
      for (const auto& row : b) {
        const std::string prefix = f.variables[m].name + "," + std::to_string(row.origin) + "," + date_of[row.origin] +
                                   "," + to_string(row.regime) + "," + to_string(row.sign) + ",";
        bands += prefix + "mean_peak," + fmt(row.mean_peak) + "\n";
        bands += prefix + "min_peak," + fmt(row.min_peak) + "\n";
        bands += prefix + "max_peak," + fmt(row.max_peak) + "\n";
      }
      for (const auto& a : activeness(b))
        active += f.variables[m].name + "," + std::to_string(a.origin) + "," + date_of[a.origin] + "," +
                  to_string(a.sign) + "," + fmt(a.value) + "\n";
    }
  }
  detail::write_text(dir / "bands.csv", bands);
  detail::write_text(dir / "activeness.csv", active);
  written.push_back("bands.csv");
  written.push_back("activeness.csv");

  nlohmann::json manifest = {
      {"model", f.kind},
      {"shock_variable", f.variables.at(g.shock_index).name},
      {"units", "transformed series units"},
      {"flip_benign", opt.flip_benign},
      {"small_range", range_json(opt.small)},
      {"large_range", range_json(opt.large)},
      {"peak_definition", "signed entry of largest absolute value, earliest horizon on ties"},
      {"peak_value_source", "peak of the pointwise posterior median of the time-averaged path"},
      {"percentile_source", "type-7 quantiles over draws of each draw's time-averaged peak"},
      {"band_source", "per origin, peaks of the pointwise posterior-median path, envelope over sigma only"},
      {"activeness", "max minus min peak over all sigmas of one sign, per origin"},
      {"files",
       {{"peaks.csv", "variable,sigma,statistic,value"},
        {"bands.csv", "variable,origin,date,regime,sign,statistic,value"},
        {"activeness.csv", "variable,origin,date,sign,value"}}},
      {"skipped_bands", skipped}};
  detail::write_text(dir / "tables.json", manifest.dump(2) + "\n");
  written.push_back("tables.json");
  return written;
}

}  // namespace vastvar
