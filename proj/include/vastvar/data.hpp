#pragma once

#include "vastvar/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <compare>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace vastvar {

enum class Country { US, EA, UK, GLOBAL };
enum class Transform { level, log, log_diff };
enum class Block { macro, policy_rate, ebp, long_yield, equity, fx };

NLOHMANN_JSON_SERIALIZE_ENUM(Country, {{Country::US, "US"}, {Country::EA, "EA"}, {Country::UK, "UK"}, {Country::GLOBAL, "GLOBAL"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Transform, {{Transform::level, "level"}, {Transform::log, "log"}, {Transform::log_diff, "log_diff"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Block, {{Block::macro, "macro"},
                                     {Block::policy_rate, "policy_rate"},
                                     {Block::ebp, "ebp"},
                                     {Block::long_yield, "long_yield"},
                                     {Block::equity, "equity"},
                                     {Block::fx, "fx"}})

struct VariableMeta {
  std::string name;
  Country country = Country::GLOBAL;
  Transform transform = Transform::level;
  Block block = Block::macro;
  int order_index = 0;
  double scale_sd = 1.0;    // sd of the transformed series before standardization
  double scale_mean = 0.0;  // mean of the transformed series before standardization
};

inline void to_json(nlohmann::json& j, const VariableMeta& m) {
  j = nlohmann::json{{"name", m.name},
                     {"country", m.country},
                     {"transform", m.transform},
                     {"block", m.block},
                     {"order_index", m.order_index},
                     {"scale_sd", m.scale_sd},
                     {"scale_mean", m.scale_mean}};
}

inline void from_json(const nlohmann::json& j, VariableMeta& m) {
  j.at("name").get_to(m.name);
  m.country = j.value("country", Country::GLOBAL);
  m.transform = j.value("transform", Transform::level);
  j.at("block").get_to(m.block);
  j.at("order_index").get_to(m.order_index);
  m.scale_sd = j.value("scale_sd", 1.0);
  m.scale_mean = j.value("scale_mean", 0.0);
}

inline bool is_slow_block(Block b) { return b == Block::macro || b == Block::policy_rate; }
inline bool is_fast_block(Block b) { return b == Block::long_yield || b == Block::equity || b == Block::fx; }

/// Checks the recursive-ordering contract: order indices form a permutation,
/// exactly one EBP variable, slow blocks before it and fast blocks after.
inline void validate_schema(const std::vector<VariableMeta>& meta) {
  const int M = static_cast<int>(meta.size());
  if (M == 0) throw LoadError("schema is empty");
  std::vector<int> seen(M, 0);
  int ebp_order = -1;
  std::set<std::string> names;
  for (const auto& v : meta) {
    if (v.order_index < 0 || v.order_index >= M || seen[v.order_index]++)
      throw LoadError("order_index values must be a permutation of 0..M-1 (variable '" + v.name + "')");
    if (!names.insert(v.name).second) throw LoadError("duplicate variable name '" + v.name + "'");
    if (v.block == Block::ebp) {
      if (ebp_order >= 0) throw LoadError("schema declares more than one ebp variable");
      ebp_order = v.order_index;
    }
  }
  if (ebp_order < 0) throw LoadError("schema declares no ebp variable");
  for (const auto& v : meta) {
    if (is_slow_block(v.block) && v.order_index >= ebp_order)
      throw LoadError("variable '" + v.name + "' is slow-moving but ordered after the ebp variable");
    if (is_fast_block(v.block) && v.order_index <= ebp_order)
      throw LoadError("variable '" + v.name + "' is fast-moving but ordered before the ebp variable");
  }
}

inline std::vector<VariableMeta> parse_schema(const nlohmann::json& j) {
  const auto& arr = j.is_object() ? j.at("variables") : j;
  auto meta = arr.get<std::vector<VariableMeta>>();
  validate_schema(meta);
  return meta;
}

inline std::vector<VariableMeta> load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open schema file '" + path + "'");
  try {
    return parse_schema(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("schema '" + path + "': " + e.what());
  }
}

/// 18-variable US/EA/UK schema. Slow block (activity, inflation, shadow
/// rates), then the EBP, then yields, exchange rates and equity indices.
inline std::vector<VariableMeta> default_schema() {
  using C = Country;
  using T = Transform;
  using B = Block;
  std::vector<VariableMeta> v = {
      {"ip_us", C::US, T::log, B::macro, 0},           {"ip_ea", C::EA, T::log, B::macro, 1},
      {"ip_uk", C::UK, T::log, B::macro, 2},           {"cpi_us", C::US, T::log_diff, B::macro, 3},
      {"cpi_ea", C::EA, T::log_diff, B::macro, 4},     {"cpi_uk", C::UK, T::log_diff, B::macro, 5},
      {"shadow_us", C::US, T::level, B::policy_rate, 6}, {"shadow_ea", C::EA, T::level, B::policy_rate, 7},
      {"shadow_uk", C::UK, T::level, B::policy_rate, 8}, {"ebp_us", C::US, T::level, B::ebp, 9},
      {"y10_us", C::US, T::level, B::long_yield, 10},  {"y10_ea", C::EA, T::level, B::long_yield, 11},
      {"y10_uk", C::UK, T::level, B::long_yield, 12},  {"eurusd", C::EA, T::log, B::fx, 13},
      {"gbpusd", C::UK, T::log, B::fx, 14},            {"spx_us", C::US, T::log, B::equity, 15},
      {"stoxx50_ea", C::EA, T::log, B::equity, 16},    {"ftse_uk", C::UK, T::log, B::equity, 17},
  };
  return v;
}

struct YearMonth {
  int year = 0;
  int month = 1;

  auto operator<=>(const YearMonth&) const = default;

  static std::optional<YearMonth> parse(std::string_view s) {
    if (s.size() != 7 || s[4] != '-') return std::nullopt;
    YearMonth ym;
    auto r1 = std::from_chars(s.data(), s.data() + 4, ym.year);
    auto r2 = std::from_chars(s.data() + 5, s.data() + 7, ym.month);
    if (r1.ec != std::errc{} || r1.ptr != s.data() + 4 || r2.ec != std::errc{} || r2.ptr != s.data() + 7)
      return std::nullopt;
    if (ym.month < 1 || ym.month > 12) return std::nullopt;
    return ym;
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }
};

/// Untransformed series aligned on dates; columns follow `meta` order.
struct RawTable {
  std::vector<YearMonth> dates;
  std::vector<VariableMeta> meta;
  Matrix values;
};

struct PanelDataset {
  std::vector<YearMonth> dates;
  Matrix values;  // T x M, standardized
  std::vector<VariableMeta> meta;

  int T() const { return static_cast<int>(values.rows()); }
  int M() const { return static_cast<int>(values.cols()); }

  int ebp_index() const {
    for (int m = 0; m < M(); ++m)
      if (meta[m].block == Block::ebp) return m;
    return -1;
  }

  Vector scale_sd() const {
    Vector s(M());
    for (int m = 0; m < M(); ++m) s(m) = meta[m].scale_sd;
    return s;
  }

  /// Column m in transformed (pre-standardization) units.
  Vector destandardize(int m) const {
    return (values.col(m).array() * meta[m].scale_sd + meta[m].scale_mean).matrix();
  }
};

struct LagLabel {
  int variable = 0;
  int lag = 1;
};

/// Row i holds X_t = (Y'_{t-1}, ..., Y'_{t-P}) and Y_t for t = i + P.
struct DesignMatrix {
  Matrix X;
  Matrix Y;
  int P = 1;
  std::vector<LagLabel> lag_labels;

  int T_eff() const { return static_cast<int>(Y.rows()); }
  int M() const { return static_cast<int>(Y.cols()); }
  int K() const { return static_cast<int>(X.cols()); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r\"");
    auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".") return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Reads a CSV with a `date` column (YYYY-MM) and one column per schema entry.
/// Rows are sorted ascending; leading and trailing rows with any missing value
/// are trimmed jointly, an interior gap is an error.
inline RawTable load_csv(std::istream& in, const std::vector<VariableMeta>& schema, const std::string& source = "csv") {
  std::string line;
  if (!std::getline(in, line)) throw LoadError(source + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const auto header = detail::split_csv_line(line);
  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw LoadError(source + ": column not found: '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t date_col = find_col("date");
  std::vector<std::size_t> cols;
  for (const auto& v : schema) cols.push_back(find_col(v.name));

  std::map<YearMonth, std::vector<std::optional<double>>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    const auto cell = [&](std::size_t c) { return c < cells.size() ? cells[c] : std::string{}; };
    auto date = YearMonth::parse(cell(date_col));
    if (!date) throw LoadError(source + ":" + std::to_string(lineno) + ": unparseable date '" + cell(date_col) + "'");
    std::vector<std::optional<double>> vals;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto raw = cell(cols[k]);
      auto v = detail::parse_number(raw);
      if (!v && !raw.empty() && raw != "NA" && raw != "NaN" && raw != "nan" && raw != ".")
        throw LoadError(source + ":" + std::to_string(lineno) + ": non-numeric value '" + raw + "' in column '" +
                        schema[k].name + "'");
      vals.push_back(v);
    }
    if (!rows.emplace(*date, std::move(vals)).second)
      throw LoadError(source + ": duplicate date " + date->str());
  }
  if (rows.empty()) throw LoadError(source + ": no data rows");

  std::vector<YearMonth> dates;
  std::vector<std::vector<std::optional<double>>> cells;
  for (auto& [d, v] : rows) {
    dates.push_back(d);
    cells.push_back(std::move(v));
  }
  auto complete = [&](std::size_t i) {
    return std::all_of(cells[i].begin(), cells[i].end(), [](const auto& o) { return o.has_value(); });
  };
  std::size_t first = 0, last = cells.size();
  while (first < last && !complete(first)) ++first;
  while (last > first && !complete(last - 1)) --last;
  if (first == last) throw LoadError(source + ": no row has all declared columns present");
  for (std::size_t i = first; i < last; ++i) {
    if (complete(i)) continue;
    for (std::size_t k = 0; k < schema.size(); ++k)
      if (!cells[i][k])
        throw LoadError(source + ": interior missing value for '" + schema[k].name + "' at " + dates[i].str());
  }

  for (std::size_t i = first + 1; i < last; ++i) {
    const YearMonth& a = dates[i - 1];
    const YearMonth next = a.month == 12 ? YearMonth{a.year + 1, 1} : YearMonth{a.year, a.month + 1};
    if (dates[i] != next)
      throw LoadError(source + ": interior missing month between " + a.str() + " and " + dates[i].str());
  }

  RawTable t;
  t.meta = schema;
  t.dates.assign(dates.begin() + first, dates.begin() + last);
  t.values.resize(static_cast<Eigen::Index>(last - first), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t i = first; i < last; ++i)
    for (std::size_t k = 0; k < schema.size(); ++k) t.values(i - first, k) = *cells[i][k];
  return t;
}

inline RawTable load_csv(const std::string& path, const std::vector<VariableMeta>& schema) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open data file '" + path + "'");
  return load_csv(in, schema, path);
}

/// Applies level / log / 100*diff(log) per variable. If any variable is
/// log-differenced the first observation is dropped for all columns.
inline RawTable transform_series(const RawTable& raw) {
  validate_schema(raw.meta);
  const int M = static_cast<int>(raw.meta.size());
  const int T_raw = static_cast<int>(raw.values.rows());
  const bool any_diff = std::any_of(raw.meta.begin(), raw.meta.end(),
                                    [](const VariableMeta& v) { return v.transform == Transform::log_diff; });
  const int drop = any_diff ? 1 : 0;
  const int T = T_raw - drop;
  if (T < 1) throw LoadError("no observations left after transformation");
  RawTable out;
  out.meta = raw.meta;
  out.dates.assign(raw.dates.begin() + drop, raw.dates.end());
  out.values.resize(T, M);
  for (int m = 0; m < M; ++m) {
    const VariableMeta& meta = raw.meta[m];
    if (meta.transform != Transform::level) {
      for (int t = 0; t < T_raw; ++t)
        if (!(raw.values(t, m) > 0.0))
          throw LoadError("nonpositive value " + std::to_string(raw.values(t, m)) + " for log-transformed variable '" +
                          meta.name + "' at " + raw.dates[t].str());
    }
    for (int t = 0; t < T; ++t) {
      const double v = raw.values(t + drop, m);
      switch (meta.transform) {
        case Transform::level: out.values(t, m) = v; break;
        case Transform::log: out.values(t, m) = std::log(v); break;
        case Transform::log_diff: out.values(t, m) = 100.0 * (std::log(v) - std::log(raw.values(t + drop - 1, m))); break;
      }
    }
  }
  return out;
}

/// Transforms, reorders columns by order_index and standardizes each column
/// (sample sd, n-1 denominator), recording scale_mean / scale_sd.
inline PanelDataset transform_and_standardize(const RawTable& raw) {
  const RawTable tr = transform_series(raw);
  const int M = static_cast<int>(tr.meta.size());
  const int T = static_cast<int>(tr.values.rows());
  if (T < 2) throw LoadError("need at least two observations after transformation");

  std::vector<int> perm(M);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return tr.meta[a].order_index < tr.meta[b].order_index; });

  PanelDataset out;
  out.dates = tr.dates;
  out.values.resize(T, M);
  for (int dst = 0; dst < M; ++dst) {
    const int src = perm[dst];
    VariableMeta meta = tr.meta[src];
    const auto x = tr.values.col(src);
    const double mean = x.mean();
    const double sd = std::sqrt((x.array() - mean).square().sum() / (T - 1));
    if (!(sd > 0.0) || !std::isfinite(sd))
      throw LoadError("variable '" + meta.name + "' has zero variance after transformation; cannot standardize");
    meta.scale_mean = mean;
    meta.scale_sd = sd;
    out.values.col(dst) = ((x.array() - mean) / sd).matrix();
    out.meta.push_back(std::move(meta));
  }
  return out;
}

/// Builds the lag-stacked design from a T x M matrix.
inline DesignMatrix build_design(const Matrix& values, int P, const std::vector<std::string>& names = {}) {
  const int T = static_cast<int>(values.rows());
  const int M = static_cast<int>(values.cols());
  if (P < 1) throw std::invalid_argument("lag order P must be at least 1");
  if (T <= P) throw LoadError("sample too short: T = " + std::to_string(T) + " must exceed P = " + std::to_string(P));
  DesignMatrix d;
  d.P = P;
  const int rows = T - P;
  d.X.resize(rows, M * P);
  d.Y = values.bottomRows(rows);
  for (int p = 1; p <= P; ++p) {
    d.X.middleCols((p - 1) * M, M) = values.middleRows(P - p, rows);
    for (int m = 0; m < M; ++m) d.lag_labels.push_back({m, p});
  }
  for (int k = 0; k < M * P; ++k) {
    if (d.X.col(k).maxCoeff() == d.X.col(k).minCoeff()) {
      const auto& l = d.lag_labels[k];
      const std::string name = l.variable < static_cast<int>(names.size()) ? names[l.variable] : std::to_string(l.variable);
      throw LoadError("constant design column for variable '" + name + "' at lag " + std::to_string(l.lag));
    }
  }
  return d;
}

inline DesignMatrix build_design(const PanelDataset& data, int P) {
  std::vector<std::string> names;
  for (const auto& m : data.meta) names.push_back(m.name);
  return build_design(data.values, P, names);
}

/// Lag state X_t for time index t (needs t >= P) from a T x M data matrix.
inline Vector lag_state(const Matrix& values, int t, int P) {
  const int M = static_cast<int>(values.cols());
  Vector x(M * P);
  for (int p = 1; p <= P; ++p) x.segment((p - 1) * M, M) = values.row(t - p).transpose();
  return x;
}

}  // namespace vastvar
