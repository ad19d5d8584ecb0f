#pragma once

// Summaries of GIRF output: peak responses with percentile bars, size-band
// envelopes per origin and the activeness spread.

#include "vastvar/common.hpp"
#include "vastvar/girf.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace vastvar {

struct Peak {
  double value = 0.0;
  int h = 0;
};

/// Entry of largest absolute value, signed; ties go to the smallest horizon.
inline Peak peak_response(std::span<const double> path) {
  if (path.empty()) throw std::invalid_argument("empty response path");
  Peak p{path[0], 0};
  for (std::size_t h = 1; h < path.size(); ++h)
    if (std::abs(path[h]) > std::abs(p.value)) p = {path[h], static_cast<int>(h)};
  return p;
}

inline Peak peak_response(const Vector& path) { return peak_response(std::span<const double>(path.data(), path.size())); }

struct PeakSummary {
  int variable = 0;
  double sigma = 0.0;
  double peak_value = 0.0;  // peak of the pointwise-median path
  int peak_h = 0;
  double p16 = 0.0;  // percentiles over draws of the per-draw peak
  double p50 = 0.0;
  double p84 = 0.0;
};

/// Pointwise posterior median over draws of the time-averaged path.
inline Vector median_avg_path(const GirfResult& g, int s, int m) {
  Vector out(g.n_h);
  std::vector<double> xs(g.n_draws);
  for (int h = 0; h < g.n_h; ++h) {
    for (int d = 0; d < g.n_draws; ++d) xs[d] = g.time_avg[g.avg_idx(d, s, h, m)];
    out(h) = quantile_type7(xs, 0.5);
  }
  return out;
}

/// Pointwise posterior median over draws of the path at one origin.
inline Vector median_origin_path(const GirfResult& g, int o, int s, int m) {
  Vector out(g.n_h);
  std::vector<double> xs(g.n_draws);
  for (int h = 0; h < g.n_h; ++h) {
    for (int d = 0; d < g.n_draws; ++d) xs[d] = g.response(d, o, s, h, m);
    out(h) = quantile_type7(xs, 0.5);
  }
  return out;
}

/// One row per (variable, sigma). With flip_benign, rows with sigma < 0 are
/// negated for display (percentile bounds swap so p16 <= p84 still holds).
inline std::vector<PeakSummary> peak_table(const GirfResult& g, bool flip_benign) {
  if (g.time_avg.empty()) throw std::invalid_argument("GIRF result has no time averages");
  std::vector<PeakSummary> rows;
  std::vector<double> peaks(g.n_draws);
  Vector path(g.n_h);
  for (int m = 0; m < g.M; ++m)
    for (int s = 0; s < g.n_sigma; ++s) {
      for (int d = 0; d < g.n_draws; ++d) {
        for (int h = 0; h < g.n_h; ++h) path(h) = g.time_avg[g.avg_idx(d, s, h, m)];
        peaks[d] = peak_response(path).value;
      }
      const Peak med = peak_response(median_avg_path(g, s, m));
      PeakSummary row{m, g.sigmas[s], med.value, med.h, quantile_type7(peaks, 0.16), quantile_type7(peaks, 0.50),
                      quantile_type7(peaks, 0.84)};
      if (flip_benign && row.sigma < 0.0) {
        row.peak_value = -row.peak_value;
        row.p50 = -row.p50;
        const double lo = -row.p84;
        row.p84 = -row.p16;
        row.p16 = lo;
      }
      rows.push_back(row);
    }
  return rows;
}

enum class Regime { small, large };
enum class ShockSign { adverse, benign };

inline const char* to_string(Regime r) { return r == Regime::small ? "small" : "large"; }
inline const char* to_string(ShockSign s) { return s == ShockSign::adverse ? "adverse" : "benign"; }

/// Interval of shock magnitudes |sigma|.
struct SizeRange {
  double lo = 0.1;
  double hi = 1.5;
  bool lo_closed = true;
  bool hi_closed = true;

  bool contains(double a) const {
    return (lo_closed ? a >= lo : a > lo) && (hi_closed ? a <= hi : a < hi);
  }
};

inline SizeRange default_small_range() { return {0.1, 1.5, true, true}; }
inline SizeRange default_large_range() { return {1.5, 6.0, false, true}; }

struct BandSummary {
  int origin = 0;
  Regime regime = Regime::small;
  ShockSign sign = ShockSign::adverse;
  double mean_peak = 0.0;
  double min_peak = 0.0;
  double max_peak = 0.0;
};

inline bool has_sign(double sigma, ShockSign sign) { return sign == ShockSign::adverse ? sigma > 0.0 : sigma < 0.0; }

/// Per origin and regime: mean, min and max over the regime's sigmas of the
/// peak of the posterior-median response path of variable m.
inline std::vector<BandSummary> size_bands(const GirfResult& g, int m, ShockSign sign,
                                           SizeRange small = default_small_range(),
                                           SizeRange large = default_large_range()) {
  if (m < 0 || m >= g.M) throw std::out_of_range("variable index out of range");
  std::vector<int> in_small, in_large;
  for (int s = 0; s < g.n_sigma; ++s) {
    if (!has_sign(g.sigmas[s], sign)) continue;
    const double a = std::abs(g.sigmas[s]);
    if (small.contains(a)) in_small.push_back(s);
    if (large.contains(a)) in_large.push_back(s);
  }
  if (in_small.empty() || in_large.empty())
    throw std::invalid_argument(std::string("sigma grid has no ") + to_string(sign) + " shocks in the " +
                                (in_small.empty() ? "small" : "large") + " regime");
  std::vector<BandSummary> out;
  for (int o = 0; o < g.n_origins; ++o) {
    std::vector<double> peak_by_sigma(g.n_sigma, 0.0);
    for (const auto* set : {&in_small, &in_large})
      for (int s : *set) peak_by_sigma[s] = peak_response(median_origin_path(g, o, s, m)).value;
    for (Regime regime : {Regime::small, Regime::large}) {
      const auto& set = regime == Regime::small ? in_small : in_large;
      std::vector<double> vals;
      for (int s : set) vals.push_back(peak_by_sigma[s]);
      BandSummary b{g.origins[o], regime, sign, pairwise_sum(vals) / static_cast<double>(vals.size()),
                    *std::min_element(vals.begin(), vals.end()), *std::max_element(vals.begin(), vals.end())};
      b.mean_peak = std::clamp(b.mean_peak, b.min_peak, b.max_peak);
      out.push_back(b);
    }
  }
  return out;
}

struct ActivenessPoint {
  int origin = 0;
  ShockSign sign = ShockSign::adverse;
  double value = 0.0;
};

/// Per (origin, sign): max peak minus min peak over the union of regimes.
inline std::vector<ActivenessPoint> activeness(const std::vector<BandSummary>& bands) {
  std::map<std::pair<int, int>, std::pair<double, double>> range;
  std::vector<std::pair<int, int>> order;
  for (const auto& b : bands) {
    const std::pair key{b.origin, static_cast<int>(b.sign)};
    auto [it, fresh] = range.try_emplace(key, b.min_peak, b.max_peak);
    if (fresh) {
      order.push_back(key);
    } else {
      it->second.first = std::min(it->second.first, b.min_peak);
      it->second.second = std::max(it->second.second, b.max_peak);
    }
  }
  std::vector<ActivenessPoint> out;
  for (const auto& key : order) {
    const auto& [lo, hi] = range.at(key);
    out.push_back({key.first, static_cast<ShockSign>(key.second), hi - lo});
  }
  return out;
}

}  // namespace vastvar
