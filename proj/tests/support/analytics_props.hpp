#pragma once

// Randomized property checks for the response summaries. Each case builds a
// small GirfResult with integer-valued responses (so ties are frequent) and
// compares the summaries against brute-force definitions.

#include "vastvar/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace props {

inline vastvar::GirfResult random_girf(std::mt19937_64& gen) {
  using vastvar::GirfResult;
  std::uniform_int_distribution<int> small(1, 4), horizons(1, 8), val(-4, 4), coin(0, 1);
  GirfResult g;
  g.n_draws = small(gen);
  g.n_origins = small(gen);
  g.n_h = horizons(gen);
  g.M = std::uniform_int_distribution<int>(1, 3)(gen);
  g.shock_index = 0;
  for (int o = 0; o < g.n_origins; ++o) g.origins.push_back(12 + 3 * o);
  // at least one size per sign and regime, plus a random subset of the grid
  g.sigmas = {-6.0, -0.5, 0.5, 6.0};
  for (double s : vastvar::standard_sigma_grid())
    if (coin(gen) && std::find(g.sigmas.begin(), g.sigmas.end(), s) == g.sigmas.end()) g.sigmas.push_back(s);
  std::sort(g.sigmas.begin(), g.sigmas.end());
  g.n_sigma = static_cast<int>(g.sigmas.size());
  g.quantile_levels = {0.16, 0.5, 0.84};
  g.allocate();
  const bool halves = coin(gen);
  for (double& r : g.responses) r = halves ? 0.5 * val(gen) : val(gen);
  g.aggregate();
  return g;
}

/// Brute-force peak: first index attaining the maximal absolute value.
inline vastvar::Peak brute_peak(const std::vector<double>& p) {
  double best = -1.0;
  vastvar::Peak out;
  for (std::size_t h = 0; h < p.size(); ++h)
    if (std::abs(p[h]) > best) {
      best = std::abs(p[h]);
      out = {p[h], static_cast<int>(h)};
    }
  return out;
}

/// Runs `cases` randomized cases; returns a description of every violation.
inline std::vector<std::string> check(int cases, std::uint64_t seed) {
  using namespace vastvar;
  std::mt19937_64 gen(seed);
  std::vector<std::string> bad;
  auto fail = [&](int c, const std::string& what) {
    std::ostringstream os;
    os << "case " << c << ": " << what;
    bad.push_back(os.str());
  };
  std::uniform_int_distribution<int> len(1, 12), val(-3, 3);
  for (int c = 0; c < cases; ++c) {
    // tie rule on a raw path
    std::vector<double> p(len(gen));
    for (double& x : p) x = val(gen);
    const Peak a = peak_response(std::span<const double>(p)), b = brute_peak(p);
    if (a.value != b.value || a.h != b.h) fail(c, "peak_response tie rule");

    const GirfResult g = random_girf(gen);
    const auto plain = peak_table(g, false);
    const auto flipped = peak_table(g, true);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      const auto& x = plain[i];
      const auto& y = flipped[i];
      if (x.peak_h != y.peak_h || std::abs(x.peak_value) != std::abs(y.peak_value)) fail(c, "flip changed the peak");
      if (!(x.p16 <= x.p50 && x.p50 <= x.p84) || !(y.p16 <= y.p50 && y.p50 <= y.p84)) fail(c, "percentile order");
      if (x.sigma < 0.0 && (y.p16 != -x.p84 || y.p84 != -x.p16 || y.p50 != -x.p50)) fail(c, "flip of percentiles");
      if (x.sigma > 0.0 && (y.p16 != x.p16 || y.p84 != x.p84 || y.peak_value != x.peak_value)) fail(c, "adverse row flipped");
      const Vector med = median_avg_path(g, static_cast<int>(i % g.n_sigma), x.variable);
      for (int h = 0; h < g.n_h; ++h)
        if (std::abs(med(h)) > std::abs(x.peak_value)) fail(c, "peak not maximal");
    }
    for (ShockSign sign : {ShockSign::adverse, ShockSign::benign})
      for (int m = 0; m < g.M; ++m) {
        const auto bands = size_bands(g, m, sign);
        for (const auto& band : bands)
          if (!(band.min_peak <= band.mean_peak && band.mean_peak <= band.max_peak)) fail(c, "band containment");
        const auto act = activeness(bands);
        if (static_cast<int>(act.size()) != g.n_origins) fail(c, "activeness size");
        for (int o = 0; o < static_cast<int>(act.size()); ++o) {
          double lo = INFINITY, hi = -INFINITY;
          for (int s = 0; s < g.n_sigma; ++s) {
            if (!has_sign(g.sigmas[s], sign)) continue;
            const double pk = peak_response(median_origin_path(g, o, s, m)).value;
            lo = std::min(lo, pk);
            hi = std::max(hi, pk);
          }
          if (act[o].value != hi - lo || act[o].origin != g.origins[o]) fail(c, "activeness != max - min");
        }
      }
  }
  return bad;
}

}  // namespace props
