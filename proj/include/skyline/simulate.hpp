#ifndef SKYLINE_SIMULATE_HPP_
#define SKYLINE_SIMULATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "skyline/bivariate.hpp"
#include "skyline/catalog.hpp"
#include "skyline/error.hpp"
#include "skyline/gpd.hpp"
#include "skyline/parallel.hpp"
#include "skyline/rng.hpp"
#include "skyline/trend.hpp"

namespace skyline {

/// Deterministic expected total over [from, to] times the extreme share, rounded.
inline long long expected_extreme_count(const PoissonTrendFit& trend, int from, int to, double frac_extreme) {
  if (from > to) throw argument_error("expected_extreme_count: from > to");
  if (!(frac_extreme > 0.0 && frac_extreme <= 1.0))
    throw argument_error("expected_extreme_count: fraction must lie in (0, 1]");
  double cum = 0.0;
  for (int t = from; t <= to; ++t) cum += trend.expected(t);
  return std::llround(cum * frac_extreme);
}

/// P(max of n iid draws > z) = 1 - F(z)^n.
inline double max_exceedance_analytic(const GpdParams& p, std::size_t n, double z) {
  if (n < 1) throw argument_error("max_exceedance_analytic: n must be at least 1");
  const double s = gpd_eval(p, z, GpdKind::survival);
  if (s >= 1.0) return 1.0;
  return -std::expm1(static_cast<double>(n) * std::log1p(-s));
}

/// Exact p-quantile of the maximum of n iid draws, gpd_quantile(p^(1/n)),
/// evaluated without forming p^(1/n) so large n keeps its precision.
inline double max_quantile_analytic(const GpdParams& params, std::size_t n, double p) {
  detail::check_sigma(params);
  if (n < 1) throw argument_error("max_quantile_analytic: n must be at least 1");
  if (!(p > 0.0 && p < 1.0)) throw argument_error("max_quantile_analytic: p must lie in (0, 1)");
  const double tail = -std::expm1(std::log(p) / static_cast<double>(n));  // 1 - p^(1/n)
  const double l = -std::log(tail);
  if (std::abs(params.xi) < kXiZero) return params.mu + params.sigma * l;
  return params.mu + params.sigma * std::expm1(params.xi * l) / params.xi;
}

struct MaxSimSpec {
  std::size_t n_buildings = 8400;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  // Replicate r uses stream replicate_offset + r, so runs can be split.
  std::uint64_t replicate_offset = 0;
  // Draw the building count per replicate as Poisson(n_buildings).
  bool poisson_n = false;
  std::vector<double> percentiles{2.5, 5.0, 25.0, 50.0, 75.0, 95.0, 97.5};
  unsigned workers = 1;

  void validate() const {
    if (n_buildings < 1) throw argument_error("simulate_max: n_buildings must be at least 1");
    if (replicates < 1) throw argument_error("simulate_max: replicates must be at least 1");
    for (double q : percentiles)
      if (!(q > 0.0 && q < 100.0)) throw argument_error("simulate_max: percentiles must lie in (0, 100)");
  }
};

struct ExceedancePoint {
  double height = 0.0;
  double probability = 0.0;
  double mc_se = 0.0;
};

struct PercentilePoint {
  double percentile = 0.0;
  double value = 0.0;
};

struct MaxSimResult {
  std::vector<double> maxima;               // replicate order
  std::vector<PercentilePoint> quantiles;   // ascending percentile
  std::vector<ExceedancePoint> exceedance;  // landmark order
};

inline std::vector<double> default_landmarks() { return {828.0, 1000.0, 1609.34}; }

inline constexpr std::uint64_t kMaxSimStream = 0x6d6178ULL;

namespace detail {

// Linear interpolation between order statistics (the usual "type 7").
inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/**
 * Monte Carlo law of the tallest of n_buildings GPD heights.
 *
 * The quantile function is nondecreasing, so the maximum height is taken as
 * the quantile of the largest uniform; that is the same number the
 * draw-every-height loop would keep. With poisson_n an empty replicate
 * returns mu, the lower end of the support.
 */
inline MaxSimResult simulate_max(const GpdParams& params, const MaxSimSpec& spec,
                                 const std::vector<double>& landmarks = default_landmarks()) {
  detail::check_sigma(params);
  spec.validate();
  MaxSimResult out;
  out.maxima.resize(spec.replicates);
  parallel_for(spec.replicates, spec.workers, [&](std::size_t r) {
    StreamRng rng(spec.seed, kMaxSimStream, spec.replicate_offset + r);
    std::size_t n = spec.n_buildings;
    if (spec.poisson_n) n = static_cast<std::size_t>(poisson_draw(rng, static_cast<double>(spec.n_buildings)));
    if (n == 0) {
      out.maxima[r] = params.mu;
      return;
    }
    double top = 0.0;
    for (std::size_t i = 0; i < n; ++i) top = std::max(top, rng.uniform());
    out.maxima[r] = gpd_quantile(params, top);
  });

  std::vector<double> sorted = out.maxima;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> pct = spec.percentiles;
  std::sort(pct.begin(), pct.end());
  pct.erase(std::unique(pct.begin(), pct.end()), pct.end());
  for (double q : pct) out.quantiles.push_back({q, detail::sorted_quantile(sorted, q / 100.0)});

  const double reps = static_cast<double>(spec.replicates);
  for (double z : landmarks) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), z);
    const double prob = static_cast<double>(above) / reps;
    out.exceedance.push_back({z, prob, std::sqrt(prob * (1.0 - prob) / reps)});
  }
  return out;
}

inline constexpr std::uint64_t kSynthCountStream = 0x636e74ULL;

/**
 * Synthetic catalog for recovery tests.
 *
 * Year t gets Poisson(exp(alpha + beta t)) buildings; each building draws a
 * height from margin_x and floors from the model conditional given height,
 * unscaled and rounded to an integer >= 1. Cities rotate through `cities`
 * in catalog order. Counts depend on (seed, year) and building k on
 * (seed, k) only, so the worker count does not matter.
 */
inline Catalog synth_catalog(double alpha, double beta, const BivParams& p, const CensoringSpec& spec, int from,
                             int to, const std::vector<std::string>& cities, std::uint64_t seed,
                             unsigned workers = 1) {
  if (from > to) throw argument_error("synth_catalog: from > to");
  if (cities.empty()) throw argument_error("synth_catalog: need at least one city");
  detail::check_sigma(p.margin_x);
  detail::check_sigma(p.margin_y);
  std::vector<long long> counts;
  std::size_t total = 0;
  for (int t = from; t <= to; ++t) {
    StreamRng rng(seed, kSynthCountStream, static_cast<std::uint64_t>(t));
    counts.push_back(poisson_draw(rng, std::exp(alpha + beta * t)));
    total += static_cast<std::size_t>(counts.back());
  }
  const auto draws = sample_bivariate(p, total, seed, spec.floor_scale, workers);
  std::vector<BuildingRecord> recs;
  recs.reserve(total);
  std::size_t k = 0;
  for (int t = from; t <= to; ++t) {
    const long long c = counts[static_cast<std::size_t>(t - from)];
    for (long long j = 0; j < c; ++j, ++k) {
      const int floors = static_cast<int>(std::max(1.0, std::round(draws[k].floors)));
      recs.push_back({std::to_string(t) + "-" + std::to_string(j), std::nullopt, cities[k % cities.size()],
                      draws[k].height, floors, t});
    }
  }
  return Catalog(std::move(recs), "synthetic");
}

}  // namespace skyline

#endif  // SKYLINE_SIMULATE_HPP_
