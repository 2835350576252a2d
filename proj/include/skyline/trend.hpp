#ifndef SKYLINE_TREND_HPP_
#define SKYLINE_TREND_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "skyline/catalog.hpp"
#include "skyline/error.hpp"
#include "skyline/parallel.hpp"
#include "skyline/rng.hpp"

namespace skyline {

/// Log-linear Poisson model for yearly completions: E[N_t] = exp(alpha + beta t).
struct PoissonTrendFit {
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();  // of (alpha, beta)
  double loglik = 0.0;                            // includes the -log(n!) terms
  int year_from = 0;
  int year_to = 0;
  // Years are centred at `center` for fitting and simulation:
  // E[N_t] = exp(alpha_centered + beta (t - center)).
  double center = 0.0;
  double alpha_centered = 0.0;
  Eigen::Matrix2d cov_centered = Eigen::Matrix2d::Zero();
  int iterations = 0;

  double expected(double year) const { return std::exp(alpha_centered + beta * (year - center)); }
};

/**
 * Maximum-likelihood fit by Newton's method with step halving.
 * `cov` is the inverse of the (analytic) observed information.
 */
inline PoissonTrendFit fit_poisson_trend(std::span<const YearCount> counts) {
  if (counts.empty()) throw data_error("fit_poisson_trend: no counts");
  int lo = counts.front().year, hi = counts.front().year;
  long long total = 0;
  for (const auto& c : counts) {
    if (c.count < 0) throw argument_error("fit_poisson_trend: negative count");
    lo = std::min(lo, c.year);
    hi = std::max(hi, c.year);
    total += c.count;
  }
  if (lo == hi) throw data_error("fit_poisson_trend: need at least two distinct years");
  if (total == 0) throw data_error("fit_poisson_trend: all counts are zero");

  const double center = 0.5 * (static_cast<double>(lo) + static_cast<double>(hi));
  auto loglik = [&](const Eigen::Vector2d& b) {
    double s = 0.0;
    for (const auto& c : counts) {
      const double eta = b[0] + b[1] * (c.year - center);
      s += static_cast<double>(c.count) * eta - std::exp(eta);
    }
    return s;
  };
  Eigen::Vector2d b(std::log(static_cast<double>(total) / static_cast<double>(counts.size())), 0.0);
  double ll = loglik(b);
  Eigen::Matrix2d H;
  int it = 0;
  bool done = false;
  for (; it < 200 && !done; ++it) {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    H.setZero();
    for (const auto& c : counts) {
      const Eigen::Vector2d x(1.0, c.year - center);
      const double mu = std::exp(b.dot(x));
      g += (static_cast<double>(c.count) - mu) * x;
      H += mu * x * x.transpose();
    }
    const Eigen::Vector2d step = H.ldlt().solve(g);
    if (!step.allFinite()) break;
    double t = 1.0;
    Eigen::Vector2d nb = b + step;
    double nll = loglik(nb);
    while (!(std::isfinite(nll) && nll >= ll - 1e-12 * std::abs(ll)) && t > 1e-10) {
      t *= 0.5;
      nb = b + t * step;
      nll = loglik(nb);
    }
    if (!std::isfinite(nll)) break;
    done = (t * step).lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + b.lpNorm<Eigen::Infinity>());
    b = nb;
    ll = nll;
  }
  if (!done || !std::isfinite(b[1]) || std::abs(b[1]) > 50.0)
    throw optimization_error("fit_poisson_trend: Newton iterations did not converge");

  H.setZero();
  for (const auto& c : counts) {
    const Eigen::Vector2d x(1.0, c.year - center);
    H += std::exp(b.dot(x)) * x * x.transpose();
  }
  PoissonTrendFit f;
  f.center = center;
  f.alpha_centered = b[0];
  f.beta = b[1];
  f.alpha = b[0] - b[1] * center;
  f.cov_centered = H.inverse();
  f.cov_centered = 0.5 * (f.cov_centered + f.cov_centered.transpose()).eval();
  Eigen::Matrix2d J;
  J << 1.0, -center, 0.0, 1.0;
  f.cov = J * f.cov_centered * J.transpose();
  f.cov = 0.5 * (f.cov + f.cov.transpose()).eval();
  f.loglik = ll;
  for (const auto& c : counts) f.loglik -= std::lgamma(static_cast<double>(c.count) + 1.0);
  f.year_from = lo;
  f.year_to = hi;
  f.iterations = it;
  return f;
}

struct ForecastBand {
  int year = 0;
  double mean = 0.0;  // exp(alpha + beta t) at the point estimate
  long long lo95 = 0, hi95 = 0;
  long long lo50 = 0, hi50 = 0;
  double sim_mean = 0.0;  // mean and sd of the simulated counts
  double sim_sd = 0.0;
};

struct CumulativeForecast {
  double mean = 0.0;   // simulated mean of the total
  double se = 0.0;     // simulated sd of the total
  double mc_se = 0.0;  // Monte Carlo error of `mean`
};

namespace detail {

inline constexpr std::uint64_t kForecastStream = 0x666f7265ULL;

// Simulated counts, row-major [replicate][year]. Replicate r draws
// (alpha, beta) from the normal approximation, then Poisson counts, all from
// stream r.
inline std::vector<long long> simulate_counts(const PoissonTrendFit& fit, int from, int to, std::size_t reps,
                                              std::uint64_t seed, unsigned workers) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(fit.cov_centered);
  const Eigen::Vector2d lam = es.eigenvalues().cwiseMax(0.0);
  const Eigen::Matrix2d L = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
  const auto years = static_cast<std::size_t>(to - from + 1);
  std::vector<long long> out(reps * years);
  parallel_for(reps, workers, [&](std::size_t r) {
    StreamRng rng(seed, kForecastStream, r);
    const double z0 = rng.normal(), z1 = rng.normal();
    const Eigen::Vector2d p = Eigen::Vector2d(fit.alpha_centered, fit.beta) + L * Eigen::Vector2d(z0, z1);
    for (std::size_t k = 0; k < years; ++k) {
      const double t = static_cast<double>(from + static_cast<int>(k)) - fit.center;
      out[r * years + k] = poisson_draw(rng, std::exp(p[0] + p[1] * t));
    }
  });
  return out;
}

// Type-1 (inverse empirical cdf) quantile of sorted values.
inline long long empirical_quantile(const std::vector<long long>& sorted, double p) {
  const auto n = sorted.size();
  auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  idx = std::clamp<std::size_t>(idx, 1, n);
  return sorted[idx - 1];
}

}  // namespace detail

/**
 * Predictive bands for yearly counts over [from, to] by parametric
 * simulation. Bands are empirical 2.5/97.5 (and 25/75) percentiles; they are
 * widened to contain `mean` when the count distribution is too concentrated
 * near zero for the percentiles to straddle it.
 */
inline std::vector<ForecastBand> predict_counts(const PoissonTrendFit& fit, int from, int to, std::size_t reps,
                                                std::uint64_t seed, unsigned workers = 1) {
  if (reps < 100) throw argument_error("predict_counts: reps must be at least 100");
  if (from > to) throw argument_error("predict_counts: from > to");
  const auto sims = detail::simulate_counts(fit, from, to, reps, seed, workers);
  const auto years = static_cast<std::size_t>(to - from + 1);
  std::vector<ForecastBand> out;
  std::vector<long long> col(reps);
  for (std::size_t k = 0; k < years; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      col[r] = sims[r * years + k];
      s += static_cast<double>(col[r]);
    }
    const double m = s / static_cast<double>(reps);
    for (std::size_t r = 0; r < reps; ++r) s2 += (static_cast<double>(col[r]) - m) * (static_cast<double>(col[r]) - m);
    std::sort(col.begin(), col.end());
    ForecastBand b;
    b.year = from + static_cast<int>(k);
    b.mean = fit.expected(b.year);
    b.lo95 = detail::empirical_quantile(col, 0.025);
    b.hi95 = detail::empirical_quantile(col, 0.975);
    b.lo50 = detail::empirical_quantile(col, 0.25);
    b.hi50 = detail::empirical_quantile(col, 0.75);
    b.lo95 = std::min(b.lo95, static_cast<long long>(std::floor(b.mean)));
    b.hi95 = std::max(b.hi95, static_cast<long long>(std::ceil(b.mean)));
    b.sim_mean = m;
    b.sim_sd = std::sqrt(s2 / static_cast<double>(reps - 1));
    out.push_back(b);
  }
  return out;
}

/// Simulated mean and sd of the total count over [from, to].
inline CumulativeForecast cumulative_forecast(const PoissonTrendFit& fit, int from, int to, std::size_t reps,
                                              std::uint64_t seed, unsigned workers = 1) {
  if (from > to) throw argument_error("cumulative_forecast: from > to");
  if (reps < 2) throw argument_error("cumulative_forecast: reps must be at least 2");
  const auto sims = detail::simulate_counts(fit, from, to, reps, seed, workers);
  const auto years = static_cast<std::size_t>(to - from + 1);
  std::vector<double> totals(reps, 0.0);
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t k = 0; k < years; ++k) totals[r] += static_cast<double>(sims[r * years + k]);
  const double m = std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(reps);
  double s2 = 0.0;
  for (double t : totals) s2 += (t - m) * (t - m);
  const double sd = std::sqrt(s2 / static_cast<double>(reps - 1));
  return {m, sd, sd / std::sqrt(static_cast<double>(reps))};
}

struct BacktestResult {
  int start_year = 0;
  int cutoff = 0;
  int horizon_end = 0;
  double predicted_total = 0.0;  // sum of fitted means over [start_year, horizon_end]
  long long actual_total = 0;    // records completed over the same years
  double pct_error = 0.0;        // (predicted - actual) / actual
  PoissonTrendFit fit;
};

inline constexpr int kTrendStartYear = 1950;

/**
 * Fits the trend on counts from start_year through cutoff and compares the
 * deterministic extrapolated total through horizon_end with the catalog.
 */
inline BacktestResult backtest(const Catalog& catalog, int cutoff, int horizon_end,
                               int start_year = kTrendStartYear) {
  if (catalog.empty()) throw argument_error("backtest: empty catalog");
  const int first = catalog.records().front().year, last = catalog.records().back().year;
  if (cutoff < start_year || cutoff < first || cutoff > last)
    throw argument_error("backtest: cutoff " + std::to_string(cutoff) + " outside the data range [" +
                         std::to_string(std::max(first, start_year)) + ", " + std::to_string(last) + "]");
  if (horizon_end < cutoff) throw argument_error("backtest: horizon_end before cutoff");
  BacktestResult r;
  r.start_year = start_year;
  r.cutoff = cutoff;
  r.horizon_end = horizon_end;
  const auto train = counts_by_year(catalog, start_year, cutoff);
  r.fit = fit_poisson_trend(train);
  for (int t = start_year; t <= horizon_end; ++t) r.predicted_total += r.fit.expected(t);
  for (const auto& yc : counts_by_year(catalog, start_year, horizon_end)) r.actual_total += yc.count;
  if (r.actual_total == 0) throw data_error("backtest: no records in the comparison range");
  r.pct_error = (r.predicted_total - static_cast<double>(r.actual_total)) / static_cast<double>(r.actual_total);
  return r;
}

struct LadFit {
  double intercept = 0.0;
  double slope = 0.0;
  double objective = 0.0;  // sum of absolute residuals
  int iterations = 0;
};

/**
 * Least-absolute-deviations line by direct descent over lines through data
 * points (each step moves to the weighted-median slope of the pencil through
 * the current pivot). Starts from the least-squares line.
 */
inline LadFit lad_fit(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n == 0 || y.size() != n) throw argument_error("lad_fit: x and y must be non-empty and equal length");
  const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> xc(n);
  for (std::size_t i = 0; i < n; ++i) xc[i] = x[i] - xbar;

  auto objective = [&](std::size_t k, double b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(y[i] - y[k] - b * (xc[i] - xc[k]));
    return s;
  };

  LadFit out;
  if (std::all_of(xc.begin(), xc.end(), [&](double v) { return v == xc[0]; })) {
    std::vector<double> ys(y.begin(), y.end());
    std::nth_element(ys.begin(), ys.begin() + (n - 1) / 2, ys.end());
    out.intercept = ys[(n - 1) / 2];
    for (double v : y) out.objective += std::abs(v - out.intercept);
    return out;
  }

  // Least-squares start; pivot on the point closest to that line.
  double sxy = 0.0, sxx = 0.0;
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    sxy += xc[i] * (y[i] - ybar);
    sxx += xc[i] * xc[i];
  }
  double b = sxy / sxx;
  std::size_t k = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(y[i] - ybar - b * xc[i]) < std::abs(y[k] - ybar - b * xc[k])) k = i;
  double cur = objective(k, b);

  struct Slope {
    double s, w;
    std::size_t i;
  };
  std::vector<Slope> sw;
  // Best slope through pivot p: weighted median of slopes to the other points.
  auto pencil = [&](std::size_t p, double& best_b, std::size_t& partner) {
    sw.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = xc[i] - xc[p];
      if (dx == 0.0) continue;
      sw.push_back({(y[i] - y[p]) / dx, std::abs(dx), i});
      total += std::abs(dx);
    }
    std::sort(sw.begin(), sw.end(), [](const Slope& a, const Slope& c) { return a.s < c.s; });
    double acc = 0.0;
    const Slope* pick = &sw.back();
    for (const auto& e : sw) {
      acc += e.w;
      if (acc >= 0.5 * total) {
        pick = &e;
        break;
      }
    }
    best_b = pick->s;
    partner = pick->i;
    return objective(p, best_b);
  };

  const double tol = 1e-12;
  int it = 0;
  for (; it < 10000; ++it) {
    double nb = b;
    std::size_t partner = k;
    double val = pencil(k, nb, partner);
    if (val < cur - tol * (1.0 + cur)) {
      cur = val;
      b = nb;
      k = partner;
      continue;
    }
    // No descent in this pencil. Other points on the line span further edges.
    bool moved = false;
    for (std::size_t i = 0; i < n && !moved; ++i) {
      if (i == k) continue;
      const double res = y[i] - y[k] - b * (xc[i] - xc[k]);
      if (std::abs(res) > 1e-12 * (1.0 + std::abs(y[i]))) continue;
      double ib = b;
      std::size_t ip = i;
      const double iv = pencil(i, ib, ip);
      if (iv < cur - tol * (1.0 + cur)) {
        cur = iv;
        b = ib;
        k = ip;
        moved = true;
      }
    }
    if (!moved) break;
  }
  out.slope = b;
  out.intercept = y[k] - b * x[k];
  out.objective = cur;
  out.iterations = it;
  return out;
}

struct MedianTrendFit {
  double intercept = 0.0;  // meters at year 0
  double slope = 0.0;      // meters per year
  double slope_se = 0.0;   // bootstrap standard deviation of the slope
  double p_value = 1.0;    // two-sided bootstrap p-value for slope = 0
  std::size_t n = 0;
  std::size_t boot_reps = 0;
  double objective = 0.0;
};

inline constexpr std::size_t kMinMedianTrendRecords = 10;

/**
 * Median regression of height on completion year over records taller than
 * `height_threshold`, with a seeded case-resampling bootstrap.
 */
inline MedianTrendFit fit_median_trend(const Catalog& catalog, double height_threshold, std::size_t boot_reps,
                                       std::uint64_t seed, unsigned workers = 1) {
  std::vector<double> x, y;
  for (const auto& r : catalog) {
    if (r.height > height_threshold) {
      x.push_back(r.year);
      y.push_back(r.height);
    }
  }
  if (x.size() < kMinMedianTrendRecords)
    throw data_error("fit_median_trend: need at least 10 records above " + std::to_string(height_threshold) +
                     " m, got " + std::to_string(x.size()));
  if (boot_reps < 1) throw argument_error("fit_median_trend: boot_reps must be positive");
  const LadFit f = lad_fit(x, y);
  MedianTrendFit out;
  out.intercept = f.intercept;
  out.slope = f.slope;
  out.objective = f.objective;
  out.n = x.size();
  out.boot_reps = boot_reps;

  const std::size_t n = x.size();
  std::vector<double> slopes(boot_reps);
  parallel_for(boot_reps, workers, [&](std::size_t r) {
    StreamRng rng(seed, 0x6c6164ULL, r);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> bx(n), by(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pick(rng);
      bx[i] = x[j];
      by[i] = y[j];
    }
    slopes[r] = lad_fit(bx, by).slope;
  });
  const double m = std::accumulate(slopes.begin(), slopes.end(), 0.0) / static_cast<double>(boot_reps);
  double s2 = 0.0;
  std::size_t le = 0, ge = 0;
  for (double s : slopes) {
    s2 += (s - m) * (s - m);
    if (s <= 0.0) ++le;
    if (s >= 0.0) ++ge;
  }
  out.slope_se = boot_reps > 1 ? std::sqrt(s2 / static_cast<double>(boot_reps - 1)) : 0.0;
  const double denom = static_cast<double>(boot_reps) + 1.0;
  out.p_value = std::min(1.0, 2.0 * std::min((1.0 + le) / denom, (1.0 + ge) / denom));
  return out;
}

}  // namespace skyline

#endif  // SKYLINE_TREND_HPP_
