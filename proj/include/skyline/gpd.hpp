#ifndef SKYLINE_GPD_HPP_
#define SKYLINE_GPD_HPP_

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "skyline/error.hpp"
#include "skyline/optim.hpp"
#include "skyline/parallel.hpp"
#include "skyline/rng.hpp"

namespace skyline {

/// Generalized Pareto parameters; heights in meters.
struct GpdParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

enum class GpdKind { cdf, pdf, log_pdf, survival };

/// Below this |xi| the exponential limit is used.
inline constexpr double kXiZero = 1e-9;

namespace detail {

inline void check_sigma(const GpdParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.mu) || !std::isfinite(p.xi))
    throw argument_error("GPD: sigma must be positive and parameters finite");
}

// log(1 + xi z) / xi, continuous through xi = 0. log1p keeps full relative
// precision for small xi z, so no separate series is needed.
inline double gpd_log_term(double xi, double z) {
  if (std::abs(xi) < kXiZero) return z;
  return std::log1p(xi * z) / xi;
}

}  // namespace detail

/**
 * Evaluates the GPD at x. cdf and survival clamp to 0/1 outside the support;
 * pdf and log_pdf throw domain_error there.
 */
inline double gpd_eval(const GpdParams& p, double x, GpdKind kind) {
  detail::check_sigma(p);
  const double z = (x - p.mu) / p.sigma;
  const bool below = z < 0.0;
  const bool above = p.xi < 0.0 && !(std::abs(p.xi) < kXiZero) && 1.0 + p.xi * z < 0.0;
  if (below || above || std::isnan(z)) {
    switch (kind) {
      case GpdKind::cdf: return below ? 0.0 : 1.0;
      case GpdKind::survival: return below ? 1.0 : 0.0;
      default: throw domain_error("GPD: x = " + std::to_string(x) + " outside the support");
    }
  }
  const double log_surv = -detail::gpd_log_term(p.xi, z);
  switch (kind) {
    case GpdKind::cdf: return -std::expm1(log_surv);
    case GpdKind::survival: return std::exp(log_surv);
    case GpdKind::log_pdf: {
      const double t = std::abs(p.xi) < kXiZero ? 0.0 : std::log1p(p.xi * z);
      return -std::log(p.sigma) + log_surv - t;
    }
    case GpdKind::pdf: {
      const double t = std::abs(p.xi) < kXiZero ? 0.0 : std::log1p(p.xi * z);
      return std::exp(-std::log(p.sigma) + log_surv - t);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Exact inverse of the cdf for p in (0, 1).
inline double gpd_quantile(const GpdParams& params, double p) {
  detail::check_sigma(params);
  if (!(p > 0.0 && p < 1.0)) throw argument_error("gpd_quantile: p must lie in (0, 1)");
  const double l = -std::log1p(-p);  // -log(1 - p) > 0
  if (std::abs(params.xi) < kXiZero) return params.mu + params.sigma * l;
  return params.mu + params.sigma * std::expm1(params.xi * l) / params.xi;
}

/// Inverse-cdf sampling from a caller-supplied source of uniforms in (0, 1).
template <class UniformSource>
  requires std::invocable<UniformSource&>
std::vector<double> gpd_sample(const GpdParams& p, std::size_t n, UniformSource&& uniform) {
  std::vector<double> out(n);
  for (auto& v : out) v = gpd_quantile(p, uniform());
  return out;
}

/// Seeded sampling. Draw i depends only on (seed, i), so the output does not
/// change with the worker count.
inline std::vector<double> gpd_sample(const GpdParams& p, std::size_t n, std::uint64_t seed,
                                      unsigned workers = 1) {
  if (n < 1) throw argument_error("gpd_sample: n must be at least 1");
  detail::check_sigma(p);
  constexpr std::size_t kBlock = 4096;
  std::vector<double> out(n);
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  parallel_for(blocks, workers, [&](std::size_t b) {
    StreamRng rng(seed, 0x677064ULL, b);
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) out[i] = gpd_quantile(p, rng.uniform());
  });
  return out;
}

enum class MuMode { free, fixed_at_threshold };

struct GpdFit {
  GpdParams params;
  std::array<double, 3> se{0.0, 0.0, 0.0};  // (mu, sigma, xi); mu is 0 when fixed
  double loglik = -std::numeric_limits<double>::infinity();
  double threshold = 0.0;
  std::size_t n_exceed = 0;
  MuMode mode = MuMode::free;
  bool converged = false;
  int iterations = 0;
  int restarts_used = 0;
};

inline constexpr std::size_t kMinExceedances = 10;

inline double gpd_loglik(const GpdParams& p, std::span<const double> x) {
  if (!(p.sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  const double ls = std::log(p.sigma);
  double s = 0.0;
  for (double v : x) {
    const double z = (v - p.mu) / p.sigma;
    if (z < 0.0) return -std::numeric_limits<double>::infinity();
    if (std::abs(p.xi) < kXiZero) {
      s += -ls - z;
      continue;
    }
    const double a = p.xi * z;
    if (!(a > -1.0)) return -std::numeric_limits<double>::infinity();
    s += -ls - (1.0 / p.xi + 1.0) * std::log1p(a);
  }
  return s;
}

/**
 * Maximum-likelihood GPD fit to exceedances of u.
 *
 * MuMode::free estimates mu on (0, min x) through a logit transform;
 * MuMode::fixed_at_threshold pins mu = u. sigma is fitted on the log scale,
 * xi unconstrained. Standard errors come from the observed information and
 * the delta method.
 */
inline GpdFit fit_gpd(std::span<const double> x, double u, MuMode mode = MuMode::free,
                      const MaximizeOptions& opt = {}) {
  if (x.size() < kMinExceedances)
    throw data_error("fit_gpd: need at least " + std::to_string(kMinExceedances) + " exceedances, got " +
                     std::to_string(x.size()));
  for (double v : x)
    if (!(v > u) || !std::isfinite(v)) throw argument_error("fit_gpd: every height must exceed the threshold");
  const double xmin = *std::min_element(x.begin(), x.end());
  const double xmax = *std::max_element(x.begin(), x.end());

  // Moment starting values for (sigma, xi) above the starting location.
  const double mu0 = mode == MuMode::fixed_at_threshold ? u : (u > 0.0 ? u : 0.5 * xmin);
  double m = 0.0, v2 = 0.0;
  for (double v : x) m += v - mu0;
  m /= static_cast<double>(x.size());
  for (double v : x) v2 += (v - mu0 - m) * (v - mu0 - m);
  v2 /= static_cast<double>(x.size() - 1);
  double xi0 = v2 > 0.0 ? std::clamp(0.5 * (1.0 - m * m / v2), -0.4, 0.4) : 0.1;
  double sigma0 = std::max(1e-8 * std::max(1.0, std::abs(m)), v2 > 0.0 ? 0.5 * m * (m * m / v2 + 1.0) : m);
  if (!(sigma0 > 0.0)) sigma0 = std::max(1.0, std::abs(xmax - mu0));
  if (xi0 < 0.0 && !(mu0 - sigma0 / xi0 > xmax)) xi0 = 0.1;

  GpdFit fit;
  fit.threshold = u;
  fit.n_exceed = x.size();
  fit.mode = mode;

  OptimResult r;
  if (mode == MuMode::fixed_at_threshold) {
    const std::vector<double> init = {sigma0, xi0};
    const std::vector<ParamTransform> tr = {ParamTransform::log(), ParamTransform::identity()};
    r = maximize([&](std::span<const double> q) { return gpd_loglik({u, q[0], q[1]}, x); }, init, tr, opt);
    fit.params = {u, r.argmax[0], r.argmax[1]};
  } else {
    const std::vector<double> init = {mu0, sigma0, xi0};
    const std::vector<ParamTransform> tr = {ParamTransform::logit(0.0, xmin), ParamTransform::log(),
                                            ParamTransform::identity()};
    r = maximize([&](std::span<const double> q) { return gpd_loglik({q[0], q[1], q[2]}, x); }, init, tr,
                 opt);
    fit.params = {r.argmax[0], r.argmax[1], r.argmax[2]};
  }
  fit.loglik = r.loglik;
  fit.converged = r.converged;
  fit.iterations = r.iterations;
  fit.restarts_used = r.restarts_used;
  if (!r.converged)
    throw fit_error("fit_gpd: no convergence after " + std::to_string(r.restarts_used) +
                    " restarts (gradient norm " + std::to_string(r.gradient_norm) + ", loglik " +
                    std::to_string(r.loglik) + ", iterations " + std::to_string(r.iterations) + ")");
  if (opt.compute_covariance) {
    if (mode == MuMode::fixed_at_threshold) {
      const std::vector<ParamTransform> tr = {ParamTransform::log(), ParamTransform::identity()};
      const auto se = delta_method_se(tr, r.argmax_unconstrained, r.unconstrained_cov);
      fit.se = {0.0, se[0], se[1]};
    } else {
      const std::vector<ParamTransform> tr = {ParamTransform::logit(0.0, xmin), ParamTransform::log(),
                                              ParamTransform::identity()};
      const auto se = delta_method_se(tr, r.argmax_unconstrained, r.unconstrained_cov);
      fit.se = {se[0], se[1], se[2]};
    }
  }
  return fit;
}

struct ThresholdScanRow {
  double u = 0.0;
  double xi_hat = 0.0;
  double xi_lo50 = 0.0, xi_hi50 = 0.0, xi_lo95 = 0.0, xi_hi95 = 0.0;
  double sigma_hat = 0.0;
  double sigma_lo95 = 0.0, sigma_hi95 = 0.0;
  std::size_t n_exceed = 0;
};

struct SkippedThreshold {
  double u = 0.0;
  std::size_t n_exceed = 0;
  std::string reason;
};

struct ThresholdScan {
  std::vector<ThresholdScanRow> rows;     // ordered by u
  std::vector<SkippedThreshold> skipped;  // thresholds without a usable fit
};

/// 150 m to 350 m in steps of 25 m.
inline std::vector<double> default_threshold_grid() {
  std::vector<double> g;
  for (int u = 150; u <= 350; u += 25) g.push_back(u);
  return g;
}

/**
 * Fixed-location (mu = u) fits over an ascending threshold grid with Wald
 * intervals. Thresholds leaving fewer than 10 exceedances, or whose fit
 * fails, are listed in `skipped`.
 */
inline ThresholdScan threshold_scan(std::span<const double> heights, std::span<const double> u_grid,
                                    unsigned workers = 1) {
  if (u_grid.empty()) throw argument_error("threshold_scan: empty threshold grid");
  if (!std::is_sorted(u_grid.begin(), u_grid.end()))
    throw argument_error("threshold_scan: threshold grid must be ascending");
  const boost::math::normal_distribution<double> nd;
  const double z50 = boost::math::quantile(nd, 0.75);
  const double z95 = boost::math::quantile(nd, 0.975);

  struct Slot {
    bool ok = false;
    ThresholdScanRow row;
    SkippedThreshold skip;
  };
  std::vector<Slot> slots(u_grid.size());
  parallel_for(u_grid.size(), workers, [&](std::size_t k) {
    const double u = u_grid[k];
    std::vector<double> ex;
    for (double h : heights)
      if (h > u) ex.push_back(h);
    Slot& s = slots[k];
    if (ex.size() < kMinExceedances) {
      s.skip = {u, ex.size(), "fewer than 10 exceedances"};
      return;
    }
    try {
      const GpdFit f = fit_gpd(ex, u, MuMode::fixed_at_threshold);
      auto& r = s.row;
      r.u = u;
      r.n_exceed = ex.size();
      r.xi_hat = f.params.xi;
      r.xi_lo50 = f.params.xi - z50 * f.se[2];
      r.xi_hi50 = f.params.xi + z50 * f.se[2];
      r.xi_lo95 = f.params.xi - z95 * f.se[2];
      r.xi_hi95 = f.params.xi + z95 * f.se[2];
      r.sigma_hat = f.params.sigma;
      r.sigma_lo95 = f.params.sigma - z95 * f.se[1];
      r.sigma_hi95 = f.params.sigma + z95 * f.se[1];
      s.ok = true;
    } catch (const optimization_error& e) {
      s.skip = {u, ex.size(), e.what()};
    } catch (const numeric_error& e) {
      s.skip = {u, ex.size(), e.what()};
    }
  });
  ThresholdScan out;
  for (auto& s : slots) {
    if (s.ok)
      out.rows.push_back(s.row);
    else
      out.skipped.push_back(s.skip);
  }
  return out;
}

struct HillPoint {
  std::size_t k = 0;
  double xi = 0.0;
};

/// Hill estimates of the tail index reciprocal from the k largest values.
inline std::vector<HillPoint> hill_estimates(std::span<const double> heights, std::span<const std::size_t> ks) {
  for (double h : heights)
    if (!(h > 0.0)) throw domain_error("hill_estimates: heights must be positive");
  std::vector<double> x(heights.begin(), heights.end());
  std::sort(x.begin(), x.end(), std::greater<>());
  std::vector<HillPoint> out;
  for (std::size_t k : ks) {
    if (k < 1 || k >= x.size()) throw argument_error("hill_estimates: need 1 <= k < n");
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::log(x[i] / x[k]);
    out.push_back({k, s / static_cast<double>(k)});
  }
  return out;
}

/**
 * Survival function of the Kolmogorov distribution, P(K > lambda).
 */
inline double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  if (lambda < 1.18) {
    // Theta-function form, converges fast for small lambda.
    const double c = pi * pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k < 50; ++k) {
      const double t = std::exp(-(2.0 * k - 1.0) * (2.0 * k - 1.0) * c);
      s += t;
      if (t < 1e-18 * s) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double t = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * t;
    if (t < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS test of sorted values against U(0, 1), with the Stephens
/// small-sample correction for the p-value.
inline KsResult ks_uniform(std::span<const double> sorted) {
  const auto n = static_cast<double>(sorted.size());
  if (sorted.empty()) return {};
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double c = sorted[i];
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - c, c - static_cast<double>(i) / n});
  }
  const double rn = std::sqrt(n);
  return {d, kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d)};
}

struct QqPoint {
  double emp = 0.0;   // plotting position (i - 0.5) / n
  double theo = 0.0;  // fitted cdf of the i-th smallest height
};

struct QqResult {
  std::vector<QqPoint> points;
  double ks_statistic = 0.0;
  double ks_p_value = 1.0;
};

/// Probability-integral transform of heights under a fit, paired with uniform
/// plotting positions.
inline QqResult uniform_qq(std::span<const double> heights, const GpdFit& fit) {
  std::vector<double> t;
  t.reserve(heights.size());
  for (double h : heights) t.push_back(gpd_eval(fit.params, h, GpdKind::cdf));
  std::sort(t.begin(), t.end());
  QqResult out;
  const auto n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out.points.push_back({(static_cast<double>(i) + 0.5) / n, t[i]});
  const KsResult ks = ks_uniform(t);
  out.ks_statistic = ks.statistic;
  out.ks_p_value = ks.p_value;
  return out;
}

}  // namespace skyline

#endif  // SKYLINE_GPD_HPP_
