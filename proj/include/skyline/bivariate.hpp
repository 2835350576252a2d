#ifndef SKYLINE_BIVARIATE_HPP_
#define SKYLINE_BIVARIATE_HPP_

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skyline/catalog.hpp"
#include "skyline/error.hpp"
#include "skyline/gpd.hpp"
#include "skyline/optim.hpp"
#include "skyline/parallel.hpp"
#include "skyline/rng.hpp"

namespace skyline {

/// Asymmetric logistic dependence: theta in [0, 1], r >= 1.
struct AsymLogisticParams {
  double theta_x = 1.0;
  double theta_y = 1.0;
  double r = 1.0;
};

enum class LikelihoodForm {
  standard,  // censored likelihood conditioned on the sampling region
  literal,   // density times region mass, as sometimes written in the literature
};

struct CensoringSpec {
  double u = 225.0;           // height threshold, meters
  double v = 59.0;            // floor threshold, raw floor count
  double floor_scale = 3.8;   // meters per floor
  LikelihoodForm form = LikelihoodForm::standard;

  void validate() const {
    if (!(u > 0.0) || !(v > 0.0) || !(floor_scale > 0.0))
      throw argument_error("censoring spec: u, v and floor_scale must be positive");
  }
};

/// Both margins plus dependence. margin_y is on the scaled-floor scale
/// (floors * floor_scale, meters).
struct BivParams {
  GpdParams margin_x;
  GpdParams margin_y;
  AsymLogisticParams dep;
};

/// x~ = -log survival(x): the standard exponential scale.
inline double to_exp_margin(double value, const GpdParams& m) {
  detail::check_sigma(m);
  const double z = (value - m.mu) / m.sigma;
  if (z < 0.0 || std::isnan(z)) throw domain_error("to_exp_margin: value below the margin location");
  if (std::abs(m.xi) < kXiZero) return z;
  const double a = m.xi * z;
  if (!(a > -1.0)) throw domain_error("to_exp_margin: value above the margin upper endpoint");
  return std::log1p(a) / m.xi;
}

/// Inverse of to_exp_margin.
inline double from_exp_margin(double t, const GpdParams& m) {
  detail::check_sigma(m);
  if (!(t >= 0.0)) throw domain_error("from_exp_margin: negative exponential-scale value");
  if (std::abs(m.xi) < kXiZero) return m.mu + m.sigma * t;
  return m.mu + m.sigma * std::expm1(m.xi * t) / m.xi;
}

namespace detail {

// Exponential-scale transform clamped to the support (used at thresholds).
inline double exp_margin_clamped(double value, const GpdParams& m) {
  const double z = (value - m.mu) / m.sigma;
  if (z <= 0.0) return 0.0;
  if (std::abs(m.xi) < kXiZero) return z;
  const double a = m.xi * z;
  if (!(a > -1.0)) return std::numeric_limits<double>::infinity();
  return std::log1p(a) / m.xi;
}

// log d x~/dx.
inline double log_exp_margin_jacobian(double value, const GpdParams& m) {
  const double z = (value - m.mu) / m.sigma;
  if (std::abs(m.xi) < kXiZero) return -std::log(m.sigma);
  return -std::log(m.sigma) - std::log1p(m.xi * z);
}

// Exponent V of the joint survival exp(-V) and its partial derivatives.
struct AlTerms {
  double V = 0.0;
  double Vx = 0.0;
  double Vy = 0.0;
  double Vxy = 0.0;  // <= 0
};

inline AlTerms al_terms(double xt, double yt, const AsymLogisticParams& d) {
  const double a = d.theta_x * xt, b = d.theta_y * yt, r = d.r;
  double W = 0.0, Wx = 0.0, Wy = 0.0, Wxy = 0.0;
  const double hi = std::max(a, b);
  if (hi > 0.0) {
    const double ratio = std::min(a, b) / hi;
    W = hi * std::exp(std::log1p(std::pow(ratio, r)) / r);
    const double pa = a > 0.0 ? std::pow(a / W, r - 1.0) : (r == 1.0 ? 1.0 : 0.0);
    const double pb = b > 0.0 ? std::pow(b / W, r - 1.0) : (r == 1.0 ? 1.0 : 0.0);
    Wx = d.theta_x * pa;
    Wy = d.theta_y * pb;
    Wxy = (1.0 - r) * d.theta_x * d.theta_y * pa * pb / W;
  }
  AlTerms t;
  t.V = (1.0 - d.theta_x) * xt + (1.0 - d.theta_y) * yt + W;
  t.Vx = (1.0 - d.theta_x) + Wx;
  t.Vy = (1.0 - d.theta_y) + Wy;
  t.Vxy = Wxy;
  return t;
}

inline void check_dep(const AsymLogisticParams& d) {
  if (!(d.theta_x >= 0.0 && d.theta_x <= 1.0 && d.theta_y >= 0.0 && d.theta_y <= 1.0 && d.r >= 1.0 &&
        std::isfinite(d.r)))
    throw argument_error("asymmetric logistic: need theta in [0, 1] and r >= 1");
}

// log(1 - exp(q)) for q <= 0.
inline double log1mexp(double q) {
  if (q >= 0.0) return -std::numeric_limits<double>::infinity();
  return q > -0.693147180559945 ? std::log(-std::expm1(q)) : std::log1p(-std::exp(q));
}

// Deterministic pairwise (tree) summation.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

}  // namespace detail

/// exp(-(1-tx) x - (1-ty) y - ((tx x)^r + (ty y)^r)^(1/r)); equals 1 at the origin.
inline double joint_survival(double x_tilde, double y_tilde, const AsymLogisticParams& dep) {
  detail::check_dep(dep);
  if (!(x_tilde >= 0.0) || !(y_tilde >= 0.0)) throw argument_error("joint_survival: inputs must be >= 0");
  return std::exp(-detail::al_terms(x_tilde, y_tilde, dep).V);
}

/**
 * Log joint density of (height in meters, floors as a count). The model is
 * continuous in floors; the density is per meter per floor.
 */
inline double joint_log_density(double height, double floors, const BivParams& p, const CensoringSpec& spec) {
  const double y = floors * spec.floor_scale;
  const double xt = to_exp_margin(height, p.margin_x), yt = to_exp_margin(y, p.margin_y);
  const auto t = detail::al_terms(xt, yt, p.dep);
  return std::log(t.Vx * t.Vy - t.Vxy) - t.V + detail::log_exp_margin_jacobian(height, p.margin_x) +
         detail::log_exp_margin_jacobian(y, p.margin_y) + std::log(spec.floor_scale);
}

enum class RecordClass { none, both, height_only, floors_only };

/// Strict exceedance of u (height) and v (raw floors).
inline RecordClass classify(double height, double floors, const CensoringSpec& spec) {
  const bool hx = height > spec.u, fy = floors > spec.v;
  if (hx && fy) return RecordClass::both;
  if (hx) return RecordClass::height_only;
  if (fy) return RecordClass::floors_only;
  return RecordClass::none;
}

/// Model probabilities of the three sampling regions; total = P(X > u or Y > v).
struct RegionMasses {
  double both = 0.0;
  double height_only = 0.0;
  double floors_only = 0.0;
  double total = 0.0;
};

inline RegionMasses region_masses(const BivParams& p, const CensoringSpec& spec) {
  const double ut = detail::exp_margin_clamped(spec.u, p.margin_x);
  const double vt = detail::exp_margin_clamped(spec.v * spec.floor_scale, p.margin_y);
  const double s = std::exp(-detail::al_terms(ut, vt, p.dep).V);
  RegionMasses m;
  m.both = s;
  m.height_only = std::exp(-ut) - s;
  m.floors_only = std::exp(-vt) - s;
  m.total = std::exp(-ut) + std::exp(-vt) - s;
  return m;
}

namespace detail {

// Threshold quantities shared by every record of a likelihood evaluation.
struct ThresholdTerms {
  double ut = 0.0, vt = 0.0;
  double log_region = 0.0;  // log P(R) (standard) or unused
  double log_both = 0.0;    // log P(X > u, Y > v)
  double log_fx_u = 0.0;    // log P(X <= u)
  double log_fy_v = 0.0;    // log P(Y <= v)
};

inline ThresholdTerms threshold_terms(const BivParams& p, const CensoringSpec& spec) {
  ThresholdTerms t;
  t.ut = exp_margin_clamped(spec.u, p.margin_x);
  t.vt = exp_margin_clamped(spec.v * spec.floor_scale, p.margin_y);
  const double V = al_terms(t.ut, t.vt, p.dep).V;
  t.log_both = -V;
  t.log_region = std::log(std::exp(-t.ut) + std::exp(-t.vt) - std::exp(-V));
  t.log_fx_u = log1mexp(-t.ut);
  t.log_fy_v = log1mexp(-t.vt);
  return t;
}

inline double contribution(double height, double floors, RecordClass cls, const BivParams& p,
                           const CensoringSpec& spec, const ThresholdTerms& th) {
  const double s = spec.floor_scale;
  switch (cls) {
    case RecordClass::both: {
      const double ld = joint_log_density(height, floors, p, spec);
      return spec.form == LikelihoodForm::standard ? ld - th.log_region : ld + th.log_both;
    }
    case RecordClass::height_only: {
      const double xt = to_exp_margin(height, p.margin_x);
      const double lj = log_exp_margin_jacobian(height, p.margin_x);
      if (spec.form == LikelihoodForm::literal) return lj - xt + th.log_fy_v;
      const auto t = al_terms(xt, th.vt, p.dep);
      const double q = (t.Vx > 0.0 ? std::log(t.Vx) : -std::numeric_limits<double>::infinity()) - (t.V - xt);
      return lj - xt + log1mexp(q) - th.log_region;
    }
    case RecordClass::floors_only: {
      const double y = floors * s;
      const double yt = to_exp_margin(y, p.margin_y);
      const double lj = log_exp_margin_jacobian(y, p.margin_y) + std::log(s);
      if (spec.form == LikelihoodForm::literal) return lj - yt + th.log_fx_u;
      const auto t = al_terms(th.ut, yt, p.dep);
      const double q = (t.Vy > 0.0 ? std::log(t.Vy) : -std::numeric_limits<double>::infinity()) - (t.V - yt);
      return lj - yt + log1mexp(q) - th.log_region;
    }
    case RecordClass::none: break;
  }
  throw argument_error("record does not exceed either threshold");
}

}  // namespace detail

/// Log-likelihood contribution of one record (floors as a count).
inline double record_contribution(double height, double floors, const BivParams& p, const CensoringSpec& spec) {
  detail::check_dep(p.dep);
  const auto cls = classify(height, floors, spec);
  if (cls == RecordClass::none) throw argument_error("record_contribution: record exceeds neither threshold");
  return detail::contribution(height, floors, cls, p, spec, detail::threshold_terms(p, spec));
}

/// Records exceeding u or v, split by class.
struct BivData {
  std::vector<double> height;
  std::vector<double> floors;
  std::vector<RecordClass> cls;
  std::size_t n_both = 0, n_height_only = 0, n_floors_only = 0;
  double min_height = std::numeric_limits<double>::infinity();
  double min_scaled_floors = std::numeric_limits<double>::infinity();

  std::size_t size() const noexcept { return height.size(); }
};

inline BivData make_biv_data(const Catalog& catalog, const CensoringSpec& spec) {
  spec.validate();
  BivData d;
  for (const auto& r : catalog) {
    const auto c = classify(r.height, r.floors, spec);
    if (c == RecordClass::none) continue;
    d.height.push_back(r.height);
    d.floors.push_back(r.floors);
    d.cls.push_back(c);
    if (c == RecordClass::both) ++d.n_both;
    if (c == RecordClass::height_only) ++d.n_height_only;
    if (c == RecordClass::floors_only) ++d.n_floors_only;
    d.min_height = std::min(d.min_height, r.height);
    d.min_scaled_floors = std::min(d.min_scaled_floors, r.floors * spec.floor_scale);
  }
  return d;
}

/// Censored log-likelihood; -inf when some record lies outside a margin's support.
inline double censored_loglik(const BivData& data, const BivParams& p, const CensoringSpec& spec) {
  if (data.size() == 0) throw data_error("censored_loglik: no record exceeds either threshold");
  detail::check_dep(p.dep);
  const auto th = detail::threshold_terms(p, spec);
  std::vector<double> terms(data.size());
  try {
    for (std::size_t i = 0; i < data.size(); ++i)
      terms[i] = detail::contribution(data.height[i], data.floors[i], data.cls[i], p, spec, th);
  } catch (const domain_error&) {
    return -std::numeric_limits<double>::infinity();
  }
  return detail::pairwise_sum(terms);
}

inline double censored_loglik(const Catalog& catalog, const BivParams& p, const CensoringSpec& spec) {
  return censored_loglik(make_biv_data(catalog, spec), p, spec);
}

namespace detail {

inline constexpr std::size_t kBivParams = 9;

inline BivParams unpack(std::span<const double> q) {
  return {{q[0], q[1], q[2]}, {q[3], q[4], q[5]}, {q[6], q[7], q[8]}};
}

inline std::array<double, kBivParams> pack(const BivParams& p) {
  return {p.margin_x.mu, p.margin_x.sigma, p.margin_x.xi, p.margin_y.mu, p.margin_y.sigma,
          p.margin_y.xi, p.dep.theta_x,    p.dep.theta_y,   p.dep.r};
}

inline std::vector<ParamTransform> biv_transforms(const BivData& d) {
  return {ParamTransform::logit(0.0, d.min_height),
          ParamTransform::log(),
          ParamTransform::identity(),
          ParamTransform::logit(0.0, d.min_scaled_floors),
          ParamTransform::log(),
          ParamTransform::identity(),
          ParamTransform::logit(0.0, 1.0),
          ParamTransform::logit(0.0, 1.0),
          ParamTransform::shifted_log(1.0)};
}

// GPD start for one margin: fixed-location fit above the threshold, moved
// down to a location inside (0, lower).
inline GpdParams margin_start(const std::vector<double>& exceed, double threshold, double lower) {
  const double mu0 = 0.95 * std::min(lower, threshold);
  GpdParams g{mu0, 0.0, 0.1};
  double sigma_u = 0.0;
  if (exceed.size() >= kMinExceedances) {
    try {
      MaximizeOptions o;
      o.compute_covariance = false;
      const auto f = fit_gpd(exceed, threshold, MuMode::fixed_at_threshold, o);
      g.xi = std::clamp(f.params.xi, -0.3, 0.6);
      sigma_u = f.params.sigma;
    } catch (const error&) {
    }
  }
  if (!(sigma_u > 0.0)) {
    double m = 0.0;
    for (double v : exceed) m += v - threshold;
    sigma_u = exceed.empty() ? threshold * 0.1 : std::max(1e-3, m / static_cast<double>(exceed.size()));
  }
  // threshold stability: sigma(u) = sigma(mu) + xi (u - mu)
  g.sigma = sigma_u - g.xi * (threshold - mu0);
  if (!(g.sigma > 0.1 * sigma_u)) g.sigma = sigma_u;
  return g;
}

}  // namespace detail

struct BivFit {
  BivParams params;
  // (mu_x, sigma_x, xi_x, mu_y, sigma_y, xi_y, theta_x, theta_y, r)
  std::array<double, 9> se{};
  // parameters held on the boundary of their range (se reported as 0)
  std::array<bool, 9> at_boundary{};
  double loglik = -std::numeric_limits<double>::infinity();
  CensoringSpec spec;
  std::size_t n_full = 0;    // both thresholds exceeded
  std::size_t n_cens_x = 0;  // height censored (floors exceed only)
  std::size_t n_cens_y = 0;  // floors censored (height exceeds only)
  bool converged = false;
  int iterations = 0;
  int starts_tried = 0;
};

inline constexpr std::size_t kMinBivRecords = 30;
inline constexpr std::size_t kMinBivBoth = 5;

/// Starting points for the dependence parameters.
inline std::vector<AsymLogisticParams> default_dep_starts() {
  return {{0.5, 0.5, 2.0}, {0.85, 0.85, 1.5}, {0.3, 0.3, 4.0}};
}

namespace detail {

using BivVector = std::array<double, kBivParams>;
using BivMask = std::array<bool, kBivParams>;

struct SubsetFit {
  BivVector full{};
  OptimResult run;  // over the free coordinates only
  std::vector<std::size_t> free_idx;
};

inline double biv_objective(const BivData& data, const CensoringSpec& spec, std::span<const double> q) {
  for (double v : q)
    if (!std::isfinite(v)) return -std::numeric_limits<double>::infinity();
  if (!(q[1] > 0.0) || !(q[4] > 0.0)) return -std::numeric_limits<double>::infinity();
  return censored_loglik(data, unpack(q), spec);
}

// Maximizes over the coordinates flagged free; the rest stay at `start`.
inline SubsetFit fit_subset(const BivData& data, const CensoringSpec& spec, const BivVector& start,
                            const BivMask& free, const std::vector<ParamTransform>& tr, MaximizeOptions o) {
  SubsetFit out;
  out.full = start;
  std::vector<double> init;
  std::vector<ParamTransform> sub_tr;
  for (std::size_t i = 0; i < kBivParams; ++i)
    if (free[i]) {
      out.free_idx.push_back(i);
      init.push_back(start[i]);
      sub_tr.push_back(tr[i]);
    }
  BivVector buf = start;
  auto f = [&](std::span<const double> q) {
    for (std::size_t k = 0; k < q.size(); ++k) buf[out.free_idx[k]] = q[k];
    return biv_objective(data, spec, buf);
  };
  o.compute_covariance = false;
  out.run = maximize(f, init, sub_tr, o);
  for (std::size_t k = 0; k < out.free_idx.size(); ++k) out.full[out.free_idx[k]] = out.run.argmax[k];
  return out;
}

inline constexpr double kRDiverging = 50.0;

// Coordinates that drifted onto the edge of their range: thetas near 0 or 1,
// r running off to infinity, margin locations pressed against the smallest
// contributing value.
inline BivMask boundary_mask(const BivVector& q, const BivData& d) {
  BivMask m{};
  for (std::size_t i : {std::size_t{6}, std::size_t{7}}) m[i] = q[i] > 1.0 - 1e-3 || q[i] < 1e-3;
  m[8] = q[8] > kRDiverging;
  m[0] = q[0] > d.min_height * (1.0 - 1e-5);
  m[3] = q[3] > d.min_scaled_floors * (1.0 - 1e-5);
  return m;
}

// Thetas snap to 0 or 1 and a diverging r to kRDiverging; locations stay
// where they are. The likelihood is unbounded as r grows (a record on the
// ridge theta_x x~ = theta_y y~ gets density of order r), hence the cap.
inline void snap_to_boundary(BivVector& q, const BivMask& m) {
  for (std::size_t i : {std::size_t{6}, std::size_t{7}})
    if (m[i]) q[i] = q[i] > 0.5 ? 1.0 : 0.0;
  if (m[8]) q[8] = kRDiverging;
}

}  // namespace detail

/**
 * Nine-parameter censored maximum-likelihood fit on prepared data.
 *
 * Margin locations live on (0, smallest contributing value); thetas on
 * (0, 1); r on (1, inf). Each dependence start is optimized and the best
 * converged run is kept. A run that stalls against the edge of the parameter
 * space (theta at 0 or 1, r beyond 50, a location at its upper limit) is
 * refitted with those coordinates held fixed; they are flagged in
 * at_boundary and get a zero SE.
 */
inline BivFit fit_bivariate(const BivData& data, const CensoringSpec& spec, const MaximizeOptions& opt = {},
                            const std::vector<AsymLogisticParams>& dep_starts = default_dep_starts()) {
  if (data.size() < kMinBivRecords || data.n_both < kMinBivBoth)
    throw data_error("fit_bivariate: need at least 30 contributing records and 5 exceeding both thresholds (got " +
                     std::to_string(data.size()) + " and " + std::to_string(data.n_both) + ")");
  std::vector<double> hx, fy;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.height[i] > spec.u) hx.push_back(data.height[i]);
    if (data.floors[i] > spec.v) fy.push_back(data.floors[i] * spec.floor_scale);
  }
  const GpdParams mx = detail::margin_start(hx, spec.u, data.min_height);
  const GpdParams my = detail::margin_start(fy, spec.v * spec.floor_scale, data.min_scaled_floors);
  const auto tr = detail::biv_transforms(data);

  BivFit best;
  best.spec = spec;
  best.n_full = data.n_both;
  best.n_cens_x = data.n_floors_only;
  best.n_cens_y = data.n_height_only;
  detail::SubsetFit best_fit;
  bool have = false;
  std::string last_failure = "no start point had a finite likelihood";
  detail::BivMask all_free;
  all_free.fill(true);
  for (const auto& d0 : dep_starts) {
    ++best.starts_tried;
    try {
      auto r = detail::fit_subset(data, spec, detail::pack({mx, my, d0}), all_free, tr, opt);
      if (!r.run.converged) {
        const auto edge = detail::boundary_mask(r.full, data);
        if (std::find(edge.begin(), edge.end(), true) != edge.end()) {
          auto start = r.full;
          detail::snap_to_boundary(start, edge);
          detail::BivMask free;
          for (std::size_t i = 0; i < free.size(); ++i) free[i] = !edge[i];
          auto again = detail::fit_subset(data, spec, start, free, tr, opt);
          if (again.run.converged) r = std::move(again);
        }
      }
      if (!r.run.converged) {
        last_failure = "gradient norm " + std::to_string(r.run.gradient_norm) + " after " +
                       std::to_string(r.run.iterations) + " iterations";
        continue;
      }
      if (!have || r.run.loglik > best_fit.run.loglik) {
        best_fit = std::move(r);
        have = true;
      }
    } catch (const optimization_error& e) {
      last_failure = e.what();
    }
  }
  if (!have) throw fit_error("fit_bivariate: no start converged (" + last_failure + ")");

  best.params = detail::unpack(best_fit.full);
  best.loglik = best_fit.run.loglik;
  best.converged = true;
  best.iterations = best_fit.run.iterations;
  best.at_boundary.fill(true);
  for (std::size_t i : best_fit.free_idx) best.at_boundary[i] = false;
  if (opt.compute_covariance) {
    const auto& idx = best_fit.free_idx;
    std::vector<ParamTransform> sub_tr;
    for (std::size_t i : idx) sub_tr.push_back(tr[i]);
    detail::BivVector buf = best_fit.full;
    auto g = [&](std::span<const double> u) {
      for (std::size_t k = 0; k < idx.size(); ++k) buf[idx[k]] = sub_tr[k].constrain(u[k]);
      return detail::biv_objective(data, spec, buf);
    };
    const auto& u = best_fit.run.argmax_unconstrained;
    const Eigen::MatrixXd cov = detail::psd_inverse(observed_info(g, u));
    const auto se = delta_method_se(sub_tr, u, cov);
    for (std::size_t k = 0; k < idx.size(); ++k) best.se[idx[k]] = se[k];
  }
  return best;
}

inline BivFit fit_bivariate(const Catalog& catalog, const CensoringSpec& spec = {}, const MaximizeOptions& opt = {},
                            const std::vector<AsymLogisticParams>& dep_starts = default_dep_starts()) {
  return fit_bivariate(make_biv_data(catalog, spec), spec, opt, dep_starts);
}

namespace detail {

// Conditional cdf of Y~ given X~ = xt: 1 - Vx exp(-(V - xt)).
inline double conditional_exp_cdf(double xt, double yt, const AsymLogisticParams& d) {
  if (yt <= 0.0) return 0.0;
  if (!std::isfinite(yt)) return 1.0;
  const auto t = al_terms(xt, yt, d);
  if (!(t.Vx > 0.0)) return 1.0;
  return -std::expm1(std::log(t.Vx) - (t.V - xt));
}

// Conditional density of Y~ given X~ = xt.
inline double conditional_exp_density(double xt, double yt, const AsymLogisticParams& d) {
  const auto t = al_terms(xt, yt, d);
  return (t.Vx * t.Vy - t.Vxy) * std::exp(-(t.V - xt));
}

// Inverse of conditional_exp_cdf in y~.
inline double conditional_exp_quantile(double xt, double p, const AsymLogisticParams& d) {
  double hi = 1.0;
  int guard = 0;
  while (conditional_exp_cdf(xt, hi, d) < p) {
    hi *= 2.0;
    if (++guard > 60) throw numeric_error("conditional quantile: could not bracket the root");
  }
  auto f = [&](double y) { return conditional_exp_cdf(xt, y, d) - p; };
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(f, 0.0, hi, -p, f(hi),
                                                      boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (root.first + root.second);
}

}  // namespace detail

struct FloorDensityPoint {
  double floors = 0.0;
  double density = 0.0;  // per floor
};

/// 1 to 1000 floors in steps of one.
inline std::vector<double> default_floor_grid() {
  std::vector<double> g;
  for (int f = 1; f <= 1000; ++f) g.push_back(f);
  return g;
}

/// P(floors <= f | height) under the model.
inline double conditional_floor_cdf(const BivParams& p, double height, double floors, const CensoringSpec& spec) {
  detail::check_dep(p.dep);
  const double xt = to_exp_margin(height, p.margin_x);
  const double yt = detail::exp_margin_clamped(floors * spec.floor_scale, p.margin_y);
  return detail::conditional_exp_cdf(xt, yt, p.dep);
}

inline constexpr double kMinGridCoverage = 0.999;

/**
 * Density of floors given an exact height, on an ascending grid of floor
 * counts, renormalized (trapezoid rule) to integrate to one on the grid.
 * Throws coverage_error if the grid holds less than 99.9% of the mass.
 */
inline std::vector<FloorDensityPoint> conditional_floor_density(const BivParams& p, double height,
                                                                std::span<const double> floor_grid,
                                                                const CensoringSpec& spec) {
  if (floor_grid.size() < 2 || !std::is_sorted(floor_grid.begin(), floor_grid.end()))
    throw argument_error("conditional_floor_density: need an ascending grid of at least two points");
  detail::check_dep(p.dep);
  const double xt = to_exp_margin(height, p.margin_x);
  const double covered = conditional_floor_cdf(p, height, floor_grid.back(), spec) -
                         conditional_floor_cdf(p, height, floor_grid.front(), spec);
  if (covered < kMinGridCoverage)
    throw coverage_error("conditional_floor_density: grid [" + std::to_string(floor_grid.front()) + ", " +
                         std::to_string(floor_grid.back()) + "] holds only " + std::to_string(covered) +
                         " of the conditional mass at height " + std::to_string(height) + "; widen the grid");
  std::vector<FloorDensityPoint> out;
  out.reserve(floor_grid.size());
  for (double f : floor_grid) {
    const double y = f * spec.floor_scale;
    double dens = 0.0;
    const double yt = detail::exp_margin_clamped(y, p.margin_y);
    if (yt > 0.0 && std::isfinite(yt))
      dens = detail::conditional_exp_density(xt, yt, p.dep) *
             std::exp(detail::log_exp_margin_jacobian(y, p.margin_y)) * spec.floor_scale;
    out.push_back({f, dens});
  }
  double integral = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i)
    integral += 0.5 * (out[i].density + out[i - 1].density) * (out[i].floors - out[i - 1].floors);
  if (!(integral > 0.0)) throw numeric_error("conditional_floor_density: density vanishes on the grid");
  for (auto& pt : out) pt.density /= integral;
  return out;
}

/// Inverse of the conditional floor cdf (unscaled floors, continuous).
inline double conditional_quantile(const BivParams& p, double height, double prob, const CensoringSpec& spec) {
  if (!(prob > 0.0 && prob < 1.0)) throw argument_error("conditional_quantile: p must lie in (0, 1)");
  detail::check_dep(p.dep);
  const double xt = to_exp_margin(height, p.margin_x);
  const double yt = detail::conditional_exp_quantile(xt, prob, p.dep);
  return from_exp_margin(yt, p.margin_y) / spec.floor_scale;
}

inline std::vector<FloorDensityPoint> conditional_floor_density(const BivFit& fit, double height,
                                                                std::span<const double> floor_grid) {
  return conditional_floor_density(fit.params, height, floor_grid, fit.spec);
}

inline double conditional_quantile(const BivFit& fit, double height, double prob) {
  return conditional_quantile(fit.params, height, prob, fit.spec);
}

struct BivPoint {
  double height = 0.0;
  double floors = 0.0;  // unscaled, continuous
};

/// Draws from the full model: height from margin_x, floors from the
/// conditional given height. Draw i depends only on (seed, i).
inline std::vector<BivPoint> sample_bivariate(const BivParams& p, std::size_t n, std::uint64_t seed,
                                              double floor_scale = 3.8, unsigned workers = 1,
                                              std::uint64_t first_index = 0) {
  detail::check_dep(p.dep);
  std::vector<BivPoint> out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    StreamRng rng(seed, 0x626976ULL, first_index + i);
    const double xt = -std::log(rng.uniform());
    const double yt = detail::conditional_exp_quantile(xt, rng.uniform(), p.dep);
    out[i] = {from_exp_margin(xt, p.margin_x), from_exp_margin(yt, p.margin_y) / floor_scale};
  });
  return out;
}

/**
 * Synthetic catalog of exactly `n_contributing` records exceeding u or v.
 * Floors are rounded to integers >= 1; years and ids are filler.
 */
inline Catalog sample_catalog(const BivParams& p, const CensoringSpec& spec, std::size_t n_contributing,
                              std::uint64_t seed) {
  std::vector<BuildingRecord> recs;
  std::uint64_t index = 0;
  while (recs.size() < n_contributing) {
    const auto batch = sample_bivariate(p, 1024, seed, spec.floor_scale, 1, index);
    for (const auto& b : batch) {
      const int floors = std::max(1, static_cast<int>(std::lround(b.floors)));
      if (classify(b.height, floors, spec) == RecordClass::none) {
        ++index;
        continue;
      }
      recs.push_back({"s" + std::to_string(index), std::nullopt, "synthetic", b.height, floors,
                      1950 + static_cast<int>(index % 68)});
      ++index;
      if (recs.size() == n_contributing) break;
    }
  }
  return Catalog(std::move(recs));
}

}  // namespace skyline

#endif  // SKYLINE_BIVARIATE_HPP_
