#ifndef SKYLINE_OPTIM_HPP_
#define SKYLINE_OPTIM_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "skyline/error.hpp"
#include "skyline/rng.hpp"

namespace skyline {

/**
 * Map between a constrained parameter and the real line.
 *
 *  - identity:     x = u
 *  - log:          x = exp(u),                  x in (0, inf)
 *  - logit:        x = lo + (hi - lo) * s(u),   x in (lo, hi)
 *  - shifted_log:  x = lo + exp(u),             x in (lo, inf)
 */
class ParamTransform {
 public:
  enum class Kind { identity, log, logit, shifted_log };

  static ParamTransform identity() { return {Kind::identity, 0.0, 0.0}; }
  static ParamTransform log() { return {Kind::log, 0.0, 0.0}; }
  static ParamTransform logit(double lo, double hi) {
    if (!(hi > lo)) throw argument_error("logit transform: empty interval");
    return {Kind::logit, lo, hi};
  }
  static ParamTransform shifted_log(double lo) { return {Kind::shifted_log, lo, 0.0}; }

  Kind kind() const noexcept { return kind_; }
  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }

  double constrain(double u) const {
    switch (kind_) {
      case Kind::identity: return u;
      case Kind::log: return std::exp(u);
      case Kind::logit: return lo_ + (hi_ - lo_) * sigmoid(u);
      case Kind::shifted_log: return lo_ + std::exp(u);
    }
    return u;
  }

  double unconstrain(double x) const {
    switch (kind_) {
      case Kind::identity: return x;
      case Kind::log: return std::log(x);
      case Kind::logit: {
        const double t = (x - lo_) / (hi_ - lo_);
        return std::log(t) - std::log1p(-t);
      }
      case Kind::shifted_log: return std::log(x - lo_);
    }
    return x;
  }

  /// d constrain(u) / du; positive everywhere.
  double jacobian(double u) const {
    switch (kind_) {
      case Kind::identity: return 1.0;
      case Kind::log:
      case Kind::shifted_log: return std::exp(u);
      case Kind::logit: {
        const double e = std::exp(-std::abs(u));
        return (hi_ - lo_) * e / ((1.0 + e) * (1.0 + e));
      }
    }
    return 1.0;
  }

  bool contains(double x) const {
    switch (kind_) {
      case Kind::identity: return std::isfinite(x);
      case Kind::log: return x > 0.0 && std::isfinite(x);
      case Kind::logit: return x > lo_ && x < hi_;
      case Kind::shifted_log: return x > lo_ && std::isfinite(x);
    }
    return false;
  }

 private:
  ParamTransform(Kind k, double lo, double hi) : kind_(k), lo_(lo), hi_(hi) {}

  static double sigmoid(double u) {
    if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
  }

  Kind kind_;
  double lo_;
  double hi_;
};

struct OptimResult {
  std::vector<double> argmax;                // constrained scale
  std::vector<double> argmax_unconstrained;  // unconstrained scale
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd unconstrained_cov;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = std::numeric_limits<double>::infinity();
  int restarts_used = 0;
};

struct MaximizeOptions {
  /// Gradient max-norm tolerance on the unconstrained scale, relative to
  /// max(1, |objective|).
  double tol = 1e-8;
  int max_iterations = 2000;
  int restarts = 5;
  double jitter_sd = 0.5;
  std::uint64_t seed = 0;
  bool compute_covariance = true;
};

namespace detail {

inline double finite_or_neg_inf(double v) {
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

// Fourth-order central-difference gradient. Falls back to a second-order
// stencil, then one-sided differences, when a stencil point leaves the
// objective's domain.
template <class F>
Eigen::VectorXd numeric_gradient(F& f, const Eigen::VectorXd& x, double fx) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n);
  Eigen::VectorXd p = x;
  auto eval = [&](Eigen::Index i, double xi) {
    p[i] = xi;
    const double v = f(p);
    p[i] = x[i];
    return v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = 7.4e-4 * std::max(1.0, std::abs(x[i]));
    const double f1 = eval(i, x[i] + h), fm1 = eval(i, x[i] - h);
    const double f2 = eval(i, x[i] + 2 * h), fm2 = eval(i, x[i] - 2 * h);
    if (std::isfinite(f1) && std::isfinite(fm1) && std::isfinite(f2) && std::isfinite(fm2)) {
      g[i] = (8.0 * (f1 - fm1) - (f2 - fm2)) / (12.0 * h);
      continue;
    }
    const double hs = 6e-6 * std::max(1.0, std::abs(x[i]));
    const double a = eval(i, x[i] + hs), b = eval(i, x[i] - hs);
    if (std::isfinite(a) && std::isfinite(b)) {
      g[i] = (a - b) / (2 * hs);
    } else if (std::isfinite(a)) {
      g[i] = (a - fx) / hs;
    } else if (std::isfinite(b)) {
      g[i] = (fx - b) / hs;
    } else {
      g[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return g;
}

// Second differences with step h_i = max(floor, rel * |x_i|). With
// `richardson`, the steps h and 2h are combined to cancel the O(h^2) error
// term. Entries that are not finite are left as NaN.
template <class F>
Eigen::MatrixXd numeric_hessian(F& f, const Eigen::VectorXd& x, double fx, double rel,
                                double floor_step, bool richardson = false) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = std::max(floor_step, rel * std::abs(x[i]));
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd p = x;
  auto at = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
    p = x;
    p[i] += di;
    p[j] += dj;
    return f(p);
  };
  auto second = [&](Eigen::Index i, Eigen::Index j, double s) {
    const double hi = s * h[i], hj = s * h[j];
    if (i == j) {
      const double fp = at(i, hi, i, 0.0), fm = at(i, -hi, i, 0.0);
      return ((fp - fx) + (fm - fx)) / (hi * hi);
    }
    const double fpp = at(i, hi, j, hj), fpm = at(i, hi, j, -hj);
    const double fmp = at(i, -hi, j, hj), fmm = at(i, -hi, j, -hj);
    return ((fpp - fpm) - (fmp - fmm)) / (4.0 * hi * hj);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double v = second(i, j, 1.0);
      if (richardson) v = (4.0 * v - second(i, j, 2.0)) / 3.0;
      H(i, j) = H(j, i) = std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return 0.5 * (H + H.transpose());
}

// Inverse of a symmetric matrix after flooring its spectrum, so the result is
// symmetric positive semi-definite even when the input is near singular.
inline Eigen::MatrixXd psd_inverse(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  Eigen::VectorXd lam = es.eigenvalues();
  const double top = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = 1.0 / std::max(lam[i], 1e-12 * top);
  Eigen::MatrixXd inv = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

struct RunOutcome {
  Eigen::VectorXd u;
  double value = -std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

// Maximizes g (unconstrained scale) by BFGS with backtracking, then polishes
// with damped Newton steps on a numeric Hessian.
template <class G>
RunOutcome ascend(G& g, Eigen::VectorXd x, const MaximizeOptions& opt) {
  RunOutcome out;
  const Eigen::Index n = x.size();
  auto phi = [&](const Eigen::VectorXd& v) { return -g(v); };  // minimize phi
  double fx = phi(x);
  if (!std::isfinite(fx)) return out;
  auto grad = [&](const Eigen::VectorXd& v, double fv) {
    Eigen::VectorXd gr = numeric_gradient(phi, v, fv);
    return gr;
  };
  auto tol_for = [&](double fv) { return opt.tol * std::max(1.0, std::abs(fv)); };

  Eigen::VectorXd gx = grad(x, fx);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int it = 0;
  int stalls = 0;
  for (; it < opt.max_iterations; ++it) {
    if (!gx.allFinite()) break;
    if (gx.lpNorm<Eigen::Infinity>() <= tol_for(fx)) break;
    Eigen::VectorXd p = -Hinv * gx;
    if (!(p.dot(gx) < 0)) {
      Hinv.setIdentity();
      scaled = false;
      p = -gx;
    }
    double alpha = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(1e-300, gx.lpNorm<Eigen::Infinity>()));
    const double slope = p.dot(gx);
    Eigen::VectorXd xn;
    double fn = std::numeric_limits<double>::infinity();
    bool ok = false;
    for (int k = 0; k < 60; ++k) {
      xn = x + alpha * p;
      fn = phi(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * alpha * slope) {
        ok = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!ok) {
      if (!Hinv.isIdentity() || scaled) {
        Hinv.setIdentity();
        scaled = false;
        continue;
      }
      break;
    }
    Eigen::VectorXd gn = grad(xn, fn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - gx;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && std::isfinite(sy)) {
      if (!scaled) {
        Hinv = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    const double df = fx - fn;
    x = xn;
    fx = fn;
    gx = gn;
    if (df <= 1e-15 * (1.0 + std::abs(fx))) {
      if (++stalls >= 5) break;
    } else {
      stalls = 0;
    }
  }

  // Newton polish. Keeps stepping a few times past the tolerance so the
  // reported argmax is accurate well below the gradient tolerance.
  int extra = 0;
  for (int k = 0; k < 60 && gx.allFinite(); ++k, ++it) {
    const bool within = gx.lpNorm<Eigen::Infinity>() <= tol_for(fx);
    if (within && ++extra > 3) break;
    Eigen::MatrixXd H = numeric_hessian(phi, x, fx, 1e-4, 1e-4);
    if (!H.allFinite()) break;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    Eigen::VectorXd lam = es.eigenvalues();
    const double top = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < n; ++i) lam[i] = std::max(std::abs(lam[i]), 1e-10 * top);
    const Eigen::VectorXd p =
        -(es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose()) * gx;
    double alpha = 1.0;
    bool ok = false;
    Eigen::VectorXd xn;
    double fn = fx;
    for (int t = 0; t < 40; ++t) {
      xn = x + alpha * p;
      fn = phi(xn);
      if (std::isfinite(fn) && fn <= fx) {
        ok = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!ok) break;
    Eigen::VectorXd gn = grad(xn, fn);
    if (!gn.allFinite()) break;
    // Past the tolerance, only accept steps that do not worsen the gradient.
    if (within && gn.lpNorm<Eigen::Infinity>() > gx.lpNorm<Eigen::Infinity>()) break;
    const double step = (xn - x).lpNorm<Eigen::Infinity>();
    x = xn;
    fx = fn;
    gx = gn;
    if (within && step <= 1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
  }

  out.u = x;
  out.value = -fx;
  out.grad_norm = gx.allFinite() ? gx.lpNorm<Eigen::Infinity>()
                                 : std::numeric_limits<double>::infinity();
  out.converged = out.grad_norm <= tol_for(fx);
  out.iterations = it;
  return out;
}

}  // namespace detail

/**
 * Negated Hessian of `objective` at `at` by central second differences.
 *
 * Uses Richardson-extrapolated differences with base step
 * h_i = max(1e-3, 1e-3 * |at_i|); if any stencil point leaves the domain it
 * retries with plain differences at h_i = max(1e-5, 1e-5 * |at_i|). The
 * result is symmetrized. Throws numeric_error naming the coordinate pair
 * when a second difference is still not finite.
 */
template <class F>
Eigen::MatrixXd observed_info(F&& objective, std::span<const double> at) {
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(at.data(), static_cast<Eigen::Index>(at.size()));
  auto f = [&](const Eigen::VectorXd& v) {
    return static_cast<double>(objective(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))));
  };
  const double fx = f(x);
  if (!std::isfinite(fx)) throw numeric_error("observed_info: objective not finite at point");
  Eigen::MatrixXd H = detail::numeric_hessian(f, x, fx, 1e-3, 1e-3, true);
  if (!H.allFinite()) H = detail::numeric_hessian(f, x, fx, 1e-5, 1e-5, false);
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    for (Eigen::Index j = i; j < H.cols(); ++j)
      if (!std::isfinite(H(i, j)))
        throw numeric_error("observed_info: non-finite second difference at coordinates (" +
                            std::to_string(i) + ", " + std::to_string(j) + ")");
  return -H;
}

/// Constrained-scale standard errors: se_i = |g_i'(u_i)| * sqrt(cov_ii).
inline std::vector<double> delta_method_se(std::span<const ParamTransform> transforms,
                                           std::span<const double> at_unconstrained,
                                           const Eigen::MatrixXd& unconstrained_cov) {
  const auto n = transforms.size();
  if (at_unconstrained.size() != n || static_cast<std::size_t>(unconstrained_cov.rows()) != n ||
      static_cast<std::size_t>(unconstrained_cov.cols()) != n)
    throw argument_error("delta_method_se: dimension mismatch");
  std::vector<double> se(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double var = unconstrained_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    if (var < 0.0 || !std::isfinite(var))
      throw numeric_error("delta_method_se: negative or non-finite variance for parameter " +
                          std::to_string(i));
    se[i] = std::abs(transforms[i].jacobian(at_unconstrained[i])) * std::sqrt(var);
  }
  return se;
}

/**
 * Maximizes a smooth objective over a box-like domain described by
 * per-parameter transforms.
 *
 * The search runs on the unconstrained scale with numeric gradients: BFGS
 * followed by a few damped Newton steps. If the first run does not converge,
 * `restarts` further runs start from the initial point plus N(0, jitter_sd^2)
 * noise (seeded), and the best run by objective value is reported. Points
 * where the objective is not finite are treated as outside the domain.
 *
 * `objective` takes a std::span<const double> on the constrained scale.
 */
template <class F>
OptimResult maximize(F&& objective, std::span<const double> init,
                     std::span<const ParamTransform> transforms, const MaximizeOptions& opt = {}) {
  const std::size_t n = init.size();
  if (transforms.size() != n) throw argument_error("maximize: transforms/init size mismatch");
  if (!(opt.tol > 0)) throw argument_error("maximize: tol must be positive");
  Eigen::VectorXd u0(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!transforms[i].contains(init[i]))
      throw argument_error("maximize: init[" + std::to_string(i) + "] outside the parameter domain");
    u0[static_cast<Eigen::Index>(i)] = transforms[i].unconstrain(init[i]);
  }
  std::vector<double> buf(n);
  auto g = [&](const Eigen::VectorXd& u) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = transforms[i].constrain(u[static_cast<Eigen::Index>(i)]);
    return detail::finite_or_neg_inf(static_cast<double>(objective(std::span<const double>(buf))));
  };

  detail::RunOutcome best;
  bool any_finite = false;
  int restarts_used = 0;
  StreamRng rng(opt.seed, 0x6f7074ULL);
  for (int run = 0; run <= opt.restarts; ++run) {
    Eigen::VectorXd start = u0;
    if (run > 0) {
      ++restarts_used;
      for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += opt.jitter_sd * rng.normal();
    }
    if (!std::isfinite(g(start))) continue;
    any_finite = true;
    detail::RunOutcome r = detail::ascend(g, start, opt);
    if (r.u.size() > 0 && (best.u.size() == 0 || r.value > best.value)) best = r;
    if (r.converged && run == 0) break;
  }
  if (!any_finite) throw optimization_error("maximize: objective not finite at any start point");
  if (best.u.size() == 0) throw optimization_error("maximize: no run produced a finite result");

  OptimResult res;
  res.argmax_unconstrained.assign(best.u.data(), best.u.data() + best.u.size());
  res.argmax.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.argmax[i] = transforms[i].constrain(best.u[static_cast<Eigen::Index>(i)]);
  res.loglik = best.value;
  res.converged = best.converged;
  res.iterations = best.iterations;
  res.gradient_norm = best.grad_norm;
  res.restarts_used = restarts_used;
  if (opt.compute_covariance) {
    auto gu = [&](std::span<const double> u) {
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
      return g(v);
    };
    const Eigen::MatrixXd info = observed_info(gu, res.argmax_unconstrained);
    res.unconstrained_cov = detail::psd_inverse(info);
  }
  return res;
}

}  // namespace skyline

#endif  // SKYLINE_OPTIM_HPP_
