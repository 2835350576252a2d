#ifndef SKYLINE_HIER_HPP_
#define SKYLINE_HIER_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skyline/bivariate.hpp"
#include "skyline/catalog.hpp"
#include "skyline/error.hpp"
#include "skyline/gpd.hpp"
#include "skyline/optim.hpp"
#include "skyline/parallel.hpp"

namespace skyline {

// Margin vector layout: (mu_x, sigma_x, xi_x, mu_y, sigma_y, xi_y). City
// parameters live on the transformed scale: log for mu and sigma, identity
// for xi.
using MarginMask = std::array<bool, 6>;

inline constexpr double kMinPopulationSd = 1e-8;

struct HierOptions {
  MarginMask varying = default_varying();
  std::optional<double> fixed_sd;  // hold every population sd at this value
  double initial_sd = 0.3;
  double tol = 1e-6;  // stop when a sweep gains less than this
  int max_sweeps = 500;
  unsigned workers = 1;

  static MarginMask default_varying() { return {false, true, true, false, true, true}; }
};

/// Population normal per varying parameter, transformed scale.
struct HyperParams {
  std::vector<std::size_t> index;  // position in the margin vector
  std::vector<double> mean;
  std::vector<double> sd;
};

struct HierCity {
  std::string city;
  std::size_t n_contributing = 0;
  GpdParams margin_x;
  GpdParams margin_y;
  std::vector<double> eta;  // varying parameters, transformed scale
};

struct HierFit {
  HyperParams hyper;
  std::vector<HierCity> cities;  // in input (name) order
  AsymLogisticParams dep;        // shared by all cities
  GpdParams pooled_x;            // pooled fit; supplies the fixed parameters
  GpdParams pooled_y;
  double loglik = -std::numeric_limits<double>::infinity();  // Laplace-approximate marginal
  std::size_t n_cities = 0;
  std::vector<double> trace;  // loglik after every accepted block update
  int sweeps = 0;
  CensoringSpec spec;
  HierOptions options;

  const HierCity& city(const std::string& name) const {
    for (const auto& c : cities)
      if (c.city == name) return c;
    throw lookup_error("unknown city: " + name);
  }
};

namespace detail {

inline double to_eta(double v, std::size_t idx) { return idx % 3 == 2 ? v : std::log(v); }
inline double from_eta(double e, std::size_t idx) { return idx % 3 == 2 ? e : std::exp(e); }

inline std::array<double, 6> margin_vector(const GpdParams& x, const GpdParams& y) {
  return {x.mu, x.sigma, x.xi, y.mu, y.sigma, y.xi};
}

// Everything one city's likelihood needs besides its own varying parameters.
struct HierModel {
  std::array<double, 6> base{};  // pooled margins
  std::vector<std::size_t> index;
  const CensoringSpec* spec = nullptr;

  BivParams params(std::span<const double> eta, const AsymLogisticParams& dep) const {
    auto v = base;
    for (std::size_t k = 0; k < index.size(); ++k) v[index[k]] = from_eta(eta[k], index[k]);
    return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, dep};
  }

  double loglik(const BivData& data, std::span<const double> eta, const AsymLogisticParams& dep) const {
    for (double e : eta)
      if (!std::isfinite(e)) return -std::numeric_limits<double>::infinity();
    const BivParams p = params(eta, dep);
    if (!(p.margin_x.sigma > 0.0) || !(p.margin_y.sigma > 0.0) || !std::isfinite(p.margin_x.sigma) ||
        !std::isfinite(p.margin_y.sigma))
      return -std::numeric_limits<double>::infinity();
    return censored_loglik(data, p, *spec);
  }
};

// Mode of a city's integrand plus its Laplace term. With eta = m + s z and
// z ~ N(0, I): log int L(m + s z) phi(z) dz ~ g(z*) - 0.5 log det(-g''(z*)).
// The search runs in d = z s / c with c = min(s, 1): non-centred for small
// sds, centred (d = eta - m) for large ones, so the problem stays well
// scaled at both limits.
struct CityMode {
  std::vector<double> z;
  double g = -std::numeric_limits<double>::infinity();
  double laplace = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd vz;  // inverse of -g'' in z
};

inline CityMode city_mode(const HierModel& model, const BivData& data, const std::vector<double>& m,
                          const std::vector<double>& s, const AsymLogisticParams& dep, const std::vector<double>& z0) {
  const std::size_t k = m.size();
  std::vector<double> c(k), d0(k), eta(k);
  for (std::size_t j = 0; j < k; ++j) {
    c[j] = std::min(s[j], 1.0);
    d0[j] = z0[j] * s[j] / c[j];
  }
  auto g = [&](std::span<const double> d) {
    double pen = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      eta[j] = m[j] + c[j] * d[j];
      const double z = c[j] * d[j] / s[j];
      pen += 0.5 * z * z;
    }
    return model.loglik(data, eta, dep) - pen;
  };
  const std::vector<ParamTransform> tr(k, ParamTransform::identity());
  MaximizeOptions o;
  o.compute_covariance = false;
  o.restarts = 2;
  if (!std::isfinite(g(d0))) std::fill(d0.begin(), d0.end(), 0.0);
  CityMode out;
  out.z.assign(k, 0.0);
  OptimResult r;
  try {
    r = maximize(g, d0, tr, o);
  } catch (const optimization_error&) {
    return out;  // no finite point near the start: the caller rejects this state
  }
  for (std::size_t j = 0; j < k; ++j) out.z[j] = c[j] * r.argmax[j] / s[j];
  out.g = r.loglik;
  Eigen::MatrixXd info;
  try {
    info = observed_info(g, r.argmax);
  } catch (const numeric_error&) {
    out.g = -std::numeric_limits<double>::infinity();
    return out;  // mode on the edge of the support: rejected like a non-finite state
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  Eigen::VectorXd lam = es.eigenvalues();
  double logdet = 0.0;
  const double top = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    lam[i] = std::max(lam[i], 1e-10 * top);
    logdet += std::log(lam[i]);
  }
  // back to z: H_z = D H_d D with D = diag(s / c)
  Eigen::VectorXd dinv(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    dinv[static_cast<Eigen::Index>(j)] = c[j] / s[j];
    logdet += 2.0 * std::log(s[j] / c[j]);
  }
  const Eigen::MatrixXd vd = es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  out.vz = dinv.asDiagonal() * vd * dinv.asDiagonal();
  out.laplace = out.g - 0.5 * logdet;
  return out;
}

struct HierState {
  std::vector<double> m, s;
  AsymLogisticParams dep;
  std::vector<CityMode> modes;
  double total = -std::numeric_limits<double>::infinity();
};

inline void evaluate(HierState& st, const HierModel& model, const std::vector<BivData>& data, unsigned workers,
                     const std::vector<CityMode>* warm) {
  const std::size_t n = data.size(), k = st.m.size();
  std::vector<CityMode> modes(n);
  parallel_for(n, workers, [&](std::size_t c) {
    std::vector<double> z0 = warm ? (*warm)[c].z : std::vector<double>(k, 0.0);
    modes[c] = city_mode(model, data[c], st.m, st.s, st.dep, z0);
  });
  std::vector<double> parts(n);
  for (std::size_t c = 0; c < n; ++c) parts[c] = modes[c].laplace;
  st.modes = std::move(modes);
  st.total = pairwise_sum(parts);
}

inline std::vector<double> city_eta(const HierState& st, std::size_t c) {
  std::vector<double> eta(st.m.size());
  for (std::size_t j = 0; j < eta.size(); ++j) eta[j] = st.m[j] + st.s[j] * st.modes[c].z[j];
  return eta;
}

// Clamps a dependence proposal into the open optimizer domain.
inline AsymLogisticParams interior(AsymLogisticParams d) {
  d.theta_x = std::clamp(d.theta_x, 1e-6, 1.0 - 1e-6);
  d.theta_y = std::clamp(d.theta_y, 1e-6, 1.0 - 1e-6);
  d.r = std::clamp(d.r, 1.0 + 1e-6, kRDiverging);
  return d;
}

}  // namespace detail

/**
 * Hierarchical censored bivariate fit: the varying margin parameters of each
 * city are drawn from independent normals on the transformed scale; the
 * remaining margin parameters stay at the pooled fit and the dependence
 * parameters are shared.
 *
 * Hyperparameters are estimated by empirical Bayes on the Laplace-approximate
 * marginal likelihood (city parameters integrated out around their modes).
 * Block updates, each kept only if the objective does not drop: city modes;
 * a Newton step for the population means; an EM step plus a pattern
 * search on each log sd; the shared dependence parameters with the city parameters at
 * their modes. Stops when a sweep gains less than options.tol.
 */
inline HierFit fit_hierarchical(const std::map<std::string, Catalog>& groups, const CensoringSpec& spec = {},
                                const HierOptions& options = {}) {
  spec.validate();
  if (groups.size() < 3)
    throw data_error("fit_hierarchical: need at least 3 cities to estimate a population sd (got " +
                     std::to_string(groups.size()) + ")");
  if (options.fixed_sd && !(*options.fixed_sd > 0.0)) throw argument_error("fit_hierarchical: fixed_sd must be > 0");
  std::vector<std::string> names;
  std::vector<BivData> data;
  std::vector<BuildingRecord> all;
  for (const auto& [name, cat] : groups) {
    data.push_back(make_biv_data(cat, spec));
    if (data.back().size() == 0)
      throw data_error("fit_hierarchical: city '" + name + "' has no record exceeding either threshold");
    names.push_back(name);
    all.insert(all.end(), cat.begin(), cat.end());
  }
  const BivFit pooled = fit_bivariate(Catalog(std::move(all)), spec);
  {
    // Work in an order fixed by the data, not the names, so relabeling the
    // cities cannot change any reduction order.
    std::vector<std::size_t> order(names.size());
    std::vector<std::array<double, 3>> key(names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
      double sh = 0.0, sf = 0.0;
      for (std::size_t i = 0; i < data[c].size(); ++i) {
        sh += data[c].height[i];
        sf += data[c].floors[i];
      }
      key[c] = {static_cast<double>(data[c].size()), sh, sf};
      order[c] = c;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    std::vector<std::string> n2;
    std::vector<BivData> d2;
    for (std::size_t c : order) {
      n2.push_back(names[c]);
      d2.push_back(std::move(data[c]));
    }
    names = std::move(n2);
    data = std::move(d2);
  }

  detail::HierModel model;
  model.base = detail::margin_vector(pooled.params.margin_x, pooled.params.margin_y);
  model.spec = &spec;
  for (std::size_t i = 0; i < 6; ++i)
    if (options.varying[i]) model.index.push_back(i);
  if (model.index.empty()) throw argument_error("fit_hierarchical: no varying parameter selected");
  const std::size_t k = model.index.size(), n = data.size();

  detail::HierState st;
  for (std::size_t i : model.index) st.m.push_back(detail::to_eta(model.base[i], i));
  st.s.assign(k, options.fixed_sd.value_or(options.initial_sd));
  st.dep = pooled.params.dep;
  detail::evaluate(st, model, data, options.workers, nullptr);
  if (!std::isfinite(st.total)) throw fit_error("fit_hierarchical: objective not finite at the pooled start");

  HierFit fit;
  fit.spec = spec;
  fit.options = options;
  fit.trace.push_back(st.total);

  auto try_accept = [&](detail::HierState cand) {
    detail::evaluate(cand, model, data, options.workers, &st.modes);
    if (std::isfinite(cand.total) && cand.total >= st.total) {
      st = std::move(cand);
      fit.trace.push_back(st.total);
      return true;
    }
    return false;
  };

  std::vector<double> log_step(k, -0.5);
  bool converged = false;
  int sweep = 0;
  for (; sweep < options.max_sweeps; ++sweep) {
    const double start = st.total;

    // population means: Newton step on the marginal, city curvature from the
    // likelihood at each mode
    {
      Eigen::MatrixXd W = Eigen::MatrixXd::Zero(k, k);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
      std::vector<Eigen::MatrixXd> Wc(n);
      std::vector<Eigen::VectorXd> gc(n);
      parallel_for(n, options.workers, [&](std::size_t c) {
        const auto eta = detail::city_eta(st, c);
        auto f = [&](std::span<const double> e) { return model.loglik(data[c], e, st.dep); };
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(eta.data(), static_cast<Eigen::Index>(k));
        auto fe = [&](const Eigen::VectorXd& v) {
          return f(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
        };
        gc[c] = detail::numeric_gradient(fe, x, fe(x));
        Eigen::MatrixXd H;
        try {
          H = observed_info(f, eta);
        } catch (const numeric_error&) {
          gc[c].setZero();  // city sits on the edge of the support; leave it out of the step
          Wc[c] = Eigen::MatrixXd::Zero(k, k);
          return;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
        H = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k, k);
        for (std::size_t j = 0; j < k; ++j) S(j, j) = st.s[j] * st.s[j];
        // (S + H^-1)^-1 written without inverting H
        Wc[c] = H * (S * H + Eigen::MatrixXd::Identity(k, k)).inverse();
      });
      for (std::size_t c = 0; c < n; ++c) {
        W += 0.5 * (Wc[c] + Wc[c].transpose());
        grad += gc[c];
      }
      if (grad.allFinite() && W.allFinite()) {
        const double ridge = 1e-12 * std::max(1.0, W.diagonal().cwiseAbs().maxCoeff());
        Eigen::VectorXd step = (W + ridge * Eigen::MatrixXd::Identity(k, k)).ldlt().solve(grad);
        // trust region on the transformed scale
        const double big = step.lpNorm<Eigen::Infinity>();
        if (big > 1.0) step /= big;
        double a = 1.0;
        for (int t = 0; t < 8 && step.allFinite(); ++t, a *= 0.5) {
          detail::HierState cand = st;
          for (std::size_t j = 0; j < k; ++j) cand.m[j] += a * step[j];
          if (try_accept(std::move(cand))) break;
        }
      }
    }

    // population sds: EM update on the Laplace posterior, then a pattern
    // search on each log sd (EM crawls when an sd heads for zero)
    if (!options.fixed_sd) {
      std::vector<double> s_new(k);
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double d = st.s[j] * st.modes[c].z[j];
          acc += d * d + st.s[j] * st.s[j] * st.modes[c].vz(j, j);
        }
        s_new[j] = std::max(std::sqrt(acc / static_cast<double>(n)), kMinPopulationSd);
      }
      detail::HierState cand = st;
      cand.s = s_new;
      try_accept(std::move(cand));
      for (std::size_t j = 0; j < k; ++j) {
        for (int t = 0; t < 12 && std::abs(log_step[j]) > 1e-3; ++t) {
          detail::HierState ext = st;
          ext.s[j] = std::max(st.s[j] * std::exp(log_step[j]), kMinPopulationSd);
          if (ext.s[j] != st.s[j] && try_accept(std::move(ext))) {
            log_step[j] *= 2.0;
          } else {
            log_step[j] *= -0.5;
            if (st.s[j] <= kMinPopulationSd && log_step[j] < 0.0) break;
          }
        }
      }
    }

    // shared dependence with city parameters at their modes
    {
      std::vector<std::vector<double>> etas(n);
      for (std::size_t c = 0; c < n; ++c) etas[c] = detail::city_eta(st, c);
      auto f = [&](std::span<const double> q) {
        const AsymLogisticParams d{q[0], q[1], q[2]};
        std::vector<double> parts(n);
        for (std::size_t c = 0; c < n; ++c) parts[c] = model.loglik(data[c], etas[c], d);
        return detail::pairwise_sum(parts);
      };
      const auto d0 = detail::interior(st.dep);
      const std::vector<double> init{d0.theta_x, d0.theta_y, d0.r};
      const std::vector<ParamTransform> tr{ParamTransform::logit(0.0, 1.0), ParamTransform::logit(0.0, 1.0),
                                           ParamTransform::shifted_log(1.0)};
      MaximizeOptions o;
      o.compute_covariance = false;
      o.restarts = 0;
      try {
        const auto r = maximize(f, init, tr, o);
        const AsymLogisticParams prop = detail::interior({r.argmax[0], r.argmax[1], r.argmax[2]});
        for (double a : {1.0, 0.5, 0.25}) {
          detail::HierState cand = st;
          cand.dep = {st.dep.theta_x + a * (prop.theta_x - st.dep.theta_x),
                      st.dep.theta_y + a * (prop.theta_y - st.dep.theta_y), st.dep.r + a * (prop.r - st.dep.r)};
          if (try_accept(std::move(cand))) break;
        }
      } catch (const optimization_error&) {
      }
    }

    if (st.total - start < options.tol) {
      converged = true;
      ++sweep;
      break;
    }
  }
  if (!converged)
    throw fit_error("fit_hierarchical: no convergence after " + std::to_string(options.max_sweeps) +
                    " sweeps (last objective " + std::to_string(st.total) + ")");

  fit.hyper.index = model.index;
  fit.hyper.mean = st.m;
  fit.hyper.sd = st.s;
  fit.dep = st.dep;
  fit.pooled_x = pooled.params.margin_x;
  fit.pooled_y = pooled.params.margin_y;
  fit.loglik = st.total;
  fit.n_cities = n;
  fit.sweeps = sweep;
  for (std::size_t c = 0; c < n; ++c) {
    HierCity hc;
    hc.city = names[c];
    hc.n_contributing = data[c].size();
    hc.eta = detail::city_eta(st, c);
    const BivParams p = model.params(hc.eta, st.dep);
    hc.margin_x = p.margin_x;
    hc.margin_y = p.margin_y;
    fit.cities.push_back(std::move(hc));
  }
  std::sort(fit.cities.begin(), fit.cities.end(), [](const HierCity& a, const HierCity& b) { return a.city < b.city; });
  return fit;
}

struct CityMedian {
  double height = 0.0;  // meters
  double floors = 0.0;  // raw floor count
};

/// Medians of a city's fitted margins, floors unscaled.
inline CityMedian city_median(const HierFit& fit, const std::string& city) {
  const auto& c = fit.city(city);
  return {gpd_quantile(c.margin_x, 0.5), gpd_quantile(c.margin_y, 0.5) / fit.spec.floor_scale};
}

inline constexpr std::size_t kMinStratifiedRecords = 10;

struct StratifiedCity {
  std::string city;
  std::size_t n_contributing = 0;
  std::optional<std::vector<double>> eta;  // per-city MLE, transformed scale
  std::optional<GpdParams> margin_x;
  std::optional<GpdParams> margin_y;
};

/**
 * Per-city maximum likelihood of the varying parameters with everything else
 * held at the hierarchical fit. Cities with fewer than 10 contributing records,
 * or whose fit does not converge, get no estimate.
 */
inline std::vector<StratifiedCity> stratified_fits(const HierFit& fit, const std::map<std::string, Catalog>& groups) {
  detail::HierModel model;
  model.base = detail::margin_vector(fit.pooled_x, fit.pooled_y);
  model.index = fit.hyper.index;
  model.spec = &fit.spec;
  std::vector<StratifiedCity> out(fit.cities.size());
  parallel_for(fit.cities.size(), fit.options.workers, [&](std::size_t c) {
    const auto& hc = fit.cities[c];
    auto it = groups.find(hc.city);
    if (it == groups.end()) throw lookup_error("stratified_fits: city missing from groups: " + hc.city);
    const BivData data = make_biv_data(it->second, fit.spec);
    out[c].city = hc.city;
    out[c].n_contributing = data.size();
    if (data.size() < kMinStratifiedRecords) return;
    auto f = [&](std::span<const double> e) { return model.loglik(data, e, fit.dep); };
    const std::vector<ParamTransform> tr(hc.eta.size(), ParamTransform::identity());
    MaximizeOptions o;
    o.compute_covariance = false;
    try {
      const auto r = maximize(f, hc.eta, tr, o);
      if (!r.converged) return;
      out[c].eta = r.argmax;
      const BivParams p = model.params(r.argmax, fit.dep);
      out[c].margin_x = p.margin_x;
      out[c].margin_y = p.margin_y;
    } catch (const optimization_error&) {
    }
  });
  return out;
}

struct ShrinkageRow {
  std::string city;
  std::size_t n = 0;  // contributing records
  std::optional<double> strat_h;
  double hier_h = 0.0;
  double pooled_h = 0.0;
  std::optional<double> strat_f;
  double hier_f = 0.0;
  double pooled_f = 0.0;
};

/// Stratified, hierarchical and pooled medians (height m, floors) per city.
inline std::vector<ShrinkageRow> shrinkage_report(const HierFit& fit, const std::map<std::string, Catalog>& groups) {
  const auto strat = stratified_fits(fit, groups);
  const double s = fit.spec.floor_scale;
  const double pooled_h = gpd_quantile(fit.pooled_x, 0.5), pooled_f = gpd_quantile(fit.pooled_y, 0.5) / s;
  std::vector<ShrinkageRow> rows;
  for (std::size_t c = 0; c < fit.cities.size(); ++c) {
    const auto med = city_median(fit, fit.cities[c].city);
    ShrinkageRow row;
    row.city = fit.cities[c].city;
    row.n = fit.cities[c].n_contributing;
    if (strat[c].margin_x) {
      row.strat_h = gpd_quantile(*strat[c].margin_x, 0.5);
      row.strat_f = gpd_quantile(*strat[c].margin_y, 0.5) / s;
    }
    row.hier_h = med.height;
    row.hier_f = med.floors;
    row.pooled_h = pooled_h;
    row.pooled_f = pooled_f;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace skyline

#endif  // SKYLINE_HIER_HPP_
