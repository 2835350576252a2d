#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "data/gpd_sample100.hpp"
#include "skyline/gpd.hpp"

namespace skyline {
namespace {

std::vector<double> draws(const GpdParams& p, std::size_t n, std::uint64_t seed) {
  return gpd_sample(p, n, seed);
}

double loglik(const GpdParams& p, const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += gpd_eval(p, v, GpdKind::log_pdf);
  return s;
}

TEST(GpdEval, Examples) {
  const GpdParams p{225.0, 100.0, 0.2};
  EXPECT_EQ(gpd_eval(p, 225.0, GpdKind::cdf), 0.0);
  EXPECT_EQ(gpd_eval(p, 225.0, GpdKind::survival), 1.0);
  EXPECT_NEAR(gpd_eval(p, 325.0, GpdKind::cdf), 1.0 - std::pow(1.2, -5.0), 1e-14);
  EXPECT_NEAR(gpd_eval(p, 325.0, GpdKind::cdf), 0.59812, 1e-5);
  const GpdParams e{10.0, 2.0, 0.0};
  EXPECT_NEAR(gpd_eval(e, 12.0, GpdKind::cdf), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(gpd_eval(e, 12.0, GpdKind::pdf), 0.5 * std::exp(-1.0), 1e-15);
}

TEST(GpdEval, CdfClampsPdfThrowsOutsideSupport) {
  const GpdParams p{100.0, 20.0, -0.5};  // upper endpoint 140
  EXPECT_EQ(gpd_eval(p, 50.0, GpdKind::cdf), 0.0);
  EXPECT_EQ(gpd_eval(p, 150.0, GpdKind::cdf), 1.0);
  EXPECT_EQ(gpd_eval(p, 150.0, GpdKind::survival), 0.0);
  EXPECT_THROW(gpd_eval(p, 50.0, GpdKind::pdf), domain_error);
  EXPECT_THROW(gpd_eval(p, 150.0, GpdKind::log_pdf), domain_error);
  EXPECT_THROW(gpd_eval(GpdParams{0.0, -1.0, 0.1}, 1.0, GpdKind::cdf), argument_error);
}

TEST(GpdEval, PdfIntegratesToOne) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> mu(-50, 300), sigma(0.5, 80), xi(-0.9, 0.9);
  for (int k = 0; k < 40; ++k) {
    const GpdParams p{mu(gen), sigma(gen), xi(gen)};
    double total;
    auto pdf = [&](double x) { return gpd_eval(p, x, GpdKind::pdf); };
    if (p.xi < 0) {
      const double top = p.mu - p.sigma / p.xi;
      total = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(pdf, p.mu, top, 15, 1e-12);
    } else {
      boost::math::quadrature::exp_sinh<double> es;
      total = es.integrate([&](double t) { return pdf(p.mu + t); }, 0.0, std::numeric_limits<double>::infinity());
    }
    EXPECT_NEAR(total, 1.0, 1e-6) << p.mu << " " << p.sigma << " " << p.xi;
  }
}

TEST(GpdEval, CdfMonotoneAndXiZeroContinuous) {
  const GpdParams a{0.0, 1.0, 1e-9}, b{0.0, 1.0, 0.0}, c{0.0, 1.0, 5e-5};
  double last = 0.0;
  for (double x = 0.0; x < 60.0; x += 0.05) {
    const double fa = gpd_eval(a, x, GpdKind::cdf);
    EXPECT_LT(std::abs(fa - gpd_eval(b, x, GpdKind::cdf)), 1e-6);
    EXPECT_LT(std::abs(gpd_eval(c, x, GpdKind::cdf) - gpd_eval(b, x, GpdKind::cdf)), 1e-3);
    EXPECT_GE(fa, last);
    last = fa;
  }
}

TEST(GpdQuantile, ExamplesAndRoundTrip) {
  const GpdParams p{225.0, 100.0, 0.2};
  EXPECT_NEAR(gpd_quantile(p, 1.0 - std::pow(1.2, -5.0)), 325.0, 1e-9);
  EXPECT_NEAR(gpd_quantile(p, 0.59812), 325.0, 1e-2);  // rounded p
  EXPECT_NEAR(gpd_quantile(GpdParams{5.0, 3.0, 0.0}, 0.5), 5.0 + 3.0 * std::log(2.0), 1e-12);
  EXPECT_THROW(gpd_quantile(p, 0.0), argument_error);
  EXPECT_THROW(gpd_quantile(p, 1.0), argument_error);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> mu(0, 300), sigma(1, 80), xi(-0.6, 0.8), u(0.001, 0.999);
  for (int k = 0; k < 100; ++k) {
    const GpdParams q{mu(gen), sigma(gen), xi(gen)};
    const double x = gpd_quantile(q, u(gen));
    const double back = gpd_quantile(q, gpd_eval(q, x, GpdKind::cdf));
    EXPECT_NEAR(back, x, 1e-10 * std::max(1.0, std::abs(x)));
  }
}

TEST(GpdSample, ForcedUniformGivesMedian) {
  const GpdParams p{225.0, 31.5, 0.2};
  auto half = [] { return 0.5; };
  const auto x = gpd_sample(p, 1, half);
  ASSERT_EQ(x.size(), 1u);
  EXPECT_NEAR(x[0], 225.0 + 31.5 * (std::pow(2.0, 0.2) - 1.0) / 0.2, 1e-10);
  EXPECT_NEAR(gpd_sample(GpdParams{0.0, 1.0, 0.0}, 1, half)[0], std::log(2.0), 1e-14);
}

TEST(GpdSample, KolmogorovBandAndDeterminism) {
  const GpdParams p{225.0, 31.5, 0.2};
  const std::size_t n = 100000;
  auto x = gpd_sample(p, n, 42);
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = gpd_eval(p, x[i], GpdKind::cdf);
    d = std::max({d, (i + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  EXPECT_LT(d, 1.358 / std::sqrt(static_cast<double>(n)));
  EXPECT_EQ(gpd_sample(p, 1000, 9, 1), gpd_sample(p, 1000, 9, 4));
  EXPECT_NE(gpd_sample(p, 10, 9), gpd_sample(p, 10, 10));
}

TEST(FitGpd, RejectsSmallOrInvalidData) {
  std::vector<double> x(9, 300.0);
  EXPECT_THROW(fit_gpd(x, 225.0), data_error);
  std::vector<double> y(12, 300.0);
  y[3] = 200.0;
  EXPECT_THROW(fit_gpd(y, 225.0), argument_error);
}

// Nested grid search over (sigma, xi) with mu = u, as a brute-force oracle.
double grid_oracle(const std::vector<double>& x, double u) {
  double best = -std::numeric_limits<double>::infinity();
  double ls0 = std::log(10.0), ls1 = std::log(200.0), x0 = -0.5, x1 = 1.0;
  for (int level = 0; level < 8; ++level) {
    const int m = 80;
    double bls = 0, bxi = 0;
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j <= m; ++j) {
        const double ls = ls0 + (ls1 - ls0) * i / m, xi = x0 + (x1 - x0) * j / m;
        const GpdParams p{u, std::exp(ls), xi};
        double s = 0.0;
        bool ok = true;
        for (double v : x) {
          const double z = 1.0 + xi * (v - u) / p.sigma;
          if (z <= 0) {
            ok = false;
            break;
          }
          s += gpd_eval(p, v, GpdKind::log_pdf);
        }
        if (ok && s > best) {
          best = s;
          bls = ls;
          bxi = xi;
        }
      }
    const double wl = (ls1 - ls0) / m * 3, wx = (x1 - x0) / m * 3;
    ls0 = bls - wl;
    ls1 = bls + wl;
    x0 = bxi - wx;
    x1 = bxi + wx;
  }
  return best;
}

TEST(FitGpd, FixedMuMatchesGridOracle) {
  const std::vector<double> x(kGpdSample100.begin(), kGpdSample100.end());
  const auto fit = fit_gpd(x, 225.0, MuMode::fixed_at_threshold);
  EXPECT_EQ(fit.params.mu, 225.0);
  EXPECT_EQ(fit.n_exceed, 100u);
  EXPECT_NEAR(fit.loglik, grid_oracle(x, 225.0), 1e-4);
  EXPECT_GE(fit.loglik, grid_oracle(x, 225.0) - 1e-9);
  EXPECT_GT(fit.se[1], 0.0);
  EXPECT_GT(fit.se[2], 0.0);
}

TEST(FitGpd, FreeMuStaysInsideInterval) {
  const std::vector<double> x(kGpdSample100.begin(), kGpdSample100.end());
  const auto fit = fit_gpd(x, 225.0);
  EXPECT_GT(fit.params.mu, 0.0);
  EXPECT_LT(fit.params.mu, *std::min_element(x.begin(), x.end()));
  EXPECT_GE(fit.loglik, fit_gpd(x, 225.0, MuMode::fixed_at_threshold).loglik - 1e-8);
}

TEST(FitGpd, ScaleEquivariance) {
  const std::vector<double> x(kGpdSample100.begin(), kGpdSample100.end());
  const double c = 3.7;
  std::vector<double> y;
  for (double v : x) y.push_back(c * v);
  for (MuMode mode : {MuMode::fixed_at_threshold, MuMode::free}) {
    const auto a = fit_gpd(x, 225.0, mode), b = fit_gpd(y, c * 225.0, mode);
    EXPECT_NEAR(a.params.xi, b.params.xi, 1e-6);
    EXPECT_NEAR(c * a.params.sigma / b.params.sigma, 1.0, 1e-6);
  }
}

TEST(FitGpd, RecoversShapeAndBeatsTruth) {
  const GpdParams truth{225.0, 31.5, 0.2};
  int hits = 0;
  const int trials = 200;
  for (int s = 0; s < trials; ++s) {
    const auto x = draws(truth, 325, 1000 + s);
    const auto fit = fit_gpd(x, 225.0);
    if (std::abs(fit.params.xi - 0.2) <= 0.15) ++hits;
    EXPECT_GE(fit.loglik, loglik(truth, x) - 1e-9) << "seed " << s;
  }
  EXPECT_GE(hits, static_cast<int>(0.95 * trials));
}

TEST(ThresholdScan, DefaultGridSingleRowAndSkips) {
  const auto grid = default_threshold_grid();
  ASSERT_EQ(grid.size(), 9u);
  EXPECT_EQ(grid.front(), 150.0);
  EXPECT_EQ(grid.back(), 350.0);
  const std::vector<double> x(kGpdSample100.begin(), kGpdSample100.end());
  const std::vector<double> one = {225.0};
  const auto scan = threshold_scan(x, one);
  ASSERT_EQ(scan.rows.size(), 1u);
  const auto fit = fit_gpd(x, 225.0, MuMode::fixed_at_threshold);
  EXPECT_NEAR(scan.rows[0].xi_hat, fit.params.xi, 1e-12);
  EXPECT_NEAR(scan.rows[0].sigma_hat, fit.params.sigma, 1e-10);
  EXPECT_EQ(scan.rows[0].n_exceed, 100u);
  const std::vector<double> hi = {225.0, 480.0};
  const auto s2 = threshold_scan(x, hi);
  EXPECT_EQ(s2.rows.size(), 1u);
  ASSERT_EQ(s2.skipped.size(), 1u);
  EXPECT_EQ(s2.skipped[0].u, 480.0);
  EXPECT_THROW(threshold_scan(x, std::vector<double>{}), argument_error);
}

TEST(ThresholdScan, CoverageAboveTrueThreshold) {
  // Pooled over the default-grid rows at or above the true threshold. Per-row
  // Wald coverage drops below 90% once only a few dozen exceedances remain.
  const GpdParams truth{225.0, 31.5, 0.2};
  std::vector<double> grid;
  for (double u : default_threshold_grid())
    if (u >= 225.0) grid.push_back(u);
  int covered = 0, seen = 0;
  for (int s = 0; s < 200; ++s) {
    const auto x = draws(truth, 325, 5000 + s);
    const auto scan = threshold_scan(x, grid, 1);
    for (const auto& r : scan.rows) {
      ++seen;
      if (r.xi_lo95 <= 0.2 && 0.2 <= r.xi_hi95) ++covered;
      EXPECT_LE(r.xi_lo95, r.xi_lo50);
      EXPECT_LE(r.xi_lo50, r.xi_hat);
      EXPECT_LE(r.xi_hat, r.xi_hi50);
      EXPECT_LE(r.xi_hi50, r.xi_hi95);
    }
  }
  ASSERT_GT(seen, 900);
  EXPECT_GE(covered, 0.9 * seen);
  RecordProperty("coverage", std::to_string(static_cast<double>(covered) / seen));
}

TEST(Hill, Examples) {
  const std::vector<double> c(20, 300.0);
  const std::vector<std::size_t> ks = {1, 5, 19};
  for (const auto& h : hill_estimates(c, ks)) EXPECT_EQ(h.xi, 0.0);
  const std::vector<double> x = {200, 210, 260, 240, 300};
  const std::vector<std::size_t> k1 = {1};
  EXPECT_NEAR(hill_estimates(x, k1)[0].xi, std::log(300.0 / 260.0), 1e-15);
  const std::vector<std::size_t> k5 = {5};
  EXPECT_THROW(hill_estimates(x, k5), argument_error);
  const std::vector<double> bad = {1.0, -2.0, 3.0};
  EXPECT_THROW(hill_estimates(bad, k1), domain_error);
}

TEST(Hill, ParetoTail) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(20000);
  for (auto& v : x) v = 100.0 * std::pow(1.0 - u(gen), -0.2);
  const std::vector<std::size_t> ks = {200, 500, 1000};
  for (const auto& h : hill_estimates(x, ks)) EXPECT_NEAR(h.xi, 0.2, 0.03) << h.k;
}

TEST(KolmogorovSurvival, KnownValues) {
  EXPECT_NEAR(kolmogorov_survival(0.3), 0.9999906941986655, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(0.5), 0.9639452436648751, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.0), 0.26999967167735456, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.358), 0.05002679733444698, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(2.0), 0.0006709252557796953, 1e-12);
  EXPECT_EQ(kolmogorov_survival(0.0), 1.0);
}

TEST(UniformQq, SinglePointAndOrdering) {
  GpdFit fit;
  fit.params = {225.0, 31.5, 0.2};
  fit.threshold = 225.0;
  const std::vector<double> one = {260.0};
  const auto qq = uniform_qq(one, fit);
  ASSERT_EQ(qq.points.size(), 1u);
  EXPECT_EQ(qq.points[0].emp, 0.5);
  EXPECT_NEAR(qq.points[0].theo, gpd_eval(fit.params, 260.0, GpdKind::cdf), 1e-15);
  const std::vector<double> x(kGpdSample100.begin(), kGpdSample100.end());
  const auto q2 = uniform_qq(x, fit);
  for (std::size_t i = 1; i < q2.points.size(); ++i) EXPECT_GE(q2.points[i].theo, q2.points[i - 1].theo);
  EXPECT_GE(q2.ks_p_value, 0.0);
  EXPECT_LE(q2.ks_p_value, 1.0);
}

TEST(UniformQq, NullSimulationAndSextiles) {
  const GpdParams truth{225.0, 31.5, 0.2};
  const auto base = fit_gpd(draws(truth, 325, 77), 225.0);
  int pass = 0;
  for (int s = 0; s < 100; ++s) {
    const auto x = draws(base.params, 325, 9000 + s);
    if (uniform_qq(x, base).ks_p_value > 0.05) ++pass;
  }
  EXPECT_GE(pass, 90);
  // six chronological panels on one shared fit
  const auto x = draws(base.params, 325, 31337);
  int panels_ok = 0;
  for (int g = 0; g < 6; ++g) {
    const std::size_t lo = x.size() * g / 6, hi = x.size() * (g + 1) / 6;
    const std::vector<double> part(x.begin() + lo, x.begin() + hi);
    if (uniform_qq(part, base).ks_p_value > 0.01) ++panels_ok;
  }
  EXPECT_GE(panels_ok, 5);
}

}  // namespace
}  // namespace skyline
