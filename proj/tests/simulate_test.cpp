#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "skyline/simulate.hpp"

namespace skyline {
namespace {

const GpdParams kCalibrated{225.0, 31.5, 0.2};
const double kLn108 = std::log(1.08);

double calibrated_alpha() {
  double s = 0.0;
  for (int t = 1950; t <= 2017; ++t) s += std::exp(kLn108 * (t - 1950));
  return std::log(3251.0 / s) - kLn108 * 1950.0;
}

PoissonTrendFit trend_of(double alpha, double beta) {
  PoissonTrendFit f;
  f.alpha = alpha;
  f.beta = beta;
  f.center = 1983.5;
  f.alpha_centered = alpha + beta * f.center;
  f.year_from = 1950;
  f.year_to = 2017;
  return f;
}

double mc_se(double p, std::size_t reps) { return std::sqrt(p * (1.0 - p) / static_cast<double>(reps)); }

TEST(ExpectedExtremeCount, Arithmetic) {
  const auto fit = trend_of(calibrated_alpha(), kLn108);
  double cum = 0.0;
  for (int t = 2018; t <= 2050; ++t) cum += fit.expected(t);
  EXPECT_EQ(expected_extreme_count(fit, 2018, 2050, 1.0), std::llround(cum));
  EXPECT_EQ(expected_extreme_count(fit, 2018, 2050, 0.22), std::llround(0.22 * cum));
  EXPECT_EQ(expected_extreme_count(fit, 2018, 2050, 325.0 / 3251.0), std::llround(cum * 325.0 / 3251.0));
  // a flat trend: 38,000 over one year times 0.22
  const auto flat = trend_of(std::log(38000.0), 0.0);
  EXPECT_EQ(expected_extreme_count(flat, 2050, 2050, 0.22), 8360);
  EXPECT_THROW(expected_extreme_count(fit, 2018, 2050, 0.0), argument_error);
  EXPECT_THROW(expected_extreme_count(fit, 2018, 2050, 1.5), argument_error);
  EXPECT_THROW(expected_extreme_count(fit, 2050, 2018, 0.5), argument_error);
}

TEST(MaxQuantileAnalytic, ClosedForms) {
  for (double p : {0.05, 0.5, 0.975})
    EXPECT_NEAR(max_quantile_analytic(kCalibrated, 1, p), gpd_quantile(kCalibrated, p), 1e-9);
  const GpdParams e{100.0, 20.0, 0.0};
  for (std::size_t n : {1u, 10u, 1000u, 100000u}) {
    const double want = 100.0 - 20.0 * std::log(-std::expm1(std::log(0.5) / static_cast<double>(n)));
    EXPECT_NEAR(max_quantile_analytic(e, n, 0.5), want, 1e-9 * want);
  }
  // exponential maxima: median -> mu + sigma log(n / log 2)
  EXPECT_NEAR(max_quantile_analytic(e, 1000000, 0.5), 100.0 + 20.0 * std::log(1e6 / std::log(2.0)), 1e-4);
  // inverse of the analytic exceedance law
  for (std::size_t n : {1u, 50u, 8400u})
    for (double p : {0.1, 0.5, 0.95, 0.999})
      EXPECT_NEAR(max_exceedance_analytic(kCalibrated, n, max_quantile_analytic(kCalibrated, n, p)), 1.0 - p, 1e-9);
  EXPECT_THROW(max_quantile_analytic(kCalibrated, 0, 0.5), argument_error);
  EXPECT_THROW(max_quantile_analytic(kCalibrated, 10, 1.0), argument_error);
}

TEST(SimulateMax, SingleDrawIsTheSurvival) {
  MaxSimSpec spec;
  spec.n_buildings = 1;
  spec.replicates = 20000;
  spec.seed = 11;
  const std::vector<double> marks{240.0, 260.0, 300.0, 400.0};
  const auto r = simulate_max(kCalibrated, spec, marks);
  ASSERT_EQ(r.exceedance.size(), marks.size());
  for (const auto& e : r.exceedance) {
    const double s = gpd_eval(kCalibrated, e.height, GpdKind::survival);
    EXPECT_LE(std::abs(e.probability - s), 3.0 * mc_se(s, spec.replicates)) << e.height;
  }
}

TEST(SimulateMax, MatchesAnalyticLaw) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> sig(20.0, 50.0), xi(-0.1, 0.3);
  std::uniform_int_distribution<std::size_t> nb(20, 2000);
  for (int d = 0; d < 20; ++d) {
    const GpdParams p{225.0, sig(gen), xi(gen)};
    MaxSimSpec spec;
    spec.n_buildings = nb(gen);
    spec.replicates = 2000;
    spec.seed = 100 + d;
    std::vector<double> marks;
    for (double q : {0.3, 0.6, 0.9}) marks.push_back(max_quantile_analytic(p, spec.n_buildings, q));
    const auto r = simulate_max(p, spec, marks);
    for (const auto& e : r.exceedance) {
      const double a = max_exceedance_analytic(p, spec.n_buildings, e.height);
      EXPECT_LE(std::abs(e.probability - a), 3.0 * mc_se(a, spec.replicates)) << "draw " << d << " z " << e.height;
    }
  }
}

TEST(SimulateMax, CalibratedRun) {
  MaxSimSpec spec;
  spec.seed = 2050;
  const auto r = simulate_max(kCalibrated, spec);
  ASSERT_EQ(r.maxima.size(), 1000u);
  ASSERT_EQ(r.exceedance.size(), 3u);
  EXPECT_EQ(r.exceedance[0].height, 828.0);
  EXPECT_EQ(r.exceedance[2].height, 1609.34);
  EXPECT_GT(r.exceedance[0].probability, 0.9);
  EXPECT_GE(r.exceedance[2].probability, 0.03);
  EXPECT_LE(r.exceedance[2].probability, 0.2);
  for (std::size_t i = 1; i < r.quantiles.size(); ++i) {
    EXPECT_GT(r.quantiles[i].percentile, r.quantiles[i - 1].percentile);
    EXPECT_GE(r.quantiles[i].value, r.quantiles[i - 1].value);
  }
  // MC 97.5% quantile inside the 3 MC-SE band of the analytic law; a single
  // seed misses about 1% of the time, so count over seeds
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MaxSimSpec s = spec;
    s.seed = seed;
    const auto run = simulate_max(kCalibrated, s);
    const auto q = std::find_if(run.quantiles.begin(), run.quantiles.end(), [](const auto& x) { return x.percentile == 97.5; });
    ASSERT_NE(q, run.quantiles.end());
    const double level = 1.0 - max_exceedance_analytic(kCalibrated, s.n_buildings, q->value);
    if (std::abs(level - 0.975) <= 3.0 * mc_se(0.975, s.replicates)) ++inside;
  }
  EXPECT_GE(inside, 18);
  for (const auto& e : r.exceedance) {
    EXPECT_GE(e.probability, 0.0);
    EXPECT_LE(e.probability, 1.0);
  }
}

TEST(SimulateMax, MonotoneInBuildingsWithCommonNumbers) {
  const std::vector<double> marks{400.0, 600.0, 828.0, 1000.0};
  std::vector<double> prev(marks.size(), 0.0);
  std::vector<double> prev_max;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    MaxSimSpec spec;
    spec.n_buildings = n;
    spec.replicates = 500;
    spec.seed = 3;
    const auto r = simulate_max(kCalibrated, spec, marks);
    for (std::size_t k = 0; k < marks.size(); ++k) {
      EXPECT_GE(r.exceedance[k].probability, prev[k]) << n << " " << marks[k];
      prev[k] = r.exceedance[k].probability;
    }
    if (!prev_max.empty())
      for (std::size_t i = 0; i < r.maxima.size(); ++i) EXPECT_GE(r.maxima[i], prev_max[i]);
    prev_max = r.maxima;
  }
}

TEST(SimulateMax, StandardErrorScaling) {
  MaxSimSpec spec;
  spec.n_buildings = 8400;
  spec.replicates = 1000;
  spec.seed = 8;
  const std::vector<double> marks{1000.0};
  const auto a = simulate_max(kCalibrated, spec, marks);
  spec.replicates = 2000;
  const auto b = simulate_max(kCalibrated, spec, marks);
  const double ratio = a.exceedance[0].mc_se / b.exceedance[0].mc_se;
  EXPECT_NEAR(ratio / std::sqrt(2.0), 1.0, 0.2);
}

TEST(SimulateMax, StreamSplittingAndWorkers) {
  MaxSimSpec spec;
  spec.n_buildings = 500;
  spec.replicates = 500;
  spec.seed = 77;
  const auto whole = simulate_max(kCalibrated, spec);
  spec.replicates = 300;
  const auto first = simulate_max(kCalibrated, spec);
  spec.replicates = 200;
  spec.replicate_offset = 300;
  const auto second = simulate_max(kCalibrated, spec);
  std::vector<double> joined = first.maxima;
  joined.insert(joined.end(), second.maxima.begin(), second.maxima.end());
  EXPECT_EQ(joined, whole.maxima);

  spec.replicate_offset = 0;
  spec.replicates = 500;
  spec.workers = 4;
  const auto par = simulate_max(kCalibrated, spec);
  EXPECT_EQ(par.maxima, whole.maxima);
  for (std::size_t i = 0; i < par.quantiles.size(); ++i) EXPECT_EQ(par.quantiles[i].value, whole.quantiles[i].value);
}

TEST(SimulateMax, PoissonCountsMatchMixtureLaw) {
  MaxSimSpec spec;
  spec.n_buildings = 2000;
  spec.replicates = 4000;
  spec.seed = 12;
  spec.poisson_n = true;
  const std::vector<double> marks{600.0, 800.0, 1000.0};
  const auto r = simulate_max(kCalibrated, spec, marks);
  for (const auto& e : r.exceedance) {
    // P(max > z) = 1 - E[F^N] = 1 - exp(-n S(z)) for N ~ Poisson(n)
    const double a = -std::expm1(-2000.0 * gpd_eval(kCalibrated, e.height, GpdKind::survival));
    EXPECT_LE(std::abs(e.probability - a), 3.0 * mc_se(a, spec.replicates)) << e.height;
  }
  const auto again = simulate_max(kCalibrated, spec, marks);
  EXPECT_EQ(again.maxima, r.maxima);
}

TEST(SimulateMax, RejectsBadSpecs) {
  MaxSimSpec spec;
  spec.n_buildings = 0;
  EXPECT_THROW(simulate_max(kCalibrated, spec), argument_error);
  spec.n_buildings = 10;
  spec.replicates = 0;
  EXPECT_THROW(simulate_max(kCalibrated, spec), argument_error);
  spec.replicates = 10;
  spec.percentiles = {50.0, 100.0};
  EXPECT_THROW(simulate_max(kCalibrated, spec), argument_error);
  spec.percentiles = {50.0};
  EXPECT_THROW(simulate_max({225.0, -1.0, 0.2}, spec), argument_error);
}

BivParams synth_params(const AsymLogisticParams& dep) {
  BivParams p;
  p.margin_x = {150.0, 40.0, 0.2};
  p.margin_y = {150.0, 35.0, 0.1};
  p.dep = dep;
  return p;
}

TEST(SynthCatalog, DeterministicAndWorkerIndependent) {
  const auto p = synth_params({0.9, 0.9, 3.0});
  const std::vector<std::string> cities{"A", "B", "C"};
  const auto a = synth_catalog(calibrated_alpha(), kLn108, p, CensoringSpec{}, 1950, 2017, cities, 4);
  const auto b = synth_catalog(calibrated_alpha(), kLn108, p, CensoringSpec{}, 1950, 2017, cities, 4, 3);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_GT(a.size(), 2000u);
  std::map<std::string, std::size_t> per_city;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].height, b[i].height);
    EXPECT_EQ(a[i].floors, b[i].floors);
    EXPECT_EQ(a[i].city, b[i].city);
    EXPECT_GE(a[i].floors, 1);
    EXPECT_GE(a[i].year, 1950);
    EXPECT_LE(a[i].year, 2017);
    ++per_city[a[i].city];
  }
  ASSERT_EQ(per_city.size(), 3u);
  const auto [lo, hi] = std::minmax({per_city["A"], per_city["B"], per_city["C"]});
  EXPECT_LE(hi - lo, 1u);
  const auto c = synth_catalog(calibrated_alpha(), kLn108, p, CensoringSpec{}, 1950, 2017, cities, 5);
  EXPECT_FALSE(c.size() == a.size() && c[0].height == a[0].height);
  EXPECT_THROW(synth_catalog(0.0, 0.0, p, CensoringSpec{}, 2000, 2001, {}, 1), argument_error);
  EXPECT_THROW(synth_catalog(0.0, 0.0, p, CensoringSpec{}, 2001, 2000, cities, 1), argument_error);
}

TEST(SynthCatalog, TrendRoundTrip) {
  const auto p = synth_params({0.9, 0.9, 3.0});
  const std::vector<std::string> cities{"X"};
  int hits = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    const auto cat = synth_catalog(calibrated_alpha(), kLn108, p, CensoringSpec{}, 1950, 2017, cities, 1000 + s);
    const auto counts = counts_by_year(cat, 1950, 2017);
    const auto fit = fit_poisson_trend(counts);
    if (std::abs(fit.beta - kLn108) <= 0.01) ++hits;
  }
  EXPECT_GE(hits, 38);
}

TEST(SynthCatalog, IndependenceGivesUncorrelatedMargins) {
  const auto p = synth_params({1.0, 1.0, 1.0});
  const auto cat = synth_catalog(std::log(150.0), 0.0, p, CensoringSpec{}, 1950, 2017, {"A", "B"}, 21);
  ASSERT_GT(cat.size(), 9500u);
  std::vector<double> u, v;
  for (const auto& r : cat) {
    u.push_back(gpd_eval(p.margin_x, r.height, GpdKind::cdf));
    v.push_back(gpd_eval(p.margin_y, 3.8 * r.floors, GpdKind::cdf));
  }
  const double n = static_cast<double>(u.size());
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / n, mv = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  EXPECT_LT(std::abs(suv / std::sqrt(suu * svv)), 0.05);

  // strong dependence is visible on the same scale
  const auto dep = synth_catalog(std::log(150.0), 0.0, synth_params({1.0, 1.0, 4.0}), CensoringSpec{}, 1950, 2017, {"A"}, 21);
  u.clear();
  v.clear();
  for (const auto& r : dep) {
    u.push_back(gpd_eval(p.margin_x, r.height, GpdKind::cdf));
    v.push_back(gpd_eval(p.margin_y, 3.8 * r.floors, GpdKind::cdf));
  }
  const double m2u = std::accumulate(u.begin(), u.end(), 0.0) / u.size(), m2v = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  suv = suu = svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - m2u) * (v[i] - m2v);
    suu += (u[i] - m2u) * (u[i] - m2u);
    svv += (v[i] - m2v) * (v[i] - m2v);
  }
  EXPECT_GT(suv / std::sqrt(suu * svv), 0.5);
}

}  // namespace
}  // namespace skyline
