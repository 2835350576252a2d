#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "skyline/hier.hpp"

namespace skyline {
namespace {

BivParams base_params() {
  BivParams p;
  p.margin_x = {150.0, 40.0, 0.2};
  p.margin_y = {150.0, 35.0, 0.1};
  p.dep = {0.9, 0.9, 3.0};
  return p;
}

// Cities with log-sigma and xi perturbed by N(0, sd^2).
std::map<std::string, Catalog> make_groups(const std::vector<std::size_t>& sizes, double sd, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::map<std::string, Catalog> out;
  const CensoringSpec spec;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    BivParams p = base_params();
    p.margin_x.sigma *= std::exp(sd * z(gen));
    p.margin_x.xi += sd * z(gen);
    p.margin_y.sigma *= std::exp(sd * z(gen));
    p.margin_y.xi += sd * z(gen);
    const std::string name = "city" + std::to_string(c);
    std::vector<BuildingRecord> recs;
    for (auto r : sample_catalog(p, spec, sizes[c], seed * 1000 + c)) {
      r.city = name;
      r.id = name + "-" + r.id;
      recs.push_back(r);
    }
    out.emplace(name, Catalog(std::move(recs)));
  }
  return out;
}

Catalog pool(const std::map<std::string, Catalog>& groups) {
  std::vector<BuildingRecord> all;
  for (const auto& [name, cat] : groups) all.insert(all.end(), cat.begin(), cat.end());
  return Catalog(std::move(all));
}

double transformed(double v, std::size_t idx) { return (idx % 3 == 2) ? v : std::log(v); }

std::array<double, 6> margins_of(const GpdParams& x, const GpdParams& y) {
  return {x.mu, x.sigma, x.xi, y.mu, y.sigma, y.xi};
}

bool monotone(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] < trace[i - 1]) return false;
  return !trace.empty();
}

TEST(Hierarchical, DataRequirements) {
  auto groups = make_groups({60, 60}, 0.1, 1);
  EXPECT_THROW(fit_hierarchical(groups), data_error);
  auto three = make_groups({60, 60, 60}, 0.1, 1);
  // a city whose records all sit below both thresholds
  three.emplace("empty", Catalog({{"e1", std::nullopt, "empty", 100.0, 20, 2000}}));
  EXPECT_THROW(fit_hierarchical(three), data_error);
}

TEST(Hierarchical, PooledLimit) {
  const auto groups = make_groups({80, 60, 70, 50}, 0.1, 2);
  const CensoringSpec spec;
  const auto pooled = fit_bivariate(pool(groups), spec);
  for (const auto varying : {HierOptions::default_varying(), std::array<bool, 6>{false, true, false, false, false, false}}) {
    HierOptions opt;
    opt.varying = varying;
    opt.fixed_sd = 1e-6;
    const auto fit = fit_hierarchical(groups, spec, opt);
    EXPECT_TRUE(monotone(fit.trace));
    const auto want = margins_of(pooled.params.margin_x, pooled.params.margin_y);
    for (const auto& c : fit.cities) {
      const auto got = margins_of(c.margin_x, c.margin_y);
      for (std::size_t i = 0; i < 6; ++i)
        EXPECT_NEAR(transformed(got[i], i), transformed(want[i], i), 1e-3) << c.city << " param " << i;
    }
    EXPECT_NEAR(fit.dep.theta_x, pooled.params.dep.theta_x, 1e-3);
    EXPECT_NEAR(fit.dep.theta_y, pooled.params.dep.theta_y, 1e-3);
    EXPECT_NEAR(std::log(fit.dep.r - 1.0), std::log(pooled.params.dep.r - 1.0), 1e-3);
    // report: hierarchical column equals the pooled column
    for (const auto& row : shrinkage_report(fit, groups)) {
      EXPECT_NEAR(row.hier_h, row.pooled_h, 1e-3 * row.pooled_h);
      EXPECT_NEAR(row.hier_f, row.pooled_f, 1e-3 * row.pooled_f);
    }
  }
}

TEST(Hierarchical, StratifiedLimit) {
  const auto groups = make_groups({120, 90, 40, 12}, 0.15, 3);
  const CensoringSpec spec;
  HierOptions opt;
  opt.fixed_sd = 1e3;
  const auto fit = fit_hierarchical(groups, spec, opt);
  EXPECT_TRUE(monotone(fit.trace));
  int checked = 0;
  for (const auto& c : fit.cities) {
    const BivData data = make_biv_data(groups.at(c.city), spec);
    if (data.size() < 30) continue;
    // independent oracle: per-city MLE of (log sigma, xi) for both margins,
    // location and dependence held at the fitted shared values
    auto f = [&](std::span<const double> q) {
      BivParams p{{fit.pooled_x.mu, q[0], q[1]}, {fit.pooled_y.mu, q[2], q[3]}, fit.dep};
      return censored_loglik(data, p, spec);
    };
    const std::vector<double> init{c.margin_x.sigma, c.margin_x.xi, c.margin_y.sigma, c.margin_y.xi};
    const std::vector<ParamTransform> tr{ParamTransform::log(), ParamTransform::identity(), ParamTransform::log(),
                                         ParamTransform::identity()};
    MaximizeOptions mo;
    mo.compute_covariance = false;
    const auto r = maximize(f, init, tr, mo);
    ASSERT_TRUE(r.converged) << c.city;
    EXPECT_NEAR(std::log(c.margin_x.sigma), std::log(r.argmax[0]), 1e-2) << c.city;
    EXPECT_NEAR(c.margin_x.xi, r.argmax[1], 1e-2) << c.city;
    EXPECT_NEAR(std::log(c.margin_y.sigma), std::log(r.argmax[2]), 1e-2) << c.city;
    EXPECT_NEAR(c.margin_y.xi, r.argmax[3], 1e-2) << c.city;
    ++checked;
  }
  EXPECT_EQ(checked, 3);
  // report: hierarchical column equals the stratified column on large cities
  for (const auto& row : shrinkage_report(fit, groups)) {
    if (row.n < 30) continue;
    ASSERT_TRUE(row.strat_h.has_value());
    EXPECT_NEAR(*row.strat_h, row.hier_h, 1e-2 * row.hier_h);
    EXPECT_NEAR(*row.strat_f, row.hier_f, 1e-2 * row.hier_f);
  }
}

TEST(Hierarchical, ShrinkageDirectionOneParameter) {
  const auto groups = make_groups({60, 25, 40, 15, 80}, 0.3, 4);
  const CensoringSpec spec;
  HierOptions opt;
  opt.varying = {false, true, false, false, false, false};
  const auto fit = fit_hierarchical(groups, spec, opt);
  EXPECT_TRUE(monotone(fit.trace));
  ASSERT_EQ(fit.hyper.mean.size(), 1u);
  EXPECT_GT(fit.hyper.sd[0], 0.0);
  const double m = fit.hyper.mean[0];
  const auto strat = stratified_fits(fit, groups);
  ASSERT_EQ(strat.size(), fit.cities.size());
  for (std::size_t i = 0; i < strat.size(); ++i) {
    ASSERT_TRUE(strat[i].eta.has_value()) << strat[i].city;
    const double s = (*strat[i].eta)[0], h = fit.cities[i].eta[0];
    EXPECT_GE(h, std::min(s, m) - 1e-6) << strat[i].city;
    EXPECT_LE(h, std::max(s, m) + 1e-6) << strat[i].city;
  }
}

TEST(Hierarchical, RelabelingPermutesOutputs) {
  const auto groups = make_groups({50, 40, 30}, 0.2, 5);
  std::map<std::string, Catalog> renamed;
  std::map<std::string, std::string> alias;
  for (const auto& [name, cat] : groups) {
    const std::string fresh = "z" + std::string(1, static_cast<char>('c' - (name.back() - '0'))) + name;
    alias[name] = fresh;
    std::vector<BuildingRecord> recs(cat.begin(), cat.end());
    for (auto& r : recs) r.city = fresh;
    renamed.emplace(fresh, Catalog(std::move(recs)));
  }
  const auto a = fit_hierarchical(groups);
  const auto b = fit_hierarchical(renamed);
  EXPECT_NEAR(a.loglik, b.loglik, 1e-6);
  for (const auto& c : a.cities) {
    const auto& d = b.city(alias.at(c.city));
    EXPECT_NEAR(c.margin_x.sigma, d.margin_x.sigma, 1e-5 * c.margin_x.sigma);
    EXPECT_NEAR(c.margin_y.xi, d.margin_y.xi, 1e-5);
    const auto ma = city_median(a, c.city), mb = city_median(b, alias.at(c.city));
    EXPECT_NEAR(ma.height, mb.height, 1e-6 * ma.height);
  }
}

TEST(Hierarchical, CityMedian) {
  HierFit fit;
  fit.spec = CensoringSpec{};
  HierCity c;
  c.city = "A";
  c.margin_x = {225.0, 31.5, 0.2};
  c.margin_y = {200.0, 30.0, 0.1};
  fit.cities.push_back(c);
  c.city = "B";
  fit.cities.push_back(c);
  const auto med = city_median(fit, "A");
  EXPECT_NEAR(med.height, 225.0 + (31.5 / 0.2) * (std::pow(2.0, 0.2) - 1.0), 1e-9);
  EXPECT_NEAR(med.height, 248.42, 0.01);
  EXPECT_NEAR(med.floors, gpd_quantile(c.margin_y, 0.5) / 3.8, 1e-9);
  EXPECT_EQ(city_median(fit, "B").height, med.height);
  EXPECT_THROW(city_median(fit, "nowhere"), lookup_error);
}

TEST(Hierarchical, IdenticalCitiesGetIdenticalMedians) {
  auto groups = make_groups({60, 45, 70}, 0.2, 6);
  std::vector<BuildingRecord> twin(groups.at("city0").begin(), groups.at("city0").end());
  for (auto& r : twin) {
    r.city = "twin";
    r.id = "t" + r.id;
  }
  groups.emplace("twin", Catalog(std::move(twin)));
  const auto fit = fit_hierarchical(groups);
  const auto a = city_median(fit, "city0"), b = city_median(fit, "twin");
  EXPECT_NEAR(a.height, b.height, 1e-9 * a.height);
  EXPECT_NEAR(a.floors, b.floors, 1e-9 * a.floors);
  const auto rows = shrinkage_report(fit, groups);
  EXPECT_EQ(rows.size(), 4u);
  for (const auto& row : rows) EXPECT_EQ(row.pooled_h, rows.front().pooled_h);
}

TEST(Hierarchical, SingleRecordCitiesShrinkToTheMean) {
  auto groups = make_groups({80, 70, 60}, 0.1, 7);
  groups.emplace("solo", Catalog({{"s1", std::nullopt, "solo", 260.0, 64, 2010}}));
  const auto fit = fit_hierarchical(groups);
  EXPECT_TRUE(monotone(fit.trace));
  const auto& solo = fit.city("solo");
  for (std::size_t j = 0; j < solo.eta.size(); ++j)
    EXPECT_LT(std::abs(solo.eta[j] - fit.hyper.mean[j]), 3.0 * fit.hyper.sd[j] + 1e-9);
  const auto strat = stratified_fits(fit, groups);
  for (const auto& s : strat)
    if (s.city == "solo") EXPECT_FALSE(s.eta.has_value());
}

}  // namespace
}  // namespace skyline
