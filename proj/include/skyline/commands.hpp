#ifndef SKYLINE_COMMANDS_HPP_
#define SKYLINE_COMMANDS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "skyline/bivariate.hpp"
#include "skyline/catalog.hpp"
#include "skyline/error.hpp"
#include "skyline/gpd.hpp"
#include "skyline/hier.hpp"
#include "skyline/report.hpp"
#include "skyline/simulate.hpp"
#include "skyline/trend.hpp"

namespace skyline {

/// Unreadable input or config file; the CLI reports the path.
class file_error : public data_error {
 public:
  file_error(const std::string& path, const std::string& what) : data_error(what), path_(path) {}
  const std::string& path() const noexcept { return path_; }
  const char* kind() const noexcept override { return "file_error"; }

 private:
  std::string path_;
};

/// Everything a command reads. Field names follow the CLI option names.
struct RunConfig {
  std::string input;
  CsvSchema columns;
  FilterSpec tall = FilterSpec::tall();
  CensoringSpec censoring;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  unsigned workers = 1;

  // fit-counts
  int trend_from = kTrendStartYear;
  std::optional<int> trend_to;  // default: last year in the catalog
  int forecast_to = 2050;
  std::size_t forecast_reps = 10000;
  std::optional<int> cutoff;  // backtest mode
  std::optional<int> horizon_end;
  double urban_population = 6.0e9;

  // fit-gpd
  double threshold = 225.0;
  MuMode mu_mode = MuMode::free;
  std::vector<double> scan_grid = default_threshold_grid();
  std::size_t boot_reps = 1000;
  std::size_t hill_k_min = 10;
  std::size_t hill_k_max = 1000;

  // simulate-max
  std::string gpd_json;
  std::optional<double> mu, sigma, xi;
  MaxSimSpec sim;
  std::vector<double> landmarks = default_landmarks();
  bool auto_n = false;
  std::optional<double> frac_extreme;

  // fit-bivariate
  std::vector<double> conditional_heights{1000.0, 1609.34};
  int floor_max = 1000;
  bool hier = false;

  // synth
  std::size_t synth_cities = 12;
  int synth_from = 1950;
  int synth_to = 2017;
  double synth_total = 3251.0;
  double synth_growth = 0.08;
  // floors start just above 41, so every synthetic record passes the tall filter
  BivParams synth_params{{150.0, 40.0, 0.2}, {156.0, 35.0, 0.1}, {0.9, 0.9, 3.0}};
};

namespace detail {

inline std::uint64_t require_seed(const RunConfig& cfg, const char* command) {
  if (!cfg.seed) throw argument_error(std::string(command) + ": --seed is required (the command is randomized)");
  return *cfg.seed;
}

struct LoadedCatalog {
  Catalog all;
  Catalog tall;
  ParseDiagnostics diagnostics;
};

inline LoadedCatalog load_catalog(const RunConfig& cfg) {
  if (cfg.input.empty()) throw argument_error("--input is required");
  std::ifstream in(cfg.input, std::ios::binary);
  if (!in) throw file_error(cfg.input, "cannot read input file '" + cfg.input + "'");
  auto parsed = parse_catalog(in, cfg.columns, cfg.input);
  LoadedCatalog out;
  out.tall = filter(parsed.catalog, cfg.tall);
  out.all = std::move(parsed.catalog);
  out.diagnostics = std::move(parsed.diagnostics);
  return out;
}

inline json diagnostics_json(const LoadedCatalog& c) {
  json reasons = json::object();
  for (const auto& [k, v] : c.diagnostics.reasons) reasons[k] = v;
  return {{"rows_read", c.diagnostics.rows_read},
          {"rows_dropped", c.diagnostics.rows_dropped},
          {"drop_reasons", reasons},
          {"n_records", c.all.size()},
          {"n_tall", c.tall.size()}};
}

inline json gpd_params_json(const GpdParams& p) { return {{"mu", p.mu}, {"sigma", p.sigma}, {"xi", p.xi}}; }

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

inline int last_year(const Catalog& c) {
  if (c.empty()) throw data_error("no records pass the tall filter");
  return c.records().back().year;
}

inline double extreme_share(const Catalog& tall, double threshold) {
  if (tall.empty()) throw data_error("no records pass the tall filter");
  std::size_t k = 0;
  for (const auto& r : tall)
    if (r.height > threshold) ++k;
  if (k == 0) throw data_error("no records exceed " + format_number(threshold) + " m");
  return static_cast<double>(k) / static_cast<double>(tall.size());
}

// "1000" and "1609.34" style names for per-height files.
inline std::string height_tag(double h) { return format_number(h); }

}  // namespace detail

/**
 * Count trend. Writes trend.json and forecast.csv, or backtest.json when a
 * cutoff is configured (no randomness in that mode).
 */
inline void cmd_fit_counts(const RunConfig& cfg) {
  const auto data = detail::load_catalog(cfg);
  prepare_out_dir(cfg.out_dir);
  const int to = cfg.trend_to.value_or(detail::last_year(data.tall));

  if (cfg.cutoff) {
    const auto b = backtest(data.tall, *cfg.cutoff, cfg.horizon_end.value_or(to), cfg.trend_from);
    json j{{"command", "fit-counts"},
           {"mode", "backtest"},
           {"start_year", b.start_year},
           {"cutoff", b.cutoff},
           {"horizon_end", b.horizon_end},
           {"predicted", b.predicted_total},
           {"actual", b.actual_total},
           {"pct_error", b.pct_error},
           {"alpha", b.fit.alpha},
           {"beta", b.fit.beta},
           {"annual_growth", std::expm1(b.fit.beta)}};
    write_json(detail::out_path(cfg, "backtest.json"), j);
    return;
  }

  const std::uint64_t seed = detail::require_seed(cfg, "fit-counts");
  if (cfg.forecast_to <= to) throw argument_error("fit-counts: --forecast-to must follow the last fitted year");
  const auto counts = counts_by_year(data.tall, cfg.trend_from, to);
  const auto fit = fit_poisson_trend(counts);
  const auto bands = predict_counts(fit, cfg.trend_from, cfg.forecast_to, cfg.forecast_reps, seed, cfg.workers);
  const auto cum = cumulative_forecast(fit, to + 1, cfg.forecast_to, cfg.forecast_reps, seed, cfg.workers);
  double deterministic = 0.0;
  for (int t = to + 1; t <= cfg.forecast_to; ++t) deterministic += fit.expected(t);
  long long observed = 0;
  for (const auto& c : counts) observed += c.count;

  const double se_a = std::sqrt(fit.cov(0, 0)), se_b = std::sqrt(fit.cov(1, 1));
  const double total = static_cast<double>(observed) + cum.mean;
  json j{{"command", "fit-counts"},
         {"seed", seed},
         {"input", diagnostics_json(data)},
         {"year_from", cfg.trend_from},
         {"year_to", to},
         {"n_fitted", observed},
         {"alpha", fit.alpha},
         {"beta", fit.beta},
         {"se_alpha", json_number(se_a)},
         {"se_beta", json_number(se_b)},
         {"center", fit.center},
         {"alpha_centered", fit.alpha_centered},
         {"loglik", fit.loglik},
         {"annual_growth", std::expm1(fit.beta)},
         {"annual_growth_ci95", {json_number(std::expm1(fit.beta - 1.96 * se_b)), json_number(std::expm1(fit.beta + 1.96 * se_b))}},
         {"forecast",
          {{"from", to + 1},
           {"to", cfg.forecast_to},
           {"reps", cfg.forecast_reps},
           {"cumulative_mean", cum.mean},
           {"cumulative_se", cum.se},
           {"cumulative_mc_se", cum.mc_se},
           {"cumulative_deterministic", deterministic}}},
         {"total_by_forecast_end", total},
         {"urban_population", cfg.urban_population},
         {"per_billion_urban", total / (cfg.urban_population / 1e9)}};
  write_json(detail::out_path(cfg, "trend.json"), j);

  CsvWriter csv(detail::out_path(cfg, "forecast.csv"));
  csv.row({"year", "observed", "mean", "lo50", "hi50", "lo95", "hi95", "sim_mean", "sim_sd"});
  for (const auto& b : bands) {
    const bool past = b.year <= to;
    csv.row({std::to_string(b.year), past ? std::to_string(counts[static_cast<std::size_t>(b.year - cfg.trend_from)].count) : "",
             format_number(b.mean), std::to_string(b.lo50), std::to_string(b.hi50), std::to_string(b.lo95),
             std::to_string(b.hi95), format_number(b.sim_mean), format_number(b.sim_sd)});
  }
}

/// Parses "lo:hi:step" (inclusive) into an ascending grid.
inline std::vector<double> parse_grid(const std::string& spec) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  char a = 0, b = 0, tail = 0;
  if (std::sscanf(spec.c_str(), "%lf%c%lf%c%lf%c", &lo, &a, &hi, &b, &step, &tail) != 5 || a != ':' || b != ':')
    throw argument_error("grid '" + spec + "': expected lo:hi:step");
  if (!(step > 0.0) || !(hi >= lo)) throw argument_error("grid '" + spec + "': need step > 0 and hi >= lo");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

/// Univariate tail fit and diagnostics: gpd.json, scan.csv, hill.csv,
/// qq_sextile_{1..6}.csv and median_trend.json.
inline void cmd_fit_gpd(const RunConfig& cfg) {
  const std::uint64_t seed = detail::require_seed(cfg, "fit-gpd");
  const auto data = detail::load_catalog(cfg);
  prepare_out_dir(cfg.out_dir);
  const auto heights = data.tall.heights();
  std::vector<double> exceed;
  for (double h : heights)
    if (h > cfg.threshold) exceed.push_back(h);
  const auto fit = fit_gpd(exceed, cfg.threshold, cfg.mu_mode);
  const auto qq_all = uniform_qq(exceed, fit);

  const Catalog extreme = filter(data.tall, {cfg.threshold, 0, Join::all_of, true});
  json sextiles = json::array();
  const auto groups = partition_sextiles(extreme, cfg.trend_from);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto hs = groups[g].heights();
    const auto qq = uniform_qq(hs, fit);
    CsvWriter csv(detail::out_path(cfg, "qq_sextile_" + std::to_string(g + 1) + ".csv"));
    csv.row({"empirical", "theoretical"});
    for (const auto& p : qq.points) csv.row({format_number(p.emp), format_number(p.theo)});
    sextiles.push_back({{"sextile", g + 1},
                        {"year_from", groups[g].records().front().year},
                        {"year_to", groups[g].records().back().year},
                        {"n", hs.size()},
                        {"ks_statistic", qq.ks_statistic},
                        {"ks_p_value", qq.ks_p_value}});
  }

  json j{{"command", "fit-gpd"},
         {"seed", seed},
         {"input", diagnostics_json(data)},
         {"threshold", cfg.threshold},
         {"mu_mode", cfg.mu_mode == MuMode::free ? "free" : "fixed"},
         {"n_exceed", fit.n_exceed},
         {"frac_extreme", static_cast<double>(exceed.size()) / static_cast<double>(heights.size())},
         {"mu", fit.params.mu},
         {"sigma", fit.params.sigma},
         {"xi", fit.params.xi},
         {"se", {{"mu", json_number(fit.se[0])}, {"sigma", json_number(fit.se[1])}, {"xi", json_number(fit.se[2])}}},
         {"xi_ci95", {json_number(fit.params.xi - 1.959963984540054 * fit.se[2]),
                      json_number(fit.params.xi + 1.959963984540054 * fit.se[2])}},
         {"loglik", fit.loglik},
         {"converged", fit.converged},
         {"iterations", fit.iterations},
         {"ks_statistic", qq_all.ks_statistic},
         {"ks_p_value", qq_all.ks_p_value},
         {"sextiles", sextiles}};
  write_json(detail::out_path(cfg, "gpd.json"), j);

  const auto scan = threshold_scan(heights, cfg.scan_grid, cfg.workers);
  CsvWriter csv(detail::out_path(cfg, "scan.csv"));
  csv.row({"u", "n_exceed", "status", "xi", "xi_lo50", "xi_hi50", "xi_lo95", "xi_hi95", "sigma", "sigma_lo95", "sigma_hi95"});
  std::size_t ri = 0, si = 0;
  for (double u : cfg.scan_grid) {
    if (ri < scan.rows.size() && scan.rows[ri].u == u) {
      const auto& r = scan.rows[ri++];
      csv.row({format_number(u), std::to_string(r.n_exceed), "ok", format_number(r.xi_hat), format_number(r.xi_lo50),
               format_number(r.xi_hi50), format_number(r.xi_lo95), format_number(r.xi_hi95), format_number(r.sigma_hat),
               format_number(r.sigma_lo95), format_number(r.sigma_hi95)});
    } else if (si < scan.skipped.size()) {
      const auto& s = scan.skipped[si++];
      csv.row({format_number(u), std::to_string(s.n_exceed), s.reason, "", "", "", "", "", "", "", ""});
    }
  }

  std::vector<std::size_t> ks;
  for (std::size_t k = cfg.hill_k_min; k <= cfg.hill_k_max && k < heights.size(); ++k) ks.push_back(k);
  CsvWriter hill(detail::out_path(cfg, "hill.csv"));
  hill.row({"k", "xi"});
  for (const auto& h : hill_estimates(heights, ks)) hill.row({std::to_string(h.k), format_number(h.xi)});

  const auto med = fit_median_trend(data.tall, cfg.threshold, cfg.boot_reps, seed, cfg.workers);
  write_json(detail::out_path(cfg, "median_trend.json"),
             {{"threshold", cfg.threshold},
              {"n", med.n},
              {"intercept", med.intercept},
              {"slope", med.slope},
              {"slope_se", med.slope_se},
              {"p_value", med.p_value},
              {"boot_reps", med.boot_reps},
              {"seed", seed}});
}

/// Tallest-building simulation: maxima.csv and exceedance.json.
inline void cmd_simulate_max(const RunConfig& cfg) {
  const std::uint64_t seed = detail::require_seed(cfg, "simulate-max");
  GpdParams p;
  double threshold = cfg.threshold;
  std::optional<double> frac = cfg.frac_extreme;
  if (!cfg.gpd_json.empty()) {
    if (!std::filesystem::exists(cfg.gpd_json)) throw file_error(cfg.gpd_json, "cannot read '" + cfg.gpd_json + "'");
    const json g = read_json(cfg.gpd_json);
    try {
      p = {g.at("mu").get<double>(), g.at("sigma").get<double>(), g.at("xi").get<double>()};
      threshold = g.at("threshold").get<double>();
      if (!frac && g.contains("frac_extreme")) frac = g.at("frac_extreme").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw schema_error("'" + cfg.gpd_json + "' lacks GPD fields: " + e.what());
    }
  } else if (cfg.mu && cfg.sigma && cfg.xi) {
    p = {*cfg.mu, *cfg.sigma, *cfg.xi};
  } else {
    throw argument_error("simulate-max: give --gpd <gpd.json> or all of --mu, --sigma, --xi");
  }
  detail::check_sigma(p);

  MaxSimSpec spec = cfg.sim;
  spec.seed = seed;
  spec.workers = cfg.workers;
  json auto_n = nullptr;
  if (cfg.auto_n) {
    const auto data = detail::load_catalog(cfg);
    const int to = cfg.trend_to.value_or(detail::last_year(data.tall));
    if (cfg.forecast_to <= to) throw argument_error("simulate-max: --forecast-to must follow the last fitted year");
    const auto fit = fit_poisson_trend(counts_by_year(data.tall, cfg.trend_from, to));
    const double share = frac.value_or(detail::extreme_share(data.tall, threshold));
    const long long n = expected_extreme_count(fit, to + 1, cfg.forecast_to, share);
    if (n < 1) throw data_error("simulate-max: the forecast implies no extreme buildings");
    spec.n_buildings = static_cast<std::size_t>(n);
    auto_n = {{"year_from", to + 1}, {"year_to", cfg.forecast_to}, {"frac_extreme", share}, {"alpha", fit.alpha},
              {"beta", fit.beta}, {"n_buildings", n}};
  }
  prepare_out_dir(cfg.out_dir);
  const auto r = simulate_max(p, spec, cfg.landmarks);

  CsvWriter csv(detail::out_path(cfg, "maxima.csv"));
  csv.row({"max_height"});
  for (double m : r.maxima) csv.row({format_number(m)});

  const double n = static_cast<double>(spec.n_buildings);
  json marks = json::array();
  for (const auto& e : r.exceedance) {
    const double s = gpd_eval(p, e.height, GpdKind::survival);
    // fixed n: 1 - F^n; Poisson n: 1 - exp(-n S)
    const double analytic = spec.poisson_n ? -std::expm1(-n * s) : max_exceedance_analytic(p, spec.n_buildings, e.height);
    marks.push_back({{"height", e.height}, {"probability", e.probability}, {"mc_se", e.mc_se}, {"analytic", analytic}});
  }
  json quant = json::array();
  for (const auto& q : r.quantiles) quant.push_back({{"percentile", q.percentile}, {"value", q.value}});
  std::vector<double> sorted = r.maxima;
  std::sort(sorted.begin(), sorted.end());
  const double upper = detail::sorted_quantile(sorted, 0.95);
  json j{{"command", "simulate-max"},
         {"seed", seed},
         {"params", detail::gpd_params_json(p)},
         {"n_buildings", spec.n_buildings},
         {"replicates", spec.replicates},
         {"poisson_n", spec.poisson_n},
         {"auto_n", auto_n},
         {"landmarks", marks},
         {"quantiles", quant},
         {"interval95_upper", upper},
         {"interval95_upper_analytic", spec.poisson_n ? json(nullptr) : json(max_quantile_analytic(p, spec.n_buildings, 0.95))}};
  write_json(detail::out_path(cfg, "exceedance.json"), j);
}

namespace detail {

inline json biv_params_json(const BivParams& p) {
  return {{"margin_x", gpd_params_json(p.margin_x)},
          {"margin_y", gpd_params_json(p.margin_y)},
          {"dep", {{"theta_x", p.dep.theta_x}, {"theta_y", p.dep.theta_y}, {"r", p.dep.r}}}};
}

template <class T>
json nine_json(const std::array<T, 9>& v) {
  auto cell = [](T x) { return std::is_same_v<T, bool> ? json(static_cast<bool>(x)) : json_number(static_cast<double>(x)); };
  return {{"margin_x", {{"mu", cell(v[0])}, {"sigma", cell(v[1])}, {"xi", cell(v[2])}}},
          {"margin_y", {{"mu", cell(v[3])}, {"sigma", cell(v[4])}, {"xi", cell(v[5])}}},
          {"dep", {{"theta_x", cell(v[6])}, {"theta_y", cell(v[7])}, {"r", cell(v[8])}}}};
}

}  // namespace detail

/// Bivariate fit: bivariate.json, conditional_{height}.csv, and with --hier
/// cities.csv plus hier.json.
inline void cmd_fit_bivariate(const RunConfig& cfg) {
  const auto data = detail::load_catalog(cfg);
  cfg.censoring.validate();
  if (cfg.floor_max < 2) throw argument_error("fit-bivariate: --floor-max must be at least 2");
  prepare_out_dir(cfg.out_dir);
  const auto fit = fit_bivariate(data.tall, cfg.censoring);

  std::vector<double> grid;
  for (int f = 1; f <= cfg.floor_max; ++f) grid.push_back(f);
  json cond = json::array();
  for (double h : cfg.conditional_heights) {
    const std::string name = "conditional_" + detail::height_tag(h) + ".csv";
    const auto dens = conditional_floor_density(fit, h, grid);
    CsvWriter csv(detail::out_path(cfg, name));
    csv.row({"floors", "density"});
    for (const auto& d : dens) csv.row({format_number(d.floors), format_number(d.density)});
    cond.push_back({{"height", h},
                    {"file", name},
                    {"median_floors", conditional_quantile(fit, h, 0.5)},
                    {"q05_floors", conditional_quantile(fit, h, 0.05)},
                    {"q95_floors", conditional_quantile(fit, h, 0.95)}});
  }
  json j{{"command", "fit-bivariate"},
         {"input", diagnostics_json(data)},
         {"censoring",
          {{"u", cfg.censoring.u},
           {"v", cfg.censoring.v},
           {"floor_scale", cfg.censoring.floor_scale},
           {"form", cfg.censoring.form == LikelihoodForm::standard ? "standard" : "literal"}}},
         {"n_contributing", fit.n_full + fit.n_cens_x + fit.n_cens_y},
         {"n_both", fit.n_full},
         {"n_height_only", fit.n_cens_y},
         {"n_floors_only", fit.n_cens_x},
         {"loglik", fit.loglik},
         {"converged", fit.converged},
         {"starts_tried", fit.starts_tried},
         {"params", detail::biv_params_json(fit.params)},
         {"se", detail::nine_json(fit.se)},
         {"at_boundary", detail::nine_json(fit.at_boundary)},
         {"conditional", cond}};
  write_json(detail::out_path(cfg, "bivariate.json"), j);
  if (!cfg.hier) return;

  // cities without a record over either threshold carry no likelihood
  std::map<std::string, Catalog> groups;
  std::size_t dropped = 0;
  for (auto& [city, cat] : group_by_city(data.tall)) {
    bool any = false;
    for (const auto& r : cat) any = any || classify(r.height, r.floors, cfg.censoring) != RecordClass::none;
    if (any)
      groups.emplace(city, cat);
    else
      ++dropped;
  }
  HierOptions opt;
  opt.workers = cfg.workers;
  const auto hf = fit_hierarchical(groups, cfg.censoring, opt);
  CsvWriter csv(detail::out_path(cfg, "cities.csv"));
  csv.row({"city", "n", "strat_h", "hier_h", "pooled_h", "strat_f", "hier_f", "pooled_f"});
  for (const auto& r : shrinkage_report(hf, groups))
    csv.row({r.city, std::to_string(r.n), format_number(r.strat_h), format_number(r.hier_h), format_number(r.pooled_h),
             format_number(r.strat_f), format_number(r.hier_f), format_number(r.pooled_f)});
  static const char* names[6] = {"mu_x", "sigma_x", "xi_x", "mu_y", "sigma_y", "xi_y"};
  json hyper = json::array();
  for (std::size_t k = 0; k < hf.hyper.index.size(); ++k)
    hyper.push_back({{"param", names[hf.hyper.index[k]]},
                     {"scale", hf.hyper.index[k] % 3 == 2 ? "identity" : "log"},
                     {"mean", hf.hyper.mean[k]},
                     {"sd", hf.hyper.sd[k]}});
  write_json(detail::out_path(cfg, "hier.json"),
             {{"command", "fit-bivariate --hier"},
              {"n_cities", hf.n_cities},
              {"cities_without_contributing_records", dropped},
              {"loglik", hf.loglik},
              {"sweeps", hf.sweeps},
              {"hyper", hyper},
              {"dep", {{"theta_x", hf.dep.theta_x}, {"theta_y", hf.dep.theta_y}, {"r", hf.dep.r}}},
              {"pooled", {{"margin_x", detail::gpd_params_json(hf.pooled_x)}, {"margin_y", detail::gpd_params_json(hf.pooled_y)}}}});
}

/// Synthetic catalog.csv with a calibrated trend: the expected total over
/// [synth_from, synth_to] equals synth_total.
inline void cmd_synth(const RunConfig& cfg) {
  const std::uint64_t seed = detail::require_seed(cfg, "synth");
  if (cfg.synth_cities < 1) throw argument_error("synth: --cities must be at least 1");
  if (cfg.synth_from > cfg.synth_to) throw argument_error("synth: --from after --to");
  if (!(cfg.synth_total > 0.0) || !(cfg.synth_growth > -1.0)) throw argument_error("synth: bad --total or --growth");
  prepare_out_dir(cfg.out_dir);
  const double beta = std::log1p(cfg.synth_growth);
  double s = 0.0;
  for (int t = cfg.synth_from; t <= cfg.synth_to; ++t) s += std::exp(beta * (t - cfg.synth_from));
  const double alpha = std::log(cfg.synth_total / s) - beta * cfg.synth_from;
  std::vector<std::string> cities;
  for (std::size_t c = 0; c < cfg.synth_cities; ++c) {
    std::string tag = std::to_string(c + 1);
    cities.push_back("city" + std::string(tag.size() < 3 ? 3 - tag.size() : 0, '0') + tag);
  }
  const auto cat = synth_catalog(alpha, beta, cfg.synth_params, cfg.censoring, cfg.synth_from, cfg.synth_to, cities,
                                 seed, cfg.workers);
  CsvWriter csv(detail::out_path(cfg, "catalog.csv"));
  csv.row({"id", "name", "city", "height_m", "floors", "year"});
  for (const auto& r : cat)
    csv.row({r.id, "", r.city, format_number(r.height), std::to_string(r.floors), std::to_string(r.year)});
}

/// CLI exit code for an exception.
inline int exit_code_for(const std::exception& e) {
  if (const auto* s = dynamic_cast<const error*>(&e)) {
    if (dynamic_cast<const optimization_error*>(s)) return 3;
    if (dynamic_cast<const numeric_error*>(s) || dynamic_cast<const domain_error*>(s)) return 4;
    return 2;
  }
  return 4;
}

/// Runs `body`, mapping failures to an exit code and one line of error JSON.
template <class Body>
int run_guarded(Body&& body, std::ostream& err) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    json j{{"kind", "internal_error"}, {"message", e.what()}, {"exit_code", code}};
    if (const auto* s = dynamic_cast<const error*>(&e)) j["kind"] = s->kind();
    if (const auto* f = dynamic_cast<const file_error*>(&e)) j["path"] = f->path();
    err << json{{"error", j}}.dump() << '\n';
    return code;
  }
}

}  // namespace skyline

#endif  // SKYLINE_COMMANDS_HPP_
