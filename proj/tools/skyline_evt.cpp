// skyline-evt: command-line front end for the skyline library.
//
//   skyline-evt <command> --input <csv> --seed <u64> --out <dir> [options]
//
// Exit codes: 0 ok, 2 data/config error, 3 convergence failure, 4 numeric
// failure. Errors are also written to stderr as one JSON line.

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "skyline/skyline.hpp"

namespace {

using skyline::RunConfig;

struct Shared {
  std::uint64_t seed = 0;
  std::string grid;
  std::string mu_mode = "free";
  std::string form = "standard";
};

void add_common(CLI::App* cmd, RunConfig& cfg, Shared& sh, bool needs_input = true) {
  if (needs_input) {
    cmd->add_option("--input,-i", cfg.input, "Catalog CSV");
    cmd->add_option("--col-id", cfg.columns.id, "Id column (blank: row numbers)");
    cmd->add_option("--col-name", cfg.columns.name, "Name column")->capture_default_str();
    cmd->add_option("--col-city", cfg.columns.city, "City column")->capture_default_str();
    cmd->add_option("--col-height", cfg.columns.height, "Height column (m)")->capture_default_str();
    cmd->add_option("--col-floors", cfg.columns.floors, "Floors column")->capture_default_str();
    cmd->add_option("--col-year", cfg.columns.year, "Completion year column")->capture_default_str();
    cmd->add_option("--tall-height", cfg.tall.min_height, "Tall filter: height over (m)")->capture_default_str();
    cmd->add_option("--tall-floors", cfg.tall.min_floors, "Tall filter: floors over")->capture_default_str();
  }
  cmd->add_option("--seed", sh.seed, "RNG seed (required for randomized commands)");
  cmd->add_option("--out,-o", cfg.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--workers", cfg.workers, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::Range(1u, 1024u));
}

void add_trend(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--from", cfg.trend_from, "First fitted year")->capture_default_str();
  cmd->add_option("--to", cfg.trend_to, "Last fitted year (default: last year in data)");
  cmd->add_option("--forecast-to", cfg.forecast_to, "Forecast horizon")->capture_default_str();
}

void add_censoring(CLI::App* cmd, RunConfig& cfg, Shared& sh) {
  cmd->add_option("--u", cfg.censoring.u, "Height threshold (m)")->capture_default_str();
  cmd->add_option("--v", cfg.censoring.v, "Floor threshold (floors)")->capture_default_str();
  cmd->add_option("--floor-scale", cfg.censoring.floor_scale, "Meters per floor")->capture_default_str();
  cmd->add_option("--form", sh.form, "Censored likelihood form")
      ->check(CLI::IsMember({"standard", "literal"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  Shared sh;
  CLI::App app{"Extreme-value models for skyscraper heights and counts"};
  app.set_config("--config", "", "Config file (TOML/INI; keys are option names, sections are commands)");
  app.require_subcommand(1);

  auto* counts = app.add_subcommand("fit-counts", "Poisson trend fit, forecast and backtest");
  add_common(counts, cfg, sh);
  add_trend(counts, cfg);
  counts->add_option("--reps", cfg.forecast_reps, "Forecast simulation replicates")->capture_default_str();
  counts->add_option("--cutoff", cfg.cutoff, "Backtest: fit through this year only");
  counts->add_option("--horizon-end", cfg.horizon_end, "Backtest: last compared year (default --to)");
  counts->add_option("--urban-population", cfg.urban_population, "Urban population at the horizon")
      ->capture_default_str();

  auto* gpd = app.add_subcommand("fit-gpd", "GPD fit, threshold scan, Hill, q-q and median trend");
  add_common(gpd, cfg, sh);
  gpd->add_option("--threshold", cfg.threshold, "Exceedance threshold (m)")->capture_default_str();
  gpd->add_option("--mu-mode", sh.mu_mode, "Location: free in (0, min x) or fixed at the threshold")
      ->check(CLI::IsMember({"free", "fixed"}))
      ->capture_default_str();
  gpd->add_option("--grid", sh.grid, "Scan grid lo:hi:step (default 150:350:25)");
  gpd->add_option("--boot-reps", cfg.boot_reps, "Median-trend bootstrap replicates")->capture_default_str();
  gpd->add_option("--hill-k-min", cfg.hill_k_min)->capture_default_str();
  gpd->add_option("--hill-k-max", cfg.hill_k_max)->capture_default_str();
  gpd->add_option("--from", cfg.trend_from, "First year of the q-q sextiles")->capture_default_str();

  auto* sim = app.add_subcommand("simulate-max", "Monte Carlo law of the tallest building");
  add_common(sim, cfg, sh);
  add_trend(sim, cfg);
  sim->add_option("--gpd", cfg.gpd_json, "gpd.json from fit-gpd");
  sim->add_option("--mu", cfg.mu);
  sim->add_option("--sigma", cfg.sigma);
  sim->add_option("--xi", cfg.xi);
  sim->add_option("--threshold", cfg.threshold, "Extreme threshold for --auto-n")->capture_default_str();
  sim->add_option("--n", cfg.sim.n_buildings, "Buildings per replicate")->capture_default_str();
  sim->add_option("--reps", cfg.sim.replicates, "Replicates")->capture_default_str();
  sim->add_flag("--poisson-n", cfg.sim.poisson_n, "Poisson building count per replicate");
  sim->add_flag("--auto-n", cfg.auto_n, "n from the trend forecast times the extreme share");
  sim->add_option("--frac-extreme", cfg.frac_extreme, "Extreme share for --auto-n");
  sim->add_option("--landmarks", cfg.landmarks, "Exceedance heights")->delimiter(',')->capture_default_str();
  sim->add_option("--percentiles", cfg.sim.percentiles, "Reported percentiles")->delimiter(',')->capture_default_str();

  auto* biv = app.add_subcommand("fit-bivariate", "Censored bivariate (height, floors) fit");
  add_common(biv, cfg, sh);
  add_censoring(biv, cfg, sh);
  biv->add_option("--heights", cfg.conditional_heights, "Heights for conditional floor densities")
      ->delimiter(',')
      ->capture_default_str();
  biv->add_option("--floor-max", cfg.floor_max, "Floor grid is 1..floor-max")->capture_default_str();
  biv->add_flag("--hier", cfg.hier, "Also fit the city-level hierarchical model");

  auto* synth = app.add_subcommand("synth", "Write a synthetic catalog.csv");
  add_common(synth, cfg, sh, false);
  synth->add_option("--cities", cfg.synth_cities)->capture_default_str();
  synth->add_option("--from", cfg.synth_from)->capture_default_str();
  synth->add_option("--to", cfg.synth_to)->capture_default_str();
  synth->add_option("--total", cfg.synth_total, "Expected records over the year range")->capture_default_str();
  synth->add_option("--growth", cfg.synth_growth, "Annual growth rate")->capture_default_str();
  synth->add_option("--theta-x", cfg.synth_params.dep.theta_x)->capture_default_str();
  synth->add_option("--theta-y", cfg.synth_params.dep.theta_y)->capture_default_str();
  synth->add_option("--r", cfg.synth_params.dep.r)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    skyline::json j{{"error", {{"kind", "usage_error"}, {"message", e.what()}, {"exit_code", 2}}}};
    std::cerr << j.dump() << '\n';
    return 2;
  }

  std::function<void(const RunConfig&)> run;
  if (*counts) run = skyline::cmd_fit_counts;
  if (*gpd) run = skyline::cmd_fit_gpd;
  if (*sim) run = skyline::cmd_simulate_max;
  if (*biv) run = skyline::cmd_fit_bivariate;
  if (*synth) run = skyline::cmd_synth;

  return skyline::run_guarded(
      [&] {
        if (app.get_subcommands().front()->count("--seed") > 0) cfg.seed = sh.seed;
        if (!sh.grid.empty()) cfg.scan_grid = skyline::parse_grid(sh.grid);
        cfg.mu_mode = sh.mu_mode == "fixed" ? skyline::MuMode::fixed_at_threshold : skyline::MuMode::free;
        cfg.censoring.form = sh.form == "literal" ? skyline::LikelihoodForm::literal : skyline::LikelihoodForm::standard;
        run(cfg);
      },
      std::cerr);
}
