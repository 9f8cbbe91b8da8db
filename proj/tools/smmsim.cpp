// smmsim: ensemble simulator for stochastic linear kinetic transport in the
// diffusive scaling. Subcommands: simulate, compare, paper-experiment,
// stability-scan, energy-test.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "smm/config.hpp"
#include "smm/output.hpp"
#include "smm/stability.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBlowUp = 3;
constexpr int kExitCheckFailed = 4;

smm::RunConfig load_config(const std::string& path) {
  if (path.empty()) {
    smm::RunConfig cfg;
    smm::validate_config(cfg);
    return cfg;
  }
  return smm::parse_config_file(path);
}

void print_gaps(const smm::EnsembleStats& stats) {
  for (std::size_t t = 0; t < stats.actual_times.size(); ++t) {
    smm::MacroField a(stats.stats[0][t].mean), b(stats.stats[1][t].mean);
    std::printf("t = %-10g mean-field relative L2 gap (%s vs %s): %.6e\n",
                stats.requested_times[t], stats.scheme_names[0].c_str(),
                stats.scheme_names[1].c_str(), smm::relative_l2_gap(a, b));
  }
}

int run_simulate(const std::string& config_path, const std::string& out_dir) {
  smm::RunConfig cfg = load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  auto setup = smm::build_problem(cfg);
  auto ens = smm::build_ensemble(cfg, {smm::scheme_kind_from_string(cfg.scheme_kind)});
  auto stats = smm::run_ensemble(setup, ens);
  auto files = smm::emit_csv(stats, setup, cfg.output_dir, smm::serialize_config(cfg));
  std::printf("scheme %s: %d realizations, dt = %.6e, %zu files in %s\n",
              cfg.scheme_kind.c_str(), stats.realizations, stats.dt, files.size(),
              cfg.output_dir.c_str());
  for (std::size_t s = 0; s < stats.failed.size(); ++s)
    if (!stats.failed[s].empty())
      std::printf("  %s: %zu failed realizations\n", stats.scheme_names[s].c_str(),
                  stats.failed[s].size());
  return kExitOk;
}

int run_compare(const std::string& config_path, const std::string& against,
                const std::string& out_dir, double tol) {
  smm::RunConfig cfg = load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  auto setup = smm::build_problem(cfg);
  auto ens = smm::build_ensemble(cfg, {smm::scheme_kind_from_string(cfg.scheme_kind),
                                       smm::scheme_kind_from_string(against)});
  ens.record_path_gaps = ens.lockstep;
  auto stats = smm::run_ensemble(setup, ens);
  smm::emit_csv(stats, setup, cfg.output_dir, smm::serialize_config(cfg));
  print_gaps(stats);
  if (tol > 0.0) {
    for (std::size_t t = 0; t < stats.actual_times.size(); ++t) {
      smm::MacroField a(stats.stats[0][t].mean), b(stats.stats[1][t].mean);
      if (smm::relative_l2_gap(a, b) > tol) {
        std::printf("gap above tolerance %g at t = %g\n", tol, stats.requested_times[t]);
        return kExitCheckFailed;
      }
    }
  }
  return kExitOk;
}

int run_paper(const std::string& regime, std::uint64_t seed, int realizations, int workers,
              const std::string& out_dir) {
  smm::PaperRegime r;
  if (regime == "kinetic")
    r = smm::PaperRegime::kinetic_eps1;
  else if (regime == "diffusive")
    r = smm::PaperRegime::diffusive_eps1em2;
  else
    throw smm::ConfigError("--regime must be kinetic or diffusive");
  auto [setup, ens] = smm::paper_experiment_setup(r, seed, realizations, workers);
  auto stats = smm::run_ensemble(setup, ens);
  char echo[160];
  std::snprintf(echo, sizeof(echo), "paper-experiment --regime %s --seed %llu --realizations %d",
                regime.c_str(), static_cast<unsigned long long>(seed), realizations);
  smm::emit_csv(stats, setup, out_dir, echo);
  print_gaps(stats);
  return kExitOk;
}

int run_scan(double dt_min, double dt_max, int dt_count, std::vector<double> dxs,
             std::vector<double> epss, int theta_samples, const std::string& out_file) {
  if (dxs.empty()) dxs = {0.05, 0.01, 0.005};
  if (epss.empty()) epss = {1.0, 1e-1, 1e-2, 1e-4};
  std::vector<double> dts;
  for (int k = 0; k < dt_count; ++k) {
    double f = dt_count == 1 ? 0.0 : static_cast<double>(k) / (dt_count - 1);
    dts.push_back(dt_min * std::pow(dt_max / dt_min, f));
  }
  auto report = smm::scan_stability(dts, dxs, epss, theta_samples);
  std::ofstream out(out_file);
  if (!out) throw smm::ConfigError("cannot write '" + out_file + "'");
  out << "dt,dx,epsilon,cfl_ok,max_norm_sq,q0,q1\n";
  for (const auto& p : report.points) {
    char line[256];
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n", p.dt, p.dx,
                  p.eps, p.cfl_ok ? 1 : 0, p.max_norm_sq, p.q0, p.q1);
    out << line;
  }
  std::printf("scanned %zu points, %zu violations under CFL, worst margin outside CFL %.3e\n",
              report.points.size(), report.violations.size(),
              report.worst_margin_outside_cfl);
  return report.violations.empty() ? kExitOk : kExitCheckFailed;
}

int run_energy(int cells, double epsilon, int realizations, double horizon, double max_growth,
               std::uint64_t seed, int workers, const std::string& out_dir) {
  smm::RunConfig cfg;
  cfg.grid_num_cells = cells;
  cfg.scheme_kind = "telegraph";
  cfg.scheme_epsilon = epsilon;
  cfg.noise_kind = "constant_mode";
  cfg.init_kind = "cos_mode";
  cfg.ensemble_realizations = realizations;
  cfg.ensemble_workers = workers;
  cfg.noise_master_seed = seed;
  cfg.output_times = {horizon};
  cfg.output_dir = out_dir;
  smm::validate_config(cfg);
  auto setup = smm::build_problem(cfg);
  auto ens = smm::build_ensemble(cfg, {smm::SchemeKind::telegraph});
  ens.record_energy = true;

  // Baseline run consumes the refined stream in aggregated pairs so the
  // half-step rerun below sees the same Brownian path.
  ens.draw_refine = 2;
  auto coarse = smm::run_ensemble(setup, ens);
  double l_coarse = smm::fit_growth_rate(coarse.mean_energy[0], coarse.dt);

  auto setup_fine = setup;
  setup_fine.dt_override = coarse.dt / 2.0;
  auto ens_fine = ens;
  ens_fine.draw_refine = 1;
  auto fine = smm::run_ensemble(setup_fine, ens_fine);
  double l_fine = smm::fit_growth_rate(fine.mean_energy[0], fine.dt);

  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/energy.csv");
  out << "step,time,mean_energy\n";
  for (std::size_t n = 0; n < coarse.mean_energy[0].size(); ++n) {
    char line[128];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", n, n * coarse.dt,
                  coarse.mean_energy[0][n]);
    out << line;
  }
  double rel_change = std::abs(l_fine - l_coarse) / std::max(std::abs(l_coarse), 1e-12);
  std::printf("fitted growth rate L = %.4f (dt = %.3e), L = %.4f at dt/2, change %.1f%%\n",
              l_coarse, coarse.dt, l_fine, 100.0 * rel_change);
  if (l_coarse > max_growth) {
    std::printf("fitted L exceeds bound %.3f\n", max_growth);
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic micro-macro kinetic transport simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, against = "crank_nicolson", regime = "kinetic";
  std::string paper_dir = "paper_out", energy_dir = "energy_out";
  std::string scan_file = "stability_scan.csv";
  double tol = 0.0;
  std::uint64_t seed = 42;
  int realizations = 100, workers = 0;
  double dt_min = 1e-6, dt_max = 1e-2;
  int dt_count = 25, theta_samples = 201;
  std::vector<double> dxs, epss;
  int cells = 50;
  double epsilon = 1.0, horizon = 1.0, max_growth = 2.0;

  auto* sim = app.add_subcommand("simulate", "run one scheme as a Monte Carlo ensemble");
  sim->add_option("-c,--config", config_path, "config file (key = value)");
  sim->add_option("-o,--output", out_dir, "output directory override");

  auto* cmp = app.add_subcommand("compare", "run two path-coupled schemes and report gaps");
  cmp->add_option("-c,--config", config_path, "config file (key = value)");
  cmp->add_option("-o,--output", out_dir, "output directory override");
  cmp->add_option("--against", against, "second scheme kind")->capture_default_str();
  cmp->add_option("--tol", tol, "fail (exit 4) if a mean-field gap exceeds this");

  auto* pap = app.add_subcommand("paper-experiment", "kinetic or diffusive regime reproduction");
  pap->add_option("--regime", regime, "kinetic | diffusive")->capture_default_str();
  pap->add_option("--seed", seed, "master seed")->capture_default_str();
  pap->add_option("--realizations", realizations, "")->capture_default_str();
  pap->add_option("--workers", workers, "0 = hardware")->capture_default_str();
  pap->add_option("-o,--output", paper_dir, "output directory")->capture_default_str();

  auto* scan = app.add_subcommand("stability-scan", "amplification-norm scan vs the CFL bound");
  scan->add_option("--dt-min", dt_min, "")->capture_default_str();
  scan->add_option("--dt-max", dt_max, "")->capture_default_str();
  scan->add_option("--dt-count", dt_count, "")->capture_default_str();
  scan->add_option("--dx", dxs, "dx values (default 0.05 0.01 0.005)");
  scan->add_option("--eps", epss, "epsilon values (default 1 1e-1 1e-2 1e-4)");
  scan->add_option("--theta-samples", theta_samples, "")->capture_default_str();
  scan->add_option("-o,--output", scan_file, "CSV output")->capture_default_str();

  auto* en = app.add_subcommand("energy-test", "telegraph ensemble energy growth fit");
  en->add_option("--cells", cells, "")->capture_default_str();
  en->add_option("--epsilon", epsilon, "")->capture_default_str();
  en->add_option("--realizations", realizations, "")->capture_default_str();
  en->add_option("--horizon", horizon, "")->capture_default_str();
  en->add_option("--max-growth", max_growth, "fail (exit 4) above this fitted L")
      ->capture_default_str();
  en->add_option("--seed", seed, "")->capture_default_str();
  en->add_option("--workers", workers, "")->capture_default_str();
  en->add_option("-o,--output", energy_dir, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(config_path, out_dir);
    if (cmp->parsed()) return run_compare(config_path, against, out_dir, tol);
    if (pap->parsed()) return run_paper(regime, seed, realizations, workers, paper_dir);
    if (scan->parsed())
      return run_scan(dt_min, dt_max, dt_count, dxs, epss, theta_samples, scan_file);
    if (en->parsed())
      return run_energy(cells, epsilon, realizations, horizon, max_growth, seed, workers,
                        energy_dir);
  } catch (const smm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const smm::BlowUpError& e) {
    std::cerr << "numerical blow-up: " << e.what() << "\n";
    return kExitBlowUp;
  } catch (const smm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitBlowUp;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
