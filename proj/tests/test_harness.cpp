#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstring>
#include <memory>

#include "smm/harness.hpp"

using namespace smm;

namespace {

ProblemSetup small_setup(int m, double eps, std::shared_ptr<const NoiseModel> noise,
                         double dt_override = 0.0) {
  StaggeredGrid1D grid(m, 1.0);
  auto quad = VelocityQuadrature::gauss_legendre(8);
  auto collision =
      std::make_shared<const CollisionOperator>(CollisionKernel::make_one_group(), quad);
  ProblemSetup setup{grid,
                     quad,
                     collision,
                     ScatterField::uniform(grid, 1.0),
                     MacroField(m, 1.0),
                     std::move(noise),
                     eps,
                     0.9,
                     dt_override,
                     MacroField(m)};
  for (int i = 0; i < m; ++i)
    setup.initial_rho[i] = 1.0 - std::cos(2.0 * M_PI * grid.primal_x(i));
  return setup;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("single deterministic realization equals the plain trajectory") {
  auto setup = small_setup(16, 0.5, std::make_shared<const NoiseModel>());
  EnsembleConfig cfg;
  cfg.realizations = 1;
  cfg.output_times = {0.05};
  cfg.schemes = {SchemeKind::smm};
  auto stats = run_ensemble(setup, cfg);

  SchemeConfig sc{setup.grid,    setup.quad,   setup.collision, setup.sigma,
                  setup.noise,   setup.epsilon, stats.dt,        setup.cfl_safety};
  SmmStepper stepper(sc);
  KineticState state{setup.initial_rho, KineticField(16, setup.quad.size())};
  auto steps = static_cast<std::uint64_t>(std::llround(0.05 / stats.dt));
  for (std::uint64_t n = 1; n <= steps; ++n) stepper.step(state, GaussianDraw{{}, 0, n});

  REQUIRE(same_bits(stats.stats[0][0].mean, state.rho.values));
  for (double v : stats.stats[0][0].variance) REQUIRE(v == 0.0);
}

TEST_CASE("no-noise ensembles have exactly zero sample variance") {
  auto setup = small_setup(12, 0.5, std::make_shared<const NoiseModel>());
  EnsembleConfig cfg;
  cfg.realizations = 3;
  cfg.output_times = {0.02};
  cfg.schemes = {SchemeKind::smm};
  auto stats = run_ensemble(setup, cfg);
  for (double v : stats.stats[0][0].variance) REQUIRE(v == 0.0);
  for (std::size_t i = 0; i < stats.stats[0][0].mean.size(); ++i) {
    REQUIRE(stats.stats[0][0].min[i] == stats.stats[0][0].mean[i]);
    REQUIRE(stats.stats[0][0].max[i] == stats.stats[0][0].mean[i]);
  }
}

TEST_CASE("results are bitwise independent of the worker count") {
  StaggeredGrid1D grid(16, 1.0);
  auto noise = std::make_shared<const NoiseModel>(build_paper_noise(grid, 6));
  auto setup = small_setup(16, 1e-2, noise);
  EnsembleConfig cfg;
  cfg.realizations = 7;
  cfg.master_seed = 321;
  cfg.output_times = {0.01, 0.03};
  cfg.schemes = {SchemeKind::smm, SchemeKind::crank_nicolson};
  cfg.record_path_gaps = true;

  cfg.workers = 1;
  auto one = run_ensemble(setup, cfg);
  for (int workers : {2, 5}) {
    cfg.workers = workers;
    auto multi = run_ensemble(setup, cfg);
    REQUIRE(multi.dt == one.dt);
    for (std::size_t s = 0; s < one.stats.size(); ++s)
      for (std::size_t t = 0; t < one.stats[s].size(); ++t) {
        REQUIRE(same_bits(one.stats[s][t].mean, multi.stats[s][t].mean));
        REQUIRE(same_bits(one.stats[s][t].variance, multi.stats[s][t].variance));
        REQUIRE(same_bits(one.stats[s][t].min, multi.stats[s][t].min));
        REQUIRE(same_bits(one.stats[s][t].max, multi.stats[s][t].max));
      }
    for (std::size_t t = 0; t < one.path_gaps.size(); ++t)
      REQUIRE(same_bits(one.path_gaps[t], multi.path_gaps[t]));
  }

  SECTION("and identical across repeated runs") {
    cfg.workers = 2;
    auto again = run_ensemble(setup, cfg);
    REQUIRE(same_bits(one.stats[0][1].mean, again.stats[0][1].mean));
  }
}

TEST_CASE("path coupling: identical schemes stay identical pathwise") {
  StaggeredGrid1D grid(12, 1.0);
  auto noise = std::make_shared<const NoiseModel>(build_paper_noise(grid, 4));
  auto setup = small_setup(12, 1e-2, noise);
  EnsembleConfig cfg;
  cfg.realizations = 5;
  cfg.master_seed = 99;
  cfg.output_times = {0.02, 0.05};
  cfg.schemes = {SchemeKind::diffusion_explicit, SchemeKind::diffusion_explicit};
  cfg.record_path_gaps = true;
  auto stats = run_ensemble(setup, cfg);
  // any draw mismatch between the coupled instances would show up here
  for (const auto& per_time : stats.path_gaps)
    for (double g : per_time) REQUIRE(g == 0.0);
}

TEST_CASE("draw refinement couples runs at different time steps to one path") {
  // A dt run consuming aggregated pairs of the refined stream and a dt/2 run
  // consuming it directly follow the same Brownian path, so their densities
  // differ by discretization only; with independent draws the gap would be
  // O(1) at this horizon.
  StaggeredGrid1D grid(8, 1.0);
  auto noise = std::make_shared<const NoiseModel>(NoiseModel::constant_mode(grid));
  auto setup = small_setup(8, 1.0, noise, 0.01);
  for (auto& v : setup.initial_rho) v = 1.0;
  EnsembleConfig cfg;
  cfg.realizations = 3;
  cfg.master_seed = 11;
  cfg.output_times = {0.5};
  cfg.schemes = {SchemeKind::telegraph};

  cfg.draw_refine = 2;
  auto coarse = run_ensemble(setup, cfg);

  auto setup_fine = setup;
  setup_fine.dt_override = coarse.dt / 2.0;
  cfg.draw_refine = 1;
  auto fine = run_ensemble(setup_fine, cfg);

  MacroField a(coarse.stats[0][0].mean), b(fine.stats[0][0].mean);
  REQUIRE(relative_l2_gap(a, b) < 0.05);
}

TEST_CASE("per-realization blow-ups are recorded as data") {
  StaggeredGrid1D grid(8, 1.0);
  auto noise = std::make_shared<const NoiseModel>(NoiseModel::constant_mode(grid));
  auto setup = small_setup(8, 1.0, noise, 0.01);
  // pure multiplicative noise walk, started near the blow-up guard: a
  // deterministic fraction of paths crosses 1e12 within the horizon
  for (auto& v : setup.initial_rho) v = 5e11;
  EnsembleConfig cfg;
  cfg.realizations = 24;
  cfg.master_seed = 2718;
  cfg.output_times = {1.0};
  cfg.schemes = {SchemeKind::diffusion_explicit};
  auto stats = run_ensemble(setup, cfg);
  const auto failures = stats.failed[0].size();
  INFO("failures: " << failures);
  REQUIRE(failures > 0);
  REQUIRE(failures < 24);
  REQUIRE(stats.stats[0][0].samples == 24 - static_cast<int>(failures));
}

TEST_CASE("output time zero reports the initial data exactly") {
  StaggeredGrid1D grid(10, 1.0);
  auto noise = std::make_shared<const NoiseModel>(build_paper_noise(grid, 4));
  auto setup = small_setup(10, 0.5, noise);
  EnsembleConfig cfg;
  cfg.realizations = 4;
  cfg.output_times = {0.0, 0.01};
  cfg.schemes = {SchemeKind::telegraph};
  auto stats = run_ensemble(setup, cfg);
  REQUIRE(same_bits(stats.stats[0][0].mean, setup.initial_rho.values));
  for (double v : stats.stats[0][0].variance) REQUIRE(v == 0.0);
}

TEST_CASE("mean-only mode runs each scheme at its own time step") {
  auto setup = small_setup(25, 1.0, std::make_shared<const NoiseModel>());
  EnsembleConfig cfg;
  cfg.realizations = 1;
  cfg.output_times = {0.1};
  cfg.schemes = {SchemeKind::smm, SchemeKind::explicit_kinetic};

  auto coupled = run_ensemble(setup, cfg);
  cfg.lockstep = false;
  auto solo = run_ensemble(setup, cfg);

  REQUIRE(solo.scheme_dt[0] != solo.scheme_dt[1]);  // each at its own CFL
  REQUIRE(solo.scheme_dt[1] > solo.scheme_dt[0]);   // kinetic bound is looser here
  for (int s = 0; s < 2; ++s) {
    MacroField a(coupled.stats[s][0].mean), b(solo.stats[s][0].mean);
    REQUIRE(relative_l2_gap(b, a) < 2e-2);  // same solution, different dt
  }

  cfg.record_path_gaps = true;
  REQUIRE_THROWS_AS(run_ensemble(setup, cfg), ConfigError);
}

TEST_CASE("ensemble-mean kinetic energy stays exponentially bounded") {
  // the general-case energy ||rho||^2 + eps^2 |||g|||^2 under the general CFL
  StaggeredGrid1D grid(32, 1.0);
  auto noise = std::make_shared<const NoiseModel>(NoiseModel::constant_mode(grid));
  auto setup = small_setup(32, 0.5, noise);
  for (int i = 0; i < 32; ++i)
    setup.initial_rho[i] = std::cos(2.0 * M_PI * grid.primal_x(i));
  EnsembleConfig cfg;
  cfg.realizations = 100;
  cfg.master_seed = 31415;
  cfg.workers = 0;
  cfg.output_times = {1.0};
  cfg.schemes = {SchemeKind::smm};
  cfg.record_energy = true;
  auto stats = run_ensemble(setup, cfg);
  double l = fit_growth_rate(stats.mean_energy[0], stats.dt);
  INFO("fitted growth rate " << l);
  REQUIRE(l <= 2.0);
  for (std::size_t n = 0; n < stats.mean_energy[0].size(); ++n)
    REQUIRE(std::isfinite(stats.mean_energy[0][n]));
}

TEST_CASE("ensemble validation") {
  auto setup = small_setup(8, 0.5, std::make_shared<const NoiseModel>());
  EnsembleConfig cfg;
  cfg.schemes = {SchemeKind::smm};
  cfg.realizations = 0;
  REQUIRE_THROWS_AS(run_ensemble(setup, cfg), ConfigError);
  cfg.realizations = 1;
  cfg.output_times = {0.2, 0.1};
  REQUIRE_THROWS_AS(run_ensemble(setup, cfg), ConfigError);
  cfg.output_times = {0.1};
  cfg.schemes = {};
  REQUIRE_THROWS_AS(run_ensemble(setup, cfg), ConfigError);

  SECTION("the telegraph reduction rejects setups it cannot represent") {
    cfg.schemes = {SchemeKind::telegraph};
    auto varying = setup;
    DualField sig(8);
    for (int i = 0; i < 8; ++i) sig[i] = 1.0 + 0.1 * i;
    varying.sigma = ScatterField(sig);
    REQUIRE_THROWS_AS(run_ensemble(varying, cfg), ConfigError);

    auto aniso = setup;
    aniso.collision = std::make_shared<const CollisionOperator>(
        CollisionKernel::linear_anisotropy(0.5), setup.quad);
    REQUIRE_THROWS_AS(run_ensemble(aniso, cfg), ConfigError);
  }
}

TEST_CASE("paper experiment setup matches the published configuration") {
  auto [setup, cfg] = paper_experiment_setup(PaperRegime::kinetic_eps1, 5, 7);
  REQUIRE(setup.grid.num_cells == 200);
  REQUIRE(setup.epsilon == 1.0);
  REQUIRE(setup.noise->num_modes() == 201);
  REQUIRE(cfg.output_times == std::vector<double>{0.1, 0.3, 0.6, 1.0});
  // rho0 = 1 + cos(2 pi x + pi) = 1 - cos(2 pi x)
  for (int i : {0, 13, 101}) {
    double x = setup.grid.primal_x(i);
    REQUIRE(setup.initial_rho[i] ==
            Catch::Approx(1.0 - std::cos(2.0 * M_PI * x)).margin(1e-14));
  }
  REQUIRE(setup.initial_rho[0] == Catch::Approx(0.0).margin(1e-15));

  auto [dsetup, dcfg] = paper_experiment_setup(PaperRegime::diffusive_eps1em2, 5, 7);
  REQUIRE(dsetup.epsilon == 1e-2);
  REQUIRE(dcfg.output_times == std::vector<double>{1e-3, 4e-3, 0.05, 0.1});
  REQUIRE(dcfg.schemes ==
          std::vector<SchemeKind>{SchemeKind::smm, SchemeKind::crank_nicolson});
}

TEST_CASE("relative gap helper") {
  MacroField a(4, 1.0), b(4, 1.0);
  REQUIRE(relative_l2_gap(a, b) == 0.0);
  a[0] = 1.1;
  REQUIRE(relative_l2_gap(a, b) == Catch::Approx(0.05));
  MacroField c(3, 1.0);
  REQUIRE_THROWS_AS(relative_l2_gap(a, c), DimensionError);
}
