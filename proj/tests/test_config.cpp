#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "smm/config.hpp"
#include "smm/output.hpp"

using namespace smm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defaults reproduce the kinetic experiment setup") {
  RunConfig cfg = parse_config_text("");
  REQUIRE(cfg.grid_num_cells == 200);
  REQUIRE(cfg.scheme_kind == "smm");
  REQUIRE(cfg.scheme_epsilon == 1.0);
  REQUIRE(cfg.noise_kind == "paper");
  REQUIRE(cfg.noise_num_modes == 200);
  REQUIRE(cfg.init_kind == "paper");
  REQUIRE(cfg.output_times == std::vector<double>{0.1, 0.3, 0.6, 1.0});
}

TEST_CASE("config parsing and validation") {
  auto cfg = parse_config_text(
      "# comment\n"
      "grid.num_cells = 64\n"
      "scheme.kind = telegraph\n"
      "scheme.epsilon = 0.25  # trailing comment\n"
      "noise.kind = constant_mode\n"
      "output.times = 0.1, 0.2, 0.5\n");
  REQUIRE(cfg.grid_num_cells == 64);
  REQUIRE(cfg.scheme_kind == "telegraph");
  REQUIRE(cfg.scheme_epsilon == 0.25);
  REQUIRE(cfg.output_times == std::vector<double>{0.1, 0.2, 0.5});

  REQUIRE_THROWS_AS(parse_config_text("scheme.epsilon = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("scheme.epsilon = -1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("no.such.key = 1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("grid.num_cells = twelve\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("scheme.kind = rk4\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("noise.num_modes = 7\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("output.times = 0.5, 0.1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("just a line\n"), ConfigError);

  // unknown keys carry the key path in the message
  try {
    parse_config_text("grid.cells = 10\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("grid.cells") != std::string::npos);
  }
}

TEST_CASE("serialize-parse round trip is the identity") {
  RunConfig cfg;
  cfg.grid_num_cells = 123;
  cfg.grid_domain_length = 2.5;
  cfg.quadrature_kind = "two_point";
  cfg.quadrature_num_nodes = 2;
  cfg.scheme_kind = "crank_nicolson";
  cfg.scheme_epsilon = 0.0125;
  cfg.scheme_dt = 1.25e-4;
  cfg.noise_kind = "paper";
  cfg.noise_num_modes = 10;
  cfg.noise_master_seed = 987654321;
  cfg.noise_raw_wavenumbers = true;
  cfg.ensemble_realizations = 17;
  cfg.init_kind = "cos_mode";
  cfg.init_mode_k = 3;
  cfg.output_times = {1.0 / 3.0, 0.5};
  cfg.output_dir = "elsewhere";

  std::string text = serialize_config(cfg);
  RunConfig back = parse_config_text(text);
  REQUIRE(serialize_config(back) == text);
  REQUIRE(back.grid_num_cells == cfg.grid_num_cells);
  REQUIRE(back.grid_domain_length == cfg.grid_domain_length);
  REQUIRE(back.scheme_epsilon == cfg.scheme_epsilon);
  REQUIRE(back.scheme_dt == cfg.scheme_dt);
  REQUIRE(back.noise_master_seed == cfg.noise_master_seed);
  REQUIRE(back.output_times == cfg.output_times);  // 17 digits keep bitwise values
}

TEST_CASE("build_problem realizes the configured pieces") {
  RunConfig cfg = parse_config_text(
      "grid.num_cells = 16\nquadrature.kind = two_point\nnoise.kind = none\n"
      "sigma.value = 2\ninit.kind = constant\n");
  auto setup = build_problem(cfg);
  REQUIRE(setup.grid.num_cells == 16);
  REQUIRE(setup.quad.size() == 2);
  REQUIRE(setup.noise->num_modes() == 0);
  REQUIRE(setup.sigma.values[3] == 2.0);
  for (double r : setup.initial_rho) REQUIRE(r == 1.0);
}

TEST_CASE("csv emission") {
  StaggeredGrid1D grid(16, 1.0);
  auto noise = std::make_shared<const NoiseModel>(build_paper_noise(grid, 4));
  auto quad = VelocityQuadrature::gauss_legendre(8);
  auto collision =
      std::make_shared<const CollisionOperator>(CollisionKernel::make_one_group(), quad);
  ProblemSetup setup{grid,
                     quad,
                     collision,
                     ScatterField::uniform(grid, 1.0),
                     MacroField(16, 1.0),
                     noise,
                     1e-2,
                     0.9,
                     0.0,
                     MacroField(16, 1.0)};
  EnsembleConfig ecfg;
  ecfg.realizations = 3;
  ecfg.master_seed = 7;
  ecfg.output_times = {0.01, 0.02};
  ecfg.schemes = {SchemeKind::smm, SchemeKind::crank_nicolson};

  auto stats = run_ensemble(setup, ecfg);
  fs::path dir = fs::temp_directory_path() / "smm_csv_test";
  fs::remove_all(dir);
  auto files = emit_csv(stats, setup, dir.string(), "a = b");
  // one CSV per (scheme, time) + metadata + overlay script
  REQUIRE(files.size() == 2 * 2 + 2);

  SECTION("data rows match the grid and parse back bitwise") {
    std::ifstream in(dir / "smm_t0p01.csv");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "x,mean,variance,min,max");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      double x, mean, var, lo, hi;
      REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &x, &mean, &var, &lo, &hi) == 5);
      REQUIRE(x == grid.primal_x(rows));          // 17 significant digits round-trip
      REQUIRE(mean == stats.stats[0][0].mean[rows]);
      REQUIRE(var == stats.stats[0][0].variance[rows]);
      ++rows;
    }
    REQUIRE(rows == 16);
  }

  SECTION("metadata is valid json and carries the reproduction keys") {
    auto meta = nlohmann::json::parse(slurp((dir / "metadata.json").string()));
    REQUIRE(meta["master_seed"] == 7);
    REQUIRE(meta["realizations"] == 3);
    REQUIRE(meta["dt"].get<double>() == stats.dt);
    REQUIRE(meta["schemes"].size() == 2);
    REQUIRE(meta["config"] == "a = b");
    REQUIRE(meta.contains("build"));
  }

  SECTION("same seed reruns emit byte-identical csv files") {
    auto stats2 = run_ensemble(setup, ecfg);
    fs::path dir2 = fs::temp_directory_path() / "smm_csv_test2";
    fs::remove_all(dir2);
    emit_csv(stats2, setup, dir2.string(), "a = b");
    for (const char* name : {"smm_t0p01.csv", "smm_t0p02.csv", "crank_nicolson_t0p01.csv"})
      REQUIRE(slurp((dir / name).string()) == slurp((dir2 / name).string()));
  }

  SECTION("empty output-times emits the metadata file only") {
    EnsembleConfig none = ecfg;
    none.output_times = {};
    auto s2 = run_ensemble(setup, none);
    fs::path dir3 = fs::temp_directory_path() / "smm_csv_test3";
    fs::remove_all(dir3);
    auto files3 = emit_csv(s2, setup, dir3.string());
    REQUIRE(files3.size() == 1);
    REQUIRE(fs::exists(dir3 / "metadata.json"));
  }
}
