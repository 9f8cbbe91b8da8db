#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "smm/harness.hpp"

namespace smm {

/// Fully resolved run description; every key has a default so a minimal
/// config reproduces the kinetic-regime experiment setup.
struct RunConfig {
  // grid
  int grid_num_cells = 200;
  double grid_domain_length = 1.0;
  // quadrature
  std::string quadrature_kind = "gauss_legendre";  // or two_point
  int quadrature_num_nodes = 16;
  // collision
  std::string collision_kernel = "one_group";  // or anisotropic
  double collision_anisotropy = 0.0;
  // sigma
  double sigma_value = 1.0;
  // scheme
  std::string scheme_kind = "smm";
  double scheme_epsilon = 1.0;
  double scheme_dt = 0.0;  // 0 = auto from CFL
  double scheme_cfl_safety = 0.9;
  // noise
  std::string noise_kind = "paper";  // none | constant_mode | paper
  int noise_num_modes = 200;
  std::uint64_t noise_master_seed = 42;
  bool noise_raw_wavenumbers = false;
  // ensemble
  int ensemble_realizations = 100;
  int ensemble_workers = 0;
  bool ensemble_lockstep = true;
  // init
  std::string init_kind = "paper";  // paper | constant | cos_mode
  int init_mode_k = 1;
  // output
  std::vector<double> output_times = {0.1, 0.3, 0.6, 1.0};
  std::string output_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

inline void validate_config(const RunConfig& cfg);

/// Parses the key = value format with dotted section names; '#' starts a
/// comment. Unknown keys and malformed values are configuration errors.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");

    if (key == "grid.num_cells") cfg.grid_num_cells = static_cast<int>(detail::parse_int(key, value));
    else if (key == "grid.domain_length") cfg.grid_domain_length = detail::parse_double(key, value);
    else if (key == "quadrature.kind") cfg.quadrature_kind = value;
    else if (key == "quadrature.num_nodes") cfg.quadrature_num_nodes = static_cast<int>(detail::parse_int(key, value));
    else if (key == "collision.kernel") cfg.collision_kernel = value;
    else if (key == "collision.anisotropy") cfg.collision_anisotropy = detail::parse_double(key, value);
    else if (key == "sigma.value") cfg.sigma_value = detail::parse_double(key, value);
    else if (key == "scheme.kind") cfg.scheme_kind = value;
    else if (key == "scheme.epsilon") cfg.scheme_epsilon = detail::parse_double(key, value);
    else if (key == "scheme.dt") cfg.scheme_dt = detail::parse_double(key, value);
    else if (key == "scheme.cfl_safety") cfg.scheme_cfl_safety = detail::parse_double(key, value);
    else if (key == "noise.kind") cfg.noise_kind = value;
    else if (key == "noise.num_modes") cfg.noise_num_modes = static_cast<int>(detail::parse_int(key, value));
    else if (key == "noise.master_seed") cfg.noise_master_seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
    else if (key == "noise.raw_wavenumbers") cfg.noise_raw_wavenumbers = detail::parse_bool(key, value);
    else if (key == "ensemble.realizations") cfg.ensemble_realizations = static_cast<int>(detail::parse_int(key, value));
    else if (key == "ensemble.workers") cfg.ensemble_workers = static_cast<int>(detail::parse_int(key, value));
    else if (key == "ensemble.lockstep") cfg.ensemble_lockstep = detail::parse_bool(key, value);
    else if (key == "init.kind") cfg.init_kind = value;
    else if (key == "init.mode_k") cfg.init_mode_k = static_cast<int>(detail::parse_int(key, value));
    else if (key == "output.times") cfg.output_times = detail::parse_double_list(key, value);
    else if (key == "output.dir") cfg.output_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  validate_config(cfg);
  return cfg;
}

inline void validate_config(const RunConfig& cfg) {
  if (cfg.grid_num_cells < 3) throw ConfigError("grid.num_cells: must be >= 3");
  if (!(cfg.grid_domain_length > 0.0)) throw ConfigError("grid.domain_length: must be > 0");
  if (cfg.quadrature_kind != "gauss_legendre" && cfg.quadrature_kind != "two_point")
    throw ConfigError("quadrature.kind: expected gauss_legendre or two_point");
  if (cfg.quadrature_num_nodes < 2) throw ConfigError("quadrature.num_nodes: must be >= 2");
  if (cfg.collision_kernel != "one_group" && cfg.collision_kernel != "anisotropic")
    throw ConfigError("collision.kernel: expected one_group or anisotropic");
  if (!(cfg.collision_anisotropy >= 0.0 && cfg.collision_anisotropy < 1.0))
    throw ConfigError("collision.anisotropy: must be in [0,1)");
  if (!(cfg.sigma_value > 0.0)) throw ConfigError("sigma.value: must be > 0");
  static const char* kinds[] = {"smm", "telegraph", "explicit_kinetic", "crank_nicolson",
                                "diffusion_explicit"};
  if (std::find_if(std::begin(kinds), std::end(kinds),
                   [&](const char* k) { return cfg.scheme_kind == k; }) == std::end(kinds))
    throw ConfigError("scheme.kind: unknown scheme '" + cfg.scheme_kind + "'");
  if (!(cfg.scheme_epsilon > 0.0)) throw ConfigError("scheme.epsilon: must be > 0");
  if (cfg.scheme_dt < 0.0) throw ConfigError("scheme.dt: must be >= 0 (0 = auto)");
  if (!(cfg.scheme_cfl_safety > 0.0 && cfg.scheme_cfl_safety <= 1.0))
    throw ConfigError("scheme.cfl_safety: must be in (0,1]");
  if (cfg.noise_kind != "none" && cfg.noise_kind != "constant_mode" && cfg.noise_kind != "paper")
    throw ConfigError("noise.kind: expected none, constant_mode or paper");
  if (cfg.noise_kind == "paper" && (cfg.noise_num_modes < 2 || cfg.noise_num_modes % 2 != 0))
    throw ConfigError("noise.num_modes: must be even and >= 2");
  if (cfg.ensemble_realizations < 1) throw ConfigError("ensemble.realizations: must be >= 1");
  if (cfg.ensemble_workers < 0) throw ConfigError("ensemble.workers: must be >= 0");
  if (cfg.init_kind != "paper" && cfg.init_kind != "constant" && cfg.init_kind != "cos_mode")
    throw ConfigError("init.kind: expected paper, constant or cos_mode");
  if (cfg.init_mode_k < 1) throw ConfigError("init.mode_k: must be >= 1");
  for (std::size_t j = 0; j < cfg.output_times.size(); ++j) {
    if (!(cfg.output_times[j] >= 0.0)) throw ConfigError("output.times: must be >= 0");
    if (j > 0 && cfg.output_times[j] < cfg.output_times[j - 1])
      throw ConfigError("output.times: must be sorted ascending");
  }
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical echo of a config: parse(serialize(cfg)) == cfg, field by field.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "grid.num_cells = " << c.grid_num_cells << "\n";
  out << "grid.domain_length = " << detail::format_double(c.grid_domain_length) << "\n";
  out << "quadrature.kind = " << c.quadrature_kind << "\n";
  out << "quadrature.num_nodes = " << c.quadrature_num_nodes << "\n";
  out << "collision.kernel = " << c.collision_kernel << "\n";
  out << "collision.anisotropy = " << detail::format_double(c.collision_anisotropy) << "\n";
  out << "sigma.value = " << detail::format_double(c.sigma_value) << "\n";
  out << "scheme.kind = " << c.scheme_kind << "\n";
  out << "scheme.epsilon = " << detail::format_double(c.scheme_epsilon) << "\n";
  out << "scheme.dt = " << detail::format_double(c.scheme_dt) << "\n";
  out << "scheme.cfl_safety = " << detail::format_double(c.scheme_cfl_safety) << "\n";
  out << "noise.kind = " << c.noise_kind << "\n";
  out << "noise.num_modes = " << c.noise_num_modes << "\n";
  out << "noise.master_seed = " << c.noise_master_seed << "\n";
  out << "noise.raw_wavenumbers = " << (c.noise_raw_wavenumbers ? "true" : "false") << "\n";
  out << "ensemble.realizations = " << c.ensemble_realizations << "\n";
  out << "ensemble.workers = " << c.ensemble_workers << "\n";
  out << "ensemble.lockstep = " << (c.ensemble_lockstep ? "true" : "false") << "\n";
  out << "init.kind = " << c.init_kind << "\n";
  out << "init.mode_k = " << c.init_mode_k << "\n";
  out << "output.times = ";
  for (std::size_t j = 0; j < c.output_times.size(); ++j)
    out << (j ? ", " : "") << detail::format_double(c.output_times[j]);
  out << "\n";
  out << "output.dir = " << c.output_dir << "\n";
  return out.str();
}

inline SchemeKind scheme_kind_from_string(const std::string& s) {
  if (s == "smm") return SchemeKind::smm;
  if (s == "telegraph") return SchemeKind::telegraph;
  if (s == "explicit_kinetic") return SchemeKind::explicit_kinetic;
  if (s == "crank_nicolson") return SchemeKind::crank_nicolson;
  if (s == "diffusion_explicit") return SchemeKind::diffusion_explicit;
  throw ConfigError("scheme.kind: unknown scheme '" + s + "'");
}

/// Assembles the immutable problem pieces a run needs from a validated config.
inline ProblemSetup build_problem(const RunConfig& c) {
  StaggeredGrid1D grid(c.grid_num_cells, c.grid_domain_length);
  VelocityQuadrature quad = c.quadrature_kind == "two_point"
                                ? VelocityQuadrature::two_point()
                                : VelocityQuadrature::gauss_legendre(c.quadrature_num_nodes);
  CollisionKernel kernel = c.collision_kernel == "one_group"
                               ? CollisionKernel::make_one_group()
                               : CollisionKernel::linear_anisotropy(c.collision_anisotropy);
  auto collision = std::make_shared<const CollisionOperator>(kernel, quad);
  std::shared_ptr<const NoiseModel> noise;
  if (c.noise_kind == "none")
    noise = std::make_shared<const NoiseModel>(NoiseModel::none());
  else if (c.noise_kind == "constant_mode")
    noise = std::make_shared<const NoiseModel>(NoiseModel::constant_mode(grid));
  else
    noise = std::make_shared<const NoiseModel>(
        build_paper_noise(grid, c.noise_num_modes, c.noise_raw_wavenumbers));
  MacroField rho0(grid.num_cells);
  for (int i = 0; i < grid.num_cells; ++i) {
    const double x = grid.primal_x(i);
    if (c.init_kind == "paper")
      rho0[i] = 1.0 + std::cos(2.0 * M_PI * x / c.grid_domain_length + M_PI);
    else if (c.init_kind == "constant")
      rho0[i] = 1.0;
    else
      rho0[i] = std::cos(2.0 * M_PI * c.init_mode_k * x / c.grid_domain_length);
  }
  return ProblemSetup{grid,
                      quad,
                      collision,
                      ScatterField::uniform(grid, c.sigma_value),
                      MacroField(grid.num_cells, c.sigma_value),
                      noise,
                      c.scheme_epsilon,
                      c.scheme_cfl_safety,
                      c.scheme_dt,
                      std::move(rho0)};
}

inline EnsembleConfig build_ensemble(const RunConfig& c,
                                     const std::vector<SchemeKind>& schemes) {
  EnsembleConfig e;
  e.realizations = c.ensemble_realizations;
  e.master_seed = c.noise_master_seed;
  e.workers = c.ensemble_workers;
  e.lockstep = c.ensemble_lockstep;
  e.output_times = c.output_times;
  e.schemes = schemes;
  return e;
}

}  // namespace smm
