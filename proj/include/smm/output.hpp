#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smm/config.hpp"
#include "smm/harness.hpp"
#include "smm/version.hpp"

namespace smm {

namespace detail {
inline std::string time_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  std::string s(buf);
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}
}  // namespace detail

/// One CSV per (scheme, output time): x, mean, variance, min, max with 17
/// significant digits, plus a gnuplot overlay script and a JSON metadata
/// sidecar carrying everything needed to reproduce the run.
inline std::vector<std::string> emit_csv(const EnsembleStats& stats, const ProblemSetup& setup,
                                         const std::string& dir,
                                         const std::string& config_echo = "") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw ConfigError("output.dir: cannot create '" + dir + "'");
  std::vector<std::string> written;

  for (std::size_t s = 0; s < stats.scheme_names.size(); ++s) {
    for (std::size_t t = 0; t < stats.actual_times.size(); ++t) {
      std::string path = dir + "/" + stats.scheme_names[s] + "_t" +
                         detail::time_tag(stats.requested_times[t]) + ".csv";
      std::ofstream out(path);
      if (!out) throw ConfigError("cannot write '" + path + "'");
      out << "x,mean,variance,min,max\n";
      const auto& fsrow = stats.stats[s][t];
      for (std::size_t i = 0; i < fsrow.mean.size(); ++i) {
        out << detail::format_double(setup.grid.primal_x(static_cast<int>(i))) << ','
            << detail::format_double(fsrow.mean[i]) << ','
            << detail::format_double(fsrow.variance[i]) << ','
            << detail::format_double(fsrow.min[i]) << ','
            << detail::format_double(fsrow.max[i]) << '\n';
      }
      written.push_back(path);
    }
  }

  nlohmann::json meta;
  meta["master_seed"] = stats.master_seed;
  meta["realizations"] = stats.realizations;
  meta["dt"] = stats.dt;
  meta["scheme_dt"] = stats.scheme_dt;
  meta["requested_times"] = stats.requested_times;
  meta["actual_times"] = stats.actual_times_by;
  meta["schemes"] = stats.scheme_names;
  meta["scheme_cfl_dt"] = nlohmann::json::array();
  for (double b : stats.scheme_cfl_dt)
    meta["scheme_cfl_dt"].push_back(std::isfinite(b) ? nlohmann::json(b)
                                                     : nlohmann::json("unconditional"));
  meta["failed_realizations"] = stats.failed;
  meta["epsilon"] = setup.epsilon;
  meta["cfl_safety"] = setup.cfl_safety;
  meta["grid"] = {{"num_cells", setup.grid.num_cells},
                  {"domain_length", setup.grid.domain_length},
                  {"dx", setup.grid.dx}};
  meta["noise_modes"] = setup.noise->num_modes();
  meta["noise_trace_sup_sq"] = setup.noise->trace_sup_sq();
  meta["build"] = version_string();
  if (!config_echo.empty()) meta["config"] = config_echo;
  {
    std::string path = dir + "/metadata.json";
    std::ofstream out(path);
    out << meta.dump(2) << "\n";
    written.push_back(path);
  }

  if (!stats.actual_times.empty()) {
    std::string path = dir + "/overlay.gp";
    std::ofstream out(path);
    out << "# gnuplot overlay of ensemble means per output time\n";
    out << "set xlabel 'x'\nset ylabel 'mean rho'\nset key outside\n";
    for (std::size_t t = 0; t < stats.actual_times.size(); ++t) {
      out << (t == 0 ? "plot " : "replot ");
      for (std::size_t s = 0; s < stats.scheme_names.size(); ++s) {
        if (s) out << ", ";
        out << "'" << stats.scheme_names[s] << "_t"
            << detail::time_tag(stats.requested_times[t]) << ".csv' using 1:2 with lines title '"
            << stats.scheme_names[s] << " t=" << stats.requested_times[t] << "'";
      }
      out << "\n";
    }
    out << "pause -1\n";
    written.push_back(path);
  }
  return written;
}

}  // namespace smm
