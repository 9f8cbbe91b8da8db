#pragma once

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "smm/reference.hpp"
#include "smm/scheme.hpp"
#include "smm/stability.hpp"

namespace smm {

enum class SchemeKind { smm, telegraph, explicit_kinetic, crank_nicolson, diffusion_explicit };

inline const char* scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::smm: return "smm";
    case SchemeKind::telegraph: return "telegraph";
    case SchemeKind::explicit_kinetic: return "explicit_kinetic";
    case SchemeKind::crank_nicolson: return "crank_nicolson";
    case SchemeKind::diffusion_explicit: return "diffusion_explicit";
  }
  return "?";
}

/// Immutable problem description shared by all realizations and schemes.
struct ProblemSetup {
  StaggeredGrid1D grid;
  VelocityQuadrature quad;
  std::shared_ptr<const CollisionOperator> collision;
  ScatterField sigma;        // dual nodes (micro-macro scheme)
  MacroField sigma_primal;   // primal nodes (kinetic reference)
  std::shared_ptr<const NoiseModel> noise;
  double epsilon = 1.0;
  double cfl_safety = 0.9;
  double dt_override = 0.0;  // 0 = lockstep minimum of the schemes' CFL bounds
  MacroField initial_rho;
};

struct EnsembleConfig {
  int realizations = 1;
  std::uint64_t master_seed = 0;
  int workers = 1;  // 0 = hardware concurrency
  std::vector<double> output_times;
  std::vector<SchemeKind> schemes;
  bool lockstep = true;  // shared dt and per-step draws (pathwise comparable);
                         // false: each scheme at its own CFL dt, means only
  bool record_energy = false;
  bool record_path_gaps = false;  // per-path L2 gap of scheme[0] against scheme[1]
  int draw_refine = 1;  // >1: consume the refined stream in aggregated blocks
};

struct FieldStats {
  std::vector<double> mean, variance, min, max;
  int samples = 0;
};

struct EnsembleStats {
  double dt = 0.0;                                  // lockstep dt (= scheme_dt[s] for all s)
  std::vector<double> scheme_dt;                    // per-scheme step actually used
  std::vector<double> requested_times;
  std::vector<double> actual_times;                 // lockstep; per-scheme in actual_times_by
  std::vector<std::vector<double>> actual_times_by; // [scheme][time]
  std::vector<std::string> scheme_names;
  std::vector<double> scheme_cfl_dt;                // natural bound per scheme (inf if none)
  std::vector<std::vector<FieldStats>> stats;       // [scheme][time]
  std::vector<std::vector<int>> failed;             // [scheme] -> realization indices
  std::vector<std::vector<double>> mean_energy;     // [scheme][step], survivors only
  std::vector<std::vector<double>> path_gaps;       // [time][realization]
  std::uint64_t master_seed = 0;
  int realizations = 0;
};

namespace detail {

class StepperHandle {
public:
  virtual ~StepperHandle() = default;
  virtual void step(const GaussianDraw& draw) = 0;
  virtual const MacroField& density() const = 0;
  virtual double energy() const = 0;
};

class SmmHandle : public StepperHandle {
public:
  SmmHandle(const ProblemSetup& p, double dt)
      : stepper_(SchemeConfig{p.grid, p.quad, p.collision, p.sigma, p.noise, p.epsilon, dt,
                              p.cfl_safety}),
        state_{p.initial_rho, KineticField(p.grid.num_cells, p.quad.size())},
        grid_(p.grid), quad_(p.quad), eps_(p.epsilon) {}
  void step(const GaussianDraw& d) override { stepper_.step(state_, d); }
  const MacroField& density() const override { return state_.rho; }
  double energy() const override { return discrete_energy(grid_, quad_, state_, eps_); }

private:
  SmmStepper stepper_;
  KineticState state_;
  StaggeredGrid1D grid_;
  VelocityQuadrature quad_;
  double eps_;
};

class TelegraphHandle : public StepperHandle {
public:
  TelegraphHandle(const ProblemSetup& p, double dt)
      : stepper_(p.grid, p.noise, p.epsilon, dt, p.cfl_safety, p.sigma.values[0]),
        state_{p.initial_rho, DualField(p.grid.num_cells)} {
    // the (rho, J) reduction holds for the two-velocity one-group model with
    // spatially uniform scattering only
    if (p.sigma.sigma_min != p.sigma.sigma_max)
      throw ConfigError("telegraph scheme requires a uniform scatter rate");
    if (p.collision && !p.collision->one_group())
      throw ConfigError("telegraph scheme requires the one-group kernel");
  }
  void step(const GaussianDraw& d) override { stepper_.step(state_, d); }
  const MacroField& density() const override { return state_.rho; }
  double energy() const override { return discrete_energy(state_); }

private:
  TelegraphStepper stepper_;
  TelegraphState state_;
};

class ExplicitKineticHandle : public StepperHandle {
public:
  ExplicitKineticHandle(const ProblemSetup& p, double dt)
      : stepper_(SchemeConfig{p.grid, p.quad, p.collision, p.sigma, p.noise, p.epsilon, dt,
                              p.cfl_safety},
                 p.sigma_primal),
        state_(kinetic_state_from_density(p.initial_rho, p.quad.size())), grid_(p.grid) {
    rho_ = stepper_.density(state_);
  }
  void step(const GaussianDraw& d) override {
    stepper_.step(state_, d);
    rho_ = stepper_.density(state_);
  }
  const MacroField& density() const override { return rho_; }
  double energy() const override { return macro_norm_sq(grid_, rho_); }

private:
  ExplicitKineticStepper stepper_;
  KineticFullState state_;
  MacroField rho_;
  StaggeredGrid1D grid_;
};

class CrankNicolsonHandle : public StepperHandle {
public:
  CrankNicolsonHandle(const ProblemSetup& p, double dt)
      : stepper_(p.grid, diffusion_coefficient(*p.collision, p.sigma), p.noise, dt),
        rho_(p.initial_rho), grid_(p.grid) {}
  void step(const GaussianDraw& d) override { stepper_.step(rho_, d); }
  const MacroField& density() const override { return rho_; }
  double energy() const override { return macro_norm_sq(grid_, rho_); }

private:
  CrankNicolsonStepper stepper_;
  MacroField rho_;
  StaggeredGrid1D grid_;
};

class ExplicitDiffusionHandle : public StepperHandle {
public:
  ExplicitDiffusionHandle(const ProblemSetup& p, double dt)
      : stepper_(p.grid, diffusion_coefficient(*p.collision, p.sigma), p.noise, dt),
        rho_(p.initial_rho), grid_(p.grid) {}
  void step(const GaussianDraw& d) override { stepper_.step(rho_, d); }
  const MacroField& density() const override { return rho_; }
  double energy() const override { return macro_norm_sq(grid_, rho_); }

private:
  ExplicitDiffusionStepper stepper_;
  MacroField rho_;
  StaggeredGrid1D grid_;
};

inline double natural_cfl_bound(SchemeKind kind, const ProblemSetup& p) {
  const double dx = p.grid.dx;
  switch (kind) {
    case SchemeKind::smm:
      return cfl_dt(dx, p.epsilon, p.collision->s_min(), p.sigma.sigma_min, CflKind::general);
    case SchemeKind::telegraph:
      return cfl_dt(dx, p.epsilon, 0.5, p.sigma.sigma_min, CflKind::telegraph);
    case SchemeKind::explicit_kinetic: {
      double sigma_max = 0.0;
      for (double s : p.sigma_primal) sigma_max = std::max(sigma_max, s);
      return ExplicitKineticStepper::cfl_bound(dx, p.epsilon, sigma_max);
    }
    case SchemeKind::diffusion_explicit: {
      DualField kappa = diffusion_coefficient(*p.collision, p.sigma);
      double kmax = 0.0;
      for (double k : kappa) kmax = std::max(kmax, k);
      return dx * dx / (2.0 * kmax);
    }
    case SchemeKind::crank_nicolson:
      return std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

inline std::unique_ptr<StepperHandle> make_handle(SchemeKind kind, const ProblemSetup& p,
                                                  double dt) {
  switch (kind) {
    case SchemeKind::smm: return std::make_unique<SmmHandle>(p, dt);
    case SchemeKind::telegraph: return std::make_unique<TelegraphHandle>(p, dt);
    case SchemeKind::explicit_kinetic: return std::make_unique<ExplicitKineticHandle>(p, dt);
    case SchemeKind::crank_nicolson: return std::make_unique<CrankNicolsonHandle>(p, dt);
    case SchemeKind::diffusion_explicit:
      return std::make_unique<ExplicitDiffusionHandle>(p, dt);
  }
  throw ConfigError("unknown scheme kind");
}

struct RealizationResult {
  // [scheme][time] -> density snapshot; empty vector if the scheme failed
  std::vector<std::vector<MacroField>> fields;
  std::vector<bool> failed;
  std::vector<std::vector<double>> energy;  // [scheme][step]
};

}  // namespace detail

inline double relative_l2_gap(const MacroField& a, const MacroField& b) {
  if (a.size() != b.size()) throw DimensionError("relative_l2_gap: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

/// Runs R path-coupled realizations; every scheme consumes the identical
/// Gaussian draw at every step. Results are reduced in realization-index
/// order, so the output is bitwise independent of the worker count.
inline EnsembleStats run_ensemble(const ProblemSetup& setup, const EnsembleConfig& cfg) {
  if (cfg.realizations < 1) throw ConfigError("ensemble.realizations must be >= 1");
  if (cfg.schemes.empty()) throw ConfigError("ensemble: no schemes requested");
  if (cfg.draw_refine < 1) throw ConfigError("ensemble: draw_refine must be >= 1");
  for (std::size_t j = 1; j < cfg.output_times.size(); ++j)
    if (cfg.output_times[j] < cfg.output_times[j - 1])
      throw ConfigError("output.times must be sorted ascending");

  const int n_schemes = static_cast<int>(cfg.schemes.size());
  EnsembleStats out;
  out.master_seed = cfg.master_seed;
  out.realizations = cfg.realizations;
  out.requested_times = cfg.output_times;

  if (cfg.record_path_gaps && !cfg.lockstep)
    throw ConfigError("ensemble: per-path gaps require lockstep stepping");

  for (auto kind : cfg.schemes) {
    out.scheme_cfl_dt.push_back(detail::natural_cfl_bound(kind, setup));
    out.scheme_names.emplace_back(scheme_name(kind));
  }
  if (cfg.lockstep) {
    double dt = setup.dt_override;
    if (dt == 0.0) {
      double bound = std::numeric_limits<double>::infinity();
      for (double b : out.scheme_cfl_dt) bound = std::min(bound, b);
      if (std::isfinite(bound)) dt = setup.cfl_safety * bound;
    }
    if (!std::isfinite(dt) || dt <= 0.0)
      throw ConfigError("ensemble: no scheme provides a CFL bound; set scheme.dt explicitly");
    out.dt = dt;
    out.scheme_dt.assign(n_schemes, dt);
  } else {
    for (int s = 0; s < n_schemes; ++s) {
      double dt = setup.dt_override;
      if (dt == 0.0) {
        double bound = out.scheme_cfl_dt[s];
        // unconditional schemes default to the parabolic accuracy scale
        if (!std::isfinite(bound))
          bound = detail::natural_cfl_bound(SchemeKind::diffusion_explicit, setup);
        dt = setup.cfl_safety * bound;
      }
      out.scheme_dt.push_back(dt);
    }
    out.dt = 0.0;
  }

  // per-scheme output schedules; identical under lockstep
  std::vector<std::vector<std::uint64_t>> output_steps(n_schemes);
  std::vector<std::uint64_t> n_steps_of(n_schemes, 0);
  out.actual_times_by.assign(n_schemes, {});
  for (int s = 0; s < n_schemes; ++s) {
    for (double t : cfg.output_times) {
      auto n = static_cast<std::uint64_t>(std::llround(t / out.scheme_dt[s]));
      output_steps[s].push_back(n);
      out.actual_times_by[s].push_back(static_cast<double>(n) * out.scheme_dt[s]);
      n_steps_of[s] = std::max(n_steps_of[s], n);
    }
  }
  out.actual_times = out.actual_times_by.empty() ? std::vector<double>{} : out.actual_times_by[0];
  const int k_total = setup.noise->num_modes();
  const int n_times = static_cast<int>(cfg.output_times.size());

  auto run_one = [&](int r) {
    detail::RealizationResult res;
    res.fields.assign(n_schemes, std::vector<MacroField>(n_times));
    res.failed.assign(n_schemes, false);
    if (cfg.record_energy) res.energy.assign(n_schemes, std::vector<double>());
    RngStream stream{cfg.master_seed, static_cast<std::uint64_t>(r)};
    auto draw_at = [&](std::uint64_t n) {
      if (cfg.draw_refine == 1) return sample_draw(stream, n, k_total);
      GaussianDraw agg;
      agg.stream_id = stream.id();
      agg.step = n;
      agg.xi.assign(k_total, 0.0);
      const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.draw_refine));
      for (int j = 1; j <= cfg.draw_refine; ++j) {
        auto fine = sample_draw(stream, (n - 1) * cfg.draw_refine + j, k_total);
        for (int k = 0; k < k_total; ++k) agg.xi[k] += fine.xi[k] * scale;
      }
      return agg;
    };
    auto record_if_due = [&](int s, detail::StepperHandle& handle, std::uint64_t n) {
      for (int t = 0; t < n_times; ++t)
        if (output_steps[s][t] == n && !res.failed[s]) res.fields[s][t] = handle.density();
    };

    if (cfg.lockstep) {
      std::vector<std::unique_ptr<detail::StepperHandle>> handles;
      for (auto kind : cfg.schemes)
        handles.push_back(detail::make_handle(kind, setup, out.scheme_dt[0]));
      for (int s = 0; s < n_schemes; ++s) {
        if (cfg.record_energy) res.energy[s].push_back(handles[s]->energy());
        record_if_due(s, *handles[s], 0);
      }
      for (std::uint64_t n = 1; n <= n_steps_of[0]; ++n) {
        GaussianDraw draw = draw_at(n);  // one draw, consumed by every scheme
        for (int s = 0; s < n_schemes; ++s) {
          if (res.failed[s]) continue;
          try {
            handles[s]->step(draw);
          } catch (const BlowUpError&) {
            res.failed[s] = true;
          }
          if (cfg.record_energy && !res.failed[s])
            res.energy[s].push_back(handles[s]->energy());
          record_if_due(s, *handles[s], n);
        }
      }
    } else {
      // mean-only mode: each scheme advances on its own schedule, reusing the
      // stream's random-access draws
      for (int s = 0; s < n_schemes; ++s) {
        auto handle = detail::make_handle(cfg.schemes[s], setup, out.scheme_dt[s]);
        if (cfg.record_energy) res.energy[s].push_back(handle->energy());
        record_if_due(s, *handle, 0);
        for (std::uint64_t n = 1; n <= n_steps_of[s] && !res.failed[s]; ++n) {
          GaussianDraw draw = draw_at(n);
          try {
            handle->step(draw);
          } catch (const BlowUpError&) {
            res.failed[s] = true;
          }
          if (cfg.record_energy && !res.failed[s]) res.energy[s].push_back(handle->energy());
          record_if_due(s, *handle, n);
        }
      }
    }
    return res;
  };

  // Workers fill a buffer; the reduction consumes strictly in index order.
  std::mutex mtx;
  std::condition_variable cv;
  std::map<int, detail::RealizationResult> buffer;
  std::atomic<int> next_job{0};
  int workers = cfg.workers > 0 ? cfg.workers
                                : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, cfg.realizations));

  std::vector<std::thread> pool;
  std::exception_ptr worker_error;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        int r = next_job.fetch_add(1);
        if (r >= cfg.realizations) return;
        try {
          auto res = run_one(r);
          std::lock_guard<std::mutex> lock(mtx);
          buffer.emplace(r, std::move(res));
          cv.notify_all();
        } catch (...) {
          std::lock_guard<std::mutex> lock(mtx);
          if (!worker_error) worker_error = std::current_exception();
          cv.notify_all();
          return;
        }
      }
    });
  }

  const int m = setup.grid.num_cells;
  out.stats.assign(n_schemes, std::vector<FieldStats>(n_times));
  for (auto& per_scheme : out.stats)
    for (auto& fs : per_scheme) {
      fs.mean.assign(m, 0.0);
      fs.variance.assign(m, 0.0);
      fs.min.assign(m, std::numeric_limits<double>::infinity());
      fs.max.assign(m, -std::numeric_limits<double>::infinity());
    }
  out.failed.assign(n_schemes, {});
  std::vector<std::vector<double>> energy_sum(n_schemes);
  std::vector<int> energy_count(n_schemes, 0);
  if (cfg.record_path_gaps)
    out.path_gaps.assign(n_times, std::vector<double>(cfg.realizations,
                                                      std::numeric_limits<double>::quiet_NaN()));

  for (int r = 0; r < cfg.realizations; ++r) {
    detail::RealizationResult res;
    {
      std::unique_lock<std::mutex> lock(mtx);
      cv.wait(lock, [&] { return worker_error || buffer.count(r) > 0; });
      if (worker_error) break;
      res = std::move(buffer.at(r));
      buffer.erase(r);
    }
    for (int s = 0; s < n_schemes; ++s) {
      if (res.failed[s]) {
        out.failed[s].push_back(r);
        continue;
      }
      for (int t = 0; t < n_times; ++t) {
        auto& fs = out.stats[s][t];
        const auto& field = res.fields[s][t];
        fs.samples += 1;
        for (int i = 0; i < m; ++i) {
          const double x = field[i];
          const double delta = x - fs.mean[i];
          fs.mean[i] += delta / fs.samples;
          fs.variance[i] += delta * (x - fs.mean[i]);  // running M2
          fs.min[i] = std::min(fs.min[i], x);
          fs.max[i] = std::max(fs.max[i], x);
        }
      }
      if (cfg.record_energy) {
        if (energy_sum[s].empty()) energy_sum[s].assign(res.energy[s].size(), 0.0);
        for (std::size_t n = 0; n < res.energy[s].size(); ++n)
          energy_sum[s][n] += res.energy[s][n];
        energy_count[s] += 1;
      }
    }
    if (cfg.record_path_gaps && n_schemes >= 2 && !res.failed[0] && !res.failed[1])
      for (int t = 0; t < n_times; ++t)
        out.path_gaps[t][r] = relative_l2_gap(res.fields[0][t], res.fields[1][t]);
  }
  for (auto& th : pool) th.join();
  if (worker_error) std::rethrow_exception(worker_error);

  for (int s = 0; s < n_schemes; ++s) {
    for (int t = 0; t < n_times; ++t) {
      auto& fs = out.stats[s][t];
      if (fs.samples == 0)
        throw NumericalError(std::string("ensemble: all realizations of scheme ") +
                             out.scheme_names[s] + " blew up");
      for (int i = 0; i < m; ++i)
        fs.variance[i] = fs.samples > 1 ? fs.variance[i] / (fs.samples - 1) : 0.0;
    }
    if (cfg.record_energy && energy_count[s] > 0) {
      out.mean_energy.emplace_back(energy_sum[s]);
      for (double& e : out.mean_energy.back()) e /= energy_count[s];
    } else if (cfg.record_energy) {
      out.mean_energy.emplace_back();
    }
  }
  return out;
}

enum class PaperRegime { kinetic_eps1, diffusive_eps1em2 };

/// The reference experiment configuration: unit domain, 200 cells, one-group kernel,
/// sigma = 1, rho0(x) = 1 - cos(2 pi x), truncated spectral noise with 200
/// Fourier modes plus the constant one, 100 realizations.
inline std::pair<ProblemSetup, EnsembleConfig> paper_experiment_setup(
    PaperRegime regime, std::uint64_t master_seed = 42, int realizations = 100,
    int workers = 0) {
  StaggeredGrid1D grid(200, 1.0);
  VelocityQuadrature quad = VelocityQuadrature::gauss_legendre(16);
  auto collision =
      std::make_shared<const CollisionOperator>(CollisionKernel::make_one_group(), quad);
  ProblemSetup setup{grid,
                     quad,
                     collision,
                     ScatterField::uniform(grid, 1.0),
                     MacroField(grid.num_cells, 1.0),
                     std::make_shared<const NoiseModel>(build_paper_noise(grid, 200)),
                     regime == PaperRegime::kinetic_eps1 ? 1.0 : 1e-2,
                     0.9,
                     0.0,
                     MacroField(grid.num_cells)};
  for (int i = 0; i < grid.num_cells; ++i)
    setup.initial_rho[i] = 1.0 + std::cos(2.0 * M_PI * grid.primal_x(i) + M_PI);
  EnsembleConfig cfg;
  cfg.realizations = realizations;
  cfg.master_seed = master_seed;
  cfg.workers = workers;
  cfg.record_path_gaps = true;
  if (regime == PaperRegime::kinetic_eps1) {
    cfg.schemes = {SchemeKind::smm, SchemeKind::explicit_kinetic};
    cfg.output_times = {0.1, 0.3, 0.6, 1.0};
  } else {
    const double eps = setup.epsilon;
    cfg.schemes = {SchemeKind::smm, SchemeKind::crank_nicolson};
    cfg.output_times = {eps / 10.0, 4.0 * eps / 10.0, 0.05, 0.1};
  }
  return {std::move(setup), cfg};
}

inline EnsembleStats paper_experiment(PaperRegime regime, std::uint64_t master_seed = 42,
                                      int realizations = 100, int workers = 0) {
  auto [setup, cfg] = paper_experiment_setup(regime, master_seed, realizations, workers);
  return run_ensemble(setup, cfg);
}

}  // namespace smm
