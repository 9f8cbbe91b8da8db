#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <vector>

#include "smm/collision.hpp"
#include "smm/grid.hpp"
#include "smm/noise.hpp"

namespace smm {

/// Everything a stepper needs, shared read-only across realizations.
struct SchemeConfig {
  StaggeredGrid1D grid;
  VelocityQuadrature quad;
  std::shared_ptr<const CollisionOperator> collision;
  ScatterField sigma;
  std::shared_ptr<const NoiseModel> noise;
  double epsilon = 1.0;
  double dt = 0.0;  // 0 = derive from CFL below
  double cfl_safety = 0.9;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("scheme.epsilon must be > 0");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
      throw ConfigError("scheme.cfl_safety must be in (0,1]");
    if (dt < 0.0) throw ConfigError("scheme.dt must be >= 0");
    if (!collision) throw ConfigError("scheme: missing collision operator");
    if (!noise) throw ConfigError("scheme: missing noise model");
    if (sigma.values.size() != static_cast<std::size_t>(grid.num_cells))
      throw DimensionError("scheme: scatter field length does not match grid");
  }
};

enum class CflKind { telegraph, general };

/// Time-step bounds: telegraph dt <= (dx^2/2 + eps dx)/2 and general
/// dt <= 2 s_m sigma_m dx^2 / (2(2+eps)) + eps dx / (2+eps).
inline double cfl_dt(double dx, double eps, double s_m, double sigma_m, CflKind kind) {
  if (!(dx > 0.0 && eps > 0.0 && s_m > 0.0 && sigma_m > 0.0))
    throw ConfigError("cfl_dt: all arguments must be positive");
  if (kind == CflKind::telegraph) return 0.5 * (0.5 * dx * dx + eps * dx);
  return 2.0 * s_m * sigma_m * dx * dx / (2.0 * (2.0 + eps)) + eps * dx / (2.0 + eps);
}

/// rho on primal nodes, micro part g on dual x velocity nodes.
struct KineticState {
  MacroField rho;
  KineticField g;
};

/// Telegraph unknowns rho_i and J_{i+1/2} = eps j_{i+1/2}.
struct TelegraphState {
  MacroField rho;
  DualField flux;
};

namespace detail {
inline void guard_blowup(const MacroField& rho, std::uint64_t step) {
  for (double v : rho)
    if (!std::isfinite(v) || std::abs(v) > 1e12)
      throw BlowUpError("density out of range, scheme unstable", step);
}
}  // namespace detail

/// Micro-macro stepper. Per step: g is advanced first (explicit upwind
/// transport with the velocity average removed, explicit noise factor,
/// explicit stiff source, implicit collision solve per cell), then rho uses
/// the centered flux of the new g.
class SmmStepper {
public:
  explicit SmmStepper(SchemeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.quad.size() != cfg_.collision->size())
      throw DimensionError("scheme: quadrature does not match collision operator");
    if (cfg_.dt == 0.0)
      cfg_.dt = cfg_.cfl_safety * cfl_dt(cfg_.grid.dx, cfg_.epsilon, cfg_.collision->s_min(),
                                         cfg_.sigma.sigma_min, CflKind::general);
    const int m = cfg_.grid.num_cells;
    // One cached factorization of (I - c L) per distinct c = sigma dt/eps^2.
    std::map<double, int> seen;
    solver_of_cell_.resize(m);
    for (int i = 0; i < m; ++i) {
      double c = cfg_.sigma.values[i] * cfg_.dt / (cfg_.epsilon * cfg_.epsilon);
      auto [it, inserted] = seen.emplace(c, static_cast<int>(solvers_.size()));
      if (inserted) solvers_.push_back(cfg_.collision->make_implicit_solver(c));
      solver_of_cell_[i] = it->second;
    }
    nf_primal_.resize(m);
    nf_dual_.resize(m);
    work_.resize(cfg_.quad.size());
  }

  const SchemeConfig& config() const { return cfg_; }
  double dt() const { return cfg_.dt; }
  std::uint64_t steps_taken() const { return steps_; }

  void step(KineticState& state, const GaussianDraw& draw) {
    const auto& grid = cfg_.grid;
    const auto& quad = cfg_.quad;
    const int m = grid.num_cells;
    const int nq = quad.size();
    const double dt = cfg_.dt;
    const double eps = cfg_.epsilon;
    if (state.rho.size() != static_cast<std::size_t>(m) || state.g.cells != m ||
        state.g.vel_nodes != nq)
      throw DimensionError("step_smm: state does not match configuration");

    cfg_.noise->factors_into(NodeFamily::primal, draw, dt, nf_primal_);
    cfg_.noise->factors_into(NodeFamily::dual, draw, dt, nf_dual_);

    if (g_new_.cells != m || g_new_.vel_nodes != nq) g_new_ = KineticField(m, nq);
    const double transport = dt / (eps * grid.dx);
    const double stiff = dt / (eps * eps);

    for (int i = 0; i < m; ++i) {
      auto g_c = state.g.profile(i);
      auto g_l = state.g.profile(grid.wrap(i - 1));
      auto g_r = state.g.profile(grid.wrap(i + 1));
      const double drho = (state.rho[grid.wrap(i + 1)] - state.rho[i]) / grid.dx;
      // Upwind transport profile, assembled before its average is removed.
      for (int q = 0; q < nq; ++q) {
        const double v = quad.nodes[q];
        work_[q] = v > 0.0 ? v * (g_c[q] - g_l[q]) : v * (g_r[q] - g_c[q]);
      }
      const double up_mean = quad.project(work_);
      auto out = g_new_.profile(i);
      for (int q = 0; q < nq; ++q) {
        out[q] = g_c[q] - transport * (work_[q] - up_mean) + nf_dual_[i] * g_c[q] -
                 stiff * quad.nodes[q] * drho;
      }
      solvers_[solver_of_cell_[i]].solve_in_place(out);
      // The scheme propagates Pi(g) by the exact recursion
      // Pi(g^{n+1}) = (1 + noise factor) Pi(g^n); enforce it so the average
      // cannot drift through the stiff factors at small eps.
      const double mean_new = (1.0 + nf_dual_[i]) * quad.project(g_c);
      const double shift = mean_new - quad.project(out);
      for (int q = 0; q < nq; ++q) out[q] += shift;
    }

    // Centered macro flux D0 Pi(v g^{n+1}).
    flux_.resize(m);
    for (int i = 0; i < m; ++i) flux_[i] = flux(g_new_, i);
    MacroField& rho = state.rho;
    for (int i = 0; i < m; ++i) {
      const double div = (flux_[i] - flux_[grid.wrap(i - 1)]) / grid.dx;
      rho[i] = rho[i] - dt * div + nf_primal_[i] * rho[i];
    }
    std::swap(state.g, g_new_);  // g_new_ is fully rewritten next step
    ++steps_;
    detail::guard_blowup(state.rho, steps_);
  }

  /// Micro profile of the diffusion limit, g = (1/sigma) L^{-1}(v delta0 rho):
  /// the well-prepared companion of a given density.
  KineticField well_prepared_micro(const MacroField& rho) const {
    const auto& grid = cfg_.grid;
    const auto& quad = cfg_.quad;
    const int m = grid.num_cells;
    const int nq = quad.size();
    KineticField g(m, nq);
    std::vector<double> src(nq), sol;
    for (int i = 0; i < m; ++i) {
      const double drho = (rho[grid.wrap(i + 1)] - rho[i]) / grid.dx;
      for (int q = 0; q < nq; ++q) src[q] = quad.nodes[q] * drho / cfg_.sigma.values[i];
      sol = cfg_.collision->pseudo_inverse_apply(src);
      for (int q = 0; q < nq; ++q) g(i, q) = sol[q];
    }
    return g;
  }

private:
  double flux(const KineticField& g, int i) const {
    const auto& quad = cfg_.quad;
    double s = 0.0;
    for (int q = 0; q < quad.size(); ++q) s += quad.weights[q] * quad.nodes[q] * g(i, q);
    return s;
  }

  SchemeConfig cfg_;
  std::vector<CollisionOperator::ImplicitSolver> solvers_;
  std::vector<int> solver_of_cell_;
  std::vector<double> nf_primal_, nf_dual_, work_, flux_;
  KineticField g_new_;
  std::uint64_t steps_ = 0;
};

/// Reduced (rho, J) stepper for the two-velocity model with uniform sigma;
/// an exact algebraic rewrite of the micro-macro scheme on the two-point
/// quadrature.
class TelegraphStepper {
public:
  TelegraphStepper(const StaggeredGrid1D& grid, std::shared_ptr<const NoiseModel> noise,
                   double epsilon, double dt = 0.0, double cfl_safety = 0.9, double sigma = 1.0)
      : grid_(grid), noise_(std::move(noise)), eps_(epsilon), sigma_(sigma) {
    if (!(epsilon > 0.0)) throw ConfigError("scheme.epsilon must be > 0");
    if (!(sigma > 0.0)) throw ConfigError("scheme: sigma must be > 0");
    dt_ = dt > 0.0 ? dt : cfl_safety * cfl_dt(grid.dx, epsilon, 0.5, sigma, CflKind::telegraph);
    nf_primal_.resize(grid.num_cells);
    nf_dual_.resize(grid.num_cells);
  }

  double dt() const { return dt_; }
  std::uint64_t steps_taken() const { return steps_; }

  void step(TelegraphState& state, const GaussianDraw& draw) {
    const int m = grid_.num_cells;
    if (state.rho.size() != static_cast<std::size_t>(m) ||
        state.flux.size() != static_cast<std::size_t>(m))
      throw DimensionError("step_telegraph: state does not match grid");
    const double mu = dt_ / (eps_ * grid_.dx);
    const double lambda = 1.0 / (1.0 + sigma_ * dt_ / (eps_ * eps_));
    noise_->factors_into(NodeFamily::primal, draw, dt_, nf_primal_);
    noise_->factors_into(NodeFamily::dual, draw, dt_, nf_dual_);

    const DualField& flux = state.flux;
    DualField flux_new(m);
    for (int i = 0; i < m; ++i) {
      const double lap =
          flux[grid_.wrap(i + 1)] - 2.0 * flux[i] + flux[grid_.wrap(i - 1)];
      const double drho = state.rho[grid_.wrap(i + 1)] - state.rho[i];
      flux_new[i] =
          lambda * (flux[i] * (1.0 + nf_dual_[i]) + 0.5 * mu * lap - mu * drho);
    }
    for (int i = 0; i < m; ++i) {
      const double div = flux_new[i] - flux_new[grid_.wrap(i - 1)];
      state.rho[i] = state.rho[i] - mu * div + nf_primal_[i] * state.rho[i];
    }
    state.flux = std::move(flux_new);
    ++steps_;
    detail::guard_blowup(state.rho, steps_);
  }

private:
  StaggeredGrid1D grid_;
  std::shared_ptr<const NoiseModel> noise_;
  double eps_;
  double sigma_;
  double dt_ = 0.0;
  std::vector<double> nf_primal_, nf_dual_;
  std::uint64_t steps_ = 0;
};

/// Explicit 3-point diffusion scheme the micro-macro scheme degenerates into:
/// rho^{n+1} = rho^n + dt/dx (kappa_{i+1/2} d0 rho_{i+1/2} -
/// kappa_{i-1/2} d0 rho_{i-1/2}) + rho^n * noise factor.
class ExplicitDiffusionStepper {
public:
  ExplicitDiffusionStepper(const StaggeredGrid1D& grid, DualField kappa,
                           std::shared_ptr<const NoiseModel> noise, double dt)
      : grid_(grid), kappa_(std::move(kappa)), noise_(std::move(noise)), dt_(dt) {
    if (kappa_.size() != static_cast<std::size_t>(grid.num_cells))
      throw DimensionError("diffusion stepper: kappa length does not match grid");
    if (!(dt > 0.0)) throw ConfigError("scheme.dt must be > 0");
    nf_.resize(grid.num_cells);
  }

  double dt() const { return dt_; }

  void step(MacroField& rho, const GaussianDraw& draw) {
    const int m = grid_.num_cells;
    if (rho.size() != static_cast<std::size_t>(m))
      throw DimensionError("diffusion step: state does not match grid");
    noise_->factors_into(NodeFamily::primal, draw, dt_, nf_);
    MacroField out(m);
    const double r = dt_ / (grid_.dx * grid_.dx);
    for (int i = 0; i < m; ++i) {
      const double right = kappa_[i] * (rho[grid_.wrap(i + 1)] - rho[i]);
      const double left = kappa_[grid_.wrap(i - 1)] * (rho[i] - rho[grid_.wrap(i - 1)]);
      out[i] = rho[i] + r * (right - left) + nf_[i] * rho[i];
    }
    rho = std::move(out);
    ++steps_;
    detail::guard_blowup(rho, steps_);
  }

private:
  StaggeredGrid1D grid_;
  DualField kappa_;
  std::shared_ptr<const NoiseModel> noise_;
  double dt_;
  std::vector<double> nf_;
  std::uint64_t steps_ = 0;
};

/// The limit scheme of a given micro-macro configuration (same grid, noise
/// and kappa field), advanced with the supplied time step.
inline ExplicitDiffusionStepper limit_diffusion_stepper(const SchemeConfig& cfg, double dt) {
  DualField kappa = diffusion_coefficient(*cfg.collision, cfg.sigma);
  return ExplicitDiffusionStepper(cfg.grid, std::move(kappa), cfg.noise, dt);
}

}  // namespace smm
