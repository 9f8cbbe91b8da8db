#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "smm/collision.hpp"
#include "smm/grid.hpp"
#include "smm/noise.hpp"
#include "smm/scheme.hpp"

namespace smm {

/// Unsplit distribution f_i(v_q) on primal x velocity nodes.
struct KineticFullState {
  KineticField f;  // cells index runs over primal nodes here
};

inline KineticFullState kinetic_state_from_density(const MacroField& rho, int vel_nodes) {
  KineticFullState s;
  s.f = KineticField(static_cast<int>(rho.size()), vel_nodes);
  for (int i = 0; i < s.f.cells; ++i)
    for (int q = 0; q < vel_nodes; ++q) s.f(i, q) = rho[i];
  return s;
}

/// Fully explicit upwind discretization of the kinetic equation, the O(1)-eps
/// baseline. Conditionally stable: dt is bounded by the transport CFL
/// eps*dx and by the relaxation bound eps^2/sigma_max.
class ExplicitKineticStepper {
public:
  ExplicitKineticStepper(SchemeConfig cfg, MacroField sigma_primal)
      : cfg_(std::move(cfg)), sigma_primal_(std::move(sigma_primal)) {
    cfg_.validate();
    if (sigma_primal_.size() != static_cast<std::size_t>(cfg_.grid.num_cells))
      throw DimensionError("explicit kinetic: sigma field length does not match grid");
    double sigma_max = 0.0;
    for (double s : sigma_primal_) sigma_max = std::max(sigma_max, s);
    const double bound = cfl_bound(cfg_.grid.dx, cfg_.epsilon, sigma_max);
    if (cfg_.dt == 0.0) cfg_.dt = cfg_.cfl_safety * bound;
    if (cfg_.dt > bound * (1.0 + 1e-12))
      throw ConfigError("explicit kinetic scheme: dt violates the transport/relaxation CFL");
    nf_.resize(cfg_.grid.num_cells);
    work_.resize(cfg_.quad.size());
  }

  static double cfl_bound(double dx, double eps, double sigma_max) {
    return std::min(eps * dx, eps * eps / sigma_max);
  }

  double dt() const { return cfg_.dt; }

  void step(KineticFullState& state, const GaussianDraw& draw) {
    const auto& grid = cfg_.grid;
    const auto& quad = cfg_.quad;
    const int m = grid.num_cells;
    const int nq = quad.size();
    if (state.f.cells != m || state.f.vel_nodes != nq)
      throw DimensionError("explicit kinetic step: state does not match configuration");
    cfg_.noise->factors_into(NodeFamily::primal, draw, cfg_.dt, nf_);
    const double transport = cfg_.dt / (cfg_.epsilon * grid.dx);
    const double relax = cfg_.dt / (cfg_.epsilon * cfg_.epsilon);
    if (f_new_.cells != m || f_new_.vel_nodes != nq) f_new_ = KineticField(m, nq);
    std::vector<double>& lf = work_;
    for (int i = 0; i < m; ++i) {
      auto f_c = state.f.profile(i);
      auto f_l = state.f.profile(grid.wrap(i - 1));
      auto f_r = state.f.profile(grid.wrap(i + 1));
      cfg_.collision->apply_into(f_c, lf);
      auto out = f_new_.profile(i);
      for (int q = 0; q < nq; ++q) {
        const double v = quad.nodes[q];
        const double upwind = v > 0.0 ? v * (f_c[q] - f_l[q]) : v * (f_r[q] - f_c[q]);
        out[q] = f_c[q] - transport * upwind + relax * sigma_primal_[i] * lf[q] +
                 nf_[i] * f_c[q];
      }
    }
    std::swap(state.f, f_new_);  // fully rewritten next step
    ++steps_;
    rho_.values.resize(m);
    for (int i = 0; i < m; ++i) rho_[i] = quad.project(state.f.profile(i));
    detail::guard_blowup(rho_, steps_);
  }

  /// Pi f on primal nodes.
  MacroField density(const KineticFullState& state) const {
    MacroField rho(state.f.cells);
    for (int i = 0; i < state.f.cells; ++i) rho[i] = cfg_.quad.project(state.f.profile(i));
    return rho;
  }

private:
  SchemeConfig cfg_;
  MacroField sigma_primal_;
  std::vector<double> nf_, work_;
  KineticField f_new_;
  MacroField rho_;
  std::uint64_t steps_ = 0;
};

/// Crank-Nicolson for the limit diffusion equation with the noise kept
/// explicit Euler-Maruyama (same Ito-corrected factor as the other schemes,
/// so path-coupled comparisons are like-for-like):
///   (I - dt/2 A) rho^{n+1} = (I + dt/2 A) rho^n + rho^n * noise factor,
///   (A rho)_i = (kappa_{i+1/2} d0 rho_{i+1/2} - kappa_{i-1/2} d0 rho_{i-1/2}) / dx.
class CrankNicolsonStepper {
public:
  CrankNicolsonStepper(const StaggeredGrid1D& grid, DualField kappa,
                       std::shared_ptr<const NoiseModel> noise, double dt)
      : grid_(grid), kappa_(std::move(kappa)), noise_(std::move(noise)), dt_(dt) {
    const int m = grid.num_cells;
    if (kappa_.size() != static_cast<std::size_t>(m))
      throw DimensionError("crank-nicolson: kappa length does not match grid");
    if (!(dt > 0.0)) throw ConfigError("scheme.dt must be > 0");
    for (double k : kappa_)
      if (!(k >= 0.0)) throw ConfigError("crank-nicolson: kappa must be nonnegative");
    Eigen::MatrixXd a = operator_matrix();
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(m, m) - 0.5 * dt_ * a;
    inv_lhs_ = lhs.partialPivLu().inverse();
    nf_.resize(m);
  }

  double dt() const { return dt_; }

  Eigen::MatrixXd operator_matrix() const {
    const int m = grid_.num_cells;
    const double inv_dx2 = 1.0 / (grid_.dx * grid_.dx);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      const int l = grid_.wrap(i - 1), r = grid_.wrap(i + 1);
      a(i, r) += kappa_[i] * inv_dx2;
      a(i, i) -= kappa_[i] * inv_dx2;
      a(i, i) -= kappa_[l] * inv_dx2;
      a(i, l) += kappa_[l] * inv_dx2;
    }
    return a;
  }

  void step(MacroField& rho, const GaussianDraw& draw) {
    const int m = grid_.num_cells;
    if (rho.size() != static_cast<std::size_t>(m))
      throw DimensionError("crank-nicolson step: state does not match grid");
    noise_->factors_into(NodeFamily::primal, draw, dt_, nf_);
    // RHS assembled with the 3-point stencil, then one dense backsolve.
    Eigen::VectorXd y(m);
    const double half = 0.5 * dt_ / (grid_.dx * grid_.dx);
    for (int i = 0; i < m; ++i) {
      const int l = grid_.wrap(i - 1), r = grid_.wrap(i + 1);
      const double a_rho =
          kappa_[i] * (rho[r] - rho[i]) - kappa_[l] * (rho[i] - rho[l]);
      y(i) = rho[i] + half * a_rho + nf_[i] * rho[i];
    }
    Eigen::VectorXd out = inv_lhs_ * y;
    for (int i = 0; i < m; ++i) rho[i] = out(i);
    ++steps_;
    detail::guard_blowup(rho, steps_);
  }

private:
  StaggeredGrid1D grid_;
  DualField kappa_;
  std::shared_ptr<const NoiseModel> noise_;
  double dt_;
  Eigen::MatrixXd inv_lhs_;
  std::vector<double> nf_;
  std::uint64_t steps_ = 0;
};

}  // namespace smm
