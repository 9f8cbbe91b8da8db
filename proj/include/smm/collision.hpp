#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "smm/grid.hpp"

namespace smm {

/// Symmetric positive scattering kernel s(v,v') with 0 < s_m <= s <= s_M and
/// unit integral in v'.
struct CollisionKernel {
  std::function<double(double, double)> s;
  double s_min = 0.0;
  double s_max = 0.0;
  bool one_group = false;

  static CollisionKernel make_one_group() {
    CollisionKernel k;
    k.s = [](double, double) { return 0.5; };
    k.s_min = k.s_max = 0.5;
    k.one_group = true;
    return k;
  }

  /// s(v,v') = (1 + c/2 * v v') / 2, c in [0,1): smallest anisotropic family
  /// with unit integral; bounds (1 -+ c/2)/2.
  static CollisionKernel linear_anisotropy(double c) {
    if (!(c >= 0.0 && c < 1.0)) throw ConfigError("collision.anisotropy must be in [0,1)");
    CollisionKernel k;
    k.s = [c](double v, double w) { return 0.5 * (1.0 + 0.5 * c * v * w); };
    k.s_min = 0.5 * (1.0 - 0.5 * c);
    k.s_max = 0.5 * (1.0 + 0.5 * c);
    k.one_group = (c == 0.0);
    return k;
  }
};

/// Scattering rate sigma_{i+1/2} on dual nodes, with positive bounds.
struct ScatterField {
  DualField values;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  ScatterField() = default;
  explicit ScatterField(DualField v) : values(std::move(v)) {
    if (values.size() == 0) throw DimensionError("ScatterField: empty");
    sigma_min = sigma_max = values[0];
    for (double s : values) {
      sigma_min = std::min(sigma_min, s);
      sigma_max = std::max(sigma_max, s);
    }
    if (!(sigma_min > 0.0)) throw ConfigError("scatter rate must be positive everywhere");
  }

  static ScatterField uniform(const StaggeredGrid1D& grid, double sigma) {
    return ScatterField(DualField(grid.num_cells, sigma));
  }
};

/// Discrete collision operator L acting on velocity profiles:
///   (L phi)_q = sum_{q'} 2 w_{q'} s(v_q, v_{q'}) (phi_{q'} - phi_q).
/// The discrete kernel is balanced so its weighted row and column sums are 1
/// to machine precision; constants are then an exact null space and the
/// weighted mean of L phi vanishes to rounding for every phi.
class CollisionOperator {
public:
  CollisionOperator(const CollisionKernel& kernel, const VelocityQuadrature& quad)
      : quad_(quad), s_min_(kernel.s_min), s_max_(kernel.s_max), one_group_(kernel.one_group) {
    const int n = quad.size();
    Eigen::MatrixXd ker(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) ker(a, b) = kernel.s(quad.nodes[a], quad.nodes[b]);
    ker = 0.5 * (ker + ker.transpose()).eval();
    // Balanced normalization of the weighted kernel row/column sums.
    Eigen::VectorXd w(n);
    for (int a = 0; a < n; ++a) w(a) = 2.0 * quad.weights[a];
    for (int pass = 0; pass < 50; ++pass) {
      Eigen::VectorXd r = ker * w;
      double worst = (r.array() - 1.0).abs().maxCoeff();
      if (worst < 1e-15) break;
      Eigen::VectorXd d = r.array().sqrt().inverse();
      ker = (d.asDiagonal() * ker * d.asDiagonal()).eval();
    }
    lmat_ = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      double row = 0.0;
      for (int b = 0; b < n; ++b) {
        lmat_(a, b) = w(b) * ker(a, b);
        row += w(b) * ker(a, b);
      }
      lmat_(a, a) -= row;  // exact zero row sum: L(const) = 0 bitwise
    }
    // Pseudo-inverse on the zero-mean subspace via the augmented system
    // [L; Pi-row], factorized once.
    Eigen::MatrixXd aug(n + 1, n);
    aug.topRows(n) = lmat_;
    for (int b = 0; b < n; ++b) aug(n, b) = quad.weights[b];
    pinv_ = std::make_shared<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>>(aug);
  }

  const VelocityQuadrature& quadrature() const { return quad_; }
  const Eigen::MatrixXd& matrix() const { return lmat_; }
  double s_min() const { return s_min_; }
  double s_max() const { return s_max_; }
  bool one_group() const { return one_group_; }
  int size() const { return quad_.size(); }

  std::vector<double> apply(std::span<const double> phi) const {
    check_profile(phi);
    std::vector<double> out(size(), 0.0);
    apply_into(phi, out);
    return out;
  }

  void apply_into(std::span<const double> phi, std::span<double> out) const {
    const int n = size();
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) s += lmat_(a, b) * phi[b];
      out[a] = s;
    }
  }

  /// Solves L phi = h with Pi(phi) = 0 for zero-mean h.
  std::vector<double> pseudo_inverse_apply(std::span<const double> h) const {
    check_profile(h);
    const int n = size();
    Eigen::VectorXd rhs(n + 1);
    double hnorm = 0.0;
    for (int a = 0; a < n; ++a) {
      rhs(a) = h[a];
      hnorm = std::max(hnorm, std::abs(h[a]));
    }
    rhs(n) = 0.0;
    double mean = quad_.project(h);
    if (std::abs(mean) > 1e-10 * std::max(hnorm, 1e-300))
      throw NumericalError("pseudo_inverse_apply: input has nonzero velocity average");
    Eigen::VectorXd phi = pinv_->solve(rhs);
    Eigen::VectorXd res = lmat_ * phi - rhs.head(n);
    if (hnorm > 0.0 && res.lpNorm<Eigen::Infinity>() > 1e-10 * hnorm)
      throw NumericalError("pseudo_inverse_apply: residual out of tolerance");
    return {phi.data(), phi.data() + n};
  }

  /// Cached factorization of (I - c L); the per-cell implicit collision solve
  /// of the scheme uses one of these per distinct c = sigma*dt/eps^2. The
  /// one-group operator is Pi - I, for which the solve has the closed form
  /// g = (r + c Pi(r)) / (1 + c).
  class ImplicitSolver {
  public:
    ImplicitSolver(const CollisionOperator& op, double c) : c_(c) {
      if (op.one_group()) {
        weights_ = op.quadrature().weights;
      } else {
        const auto& l = op.matrix();
        lu_ = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(
            Eigen::MatrixXd::Identity(l.rows(), l.cols()) - c * l);
      }
    }

    void solve_in_place(std::span<double> r) const {
      if (lu_) {
        Eigen::Map<Eigen::VectorXd> v(r.data(), static_cast<Eigen::Index>(r.size()));
        v = lu_->solve(v.eval());
        return;
      }
      double mean = 0.0;
      for (std::size_t q = 0; q < r.size(); ++q) mean += weights_[q] * r[q];
      const double scale = 1.0 / (1.0 + c_);
      const double source = c_ * mean;
      for (std::size_t q = 0; q < r.size(); ++q) r[q] = (r[q] + source) * scale;
    }

  private:
    double c_;
    std::vector<double> weights_;
    std::shared_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
  };

  ImplicitSolver make_implicit_solver(double c) const { return ImplicitSolver(*this, c); }

private:
  void check_profile(std::span<const double> phi) const {
    if (phi.size() != static_cast<std::size_t>(size()))
      throw DimensionError("velocity profile length does not match collision operator");
  }

  VelocityQuadrature quad_;
  Eigen::MatrixXd lmat_;
  std::shared_ptr<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> pinv_;
  double s_min_;
  double s_max_;
  bool one_group_;
};

/// One-shot per-cell implicit solve (I - sigma*dt/eps^2 L) g = r.
inline std::vector<double> implicit_collision_solve(std::span<const double> r, double sigma_loc,
                                                    double dt, double eps,
                                                    const CollisionOperator& op) {
  if (!(dt >= 0.0)) throw ConfigError("implicit_collision_solve: dt must be >= 0");
  if (!(eps > 0.0)) throw ConfigError("implicit_collision_solve: eps must be > 0");
  std::vector<double> out(r.begin(), r.end());
  if (dt == 0.0) return out;
  auto solver = op.make_implicit_solver(sigma_loc * dt / (eps * eps));
  solver.solve_in_place(out);
  return out;
}

/// kappa_{i+1/2} = -Pi(v L^{-1} v) / sigma_{i+1/2}.
inline DualField diffusion_coefficient(const CollisionOperator& op, const ScatterField& sigma) {
  const auto& quad = op.quadrature();
  std::vector<double> v = quad.nodes;
  std::vector<double> linv_v = op.pseudo_inverse_apply(v);
  double moment = 0.0;
  for (int q = 0; q < quad.size(); ++q) moment += quad.weights[q] * v[q] * linv_v[q];
  double c0 = -moment;
  DualField kappa(sigma.values.size());
  for (std::size_t i = 0; i < sigma.values.size(); ++i) kappa[i] = c0 / sigma.values[i];
  return kappa;
}

}  // namespace smm
