#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "smm/common.hpp"

namespace smm {

/// Periodic 1D staggered grid: primal nodes x_i = i*dx carry the density,
/// dual nodes x_{i+1/2} = (i+1/2)*dx carry the micro part and fluxes.
struct StaggeredGrid1D {
  int num_cells;
  double domain_length;
  double dx;

  StaggeredGrid1D(int cells, double length = 1.0)
      : num_cells(cells), domain_length(length), dx(length / cells) {
    if (cells < 3) throw ConfigError("grid.num_cells must be >= 3");
    if (!(length > 0.0)) throw ConfigError("grid.domain_length must be > 0");
  }

  int wrap(int i) const {
    i %= num_cells;
    return i < 0 ? i + num_cells : i;
  }

  double primal_x(int i) const { return i * dx; }
  double dual_x(int i) const { return (i + 0.5) * dx; }
};

namespace detail {
struct PrimalTag {};
struct DualTag {};
}  // namespace detail

/// Per-node scalar field; the tag pins which node family it lives on so the
/// difference operators below cannot be applied to a misaligned field.
template <class Tag>
struct NodeField {
  std::vector<double> values;

  NodeField() = default;
  explicit NodeField(std::size_t n, double fill = 0.0) : values(n, fill) {}
  explicit NodeField(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  auto begin() { return values.begin(); }
  auto end() { return values.end(); }
  auto begin() const { return values.begin(); }
  auto end() const { return values.end(); }
};

using MacroField = NodeField<detail::PrimalTag>;  // rho_i on primal nodes
using DualField = NodeField<detail::DualTag>;     // phi_{i+1/2} on dual nodes

/// Velocity quadrature on [-1,1] with weights normalized to sum 1, so that
/// project() realizes the average operator of a velocity profile.
struct VelocityQuadrature {
  enum class Kind { gauss_legendre, two_point };

  std::vector<double> nodes;    // ascending, mirror-symmetric
  std::vector<double> weights;  // positive, sum 1
  Kind kind = Kind::gauss_legendre;

  int size() const { return static_cast<int>(nodes.size()); }

  double project(std::span<const double> phi) const {
    if (phi.size() != nodes.size())
      throw DimensionError("velocity profile length does not match quadrature");
    double s = 0.0;
    for (std::size_t q = 0; q < phi.size(); ++q) s += weights[q] * phi[q];
    return s;
  }

  static VelocityQuadrature gauss_legendre(int n = 16);
  static VelocityQuadrature two_point();
};

inline VelocityQuadrature VelocityQuadrature::two_point() {
  VelocityQuadrature q;
  q.kind = Kind::two_point;
  q.nodes = {-1.0, 1.0};
  q.weights = {0.5, 0.5};
  return q;
}

inline VelocityQuadrature VelocityQuadrature::gauss_legendre(int n) {
  if (n < 2) throw ConfigError("quadrature.num_nodes must be >= 2");
  VelocityQuadrature q;
  q.kind = Kind::gauss_legendre;
  q.nodes.assign(n, 0.0);
  q.weights.assign(n, 0.0);
  // Newton iteration on the Legendre polynomial P_n; one half computed, the
  // other mirrored bitwise so odd profiles project to exactly zero.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = -std::abs(x);
    q.nodes[n - 1 - i] = std::abs(x);
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) q.nodes[n / 2] = 0.0;
  double wsum = 0.0;
  for (double w : q.weights) wsum += w;
  for (double& w : q.weights) w /= wsum;  // sum exactly rescaled to 1
  return q;
}

/// Micro unknown g_{i+1/2}(v_q): dual nodes x velocity nodes, row-major.
struct KineticField {
  int cells = 0;
  int vel_nodes = 0;
  std::vector<double> data;

  KineticField() = default;
  KineticField(int m, int q, double fill = 0.0)
      : cells(m), vel_nodes(q), data(static_cast<std::size_t>(m) * q, fill) {}

  double& operator()(int i, int q) { return data[static_cast<std::size_t>(i) * vel_nodes + q]; }
  double operator()(int i, int q) const {
    return data[static_cast<std::size_t>(i) * vel_nodes + q];
  }
  std::span<double> profile(int i) {
    return {data.data() + static_cast<std::size_t>(i) * vel_nodes,
            static_cast<std::size_t>(vel_nodes)};
  }
  std::span<const double> profile(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * vel_nodes,
            static_cast<std::size_t>(vel_nodes)};
  }
};

namespace detail {
inline void check_len(const StaggeredGrid1D& grid, std::size_t n, const char* what) {
  if (n != static_cast<std::size_t>(grid.num_cells))
    throw DimensionError(std::string(what) + ": field length does not match grid");
}
}  // namespace detail

// Staggered finite differences, all with periodic wraparound.
// D-: (phi_{i+1/2} - phi_{i-1/2})/dx       dual -> dual
// D+: (phi_{i+3/2} - phi_{i+1/2})/dx       dual -> dual
// Dc: (phi_{i+3/2} - phi_{i-1/2})/(2 dx)   dual -> dual, = (D+ + D-)/2
// D0: (phi_{i+1/2} - phi_{i-1/2})/dx       dual -> primal
// delta0: (mu_{i+1} - mu_i)/dx             primal -> dual

inline DualField d_minus(const StaggeredGrid1D& g, const DualField& phi) {
  detail::check_len(g, phi.size(), "d_minus");
  const int m = g.num_cells;
  DualField out(m);
  for (int i = 0; i < m; ++i) out[i] = (phi[i] - phi[g.wrap(i - 1)]) / g.dx;
  return out;
}

inline DualField d_plus(const StaggeredGrid1D& g, const DualField& phi) {
  detail::check_len(g, phi.size(), "d_plus");
  const int m = g.num_cells;
  DualField out(m);
  for (int i = 0; i < m; ++i) out[i] = (phi[g.wrap(i + 1)] - phi[i]) / g.dx;
  return out;
}

inline DualField d_center(const StaggeredGrid1D& g, const DualField& phi) {
  detail::check_len(g, phi.size(), "d_center");
  const int m = g.num_cells;
  DualField out(m);
  for (int i = 0; i < m; ++i)
    out[i] = (phi[g.wrap(i + 1)] - phi[g.wrap(i - 1)]) / (2.0 * g.dx);
  return out;
}

inline MacroField d_zero(const StaggeredGrid1D& g, const DualField& phi) {
  detail::check_len(g, phi.size(), "d_zero");
  const int m = g.num_cells;
  MacroField out(m);
  for (int i = 0; i < m; ++i) out[i] = (phi[i] - phi[g.wrap(i - 1)]) / g.dx;
  return out;
}

inline DualField delta_zero(const StaggeredGrid1D& g, const MacroField& mu) {
  detail::check_len(g, mu.size(), "delta_zero");
  const int m = g.num_cells;
  DualField out(m);
  for (int i = 0; i < m; ++i) out[i] = (mu[g.wrap(i + 1)] - mu[i]) / g.dx;
  return out;
}

// Discrete norms and inner product underlying the energy estimates.

inline double macro_norm_sq(const StaggeredGrid1D& g, const MacroField& mu) {
  detail::check_len(g, mu.size(), "macro_norm_sq");
  double s = 0.0;
  for (double v : mu) s += v * v;
  return s * g.dx;
}

inline double micro_inner(const StaggeredGrid1D& g, const VelocityQuadrature& quad,
                          const KineticField& phi, const KineticField& psi) {
  detail::check_len(g, static_cast<std::size_t>(phi.cells), "micro_inner");
  if (phi.cells != psi.cells || phi.vel_nodes != psi.vel_nodes ||
      phi.vel_nodes != quad.size())
    throw DimensionError("micro_inner: mismatched kinetic fields");
  double s = 0.0;
  for (int i = 0; i < phi.cells; ++i) {
    double cell = 0.0;
    for (int q = 0; q < phi.vel_nodes; ++q) cell += quad.weights[q] * phi(i, q) * psi(i, q);
    s += cell;
  }
  return s * g.dx;
}

inline double micro_norm_sq(const StaggeredGrid1D& g, const VelocityQuadrature& quad,
                            const KineticField& phi) {
  return micro_inner(g, quad, phi, phi);
}

}  // namespace smm
