#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "smm/grid.hpp"
#include "smm/scheme.hpp"

namespace smm {

using complexd = std::complex<double>;

/// Row-major 2x2 complex matrix, sized for the telegraph amplification
/// analysis.
struct Complex2x2 {
  complexd a, b, c, d;  // [[a, b], [c, d]]

  complexd det() const { return a * d - b * c; }

  Complex2x2 operator-(const Complex2x2& o) const {
    return {a - o.a, b - o.b, c - o.c, d - o.d};
  }
  Complex2x2 operator+(const Complex2x2& o) const {
    return {a + o.a, b + o.b, c + o.c, d + o.d};
  }
  Complex2x2 scaled(complexd s) const { return {s * a, s * b, s * c, s * d}; }
};

/// Wave-number context of the telegraph scheme: mu = dt/(eps dx),
/// lambda = 1/(1 + dt/eps^2), theta the half phase angle, X = sin^2 theta.
struct AmplificationContext {
  double mu = 0.0;
  double lambda = 0.0;
  double one_minus_lambda = 0.0;  // dt/(eps^2 + dt), formed without cancellation
  double theta = 0.0;
  double sin_theta = 0.0;
  double x = 0.0;

  AmplificationContext(double dt, double dx, double eps, double theta_in) {
    if (!(dt > 0.0 && dx > 0.0 && eps > 0.0))
      throw ConfigError("amplification context: dt, dx, eps must be positive");
    mu = dt / (eps * dx);
    lambda = 1.0 / (1.0 + dt / (eps * eps));
    one_minus_lambda = dt / (eps * eps + dt);
    theta = theta_in;
    sin_theta = std::sin(theta_in);
    x = sin_theta * sin_theta;
  }
};

/// Deterministic amplification matrix of the reduced telegraph scheme.
inline Complex2x2 amplification_det(const AmplificationContext& c) {
  const complexd im(0.0, 1.0);
  return {complexd(1.0 - 4.0 * c.mu * c.mu * c.lambda * c.x, 0.0),
          -im * (1.0 - 2.0 * c.mu * c.x) * 2.0 * c.lambda * c.mu * c.sin_theta,
          -2.0 * im * c.mu * c.lambda * c.sin_theta,
          complexd((1.0 - 2.0 * c.mu * c.x) * c.lambda, 0.0)};
}

/// One-step stochastic amplification matrix: every multiplicative factor of
/// the deterministic matrix gains the increment s = dt/2 + sqrt(dt) xi.
inline Complex2x2 amplification_stoch(const AmplificationContext& c, double xi, double dt) {
  if (!(dt >= 0.0)) throw ConfigError("amplification_stoch: dt must be >= 0");
  const complexd im(0.0, 1.0);
  const double s = 0.5 * dt + std::sqrt(dt) * xi;
  return {complexd(1.0 + s - 4.0 * c.mu * c.mu * c.lambda * c.x, 0.0),
          -im * (1.0 + s - 2.0 * c.mu * c.x) * 2.0 * c.lambda * c.mu * c.sin_theta,
          -2.0 * im * c.mu * c.lambda * c.sin_theta,
          complexd((1.0 + s - 2.0 * c.mu * c.x) * c.lambda, 0.0)};
}

/// Coefficient matrices of A_{n+1} = A_det + sqrt(dt) xi B + dt C, extracted
/// from the factor structure above (C = B/2).
inline Complex2x2 noise_coefficient_b(const AmplificationContext& c) {
  const complexd im(0.0, 1.0);
  return {complexd(1.0, 0.0), -2.0 * im * c.lambda * c.mu * c.sin_theta, complexd(0.0, 0.0),
          complexd(c.lambda, 0.0)};
}

inline Complex2x2 noise_coefficient_c(const AmplificationContext& c) {
  return noise_coefficient_b(c).scaled(0.5);
}

/// Squared operator 2-norm via trace/determinant of m* m:
/// (T + sqrt(T^2 - 4D)) / 2.
inline double spectral_norm_sq(const Complex2x2& m) {
  const double t = std::norm(m.a) + std::norm(m.b) + std::norm(m.c) + std::norm(m.d);
  const double d = std::norm(m.det());
  double disc = t * t - 4.0 * d;
  if (disc < 0.0) disc = 0.0;  // Hermitian PSD: negative values are rounding
  return 0.5 * (t + std::sqrt(disc));
}

/// ||A_det||_2^2 - 1 evaluated without forming the near-unit trace and
/// determinant: with p = T - 2 and q = D - 1 assembled from the small
/// quantities u = 4 mu^2 lambda X, v = (1-2 mu X)^2 4 lambda^2 mu^2 X,
/// w = 4 mu^2 lambda^2 X and z = (1-lambda) + 2 lambda mu X, the excess is
/// (p + sqrt(p^2 + 4p - 4q))/2 with full relative accuracy near zero. The
/// generic formula above loses ~1e-11 there to cancellation, which would
/// drown the 1e-12 stability margin of the scan.
inline double amplification_norm_excess(const AmplificationContext& c) {
  const double u = 4.0 * c.mu * c.mu * c.lambda * c.x;
  const double one_minus_2mux = 1.0 - 2.0 * c.mu * c.x;
  const double v = one_minus_2mux * one_minus_2mux * 4.0 * c.lambda * c.lambda * c.mu * c.mu * c.x;
  const double w = 4.0 * c.mu * c.mu * c.lambda * c.lambda * c.x;
  const double z = c.one_minus_lambda + 2.0 * c.lambda * c.mu * c.x;
  const double p = u * u - 2.0 * u + v + w + z * z - 2.0 * z;  // T - 2
  const double q = z * z - 2.0 * z;                             // D - 1
  double disc = p * p + 4.0 * p - 4.0 * q;
  if (disc < 0.0) disc = 0.0;
  return 0.5 * (p + std::sqrt(disc));
}

/// Q(X) = 1 - lambda + 2 lambda mu X - 2 lambda mu^2 X^2 - 2 lambda mu^2 X,
/// whose sign controls 1 - T + D for the deterministic matrix.
struct StabilityPolynomial {
  double q0;          // Q(0) = 1 - lambda
  double q1;          // Q(1)
  double q_min;       // min over [0,1]; Q is concave, endpoints suffice
  double q_at_x;      // Q at the context's X
  double one_minus_t_plus_d;  // 8 lambda mu^2 X Q(X) at the context's X
};

inline double stability_q(const AmplificationContext& c, double x) {
  return 1.0 - c.lambda + 2.0 * c.lambda * c.mu * x - 2.0 * c.lambda * c.mu * c.mu * x * x -
         2.0 * c.lambda * c.mu * c.mu * x;
}

inline StabilityPolynomial stability_polynomial(const AmplificationContext& c) {
  StabilityPolynomial p;
  p.q0 = stability_q(c, 0.0);
  p.q1 = stability_q(c, 1.0);
  p.q_min = std::min(p.q0, p.q1);
  p.q_at_x = stability_q(c, c.x);
  p.one_minus_t_plus_d = 8.0 * c.lambda * c.mu * c.mu * c.x * p.q_at_x;
  return p;
}

struct ScanPoint {
  double dt, dx, eps;
  bool cfl_ok;
  double max_norm_sq;  // max over theta of ||A_det||_2^2
  double q0, q1;
};

struct ScanReport {
  std::vector<ScanPoint> points;
  std::vector<ScanPoint> violations;  // CFL satisfied but norm above 1 + tol
  double worst_margin_outside_cfl = 0.0;  // max (norm^2 - 1) over non-CFL points
};

/// Sweeps the telegraph amplification norm over a parameter region. theta is
/// sampled uniformly on [0, 2pi]; the analytic extremum candidates X in {0,1}
/// are always included.
inline ScanReport scan_stability(const std::vector<double>& dts, const std::vector<double>& dxs,
                                 const std::vector<double>& epss, int theta_samples = 201,
                                 double tol = 1e-12) {
  if (dts.empty() || dxs.empty() || epss.empty())
    throw ConfigError("stability scan: empty parameter range");
  ScanReport report;
  for (double dx : dxs)
    for (double eps : epss)
      for (double dt : dts) {
        ScanPoint pt{dt, dx, eps, false, 0.0, 0.0, 0.0};
        pt.cfl_ok = dt <= cfl_dt(dx, eps, 0.5, 1.0, CflKind::telegraph);
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < theta_samples; ++k) {
          const double theta = 2.0 * M_PI * k / (theta_samples - 1);
          AmplificationContext ctx(dt, dx, eps, theta);
          worst = std::max(worst, amplification_norm_excess(ctx));
        }
        for (double theta : {0.0, M_PI / 2.0}) {  // X = 0 and X = 1
          AmplificationContext ctx(dt, dx, eps, theta);
          worst = std::max(worst, amplification_norm_excess(ctx));
        }
        pt.max_norm_sq = 1.0 + worst;
        AmplificationContext ctx(dt, dx, eps, 0.0);
        auto poly = stability_polynomial(ctx);
        pt.q0 = poly.q0;
        pt.q1 = poly.q1;
        report.points.push_back(pt);
        if (pt.cfl_ok && worst > tol) report.violations.push_back(pt);
        if (!pt.cfl_ok)
          report.worst_margin_outside_cfl = std::max(report.worst_margin_outside_cfl, worst);
      }
  return report;
}

/// ||rho||^2 + eps^2 |||g|||^2.
inline double discrete_energy(const StaggeredGrid1D& grid, const VelocityQuadrature& quad,
                              const KineticState& state, double eps) {
  return macro_norm_sq(grid, state.rho) + eps * eps * micro_norm_sq(grid, quad, state.g);
}

/// Telegraph form sum_i rho_i^2 + J_{i+1/2}^2.
inline double discrete_energy(const TelegraphState& state) {
  double s = 0.0;
  for (double v : state.rho) s += v * v;
  for (double v : state.flux) s += v * v;
  return s;
}

/// Least-squares slope of log(energy) against time: the empirical growth rate
/// L in E_n <= e^{L n dt} E_0.
inline double fit_growth_rate(const std::vector<double>& energies, double dt) {
  if (energies.size() < 2) throw ConfigError("fit_growth_rate: need at least two samples");
  const std::size_t n = energies.size();
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(energies[k] > 0.0)) throw NumericalError("fit_growth_rate: nonpositive energy");
    const double t = static_cast<double>(k) * dt;
    const double y = std::log(energies[k]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double denom = n * stt - st * st;
  return (n * sty - st * sy) / denom;
}

}  // namespace smm
