#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "smm/grid.hpp"

using namespace smm;

namespace {

DualField random_dual(const StaggeredGrid1D& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  DualField f(g.num_cells);
  for (auto& v : f) v = n(rng);
  return f;
}

MacroField random_macro(const StaggeredGrid1D& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  MacroField f(g.num_cells);
  for (auto& v : f) v = n(rng);
  return f;
}

}  // namespace

TEST_CASE("grid construction and wraparound") {
  StaggeredGrid1D g(8, 2.0);
  REQUIRE(g.dx == Catch::Approx(0.25));
  for (int i = -20; i <= 20; ++i) REQUIRE(g.wrap(i + 8) == g.wrap(i));
  REQUIRE(g.wrap(-1) == 7);
  REQUIRE_THROWS_AS(StaggeredGrid1D(2, 1.0), ConfigError);
}

TEST_CASE("velocity quadrature realizes the average operator") {
  auto gl = VelocityQuadrature::gauss_legendre(16);
  auto tp = VelocityQuadrature::two_point();

  double wsum = 0.0, vsum = 0.0;
  for (int q = 0; q < gl.size(); ++q) {
    wsum += gl.weights[q];
    vsum += gl.weights[q] * gl.nodes[q];
    REQUIRE(gl.weights[q] > 0.0);
    REQUIRE(gl.nodes[q] == -gl.nodes[gl.size() - 1 - q]);  // mirrored bitwise
  }
  REQUIRE(wsum == Catch::Approx(1.0).epsilon(1e-15));
  REQUIRE(std::abs(vsum) < 1e-16);

  std::vector<double> ones(gl.size(), 1.0);
  REQUIRE(gl.project(ones) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(std::abs(gl.project(gl.nodes)) < 1e-16);

  std::vector<double> vsq(gl.size());
  for (int q = 0; q < gl.size(); ++q) vsq[q] = gl.nodes[q] * gl.nodes[q];
  REQUIRE(gl.project(vsq) == Catch::Approx(1.0 / 3.0).epsilon(1e-14));

  REQUIRE(tp.nodes == std::vector<double>{-1.0, 1.0});
  REQUIRE(tp.weights == std::vector<double>{0.5, 0.5});
  std::vector<double> tpsq = {1.0, 1.0};
  REQUIRE(tp.project(tpsq) == Catch::Approx(1.0));

  std::vector<double> wrong(gl.size() + 1, 0.0);
  REQUIRE_THROWS_AS(gl.project(wrong), DimensionError);
}

TEST_CASE("gauss-legendre is exact for high-degree moments") {
  auto gl = VelocityQuadrature::gauss_legendre(16);
  // Pi(v^{2k}) = 1/(2k+1); degree 30 < 2*16 - 1 so all are exact.
  for (int k = 1; k <= 15; ++k) {
    std::vector<double> p(gl.size());
    for (int q = 0; q < gl.size(); ++q) p[q] = std::pow(gl.nodes[q], 2 * k);
    REQUIRE(gl.project(p) == Catch::Approx(1.0 / (2 * k + 1)).epsilon(1e-12));
  }
}

TEST_CASE("difference stencils") {
  StaggeredGrid1D g(4, 4.0);  // dx = 1
  DualField delta(4);
  delta[1] = 1.0;  // phi_{3/2} = 1

  auto dp = d_plus(g, delta);
  REQUIRE(dp[0] == Catch::Approx(1.0));
  REQUIRE(dp[1] == Catch::Approx(-1.0));
  REQUIRE(dp[2] == 0.0);
  REQUIRE(dp[3] == 0.0);

  SECTION("constant fields map to zero under every operator") {
    DualField c(4, 3.7);
    MacroField cm(4, -1.2);
    for (double v : d_minus(g, c)) REQUIRE(v == 0.0);
    for (double v : d_plus(g, c)) REQUIRE(v == 0.0);
    for (double v : d_center(g, c)) REQUIRE(v == 0.0);
    for (double v : d_zero(g, c)) REQUIRE(v == 0.0);
    for (double v : delta_zero(g, cm)) REQUIRE(v == 0.0);
  }

  SECTION("misaligned lengths are rejected") {
    DualField bad(5);
    REQUIRE_THROWS_AS(d_minus(g, bad), DimensionError);
    MacroField badm(3);
    REQUIRE_THROWS_AS(delta_zero(g, badm), DimensionError);
  }
}

TEST_CASE("centered operator is the mean of the one-sided ones") {
  StaggeredGrid1D g(16, 1.0);
  std::mt19937_64 rng(1234);
  // Includes the linear-in-index sawtooth alongside random periodic fields.
  DualField saw(16);
  for (int i = 0; i < 16; ++i) saw[i] = i < 8 ? i : 16 - i;
  for (int rep = 0; rep < 5; ++rep) {
    DualField phi = rep == 0 ? saw : random_dual(g, rng);
    auto dc = d_center(g, phi);
    auto dm = d_minus(g, phi);
    auto dp = d_plus(g, phi);
    for (int i = 0; i < 16; ++i) {
      // brute-force stencil evaluation
      double direct = (phi[g.wrap(i + 1)] - phi[g.wrap(i - 1)]) / (2.0 * g.dx);
      REQUIRE(dc[i] == Catch::Approx(direct).margin(1e-13));
      REQUIRE(dc[i] == Catch::Approx(0.5 * (dm[i] + dp[i])).margin(1e-12));
    }
  }
}

TEST_CASE("discrete norms") {
  StaggeredGrid1D g(10, 2.5);
  auto quad = VelocityQuadrature::gauss_legendre(8);

  MacroField ones(10, 1.0);
  REQUIRE(macro_norm_sq(g, ones) == Catch::Approx(g.domain_length).epsilon(1e-14));

  KineticField zero(10, quad.size());
  REQUIRE(micro_norm_sq(g, quad, zero) == 0.0);

  // phi(v) = v constant in x: |||phi|||^2 = Pi(v^2) * L = L/3.
  KineticField vv(10, quad.size());
  for (int i = 0; i < 10; ++i)
    for (int q = 0; q < quad.size(); ++q) vv(i, q) = quad.nodes[q];
  double brute = 0.0;  // naive double sum, independent of micro_norm_sq
  for (int i = 0; i < 10; ++i)
    for (int q = 0; q < quad.size(); ++q)
      brute += quad.weights[q] * vv(i, q) * vv(i, q) * g.dx;
  REQUIRE(micro_norm_sq(g, quad, vv) == Catch::Approx(brute).epsilon(1e-14));
  REQUIRE(micro_norm_sq(g, quad, vv) == Catch::Approx(g.domain_length / 3.0).epsilon(1e-13));

  // inner product: symmetric bilinear, |||phi|||^2 = <phi,phi>
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n;
  KineticField a(10, quad.size()), b(10, quad.size());
  for (auto& x : a.data) x = n(rng);
  for (auto& x : b.data) x = n(rng);
  REQUIRE(micro_inner(g, quad, a, b) == Catch::Approx(micro_inner(g, quad, b, a)));
  REQUIRE(micro_inner(g, quad, a, a) == Catch::Approx(micro_norm_sq(g, quad, a)));
}

TEST_CASE("discrete integration by parts") {
  StaggeredGrid1D g(24, 1.0);
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    DualField phi = random_dual(g, rng);
    DualField psi = random_dual(g, rng);
    MacroField mu = random_macro(g, rng);

    double lhs1 = 0.0, rhs1 = 0.0;
    auto d0phi = d_zero(g, phi);
    auto d0mu = delta_zero(g, mu);
    for (int i = 0; i < g.num_cells; ++i) {
      lhs1 += mu[i] * d0phi[i] * g.dx;
      rhs1 += d0mu[i] * phi[i] * g.dx;
    }
    REQUIRE(lhs1 == Catch::Approx(-rhs1).margin(1e-12));

    double lhs2 = 0.0, rhs2 = 0.0;
    auto dmphi = d_minus(g, phi);
    auto dppsi = d_plus(g, psi);
    for (int i = 0; i < g.num_cells; ++i) {
      lhs2 += psi[i] * dmphi[i] * g.dx;
      rhs2 += dppsi[i] * phi[i] * g.dx;
    }
    REQUIRE(lhs2 == Catch::Approx(-rhs2).margin(1e-12));

    double sum3 = 0.0;
    auto dcphi = d_center(g, phi);
    for (int i = 0; i < g.num_cells; ++i) sum3 += phi[i] * dcphi[i] * g.dx;
    REQUIRE(std::abs(sum3) < 1e-12);
  }
}

TEST_CASE("centered form of the upwind operator") {
  StaggeredGrid1D g(12, 1.0);
  auto quad = VelocityQuadrature::gauss_legendre(8);
  std::mt19937_64 rng(21);
  DualField phi = random_dual(g, rng);
  auto dm = d_minus(g, phi);
  auto dp = d_plus(g, phi);
  auto dc = d_center(g, phi);
  auto dmdp = d_minus(g, dp);
  for (int q = 0; q < quad.size(); ++q) {
    const double v = quad.nodes[q];
    const double vp = std::max(v, 0.0), vm = std::min(v, 0.0);
    for (int i = 0; i < g.num_cells; ++i) {
      double lhs = vp * dm[i] + vm * dp[i];
      double rhs = v * dc[i] - 0.5 * g.dx * std::abs(v) * dmdp[i];
      REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12));
    }
  }
}

TEST_CASE("a priori bound for the discrete derivative") {
  StaggeredGrid1D g(32, 1.0);
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    DualField phi = random_dual(g, rng);
    auto dp = d_plus(g, phi);
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < g.num_cells; ++i) {
      lhs += dp[i] * dp[i] * g.dx;
      rhs += phi[i] * phi[i] * g.dx;
    }
    REQUIRE(lhs <= 4.0 / (g.dx * g.dx) * rhs * (1.0 + 1e-12));
  }
}

TEST_CASE("velocity average inequality (Pi(vg))^2 <= Pi(|v| g^2)/2") {
  auto quad = VelocityQuadrature::gauss_legendre(16);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> prof(quad.size());
    for (auto& x : prof) x = n(rng);
    double pvg = 0.0, pvg2 = 0.0;
    for (int q = 0; q < quad.size(); ++q) {
      pvg += quad.weights[q] * quad.nodes[q] * prof[q];
      pvg2 += quad.weights[q] * std::abs(quad.nodes[q]) * prof[q] * prof[q];
    }
    REQUIRE(pvg * pvg <= 0.5 * pvg2 * (1.0 + 1e-12));
  }
}
