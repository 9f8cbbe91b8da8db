#pragma once
#include <algorithm>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "smm/grid.hpp"

namespace smm {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// One vector of i.i.d. standard normals, addressed by (stream, step) so that
/// replays and coupled schemes see bitwise-identical values.
struct GaussianDraw {
  std::vector<double> xi;
  std::uint64_t stream_id = 0;
  std::uint64_t step = 0;
};

/// Deterministic per-realization substream split from a master seed; draws are
/// random-access in the step index, so results do not depend on worker
/// scheduling.
struct RngStream {
  std::uint64_t master_seed = 0;
  std::uint64_t substream = 0;

  std::uint64_t id() const {
    return detail::splitmix64(detail::splitmix64(master_seed) ^ (substream + 1));
  }
};

inline GaussianDraw sample_draw(const RngStream& stream, std::uint64_t step, int k_total) {
  GaussianDraw d;
  d.stream_id = stream.id();
  d.step = step;
  d.xi.resize(k_total);
  if (k_total == 0) return d;
  std::mt19937_64 eng(detail::splitmix64(d.stream_id ^ detail::splitmix64(step)));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < k_total; ++k) d.xi[k] = normal(eng);
  return d;
}

enum class NodeFamily { primal, dual };

/// Truncated spectral noise: per-mode profiles Qe_k sampled on both node
/// families (tables b_{ik}, b_{i+1/2,k}) plus the Ito correction fields
/// S = 1/2 sum_k b_k^2 and the sup-norm trace sum_k ||Qe_k||_inf^2.
class NoiseModel {
public:
  NoiseModel() = default;

  /// modes[k] = profile of Qe_k as a function of x.
  NoiseModel(const StaggeredGrid1D& grid,
             const std::vector<std::function<double(double)>>& modes) {
    const int m = grid.num_cells;
    const int k_total = static_cast<int>(modes.size());
    cells_ = m;
    k_total_ = k_total;
    b_primal_.assign(static_cast<std::size_t>(k_total) * m, 0.0);
    b_dual_.assign(static_cast<std::size_t>(k_total) * m, 0.0);
    s_primal_.assign(m, 0.0);
    s_dual_.assign(m, 0.0);
    trace_sup_sq_ = 0.0;
    for (int k = 0; k < k_total; ++k) {
      double sup = 0.0;
      for (int i = 0; i < m; ++i) {
        double bp = modes[k](grid.primal_x(i));
        double bd = modes[k](grid.dual_x(i));
        b_primal_[static_cast<std::size_t>(k) * m + i] = bp;
        b_dual_[static_cast<std::size_t>(k) * m + i] = bd;
        s_primal_[i] += 0.5 * bp * bp;
        s_dual_[i] += 0.5 * bd * bd;
        sup = std::max({sup, std::abs(bp), std::abs(bd)});
      }
      trace_sup_sq_ += sup * sup;
    }
  }

  int num_modes() const { return k_total_; }
  int num_cells() const { return cells_; }
  double trace_sup_sq() const { return trace_sup_sq_; }

  double ito_correction(NodeFamily fam, int i) const {
    return fam == NodeFamily::primal ? s_primal_[i] : s_dual_[i];
  }

  double coefficient(NodeFamily fam, int k, int i) const {
    const auto& b = fam == NodeFamily::primal ? b_primal_ : b_dual_;
    return b[static_cast<std::size_t>(k) * cells_ + i];
  }

  /// dt*S_i + sqrt(dt) * sum_k b_{ik} xi_k: the increment added to 1 in the
  /// multiplicative factors of the schemes.
  double factor(NodeFamily fam, int i, const GaussianDraw& draw, double dt) const {
    if (k_total_ == 0) return 0.0;
    if (i < 0 || i >= cells_) throw DimensionError("noise_factor: node index out of range");
    const auto& b = fam == NodeFamily::primal ? b_primal_ : b_dual_;
    double acc = 0.0;
    for (int k = 0; k < k_total_; ++k) acc += b[static_cast<std::size_t>(k) * cells_ + i] * draw.xi[k];
    return dt * ito_correction(fam, i) + std::sqrt(dt) * acc;
  }

  /// All-node variant used in the stepping loops.
  void factors_into(NodeFamily fam, const GaussianDraw& draw, double dt,
                    std::span<double> out) const {
    if (k_total_ == 0) {  // deterministic model works on any grid
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    if (out.size() != static_cast<std::size_t>(cells_))
      throw DimensionError("noise factors: output length does not match grid");
    const auto& s = fam == NodeFamily::primal ? s_primal_ : s_dual_;
    for (int i = 0; i < cells_; ++i) out[i] = dt * s[i];
    const auto& b = fam == NodeFamily::primal ? b_primal_ : b_dual_;
    const double rt = std::sqrt(dt);
    for (int k = 0; k < k_total_; ++k) {
      const double c = rt * draw.xi[k];
      const double* bk = b.data() + static_cast<std::size_t>(k) * cells_;
      for (int i = 0; i < cells_; ++i) out[i] += c * bk[i];
    }
  }

  static NoiseModel none() { return NoiseModel(); }

  /// Single constant mode Qe_0 = 1 (the telegraph-case Brownian motion).
  static NoiseModel constant_mode(const StaggeredGrid1D& grid) {
    std::vector<std::function<double(double)>> modes;
    modes.emplace_back([](double) { return 1.0; });
    return NoiseModel(grid, modes);
  }

private:
  int cells_ = 0;
  int k_total_ = 0;
  std::vector<double> b_primal_;  // mode-major [k*M + i]
  std::vector<double> b_dual_;
  std::vector<double> s_primal_;
  std::vector<double> s_dual_;
  double trace_sup_sq_ = 0.0;
};

/// Spectrum used in the numerical experiments: one constant mode, then for
/// k = 1..n/2 the profile (cos(k w x) + sin(k w x))/(k+1) and for
/// k = -1..-n/2 the profile (cos(k w x) + sin(k w x))/(1-k). On a domain of
/// length L the wavenumber scale is w = 2 pi / L so every mode is periodic;
/// raw_wavenumbers = true keeps the literal w = 1.
inline NoiseModel build_paper_noise(const StaggeredGrid1D& grid, int n,
                                    bool raw_wavenumbers = false) {
  if (n < 2 || n % 2 != 0) throw ConfigError("noise.num_modes must be even and >= 2");
  const double omega = raw_wavenumbers ? 1.0 : 2.0 * M_PI / grid.domain_length;
  std::vector<std::function<double(double)>> modes;
  modes.emplace_back([](double) { return 1.0; });
  for (int k = 1; k <= n / 2; ++k) {
    double freq = k * omega;
    double coeff = 1.0 / (k + 1);
    modes.emplace_back(
        [freq, coeff](double x) { return coeff * (std::cos(freq * x) + std::sin(freq * x)); });
  }
  for (int k = -1; k >= -n / 2; --k) {
    double freq = k * omega;
    double coeff = 1.0 / (1.0 - k);
    modes.emplace_back(
        [freq, coeff](double x) { return coeff * (std::cos(freq * x) + std::sin(freq * x)); });
  }
  return NoiseModel(grid, modes);
}

}  // namespace smm
