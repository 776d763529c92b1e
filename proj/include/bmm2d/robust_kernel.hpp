#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <span>
#include <vector>

#include "bmm2d/grid.hpp"

namespace bmm2d {

/// Bounded loss used in both stages of the BMM estimator:
///   0.5 x^2                                          |x| <= 2
///   0.002x^8 - 0.052x^6 + 0.432x^4 - 0.972x^2 + 1.792  2 < |x| <= 3
///   3.25                                             |x| > 3
[[nodiscard]] inline double rho2(double x) noexcept {
  const double a = std::abs(x);
  if (a <= 2.0) return 0.5 * x * x;
  if (a <= 3.0) {
    const double x2 = x * x;
    return (((0.002 * x2 - 0.052) * x2 + 0.432) * x2 - 0.972) * x2 + 1.792;
  }
  return 3.25;
}

/// rho2'. Odd and bounded, identity on [-2, 2], zero outside [-3, 3].
[[nodiscard]] inline double eta(double x) noexcept {
  const double a = std::abs(x);
  if (a <= 2.0) return x;
  if (a <= 3.0) {
    const double x2 = x * x;
    return (((0.016 * x2 - 0.312) * x2 + 1.728) * x2 - 1.944) * x;
  }
  return 0.0;
}

/// Huber psi clipped at +-1.5.
[[nodiscard]] inline double psi_huber(double x) noexcept { return std::clamp(x, -1.5, 1.5); }

inline constexpr double kRho1Tuning = 0.405;

/// The rho/eta family of the BMM estimator. rho1(x) = rho2(x / 0.405) drives
/// the M-scale in the first step; b = max(rho1) / 2 gives breakdown 0.5.
///
/// Alternative families (used to check structural identities) derive from
/// this one and hide individual members; every algorithm below is a template
/// over the family type so the hidden member is the one called.
struct BmmFamily {
  [[nodiscard]] double rho1(double x) const noexcept { return bmm2d::rho2(x / kRho1Tuning); }
  [[nodiscard]] double rho2(double x) const noexcept { return bmm2d::rho2(x); }
  [[nodiscard]] double eta(double x) const noexcept { return bmm2d::eta(x); }
  [[nodiscard]] double rho1_max() const noexcept { return 3.25; }
  [[nodiscard]] double b() const noexcept { return 1.625; }
};

template <class F>
concept RhoFamily = requires(const F& f, double x) {
  { f.rho1(x) } -> std::convertible_to<double>;
  { f.rho2(x) } -> std::convertible_to<double>;
  { f.eta(x) } -> std::convertible_to<double>;
  { f.rho1_max() } -> std::convertible_to<double>;
  { f.b() } -> std::convertible_to<double>;
};

static_assert(RhoFamily<BmmFamily>);

// ---------------------------------------------------------------------------
// Location / scale helpers

[[nodiscard]] inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

/// median |u - median(u)|
[[nodiscard]] inline double mad(std::span<const double> u) {
  std::vector<double> v(u.begin(), u.end());
  const double m = median(v);
  for (double& x : v) x = std::abs(x - m);
  return median(std::move(v));
}

/// MAD scaled to be consistent for the normal standard deviation.
[[nodiscard]] inline double normalized_mad(std::span<const double> u) { return 1.4826 * mad(u); }

// ---------------------------------------------------------------------------
// M-scale

struct ScaleEstimate {
  double s = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Solves (1/n) sum rho1(u_i / s) = b for s > 0.
///
/// The left side is non-increasing in s, so the root is bracketed by
/// doubling/halving from 1.4826 MAD(u) and refined by Illinois regula falsi
/// with a bisection fallback. If too many entries are zero for a positive
/// root to exist, s = 0 is returned with converged = false.
template <RhoFamily F>
[[nodiscard]] ScaleEstimate m_scale(std::span<const double> u, const F& family) {
  if (u.empty()) throw DomainError("m_scale: empty sample");
  const double n = static_cast<double>(u.size());
  std::size_t nonzero = 0;
  double max_abs = 0.0;
  for (double v : u) {
    if (v != 0.0) ++nonzero;
    max_abs = std::max(max_abs, std::abs(v));
  }
  if (nonzero == 0) return {0.0, 0, true};
  const double b = family.b();
  if (family.rho1_max() * static_cast<double>(nonzero) / n <= b) return {0.0, 0, false};

  int evals = 0;
  auto g = [&](double s) {
    ++evals;
    const double inv = 1.0 / s;
    double acc = 0.0;
    for (double v : u) acc += family.rho1(v * inv);
    return acc / n - b;
  };

  double s0 = normalized_mad(u);
  if (!(s0 > 0.0)) s0 = max_abs;

  double lo = s0, hi = s0;
  double g_lo = g(s0), g_hi = g_lo;
  if (g_lo == 0.0) return {s0, evals, true};
  if (g_lo > 0.0) {
    do {
      lo = hi;
      g_lo = g_hi;
      hi *= 2.0;
      g_hi = g(hi);
    } while (g_hi > 0.0 && evals < 2000);
  } else {
    do {
      hi = lo;
      g_hi = g_lo;
      lo *= 0.5;
      g_lo = g(lo);
    } while (g_lo <= 0.0 && lo > 0.0 && evals < 2000);
  }
  if (g_hi == 0.0) return {hi, evals, true};

  // g_lo > 0 >= g_hi
  double s = 0.5 * (lo + hi);
  double gs = 0.0;
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    const double secant = hi - g_hi * (hi - lo) / (g_hi - g_lo);
    s = (secant > lo && secant < hi) ? secant : 0.5 * (lo + hi);
    gs = g(s);
    if (std::abs(gs) <= 1e-12 || (hi - lo) <= 1e-13 * hi) break;
    if (gs > 0.0) {
      lo = s;
      g_lo = gs;
      if (side == -1) g_hi *= 0.5;
      side = -1;
    } else {
      hi = s;
      g_hi = gs;
      if (side == 1) g_lo *= 0.5;
      side = 1;
    }
    // Fall back to bisection when regula falsi stalls on one side.
    if (it % 8 == 7) {
      const double mid = 0.5 * (lo + hi);
      const double gm = g(mid);
      if (gm > 0.0) {
        lo = mid;
        g_lo = gm;
      } else {
        hi = mid;
        g_hi = gm;
      }
      side = 0;
    }
  }
  return {s, evals, std::abs(gs) <= 1e-9};
}

template <RhoFamily F>
[[nodiscard]] ScaleEstimate m_scale(const Grid2D& u, const F& family) {
  return m_scale(u.values(), family);
}

// ---------------------------------------------------------------------------
// kappa^2 = Var(eta(Z)), Z ~ N(0, 1)

/// Composite Simpson quadrature on [-8, 8]. The default node count puts the
/// junctions +-2 and +-3 of the default eta on panel boundaries.
template <RhoFamily F>
[[nodiscard]] double kappa_squared(const F& family, int intervals = 16000) {
  if (intervals < 4000) intervals = 4000;
  if (intervals % 2) ++intervals;
  const double a = -8.0, b = 8.0;
  const double h = (b - a) / intervals;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double z = a + h * i;
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double e = family.eta(z);
    const double pdf = norm * std::exp(-0.5 * z * z);
    m1 += w * e * pdf;
    m2 += w * e * e * pdf;
  }
  m1 *= h / 3.0;
  m2 *= h / 3.0;
  return m2 - m1 * m1;
}

/// Innovation scale implied by phi when Y has robust scale sigma_y:
/// sigma_y / sqrt(1 + kappa2 * sum lambda_{klr}^2), the sum running over
/// 1 <= k + l + r <= max_order.
[[nodiscard]] inline double sigma_hat_phi(const ArParams& params, double sigma_y, double kappa2,
                                          int max_order = kDefaultMaOrder) {
  require_feasible(params, "sigma_hat_phi");
  if (!(sigma_y > 0.0)) throw DomainError("sigma_hat_phi: sigma_y must be > 0");
  return sigma_y / std::sqrt(1.0 + kappa2 * ma_square_sum(params, max_order));
}

// ---------------------------------------------------------------------------
// Residuals

/// AR residuals written into `out` (size (rows-1)*(cols-1), row-major).
inline void ar_residuals_into(const Grid2D& y, const ArParams& p, std::span<double> out) noexcept {
  const std::size_t C = y.cols();
  const double* v = y.values().data();
  std::size_t o = 0;
  for (std::size_t i = 1; i < y.rows(); ++i) {
    const double* cur = v + i * C;
    const double* up = cur - C;
    for (std::size_t j = 1; j < C; ++j)
      out[o++] = cur[j] - p.phi1 * up[j] - p.phi2 * cur[j - 1] - p.phi3 * up[j - 1];
  }
}

/// BIP residuals written into `out` (size (rows-1)*(cols-1), row-major).
template <RhoFamily F>
void bip_residuals_into(const Grid2D& y, const ArParams& p, double sigma, const F& family,
                        std::span<double> out) {
  const std::size_t R = y.rows(), C = y.cols();
  // Each residual enters its successors through  sigma*eta(e/sigma) - e.
  std::vector<double> excess(C, 0.0), excess_prev(C, 0.0);
  const double inv = 1.0 / sigma;
  const double* v = y.values().data();
  std::size_t o = 0;
  for (std::size_t i = 1; i < R; ++i) {
    const double* cur = v + i * C;
    const double* up = cur - C;
    excess[0] = 0.0;
    for (std::size_t j = 1; j < C; ++j) {
      const double base = cur[j] - p.phi1 * up[j] - p.phi2 * cur[j - 1] - p.phi3 * up[j - 1];
      const double val =
          base - p.phi1 * excess_prev[j] - p.phi2 * excess[j - 1] - p.phi3 * excess_prev[j - 1];
      excess[j] = sigma * family.eta(val * inv) - val;
      out[o++] = val;
    }
    std::swap(excess, excess_prev);
  }
}

/// Residuals of the bounded-innovation-propagation model, computed in raster
/// order with zero residuals on the first row and column of y. Returns the
/// (rows-1) x (cols-1) interior.
template <RhoFamily F>
[[nodiscard]] Grid2D bip_residuals(const Grid2D& y, const ArParams& params, double sigma,
                                   const F& family) {
  if (y.rows() < 2 || y.cols() < 2) throw DomainError("bip_residuals: grid must be at least 2x2");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("bip_residuals: sigma must be > 0");
  require_feasible(params, "bip_residuals");
  Grid2D out(y.rows() - 1, y.cols() - 1);
  bip_residuals_into(y, params, sigma, family, out.values());
  return out;
}

[[nodiscard]] inline Grid2D bip_residuals(const Grid2D& y, const ArParams& params, double sigma) {
  return bip_residuals(y, params, sigma, BmmFamily{});
}

}  // namespace bmm2d
