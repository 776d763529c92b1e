#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bmm2d/grid.hpp"
#include "bmm2d/optimizer.hpp"
#include "bmm2d/robust_kernel.hpp"

namespace bmm2d {

enum class Method { LS, M, GM, BMM };
enum class Branch { AR, BIP, NotApplicable };

[[nodiscard]] inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::LS: return "LS";
    case Method::M: return "M";
    case Method::GM: return "GM";
    case Method::BMM: return "BMM";
  }
  return "?";
}

[[nodiscard]] inline std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::AR: return "AR";
    case Branch::BIP: return "BIP";
    case Branch::NotApplicable: return "NA";
  }
  return "?";
}

/// Case-insensitive parse of "ls", "m", "gm", "bmm".
[[nodiscard]] inline std::optional<Method> parse_method(std::string_view s) {
  std::string t(s);
  for (char& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "LS") return Method::LS;
  if (t == "M") return Method::M;
  if (t == "GM") return Method::GM;
  if (t == "BMM") return Method::BMM;
  return std::nullopt;
}

struct EstimateResult {
  ArParams params;
  double scale = 0.0;
  double objective = 0.0;
  Branch branch = Branch::NotApplicable;
  Method method = Method::LS;
  bool feasible = true;   // false only for an unprojected LS fit outside the feasible set
  bool converged = true;  // optimizer reached its tolerance in at least one run
  bool warning = false;   // BMM fell back to a single branch
};

namespace detail {

inline void require_min_size(const Grid2D& y, const char* who) {
  if (y.rows() < 3 || y.cols() < 3)
    throw DegenerateInputError(std::string(who) + ": field must be at least 3x3, got " +
                               std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
}

/// Solves the symmetric 3x3 system A x = b by Gaussian elimination with
/// partial pivoting; returns nullopt when A is numerically singular.
inline std::optional<std::array<double, 3>> solve3(std::array<std::array<double, 3>, 3> a,
                                                   std::array<double, 3> b) {
  const double scale = std::max({std::abs(a[0][0]), std::abs(a[1][1]), std::abs(a[2][2])});
  if (!(scale > 0.0)) return std::nullopt;
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) <= 1e-12 * scale) return std::nullopt;
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

inline std::size_t interior_size(const Grid2D& y) { return (y.rows() - 1) * (y.cols() - 1); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Criteria. Each returns the value at phi for a fixed scale; they are the
// functions the estimators hand to minimize_over_B.

/// mean rho2(e_ij(phi) / scale) over the AR residuals.
template <RhoFamily F>
[[nodiscard]] double m_criterion(const Grid2D& y, const ArParams& phi, double scale, const F& family,
                                 std::vector<double>& buf) {
  buf.resize(detail::interior_size(y));
  ar_residuals_into(y, phi, buf);
  const double inv = 1.0 / scale;
  double acc = 0.0;
  for (double e : buf) acc += family.rho2(e * inv);
  return acc / static_cast<double>(buf.size());
}

/// mean rho2(e^b_ij(phi, scale) / scale) over the BIP residuals.
template <RhoFamily F>
[[nodiscard]] double bip_m_criterion(const Grid2D& y, const ArParams& phi, double scale,
                                     const F& family, std::vector<double>& buf) {
  buf.resize(detail::interior_size(y));
  bip_residuals_into(y, phi, scale, family, buf);
  const double inv = 1.0 / scale;
  double acc = 0.0;
  for (double e : buf) acc += family.rho2(e * inv);
  return acc / static_cast<double>(buf.size());
}

/// M-scale of the AR residuals at phi.
template <RhoFamily F>
[[nodiscard]] ScaleEstimate s_criterion(const Grid2D& y, const ArParams& phi, const F& family,
                                        std::vector<double>& buf) {
  buf.resize(detail::interior_size(y));
  ar_residuals_into(y, phi, buf);
  return m_scale(std::span<const double>(buf), family);
}

/// M-scale of the BIP residuals at phi, with the innovation scale implied
/// by phi and the robust field scale sigma_y.
template <RhoFamily F>
[[nodiscard]] ScaleEstimate bip_s_criterion(const Grid2D& y, const ArParams& phi, double sigma_y,
                                            double kappa2, const F& family, std::vector<double>& buf) {
  const double sigma = sigma_hat_phi(phi, sigma_y, kappa2);
  buf.resize(detail::interior_size(y));
  bip_residuals_into(y, phi, sigma, family, buf);
  return m_scale(std::span<const double>(buf), family);
}

// ---------------------------------------------------------------------------
// LS

/// Closed-form least squares over the interior. Not projected onto the
/// feasible set; `feasible` reports whether it lies inside.
[[nodiscard]] inline EstimateResult estimate_ls(const Grid2D& y) {
  detail::require_min_size(y, "estimate_ls");
  std::array<std::array<double, 3>, 3> xtx{};
  std::array<double, 3> xty{};
  for (std::size_t i = 1; i < y.rows(); ++i) {
    for (std::size_t j = 1; j < y.cols(); ++j) {
      const std::array<double, 3> z{y(i - 1, j), y(i, j - 1), y(i - 1, j - 1)};
      for (int a = 0; a < 3; ++a) {
        xty[a] += z[a] * y(i, j);
        for (int b = 0; b < 3; ++b) xtx[a][b] += z[a] * z[b];
      }
    }
  }
  const auto sol = detail::solve3(xtx, xty);
  if (!sol) throw DegenerateInputError("estimate_ls: singular normal equations (degenerate field)");
  EstimateResult r;
  r.method = Method::LS;
  r.params = {(*sol)[0], (*sol)[1], (*sol)[2]};
  const Grid2D e = ar_residuals(y, r.params);
  double ss = 0.0;
  for (double v : e.values()) ss += v * v;
  r.objective = ss;
  const double dof = static_cast<double>(e.size()) - 3.0;
  r.scale = std::sqrt(ss / std::max(dof, 1.0));
  r.feasible = is_feasible(r.params);
  return r;
}

// ---------------------------------------------------------------------------
// M

/// M estimate with a fixed scale and start; the building block of estimate_m.
template <RhoFamily F>
[[nodiscard]] EstimateResult estimate_m_with_scale(const Grid2D& y, double scale, const ArParams& start,
                                                   const OptimizerConfig& config, const F& family) {
  if (!(scale > 0.0)) throw DegenerateInputError("estimate_m: residual scale is zero");
  std::vector<double> buf;
  const auto opt = minimize_over_B(
      [&](const ArParams& p) { return m_criterion(y, p, scale, family, buf); }, start, config);
  EstimateResult r;
  r.method = Method::M;
  r.params = opt.params;
  r.objective = opt.value;
  r.scale = scale;
  r.converged = opt.converged;
  return r;
}

/// Scale used by the M estimator: 1.4826 MAD of the LS residuals.
[[nodiscard]] inline double m_estimator_scale(const Grid2D& y, const EstimateResult& ls) {
  return normalized_mad(ar_residuals(y, ls.params).values());
}

template <RhoFamily F = BmmFamily>
[[nodiscard]] EstimateResult estimate_m(const Grid2D& y, const OptimizerConfig& config,
                                        const F& family = {}) {
  detail::require_min_size(y, "estimate_m");
  const EstimateResult ls = estimate_ls(y);
  return estimate_m_with_scale(y, m_estimator_scale(y, ls), ls.params, config, family);
}

// ---------------------------------------------------------------------------
// GM

/// Mallows-type weights t_ij = psi_H(m_ij) / m_ij with
/// m_ij = mean(Y(i-1,j)^2, Y(i,j-1)^2, Y(i-1,j-1)^2) / sigma_y2, and t = 1
/// where m = 0. Returned on the residual lattice.
[[nodiscard]] inline Grid2D gm_weights(const Grid2D& y, double sigma_y2) {
  if (y.rows() < 2 || y.cols() < 2) throw DomainError("gm_weights: grid must be at least 2x2");
  if (!(sigma_y2 > 0.0)) throw DegenerateInputError("gm_weights: field scale is zero");
  Grid2D t(y.rows() - 1, y.cols() - 1, 1.0);
  for (std::size_t i = 1; i < y.rows(); ++i) {
    for (std::size_t j = 1; j < y.cols(); ++j) {
      const double a = y(i - 1, j), b = y(i, j - 1), c = y(i - 1, j - 1);
      const double m = (a * a + b * b + c * c) / 3.0 / sigma_y2;
      t(i - 1, j - 1) = m > 0.0 ? psi_huber(m) / m : 1.0;
    }
  }
  return t;
}

/// Q(phi, sigma) = sum t_ij [rho2(e_ij / sigma) + 1/2] sigma   (l_ij = 1)
template <RhoFamily F>
[[nodiscard]] double gm_criterion(const Grid2D& y, const ArParams& phi, const Grid2D& weights,
                                  double sigma, const F& family, std::vector<double>& buf) {
  buf.resize(detail::interior_size(y));
  ar_residuals_into(y, phi, buf);
  const auto w = weights.values();
  const double inv = 1.0 / sigma;
  double acc = 0.0;
  for (std::size_t k = 0; k < buf.size(); ++k) acc += w[k] * (family.rho2(buf[k] * inv) + 0.5);
  return acc * sigma;
}

/// GM estimate with given weights, scale and start; weights and scale are held fixed.
template <RhoFamily F>
[[nodiscard]] EstimateResult estimate_gm_with(const Grid2D& y, const Grid2D& weights, double sigma,
                                              const ArParams& start, const OptimizerConfig& config,
                                              const F& family) {
  if (weights.rows() != y.rows() - 1 || weights.cols() != y.cols() - 1)
    throw DomainError("estimate_gm: weight grid must match the residual lattice");
  if (!(sigma > 0.0)) throw DegenerateInputError("estimate_gm: residual scale is zero");
  std::vector<double> buf;
  const auto opt = minimize_over_B(
      [&](const ArParams& p) { return gm_criterion(y, p, weights, sigma, family, buf); }, start, config);
  EstimateResult r;
  r.method = Method::GM;
  r.params = opt.params;
  r.objective = opt.value;
  r.scale = sigma;
  r.converged = opt.converged;
  return r;
}

template <RhoFamily F = BmmFamily>
[[nodiscard]] EstimateResult estimate_gm(const Grid2D& y, const OptimizerConfig& config,
                                         const F& family = {}) {
  detail::require_min_size(y, "estimate_gm");
  const EstimateResult ls = estimate_ls(y);
  const double sy = normalized_mad(y.values());
  const Grid2D t = gm_weights(y, sy * sy);
  std::vector<double> buf;
  const double sigma = s_criterion(y, ls.params, family, buf).s;
  return estimate_gm_with(y, t, sigma, ls.params, config, family);
}

// ---------------------------------------------------------------------------
// BMM

/// Everything the two-stage estimator computes on the way to its answer.
struct BmmDetail {
  EstimateResult result;
  double sigma_y = 0.0;  // 1.4826 MAD of the observed field
  double kappa2 = 0.0;
  // First step
  ArParams s_params_ar, s_params_bip;
  double s_ar = 0.0, s_bip = 0.0, s_star = 0.0;
  bool ar_scale_ok = false, bip_scale_ok = false;
  // Second step
  ArParams m_params_ar, m_params_bip;
  double m_value_ar = 0.0, m_value_bip = 0.0;
};

template <RhoFamily F = BmmFamily>
[[nodiscard]] BmmDetail estimate_bmm_detailed(const Grid2D& y, const OptimizerConfig& config,
                                              const F& family = {}) {
  detail::require_min_size(y, "estimate_bmm");
  validate(config);
  BmmDetail d;
  const EstimateResult ls = estimate_ls(y);
  const ArParams start = project_l1_ball(ls.params, 1.0 - config.zeta);
  d.sigma_y = normalized_mad(y.values());
  d.kappa2 = kappa_squared(family);
  std::vector<double> buf;

  // First step: S-type scale on both residual families.
  {
    const auto opt = minimize_over_B(
        [&](const ArParams& p) { return s_criterion(y, p, family, buf).s; }, start, config);
    d.s_params_ar = opt.params;
    const ScaleEstimate s = s_criterion(y, opt.params, family, buf);
    d.s_ar = s.s;
    d.ar_scale_ok = s.converged && s.s > 0.0;
  }
  if (d.sigma_y > 0.0) {
    const auto opt = minimize_over_B(
        [&](const ArParams& p) { return bip_s_criterion(y, p, d.sigma_y, d.kappa2, family, buf).s; },
        start, config);
    d.s_params_bip = opt.params;
    const ScaleEstimate s = bip_s_criterion(y, opt.params, d.sigma_y, d.kappa2, family, buf);
    d.s_bip = s.s;
    d.bip_scale_ok = s.converged && s.s > 0.0;
  }
  if (!d.ar_scale_ok && !d.bip_scale_ok)
    throw DegenerateInputError("estimate_bmm: scale search failed on both branches");
  if (d.ar_scale_ok && d.bip_scale_ok) d.s_star = std::min(d.s_ar, d.s_bip);
  else d.s_star = d.ar_scale_ok ? d.s_ar : d.s_bip;

  // Second step: M-criteria with the common scale s*.
  const double s_star = d.s_star;
  EstimateResult& r = d.result;
  r.method = Method::BMM;
  r.scale = s_star;
  r.warning = !(d.ar_scale_ok && d.bip_scale_ok);
  bool have_ar = false, have_bip = false;
  if (d.ar_scale_ok) {
    const auto opt = minimize_over_B(
        [&](const ArParams& p) { return m_criterion(y, p, s_star, family, buf); }, d.s_params_ar, config);
    d.m_params_ar = opt.params;
    d.m_value_ar = opt.value;
    r.converged = opt.converged;
    have_ar = true;
  }
  if (d.bip_scale_ok) {
    const auto opt = minimize_over_B(
        [&](const ArParams& p) { return bip_m_criterion(y, p, s_star, family, buf); }, d.s_params_bip,
        config);
    d.m_params_bip = opt.params;
    d.m_value_bip = opt.value;
    r.converged = have_ar ? (r.converged && opt.converged) : opt.converged;
    have_bip = true;
  }
  if (have_ar && (!have_bip || d.m_value_ar <= d.m_value_bip)) {
    r.params = d.m_params_ar;
    r.objective = d.m_value_ar;
    r.branch = Branch::AR;
  } else {
    r.params = d.m_params_bip;
    r.objective = d.m_value_bip;
    r.branch = Branch::BIP;
  }
  return d;
}

template <RhoFamily F = BmmFamily>
[[nodiscard]] EstimateResult estimate_bmm(const Grid2D& y, const OptimizerConfig& config,
                                          const F& family = {}) {
  return estimate_bmm_detailed(y, config, family).result;
}

[[nodiscard]] inline EstimateResult estimate(Method method, const Grid2D& y, const OptimizerConfig& config) {
  switch (method) {
    case Method::LS: return estimate_ls(y);
    case Method::M: return estimate_m(y, config);
    case Method::GM: return estimate_gm(y, config);
    case Method::BMM: return estimate_bmm(y, config);
  }
  throw DomainError("estimate: unknown method");
}

}  // namespace bmm2d
