#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "bmm2d/grid.hpp"
#include "bmm2d/random.hpp"

namespace bmm2d {

struct OptimizerConfig {
  int restarts = 5;
  int max_evals = 400;     // per restart
  double tolerance = 1e-7;  // simplex spread in value and in parameters
  double zeta = kDefaultZeta;
  std::uint64_t seed = 0x5EEDULL;  // drives the restart points
};

inline void validate(const OptimizerConfig& c) {
  if (c.restarts < 1) throw DomainError("optimizer: restarts must be >= 1");
  if (c.max_evals < 4) throw DomainError("optimizer: max_evals must be >= 4");
  if (!(c.tolerance > 0.0)) throw DomainError("optimizer: tolerance must be > 0");
  if (!(c.zeta > 0.0 && c.zeta < 1.0)) throw DomainError("optimizer: zeta must lie in (0, 1)");
}

/// Euclidean projection onto {phi : |phi|_1 <= radius}.
[[nodiscard]] inline ArParams project_l1_ball(const ArParams& p, double radius) noexcept {
  if (p.l1_norm() <= radius) return p;
  std::array<double, 3> a{std::abs(p.phi1), std::abs(p.phi2), std::abs(p.phi3)};
  std::array<double, 3> s = a;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (int k = 0; k < 3; ++k) {
    cum += s[k];
    const double t = (cum - radius) / (k + 1);
    if (s[k] - t > 0.0) theta = t;
  }
  auto shrink = [theta](double v) { return std::copysign(std::max(std::abs(v) - theta, 0.0), v); };
  ArParams q{shrink(p.phi1), shrink(p.phi2), shrink(p.phi3)};
  // Rounding can leave the sum a few ulps above the radius.
  while (q.l1_norm() > radius) {
    const double f = std::nextafter(radius / q.l1_norm(), 0.0);
    q = {q.phi1 * f, q.phi2 * f, q.phi3 * f};
  }
  return q;
}

struct OptimizeResult {
  ArParams params;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

using Point = std::array<double, 3>;

inline ArParams to_params(const Point& x) { return {x[0], x[1], x[2]}; }
inline Point to_point(const ArParams& p) { return {p.phi1, p.phi2, p.phi3}; }

struct NmOutcome {
  Point x;
  double f;
  int evals;
  bool converged;
};

/// Nelder-Mead on R^3 with standard coefficients.
template <class Fn>
NmOutcome nelder_mead(Fn&& f, Point x0, double step, int max_evals, double tol) {
  std::array<Point, 4> v;
  std::array<double, 4> fv;
  v[0] = x0;
  for (int k = 0; k < 3; ++k) {
    v[k + 1] = x0;
    v[k + 1][k] += (x0[k] > 0.0 ? -step : step);
  }
  int evals = 0;
  for (int k = 0; k < 4; ++k) {
    fv[k] = f(v[k]);
    ++evals;
  }
  std::array<int, 4> idx{0, 1, 2, 3};
  bool converged = false;
  while (evals < max_evals) {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = idx[0], worst = idx[3], second = idx[2];
    double diam = 0.0;
    for (int k = 1; k < 4; ++k)
      for (int d = 0; d < 3; ++d) diam = std::max(diam, std::abs(v[idx[k]][d] - v[best][d]));
    if (fv[worst] - fv[best] <= tol * (1.0 + std::abs(fv[best])) && diam <= tol) {
      converged = true;
      break;
    }
    Point c{0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k)
      for (int d = 0; d < 3; ++d) c[d] += v[idx[k]][d] / 3.0;
    auto along = [&](double t) {
      Point p;
      for (int d = 0; d < 3; ++d) p[d] = c[d] + t * (v[worst][d] - c[d]);
      return p;
    };
    const Point xr = along(-1.0);
    const double fr = f(xr);
    ++evals;
    if (fr < fv[best]) {
      const Point xe = along(-2.0);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        v[worst] = xe;
        fv[worst] = fe;
      } else {
        v[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      v[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const Point xc = along(outside ? -0.5 : 0.5);
    const double fc = f(xc);
    ++evals;
    if (fc < (outside ? fr : fv[worst])) {
      v[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (int k = 1; k < 4; ++k) {
      const int i = idx[k];
      for (int d = 0; d < 3; ++d) v[i][d] = v[best][d] + 0.5 * (v[i][d] - v[best][d]);
      fv[i] = f(v[i]);
      ++evals;
    }
  }
  const auto [lo, hi] = std::minmax_element(fv.begin(), fv.end());
  // Out of evaluations with a simplex that is flat in value also counts.
  if (!converged) converged = *hi - *lo <= tol * (1.0 + std::abs(*lo));
  const int b = static_cast<int>(lo - fv.begin());
  return {v[b], fv[b], evals, converged};
}

/// Latin-hypercube points in [-radius, radius]^3, pulled radially into the
/// l1 ball of that radius.
inline std::vector<ArParams> lhs_starts(int count, double radius, std::uint64_t seed) {
  std::vector<ArParams> out;
  if (count <= 0) return out;
  Engine eng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<std::vector<int>, 3> perm;
  for (auto& p : perm) {
    p.resize(count);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), eng);
  }
  for (int i = 0; i < count; ++i) {
    Point x;
    for (int d = 0; d < 3; ++d) x[d] = radius * (2.0 * (perm[d][i] + unif(eng)) / count - 1.0);
    ArParams p = to_params(x);
    const double n1 = p.l1_norm();
    if (n1 > radius) p = project_l1_ball({p.phi1 * radius / n1, p.phi2 * radius / n1, p.phi3 * radius / n1}, radius);
    out.push_back(p);
  }
  return out;
}

}  // namespace detail

inline constexpr double kBarrierWeight = 1e6;

/// Minimizes `objective` over the feasible set |phi|_1 <= 1 - zeta.
///
/// Nelder-Mead runs on the barrier function objective(P(phi)) + 1e6 * excess,
/// where P is the projection onto the feasible set and excess the l1 distance
/// outside it, so the objective itself is only ever evaluated at feasible
/// points. The first run starts at `start` (projected), the remaining
/// restarts - 1 at Latin-hypercube points; each run is polished once by a
/// restart with a smaller simplex. The best feasible point is returned.
template <class Objective>
[[nodiscard]] OptimizeResult minimize_over_B(Objective&& objective, const ArParams& start,
                                             const OptimizerConfig& config) {
  validate(config);
  const double radius = 1.0 - config.zeta;
  if (!start.finite()) throw DomainError("minimize_over_B: non-finite start");

  OptimizeResult best;
  auto penalized = [&](const detail::Point& x) {
    const ArParams p = detail::to_params(x);
    const double excess = std::max(0.0, p.l1_norm() - radius);
    const ArParams q = excess > 0.0 ? project_l1_ball(p, radius) : p;
    const double f = objective(q);
    ++best.evaluations;
    if (!std::isfinite(f)) return std::numeric_limits<double>::max();
    return f + kBarrierWeight * excess;
  };

  std::vector<ArParams> starts{project_l1_ball(start, radius)};
  for (const auto& p : detail::lhs_starts(config.restarts - 1, radius, config.seed)) starts.push_back(p);

  bool any_converged = false;
  for (const auto& s0 : starts) {
    auto run = detail::nelder_mead(penalized, detail::to_point(s0), 0.1, config.max_evals,
                                   config.tolerance);
    const int remaining = std::max(4, config.max_evals / 4);
    auto polish = detail::nelder_mead(penalized, run.x, 0.01, remaining, config.tolerance);
    if (polish.f <= run.f) run = polish;
    const ArParams p = project_l1_ball(detail::to_params(run.x), radius);
    const double f = objective(p);
    if (std::isfinite(f) && f < best.value) {
      best.value = f;
      best.params = p;
    }
    any_converged = any_converged || run.converged || polish.converged;
  }
  if (!std::isfinite(best.value))
    throw DomainError("minimize_over_B: objective not finite at any feasible start");
  best.converged = any_converged;
  return best;
}

}  // namespace bmm2d
