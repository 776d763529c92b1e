#pragma once

// Test-side reference computations. Written against the model definitions
// directly and kept free of library internals.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "bmm2d/grid.hpp"

namespace oracle {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// (k+l+r)! / (k! l! r!) phi1^k phi2^l phi3^r from raw factorials.
inline double lambda(int k, int l, int r, double p1, double p2, double p3) {
  return factorial(k + l + r) / (factorial(k) * factorial(l) * factorial(r)) * std::pow(p1, k) *
         std::pow(p2, l) * std::pow(p3, r);
}

/// Sum of lambda^2 over 1 <= k+l+r <= n by brute force over the cube.
inline double lambda_square_sum(double p1, double p2, double p3, int n) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k)
    for (int l = 0; k + l <= n; ++l)
      for (int r = 0; k + l + r <= n; ++r) {
        if (k + l + r == 0) continue;
        const double v = lambda(k, l, r, p1, p2, p3);
        s += v * v;
      }
  return s;
}

/// Impulse response psi_{a,b} of the quarter-plane recursion on an n x n grid:
/// the field is sum psi_{a,b} eps_{i-a, j-b}.
inline std::vector<std::vector<double>> impulse_response(double p1, double p2, double p3, int n) {
  std::vector<std::vector<double>> psi(n, std::vector<double>(n, 0.0));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double v = (a == 0 && b == 0) ? 1.0 : 0.0;
      if (a > 0) v += p1 * psi[a - 1][b];
      if (b > 0) v += p2 * psi[a][b - 1];
      if (a > 0 && b > 0) v += p3 * psi[a - 1][b - 1];
      psi[a][b] = v;
    }
  return psi;
}

/// Stationary autocovariance at lag (h1, h2), h1, h2 >= 0, for unit-variance innovations.
inline double autocovariance(double p1, double p2, double p3, int h1, int h2, int n = 80) {
  const auto psi = impulse_response(p1, p2, p3, n + std::max(h1, h2));
  double s = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) s += psi[a][b] * psi[a + h1][b + h2];
  return s;
}

inline double rho2(double x) {
  const double a = std::fabs(x);
  if (a <= 2.0) return 0.5 * x * x;
  if (a <= 3.0) {
    const double x2 = x * x;
    return 0.002 * std::pow(x2, 4) - 0.052 * std::pow(x2, 3) + 0.432 * x2 * x2 - 0.972 * x2 + 1.792;
  }
  return 3.25;
}

/// AR residuals by definition, row-major over i, j >= 1.
inline std::vector<double> ar_residuals(const bmm2d::Grid2D& y, double p1, double p2, double p3) {
  std::vector<double> e;
  for (std::size_t i = 1; i < y.rows(); ++i)
    for (std::size_t j = 1; j < y.cols(); ++j)
      e.push_back(y(i, j) - p1 * y(i - 1, j) - p2 * y(i, j - 1) - p3 * y(i - 1, j - 1));
  return e;
}

inline bmm2d::Grid2D random_grid(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> n(0.0, scale);
  bmm2d::Grid2D g(r, c);
  for (double& v : g.values()) v = n(eng);
  return g;
}

/// Uniform point in the l1 ball of the given radius (rejection from the cube).
inline bmm2d::ArParams random_feasible(std::mt19937_64& eng, double radius = 0.98) {
  std::uniform_real_distribution<double> u(-radius, radius);
  for (;;) {
    bmm2d::ArParams p{u(eng), u(eng), u(eng)};
    if (std::fabs(p.phi1) + std::fabs(p.phi2) + std::fabs(p.phi3) <= radius) return p;
  }
}

/// Fresh directory under the system temp path, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("bmm2d_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace oracle
