#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "bmm2d/errors.hpp"
#include "bmm2d/random.hpp"

namespace bmm2d {

/// Dense row-major lattice of finite reals.
///
/// Storage is 0-based. When a grid holds an observed field, element (0, 0)
/// corresponds to lattice site (1, 1); residual grids produced by
/// ar_residuals / bip_residuals start at site (2, 2).
class Grid2D {
 public:
  Grid2D() = default;

  Grid2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    check_shape();
  }

  Grid2D(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    check_shape();
    if (values_.size() != rows_ * cols_) {
      throw DomainError("Grid2D: expected " + std::to_string(rows_ * cols_) +
                        " values, got " + std::to_string(values_.size()));
    }
    if (!all_finite()) throw DomainError("Grid2D: non-finite value");
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }

  [[nodiscard]] bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  [[nodiscard]] Grid2D transpose() const {
    Grid2D out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  /// Copy of the sub-rectangle [r0, r0 + nr) x [c0, c0 + nc).
  [[nodiscard]] Grid2D crop(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw DomainError("Grid2D::crop: window out of range");
    Grid2D out(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) out(i, j) = (*this)(r0 + i, c0 + j);
    return out;
  }

  [[nodiscard]] double mean() const noexcept {
    double s = 0.0;
    for (double v : values_) s += v;
    return values_.empty() ? 0.0 : s / static_cast<double>(values_.size());
  }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  void check_shape() const {
    if (rows_ < 1 || cols_ < 1) throw DomainError("Grid2D: rows and cols must be >= 1");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Coefficients of Y(i,j) = phi1 Y(i-1,j) + phi2 Y(i,j-1) + phi3 Y(i-1,j-1) + e(i,j).
struct ArParams {
  double phi1 = 0.0;
  double phi2 = 0.0;
  double phi3 = 0.0;

  [[nodiscard]] double l1_norm() const noexcept {
    return std::abs(phi1) + std::abs(phi2) + std::abs(phi3);
  }
  [[nodiscard]] bool finite() const noexcept {
    return std::isfinite(phi1) && std::isfinite(phi2) && std::isfinite(phi3);
  }
  [[nodiscard]] double operator[](std::size_t k) const noexcept {
    return k == 0 ? phi1 : (k == 1 ? phi2 : phi3);
  }

  friend bool operator==(const ArParams&, const ArParams&) = default;
};

inline constexpr double kDefaultZeta = 0.01;
inline constexpr std::size_t kDefaultBurnIn = 50;
inline constexpr int kDefaultMaOrder = 30;

/// Sufficient condition for Phi(z1, z2) to have no zeros on the closed unit
/// bidisc with margin zeta: |phi1| + |phi2| + |phi3| <= 1 - zeta.
[[nodiscard]] inline bool is_feasible(const ArParams& p, double zeta = kDefaultZeta) noexcept {
  return p.finite() && p.l1_norm() <= 1.0 - zeta;
}

inline void require_feasible(const ArParams& p, const char* who, double zeta = kDefaultZeta) {
  if (!is_feasible(p, zeta)) {
    std::ostringstream os;
    os << who << ": infeasible AR parameters (" << p.phi1 << ", " << p.phi2 << ", " << p.phi3
       << "), |phi|_1 must be <= " << 1.0 - zeta;
    throw DomainError(os.str());
  }
}

struct GaussianNoise {
  double mean = 0.0;
  double variance = 1.0;
};

struct StudentTNoise {
  double df = 1.0;
};

using NoiseSpec = std::variant<GaussianNoise, StudentTNoise>;

inline void validate(const NoiseSpec& noise) {
  std::visit(
      [](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          if (!(n.variance > 0.0) || !std::isfinite(n.mean))
            throw DomainError("GaussianNoise: variance must be > 0");
        } else {
          if (!(n.df > 0.0)) throw DomainError("StudentTNoise: df must be > 0");
        }
      },
      noise);
}

/// Draws i.i.d. values of a NoiseSpec from an engine.
class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseSpec& spec) {
    validate(spec);
    std::visit(
        [this](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, GaussianNoise>) {
            dist_ = std::normal_distribution<double>(n.mean, std::sqrt(n.variance));
          } else {
            dist_ = std::student_t_distribution<double>(n.df);
          }
        },
        spec);
  }

  double operator()(Engine& eng) {
    return std::visit([&eng](auto& d) { return d(eng); }, dist_);
  }

 private:
  std::variant<std::normal_distribution<double>, std::student_t_distribution<double>> dist_;
};

struct MaCoefficient {
  int k = 0;
  int l = 0;
  int r = 0;
  double lambda = 0.0;
};

namespace detail {

inline std::vector<double> powers(double base, int n) {
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) out[i] = out[i - 1] * base;
  return out;
}

/// Visits every lambda_{klr} with k + l + r == n, computed as
/// C(n, r) * C(n - r, k) * phi1^k phi2^l phi3^r with running binomials.
template <class Fn>
void for_each_lambda_of_order(int n, const std::vector<double>& p1, const std::vector<double>& p2,
                              const std::vector<double>& p3, Fn&& fn) {
  double c_nr = 1.0;  // C(n, r)
  for (int r = 0; r <= n; ++r) {
    if (r > 0) c_nr = c_nr * static_cast<double>(n - r + 1) / static_cast<double>(r);
    const int m = n - r;
    double c_mk = 1.0;  // C(m, k)
    for (int k = 0; k <= m; ++k) {
      if (k > 0) c_mk = c_mk * static_cast<double>(m - k + 1) / static_cast<double>(k);
      const int l = m - k;
      fn(k, l, r, c_nr * c_mk * p1[k] * p2[l] * p3[r]);
    }
  }
}

}  // namespace detail

/// Multinomial MA(infinity) weights lambda_{klr} for all k + l + r <= max_order,
/// ordered by total order, then r, then k.
[[nodiscard]] inline std::vector<MaCoefficient> ma_coefficients(const ArParams& params, int max_order,
                                                                double zeta = kDefaultZeta) {
  require_feasible(params, "ma_coefficients", zeta);
  if (max_order < 0) throw DomainError("ma_coefficients: max_order must be >= 0");
  const auto p1 = detail::powers(params.phi1, max_order);
  const auto p2 = detail::powers(params.phi2, max_order);
  const auto p3 = detail::powers(params.phi3, max_order);
  std::vector<MaCoefficient> out;
  out.reserve(static_cast<std::size_t>((max_order + 1) * (max_order + 2) * (max_order + 3) / 6));
  for (int n = 0; n <= max_order; ++n) {
    detail::for_each_lambda_of_order(n, p1, p2, p3, [&](int k, int l, int r, double lam) {
      out.push_back({k, l, r, lam});
    });
  }
  return out;
}

/// Sum of lambda_{klr}^2 over 1 <= k + l + r <= max_order (the origin term is
/// excluded). Stops early once a whole order contributes less than 1e-24
/// (every |lambda| of that order is then below 1e-12).
///
/// Uses sum_{k+l+r=n} lambda^2 = sum_r C(n,r)^2 phi3^{2r} S_{n-r} with
/// S_m = sum_{k+l=m} C(m,k)^2 phi1^{2k} phi2^{2l}, O(max_order^2) work.
[[nodiscard]] inline double ma_square_sum(const ArParams& params, int max_order = kDefaultMaOrder,
                                          double zeta = kDefaultZeta) {
  require_feasible(params, "ma_square_sum", zeta);
  if (max_order < 1) return 0.0;
  const std::size_t N = static_cast<std::size_t>(max_order);
  const auto q1 = detail::powers(params.phi1 * params.phi1, max_order);
  const auto q2 = detail::powers(params.phi2 * params.phi2, max_order);
  const auto q3 = detail::powers(params.phi3 * params.phi3, max_order);
  // Squared binomials, row by row.
  std::vector<double> c2((N + 1) * (N + 1), 0.0);
  std::vector<double> row(N + 1, 0.0);
  row[0] = 1.0;
  for (std::size_t n = 0; n <= N; ++n) {
    if (n > 0)
      for (std::size_t k = n; k > 0; --k) row[k] += row[k - 1];
    for (std::size_t k = 0; k <= n; ++k) c2[n * (N + 1) + k] = row[k] * row[k];
  }
  std::vector<double> s(N + 1, 0.0);
  for (std::size_t m = 0; m <= N; ++m)
    for (std::size_t k = 0; k <= m; ++k) s[m] += c2[m * (N + 1) + k] * q1[k] * q2[m - k];
  double total = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    double order = 0.0;
    for (std::size_t r = 0; r <= n; ++r) order += c2[n * (N + 1) + r] * q3[r] * s[n - r];
    total += order;
    if (order < 1e-24) break;
  }
  return total;
}

/// Simulates a rows x cols AR-2D field. The recursion runs on a
/// (rows + burn_in) x (cols + burn_in) lattice with zero values outside it;
/// the bottom-right rows x cols window is returned. Innovations are drawn in
/// raster order from an engine seeded with `seed`.
[[nodiscard]] inline Grid2D simulate_ar2d(const ArParams& params, std::size_t rows, std::size_t cols,
                                          const NoiseSpec& noise, std::size_t burn_in,
                                          std::uint64_t seed) {
  require_feasible(params, "simulate_ar2d");
  if (rows < 2 || cols < 2) throw DomainError("simulate_ar2d: rows and cols must be >= 2");
  NoiseSampler draw(noise);
  Engine eng = make_engine(seed);
  const std::size_t R = rows + burn_in;
  const std::size_t C = cols + burn_in;
  Grid2D full(R, C);
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double up = i > 0 ? full(i - 1, j) : 0.0;
      const double left = j > 0 ? full(i, j - 1) : 0.0;
      const double diag = (i > 0 && j > 0) ? full(i - 1, j - 1) : 0.0;
      full(i, j) = params.phi1 * up + params.phi2 * left + params.phi3 * diag + draw(eng);
    }
  }
  return full.crop(burn_in, burn_in, rows, cols);
}

/// e(i,j) = Y(i,j) - phi1 Y(i-1,j) - phi2 Y(i,j-1) - phi3 Y(i-1,j-1) for
/// i, j >= 2; returned as a (rows-1) x (cols-1) grid.
[[nodiscard]] inline Grid2D ar_residuals(const Grid2D& y, const ArParams& params) {
  if (y.rows() < 2 || y.cols() < 2) throw DomainError("ar_residuals: grid must be at least 2x2");
  Grid2D out(y.rows() - 1, y.cols() - 1);
  for (std::size_t i = 1; i < y.rows(); ++i) {
    for (std::size_t j = 1; j < y.cols(); ++j) {
      out(i - 1, j - 1) = y(i, j) - params.phi1 * y(i - 1, j) - params.phi2 * y(i, j - 1) -
                          params.phi3 * y(i - 1, j - 1);
    }
  }
  return out;
}

// Headered CSV: first line "rows,cols", then one line per row.

inline void write_grid_csv(const Grid2D& g, std::ostream& os) {
  os << g.rows() << ',' << g.cols() << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      if (j) os << ',';
      os << g(i, j);
    }
    os << '\n';
  }
}

inline void write_grid_csv(const Grid2D& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_grid_csv(g, os);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline Grid2D read_grid_csv(std::istream& is, const std::string& origin = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(origin + ": missing 'rows,cols' header");
  std::size_t rows = 0, cols = 0;
  {
    std::istringstream hs(line);
    char comma = 0;
    if (!(hs >> rows >> comma >> cols) || comma != ',' || rows < 1 || cols < 1)
      throw ParseError(origin + ": malformed header '" + line + "'");
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.pop_back();
      std::size_t used = 0;
      try {
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size())
        throw ParseError(origin + ": bad number '" + cell + "' on data row " + std::to_string(row + 1));
      ++n;
    }
    if (n != cols)
      throw ParseError(origin + ": data row " + std::to_string(row + 1) + " has " + std::to_string(n) +
                       " values, expected " + std::to_string(cols));
    ++row;
  }
  if (row != rows)
    throw ParseError(origin + ": expected " + std::to_string(rows) + " data rows, got " +
                     std::to_string(row));
  try {
    return Grid2D(rows, cols, std::move(values));
  } catch (const DomainError& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

inline Grid2D read_grid_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return read_grid_csv(is, path);
}

}  // namespace bmm2d
