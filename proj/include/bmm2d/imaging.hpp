#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "bmm2d/estimators.hpp"
#include "bmm2d/grid.hpp"

namespace bmm2d {

/// Gray-level image: a Grid2D whose values are intensities on the 8-bit
/// [0, 255] scale. Values may leave that range in intermediate results and are
/// clamped only when written.
using ImageGray = Grid2D;

// ---------------------------------------------------------------------------
// PGM (P5) I/O

class PgmError : public ParseError {
 public:
  enum class Kind { BadMagic, UnsupportedFormat, MalformedHeader, MaxvalTooLarge, TruncatedPayload };

  PgmError(Kind kind, const std::string& what) : ParseError(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline void skip_pgm_space(std::istream& is) {
  for (;;) {
    const int c = is.peek();
    if (c == '#') {
      std::string comment;
      std::getline(is, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      is.get();
    } else {
      return;
    }
  }
}

inline long read_pgm_int(std::istream& is, const std::string& origin, const char* field) {
  skip_pgm_space(is);
  long v = -1;
  if (!(is >> v) || v < 0)
    throw PgmError(PgmError::Kind::MalformedHeader, origin + ": malformed PGM header (" + field + ")");
  return v;
}

}  // namespace detail

[[nodiscard]] inline ImageGray read_pgm(std::istream& is, const std::string& origin = "<stream>") {
  char magic[2] = {0, 0};
  if (!is.read(magic, 2) || magic[0] != 'P')
    throw PgmError(PgmError::Kind::BadMagic, origin + ": not a PGM/PNM file");
  if (magic[1] != '5')
    throw PgmError(PgmError::Kind::UnsupportedFormat,
                   origin + ": unsupported PNM format P" + std::string(1, magic[1]) + " (only binary P5)");
  const long width = detail::read_pgm_int(is, origin, "width");
  const long height = detail::read_pgm_int(is, origin, "height");
  const long maxval = detail::read_pgm_int(is, origin, "maxval");
  if (width < 1 || height < 1)
    throw PgmError(PgmError::Kind::MalformedHeader, origin + ": zero image dimension");
  if (maxval < 1 || maxval > 255)
    throw PgmError(PgmError::Kind::MaxvalTooLarge,
                   origin + ": maxval " + std::to_string(maxval) + " not in [1, 255]");
  const int sep = is.get();
  if (sep != ' ' && sep != '\n' && sep != '\r' && sep != '\t')
    throw PgmError(PgmError::Kind::MalformedHeader, origin + ": missing whitespace after maxval");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> bytes(n);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw PgmError(PgmError::Kind::TruncatedPayload,
                   origin + ": truncated payload, expected " + std::to_string(n) + " bytes, got " +
                       std::to_string(is.gcount()));
  std::vector<double> values(bytes.begin(), bytes.end());
  return ImageGray(static_cast<std::size_t>(height), static_cast<std::size_t>(width), std::move(values));
}

[[nodiscard]] inline ImageGray read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return read_pgm(is, path);
}

/// Writes values rounded and clamped to [0, 255].
inline void write_pgm(const ImageGray& img, std::ostream& os) {
  os << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  const auto v = img.values();
  for (std::size_t k = 0; k < v.size(); ++k)
    bytes[k] = static_cast<unsigned char>(std::clamp(std::lround(v[k]), 0L, 255L));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_pgm(const ImageGray& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_pgm(img, os);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

/// Affine map [min, max] -> [0, 255] applied by write_pgm_rescaled.
/// Pixel p decodes as min + p * (max - min) / 255.
struct PgmScale {
  double min = 0.0;
  double max = 0.0;
};

[[nodiscard]] inline PgmScale rescale_for_pgm(const Grid2D& g) {
  const auto v = g.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

/// Writes an arbitrary real grid as PGM after the affine map to [0, 255];
/// the map is recorded in the sidecar `path + ".scale"`.
inline PgmScale write_pgm_rescaled(const Grid2D& g, const std::string& path) {
  const PgmScale sc = rescale_for_pgm(g);
  Grid2D mapped(g.rows(), g.cols());
  const double span = sc.max - sc.min;
  const auto src = g.values();
  auto dst = mapped.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = span > 0.0 ? (src[k] - sc.min) * 255.0 / span : 0.0;
  write_pgm(mapped, path);
  std::ofstream side(path + ".scale");
  if (!side) throw std::runtime_error("cannot open '" + path + ".scale' for writing");
  side << std::setprecision(17) << "min " << sc.min << "\nmax " << sc.max << '\n';
  return sc;
}

[[nodiscard]] inline PgmScale read_pgm_scale(const std::string& sidecar_path) {
  std::ifstream is(sidecar_path);
  PgmScale sc;
  std::string a, b;
  if (!(is >> a >> sc.min >> b >> sc.max) || a != "min" || b != "max")
    throw ParseError(sidecar_path + ": malformed scale sidecar");
  return sc;
}

// ---------------------------------------------------------------------------
// Block layout

/// One tile of the layout. Rows/cols [r_lo, r_hi] x [c_lo, c_hi] (inclusive,
/// 0-based) are predicted; the estimation window runs from (wr_lo, wc_lo) to
/// (r_hi, c_hi). For full tiles the window is the tile extended by one row
/// above and one column to the left (k x k). Trailing tiles are shrunk to fit
/// the image and their window is shifted back to keep k rows/cols.
struct Block {
  std::size_t ib = 0, jb = 0;  // 1-based tile indices
  std::size_t r_lo = 0, r_hi = 0, c_lo = 0, c_hi = 0;
  std::size_t wr_lo = 0, wc_lo = 0;
};

struct BlockLayout {
  std::size_t k = 0;
  std::size_t stride = 0;
  std::vector<Block> blocks;
};

[[nodiscard]] inline BlockLayout block_layout(std::size_t rows, std::size_t cols, std::size_t k) {
  if (k < 4) throw DomainError("block_layout: block side k must be >= 4");
  if (rows < k || cols < k) throw DomainError("block_layout: image smaller than one k x k block");
  BlockLayout layout{k, k - 1, {}};
  const std::size_t s = k - 1;
  auto ranges = [s, k](std::size_t n) {
    std::vector<std::array<std::size_t, 3>> out;  // lo, hi, window lo
    for (std::size_t b = 1; (b - 1) * s + 1 <= n - 1; ++b) {
      const std::size_t lo = (b - 1) * s + 1;
      const std::size_t hi = std::min(b * s, n - 1);
      const std::size_t wlo = hi + 1 >= k ? std::min(lo - 1, hi + 1 - k) : 0;
      out.push_back({lo, hi, wlo});
    }
    return out;
  };
  const auto rr = ranges(rows);
  const auto cc = ranges(cols);
  for (std::size_t a = 0; a < rr.size(); ++a)
    for (std::size_t b = 0; b < cc.size(); ++b)
      layout.blocks.push_back({a + 1, b + 1, rr[a][0], rr[a][1], cc[b][0], cc[b][1], rr[a][2], cc[b][2]});
  return layout;
}

// ---------------------------------------------------------------------------
// Local approximation and segmentation

namespace detail {

/// Snaps to multiples of 2^-32 so that (z - zhat) + zhat == z holds exactly
/// for 8-bit-range z.
inline double snap(double v) { return std::ldexp(std::nearbyint(std::ldexp(v, 32)), -32); }

inline bool is_constant(const Grid2D& g) {
  const auto v = g.values();
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

}  // namespace detail

/// Fits an AR-2D model per block to the centred image and predicts each
/// pixel from its three causal neighbours. Row 0 and column 0 are copied.
/// Blocks whose fit is degenerate (e.g. constant) copy the image.
[[nodiscard]] inline ImageGray approximate_image(const ImageGray& z, std::size_t k, Method method,
                                                 const OptimizerConfig& config) {
  const BlockLayout layout = block_layout(z.rows(), z.cols(), k);
  const double mean = z.mean();
  Grid2D x(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) x(i, j) = z(i, j) - mean;

  Grid2D xhat = x;
  for (const Block& b : layout.blocks) {
    const Grid2D window = x.crop(b.wr_lo, b.wc_lo, b.r_hi - b.wr_lo + 1, b.c_hi - b.wc_lo + 1);
    if (detail::is_constant(window)) continue;
    ArParams phi;
    try {
      phi = estimate(method, window, config).params;
    } catch (const DegenerateInputError&) {
      continue;
    } catch (const DomainError& e) {
      throw DomainError("block (" + std::to_string(b.ib) + ", " + std::to_string(b.jb) + "): " + e.what());
    }
    for (std::size_t r = b.r_lo; r <= b.r_hi; ++r)
      for (std::size_t s = b.c_lo; s <= b.c_hi; ++s)
        xhat(r, s) = phi.phi1 * x(r - 1, s) + phi.phi2 * x(r, s - 1) + phi.phi3 * x(r - 1, s - 1);
  }

  ImageGray zhat(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j)
      zhat(i, j) = (i == 0 || j == 0) ? z(i, j) : detail::snap(xhat(i, j) + mean);
  return zhat;
}

/// W = Z - Zhat from a precomputed approximation.
[[nodiscard]] inline Grid2D residual_image(const ImageGray& z, const ImageGray& zhat) {
  if (z.rows() != zhat.rows() || z.cols() != zhat.cols())
    throw DomainError("residual_image: shape mismatch");
  Grid2D w(z.rows(), z.cols());
  const auto a = z.values(), b = zhat.values();
  auto out = w.values();
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return w;
}

[[nodiscard]] inline Grid2D segment_image(const ImageGray& z, std::size_t k, Method method,
                                          const OptimizerConfig& config) {
  return residual_image(z, approximate_image(z, k, method, config));
}

// ---------------------------------------------------------------------------
// Similarity indices

inline constexpr double kSsimC1 = (0.01 * 255.0) * (0.01 * 255.0);
inline constexpr double kSsimC2 = (0.03 * 255.0) * (0.03 * 255.0);

namespace detail {

inline void require_same_shape(const Grid2D& x, const Grid2D& y, const char* who) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw DomainError(std::string(who) + ": images differ in shape (" + std::to_string(x.rows()) + "x" +
                      std::to_string(x.cols()) + " vs " + std::to_string(y.rows()) + "x" +
                      std::to_string(y.cols()) + ")");
}

/// 'valid' separable filtering with a normalized 1-D kernel.
inline Grid2D filter_valid(const Grid2D& g, const std::vector<double>& w) {
  const std::size_t n = w.size();
  Grid2D tmp(g.rows(), g.cols() - n + 1);
  for (std::size_t i = 0; i < tmp.rows(); ++i)
    for (std::size_t j = 0; j < tmp.cols(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += w[t] * g(i, j + t);
      tmp(i, j) = s;
    }
  Grid2D out(g.rows() - n + 1, tmp.cols());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += w[t] * tmp(i + t, j);
      out(i, j) = s;
    }
  return out;
}

inline std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> w(size);
  double total = 0.0;
  for (int t = 0; t < size; ++t) {
    const double d = t - (size - 1) / 2.0;
    w[t] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[t];
  }
  for (double& v : w) v /= total;
  return w;
}

inline Grid2D product(const Grid2D& a, const Grid2D& b) {
  Grid2D out(a.rows(), a.cols());
  const auto x = a.values(), y = b.values();
  auto o = out.values();
  for (std::size_t k = 0; k < x.size(); ++k) o[k] = x[k] * y[k];
  return out;
}

}  // namespace detail

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, L = 255, over the 'valid' region.
[[nodiscard]] inline double ssim(const ImageGray& x, const ImageGray& y) {
  detail::require_same_shape(x, y, "ssim");
  if (x.rows() < 11 || x.cols() < 11) throw DomainError("ssim: images must be at least 11x11");
  const auto w = detail::gaussian_kernel(11, 1.5);
  const Grid2D mx = detail::filter_valid(x, w);
  const Grid2D my = detail::filter_valid(y, w);
  const Grid2D sxx = detail::filter_valid(detail::product(x, x), w);
  const Grid2D syy = detail::filter_valid(detail::product(y, y), w);
  const Grid2D sxy = detail::filter_valid(detail::product(x, y), w);
  double total = 0.0;
  for (std::size_t k = 0; k < mx.size(); ++k) {
    const double ux = mx.values()[k], uy = my.values()[k];
    const double vx = sxx.values()[k] - ux * ux;
    const double vy = syy.values()[k] - uy * uy;
    const double cxy = sxy.values()[k] - ux * uy;
    total += ((2.0 * ux * uy + kSsimC1) * (2.0 * cxy + kSsimC2)) /
             ((ux * ux + uy * uy + kSsimC1) * (vx + vy + kSsimC2));
  }
  return total / static_cast<double>(mx.size());
}

/// Lattice lag (rows, cols) used by the codispersion coefficient.
struct Lag {
  int dr = 1;
  int dc = 1;
  friend bool operator==(const Lag&, const Lag&) = default;
};

inline constexpr std::array<Lag, 4> kCodispersionLags{Lag{0, 1}, Lag{1, 0}, Lag{1, 1}, Lag{1, -1}};

/// sum dx dy / sqrt(sum dx^2 sum dy^2) with d the increment along h.
[[nodiscard]] inline double codispersion(const ImageGray& x, const ImageGray& y, Lag h) {
  detail::require_same_shape(x, y, "codispersion");
  if (std::find(kCodispersionLags.begin(), kCodispersionLags.end(), h) == kCodispersionLags.end())
    throw DomainError("codispersion: lag must be one of (0,1), (1,0), (1,1), (1,-1)");
  const std::size_t R = x.rows(), C = x.cols();
  const std::size_t c_lo = h.dc < 0 ? 1 : 0;
  const std::size_t c_hi = h.dc > 0 ? C - 1 : C;  // exclusive
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i + h.dr < R; ++i)
    for (std::size_t j = c_lo; j < c_hi; ++j) {
      const std::size_t i2 = i + h.dr;
      const std::size_t j2 = static_cast<std::size_t>(static_cast<long>(j) + h.dc);
      const double dx = x(i2, j2) - x(i, j);
      const double dy = y(i2, j2) - y(i, j);
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw DomainError("codispersion: undefined index (an image is constant along lag (" +
                      std::to_string(h.dr) + "," + std::to_string(h.dc) + "))");
  return sxy / std::sqrt(sxx * syy);
}

/// (2 mx my + C1) / (mx^2 + my^2 + C1) times the codispersion at h.
[[nodiscard]] inline double cq_index(const ImageGray& x, const ImageGray& y, Lag h) {
  const double mx = x.mean(), my = y.mean();
  const double lum = (2.0 * mx * my + kSsimC1) / (mx * mx + my * my + kSsimC1);
  return lum * codispersion(x, y, h);
}

/// cq_index at the lag with the largest |codispersion|; lags along which an
/// image is constant are skipped.
[[nodiscard]] inline double cq_max(const ImageGray& x, const ImageGray& y) {
  double best = 0.0;
  bool found = false;
  Lag arg{};
  for (Lag h : kCodispersionLags) {
    double c = 0.0;
    try {
      c = codispersion(x, y, h);
    } catch (const DomainError&) {
      continue;
    }
    if (!found || std::abs(c) > std::abs(best)) {
      best = c;
      arg = h;
      found = true;
    }
  }
  if (!found) throw DomainError("cq_max: codispersion undefined along every lag");
  return cq_index(x, y, arg);
}

}  // namespace bmm2d
