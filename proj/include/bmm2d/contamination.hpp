#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "bmm2d/grid.hpp"

namespace bmm2d {

/// W = Y + nu, nu ~ N(0, variance). The additive-outlier special case.
struct AdditiveGaussian {
  double variance = 50.0;
};

/// W ~ t(df), not rescaled.
struct ReplaceStudentT {
  double df = 2.3;
};

/// W is an independent AR-2D field.
struct ReplaceAr {
  ArParams params{0.1, 0.2, 0.3};
  NoiseSpec noise = GaussianNoise{0.0, 1.0};
};

/// W ~ N(0, variance) i.i.d.
struct ReplaceWhiteNoise {
  double variance = 50.0;
};

using ContaminationKind = std::variant<AdditiveGaussian, ReplaceStudentT, ReplaceAr, ReplaceWhiteNoise>;

struct ContaminationSpec {
  double alpha = 0.0;
  ContaminationKind kind = AdditiveGaussian{};
};

[[nodiscard]] inline std::string kind_name(const ContaminationKind& kind) {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, AdditiveGaussian>) return "additive_gaussian";
        else if constexpr (std::is_same_v<T, ReplaceStudentT>) return "replace_student_t";
        else if constexpr (std::is_same_v<T, ReplaceAr>) return "replace_ar";
        else return "replace_white_noise";
      },
      kind);
}

inline void validate(const ContaminationSpec& spec) {
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0))
    throw DomainError("contamination: alpha must lie in [0, 1]");
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, AdditiveGaussian> || std::is_same_v<T, ReplaceWhiteNoise>) {
          if (!(k.variance > 0.0)) throw DomainError("contamination: variance must be > 0");
        } else if constexpr (std::is_same_v<T, ReplaceStudentT>) {
          if (!(k.df > 0.0)) throw DomainError("contamination: df must be > 0");
        } else {
          require_feasible(k.params, "contamination (replace_ar)");
          validate(k.noise);
        }
      },
      spec.kind);
}

/// Observed field plus the outlier indicator (true where the value was replaced).
struct ContaminatedField {
  Grid2D z;
  std::vector<bool> mask;  // row-major, same shape as z

  [[nodiscard]] bool replaced(std::size_t i, std::size_t j) const { return mask[i * z.cols() + j]; }
  [[nodiscard]] std::size_t replaced_count() const {
    std::size_t n = 0;
    for (bool b : mask) n += b;
    return n;
  }
};

namespace contamination_stream {
inline constexpr std::uint64_t kMask = 0;
inline constexpr std::uint64_t kReplacement = 1;
inline constexpr std::uint64_t kReplacementAr = 2;
}  // namespace contamination_stream

/// Z = (1 - xi) Y + xi W with xi i.i.d. Bernoulli(alpha).
///
/// The mask, the replacement draws and the replacement-AR innovations come
/// from three substreams of `seed`. Replacement values are drawn for every
/// cell so that the mask and W streams stay aligned across alpha values.
[[nodiscard]] inline ContaminatedField contaminate(const Grid2D& y, const ContaminationSpec& spec,
                                                   std::uint64_t seed) {
  validate(spec);
  const std::size_t n = y.size();
  ContaminatedField out{y, std::vector<bool>(n, false)};

  Engine mask_eng = make_engine(derive_seed(seed, contamination_stream::kMask));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t c = 0; c < n; ++c) out.mask[c] = unif(mask_eng) < spec.alpha;
  if (spec.alpha == 0.0) return out;

  std::vector<double> w(n);
  Engine w_eng = make_engine(derive_seed(seed, contamination_stream::kReplacement));
  const auto src = y.values();
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, AdditiveGaussian>) {
          std::normal_distribution<double> nu(0.0, std::sqrt(k.variance));
          for (std::size_t c = 0; c < n; ++c) w[c] = src[c] + nu(w_eng);
        } else if constexpr (std::is_same_v<T, ReplaceStudentT>) {
          std::student_t_distribution<double> t(k.df);
          for (std::size_t c = 0; c < n; ++c) w[c] = t(w_eng);
        } else if constexpr (std::is_same_v<T, ReplaceAr>) {
          const Grid2D field =
              simulate_ar2d(k.params, y.rows(), y.cols(), k.noise, kDefaultBurnIn,
                            derive_seed(seed, contamination_stream::kReplacementAr));
          const auto f = field.values();
          std::copy(f.begin(), f.end(), w.begin());
        } else {
          std::normal_distribution<double> nu(0.0, std::sqrt(k.variance));
          for (std::size_t c = 0; c < n; ++c) w[c] = nu(w_eng);
        }
      },
      spec.kind);

  auto dst = out.z.values();
  for (std::size_t c = 0; c < n; ++c)
    if (out.mask[c]) dst[c] = w[c];
  return out;
}

}  // namespace bmm2d
