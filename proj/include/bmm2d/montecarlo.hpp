#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bmm2d/contamination.hpp"
#include "bmm2d/estimators.hpp"

namespace bmm2d {

struct ExperimentConfig {
  ArParams true_params{0.15, 0.17, 0.20};
  int window = 32;
  int replications = 200;
  std::optional<ContaminationSpec> contamination;
  std::vector<Method> methods{Method::LS, Method::M, Method::GM, Method::BMM};
  std::uint64_t master_seed = 1;
  OptimizerConfig optimizer;
  std::size_t burn_in = kDefaultBurnIn;
};

inline void validate(const ExperimentConfig& c) {
  require_feasible(c.true_params, "experiment true_params");
  if (c.window < 4) throw DomainError("experiment: window must be >= 4");
  if (c.replications < 1) throw DomainError("experiment: replications must be >= 1");
  if (c.methods.empty()) throw DomainError("experiment: methods must be non-empty");
  if (c.contamination) validate(*c.contamination);
  validate(c.optimizer);
}

/// Seeds of replication r. The field and contamination streams do not depend
/// on the method list.
struct ReplicationSeeds {
  std::uint64_t field;
  std::uint64_t contamination;
};

[[nodiscard]] inline ReplicationSeeds replication_seeds(std::uint64_t master, int replication) {
  const std::uint64_t base = derive_seed(master, static_cast<std::uint64_t>(replication));
  return {derive_seed(base, 0), derive_seed(base, 1)};
}

struct McCell {
  double mean = 0.0;
  double variance = 0.0;  // n - 1 divisor
  double mse = 0.0;       // n divisor, against the true value
};

struct McMethodReport {
  Method method = Method::LS;
  std::array<McCell, 3> cells{};
  int n = 0;         // replications that produced an estimate
  int excluded = 0;  // replications rejected as degenerate
  double wall_seconds = 0.0;
  std::vector<std::optional<ArParams>> estimates;  // indexed by replication
};

struct McReport {
  ArParams true_params;
  int replications = 0;
  std::vector<McMethodReport> methods;  // canonical order LS, M, GM, BMM

  [[nodiscard]] const McMethodReport* find(Method m) const {
    for (const auto& r : methods)
      if (r.method == m) return &r;
    return nullptr;
  }
};

/// Mean, n-1 sample variance and MSE about `truth`.
[[nodiscard]] inline McCell aggregate(std::span<const double> xs, double truth) {
  McCell c;
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return c;
  for (double x : xs) c.mean += x;
  c.mean /= n;
  double ss = 0.0, se = 0.0;
  for (double x : xs) {
    ss += (x - c.mean) * (x - c.mean);
    se += (x - truth) * (x - truth);
  }
  c.variance = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
  c.mse = se / n;
  return c;
}

inline constexpr double kMaxExcludedFraction = 0.05;

/// Runs every replication (optionally on `jobs` threads), then folds the
/// results in replication order.
[[nodiscard]] inline McReport run_experiment(const ExperimentConfig& config, int jobs = 1) {
  validate(config);
  std::vector<Method> methods;
  for (Method m : {Method::LS, Method::M, Method::GM, Method::BMM})
    if (std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end())
      methods.push_back(m);

  const int n_rep = config.replications;
  const std::size_t n_meth = methods.size();
  std::vector<std::optional<ArParams>> est(n_meth * n_rep);
  std::vector<double> seconds(n_meth * n_rep, 0.0);

  auto run_one = [&](int r) {
    const auto seeds = replication_seeds(config.master_seed, r);
    const std::size_t w = static_cast<std::size_t>(config.window);
    Grid2D z = simulate_ar2d(config.true_params, w, w, GaussianNoise{0.0, 1.0}, config.burn_in, seeds.field);
    if (config.contamination) z = contaminate(z, *config.contamination, seeds.contamination).z;
    for (std::size_t m = 0; m < n_meth; ++m) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        est[m * n_rep + r] = estimate(methods[m], z, config.optimizer).params;
      } catch (const DegenerateInputError&) {
        est[m * n_rep + r] = std::nullopt;
      }
      seconds[m * n_rep + r] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };

  jobs = std::clamp(jobs, 1, n_rep);
  if (jobs == 1) {
    for (int r = 0; r < n_rep; ++r) run_one(r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (int t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int r = t; r < n_rep; r += jobs) run_one(r);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  McReport report;
  report.true_params = config.true_params;
  report.replications = n_rep;
  for (std::size_t m = 0; m < n_meth; ++m) {
    McMethodReport mr;
    mr.method = methods[m];
    mr.estimates.assign(est.begin() + m * n_rep, est.begin() + (m + 1) * n_rep);
    std::array<std::vector<double>, 3> xs;
    for (int r = 0; r < n_rep; ++r) {
      mr.wall_seconds += seconds[m * n_rep + r];
      if (!mr.estimates[r]) {
        ++mr.excluded;
        continue;
      }
      for (std::size_t k = 0; k < 3; ++k) xs[k].push_back((*mr.estimates[r])[k]);
    }
    mr.n = n_rep - mr.excluded;
    if (mr.excluded > kMaxExcludedFraction * n_rep)
      throw DegenerateInputError("run_experiment: " + std::string(to_string(mr.method)) + " excluded " +
                                 std::to_string(mr.excluded) + " of " + std::to_string(n_rep) +
                                 " replications");
    for (std::size_t k = 0; k < 3; ++k) mr.cells[k] = aggregate(xs[k], config.true_params[k]);
    report.methods.push_back(std::move(mr));
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline constexpr const char* kReportHeader = "method,param,true,mean,variance,mse,n";

inline void emit_report(const McReport& report, std::ostream& os) {
  using detail::shortest;
  os << kReportHeader << '\n';
  for (const auto& m : report.methods) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& c = m.cells[k];
      os << to_string(m.method) << ",phi" << k + 1 << ',' << shortest(report.true_params[k]) << ','
         << shortest(c.mean) << ',' << shortest(c.variance) << ',' << shortest(c.mse) << ',' << m.n << '\n';
    }
  }
}

inline void emit_report(const McReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  emit_report(report, os);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

/// Per-replication estimates: method,param,replication,estimate (1-based replication).
inline void emit_raw(const McReport& report, std::ostream& os) {
  os << "method,param,replication,estimate\n";
  for (const auto& m : report.methods)
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t r = 0; r < m.estimates.size(); ++r)
        if (m.estimates[r])
          os << to_string(m.method) << ",phi" << k + 1 << ',' << r + 1 << ','
             << detail::shortest((*m.estimates[r])[k]) << '\n';
}

struct ReportRow {
  Method method = Method::LS;
  int param = 1;
  double truth = 0.0;
  McCell cell;
  int n = 0;
};

[[nodiscard]] inline std::vector<ReportRow> parse_report(std::istream& is, const std::string& origin = "<stream>") {
  std::string line;
  if (!std::getline(is, line) || line != kReportHeader)
    throw ParseError(origin + ": missing report header");
  std::vector<ReportRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    const auto where = origin + ":" + std::to_string(lineno);
    if (f.size() != 7) throw ParseError(where + ": expected 7 fields");
    const auto m = parse_method(f[0]);
    if (!m || f[1].size() != 4 || f[1].rfind("phi", 0) != 0) throw ParseError(where + ": bad method/param");
    try {
      ReportRow r;
      r.method = *m;
      r.param = std::stoi(f[1].substr(3));
      r.truth = std::stod(f[2]);
      r.cell = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
      r.n = std::stoi(f[6]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw ParseError(where + ": bad number");
    }
  }
  return rows;
}

}  // namespace bmm2d
