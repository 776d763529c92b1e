#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmm2d/config.hpp"
#include "bmm2d/imaging.hpp"
#include "bmm2d/montecarlo.hpp"

namespace bmm2d::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline bool has_extension(const std::string& path, const char* ext) {
  return std::filesystem::path(path).extension() == ext;
}

/// Reads a CSV field or a PGM image, chosen by extension.
inline Grid2D read_field(const std::string& path) {
  if (has_extension(path, ".pgm")) return read_pgm(path);
  return read_grid_csv(path);
}

inline void write_field(const Grid2D& g, const std::string& path) {
  if (has_extension(path, ".pgm")) {
    write_pgm_rescaled(g, path);
  } else {
    write_grid_csv(g, path);
  }
}

inline OptimizerConfig optimizer_for(const std::string& config_path) {
  if (config_path.empty()) return {};
  const auto j = load_json(config_path);
  return optimizer_from_json(j.contains("optimizer") && j.size() == 1 ? j["optimizer"] : j, config_path);
}

inline void print_resolved(std::ostream& err, const std::string& command, const nlohmann::json& j) {
  err << "# " << command << " resolved config: " << j.dump() << '\n';
}

}  // namespace detail

/// simulate config: {"params": [..], "rows": 64, "cols": 64,
///                   "noise": {"kind": "gaussian", "mean": 0, "variance": 1}, "burn_in": 50}
inline nlohmann::json default_simulate_config() {
  return {{"params", {0.15, 0.17, 0.20}},
          {"rows", 64},
          {"cols", 64},
          {"noise", {{"kind", "gaussian"}, {"mean", 0.0}, {"variance", 1.0}}},
          {"burn_in", static_cast<int>(kDefaultBurnIn)}};
}

/// Runs one command line and returns the process exit status. Output goes to
/// `out`, diagnostics and the resolved configuration to `err`.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Robust estimation of AR-2D processes and AR-2D image filtering", "bmm2d"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate an AR-2D field");
  std::string sim_config, sim_out;
  std::vector<double> sim_params;
  std::size_t sim_rows = 0, sim_cols = 0;
  std::uint64_t sim_seed = 0;
  sim->add_option("--config", sim_config, "JSON config")->check(CLI::ExistingFile);
  sim->add_option("--params", sim_params, "phi1 phi2 phi3")->expected(3)->delimiter(',');
  sim->add_option("--rows", sim_rows, "rows");
  sim->add_option("--cols", sim_cols, "cols");
  sim->add_option("--seed", sim_seed, "RNG seed")->required();
  sim->add_option("--out", sim_out, "output .csv or .pgm")->required();

  // contaminate
  auto* con = app.add_subcommand("contaminate", "contaminate a stored field");
  std::string con_in, con_config, con_out, con_mask;
  std::uint64_t con_seed = 0;
  con->add_option("--in", con_in, "input field (.csv or .pgm)")->required()->check(CLI::ExistingFile);
  con->add_option("--config", con_config, "JSON contamination spec")->required()->check(CLI::ExistingFile);
  con->add_option("--seed", con_seed, "RNG seed")->required();
  con->add_option("--out", con_out, "output .csv or .pgm")->required();
  con->add_option("--mask", con_mask, "optional CSV of the replacement mask (1 = replaced)");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate AR-2D parameters of a field");
  std::string est_in, est_method = "bmm", est_config;
  est->add_option("--in", est_in, "input field (.csv or .pgm)")->required()->check(CLI::ExistingFile);
  est->add_option("--method", est_method, "ls | m | gm | bmm");
  est->add_option("--config", est_config, "JSON optimizer config")->check(CLI::ExistingFile);

  // mc
  auto* mc = app.add_subcommand("mc", "run a Monte Carlo experiment");
  std::string mc_config, mc_out, mc_raw;
  std::uint64_t mc_seed = 0;
  int mc_jobs = 1;
  std::optional<int> mc_reps;
  bool mc_time = false;
  mc->add_option("--config", mc_config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  mc->add_option("--seed", mc_seed, "master seed (overrides master_seed)")->required();
  mc->add_option("--jobs", mc_jobs, "worker threads")->check(CLI::PositiveNumber);
  mc->add_option("--replications", mc_reps, "override replications");
  mc->add_option("--out", mc_out, "report CSV (default stdout)");
  mc->add_option("--raw", mc_raw, "per-replication estimates CSV");
  mc->add_flag("--time", mc_time, "print per-method wall time to stderr");

  // filter
  auto* fil = app.add_subcommand("filter", "approximate and segment a PGM image");
  std::string fil_in, fil_out, fil_res, fil_method = "bmm", fil_config;
  std::size_t fil_k = 8;
  fil->add_option("--in", fil_in, "input P5 PGM")->required()->check(CLI::ExistingFile);
  fil->add_option("--k", fil_k, "block side")->check(CLI::Range(4, 1 << 20));
  fil->add_option("--method", fil_method, "ls | m | gm | bmm");
  fil->add_option("--config", fil_config, "JSON optimizer config")->check(CLI::ExistingFile);
  fil->add_option("--out", fil_out, "approximation PGM")->required();
  fil->add_option("--residual", fil_res, "residual PGM (rescaled, with .scale sidecar)");

  // indices
  auto* ind = app.add_subcommand("indices", "similarity indices between two PGM images");
  std::string ind_a, ind_b;
  ind->add_option("--a", ind_a, "first PGM")->required()->check(CLI::ExistingFile);
  ind->add_option("--b", ind_b, "second PGM")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  auto method_or_throw = [](const std::string& s) {
    const auto m = parse_method(s);
    if (!m) throw ConfigError("--method: unknown method '" + s + "' (expected ls, m, gm or bmm)");
    return *m;
  };

  try {
    if (*sim) {
      nlohmann::json j = default_simulate_config();
      if (!sim_config.empty()) {
        const auto file = load_json(sim_config);
        config_detail::reject_unknown(file, {"params", "rows", "cols", "noise", "burn_in"}, sim_config);
        for (auto it = file.begin(); it != file.end(); ++it) j[it.key()] = it.value();
      }
      if (!sim_params.empty()) j["params"] = sim_params;
      if (sim_rows) j["rows"] = sim_rows;
      if (sim_cols) j["cols"] = sim_cols;
      const ArParams p = params_from_json(j["params"], "params");
      const auto rows = config_detail::integer(j, "rows", "simulate");
      const auto cols = config_detail::integer(j, "cols", "simulate");
      const auto burn = config_detail::integer(j, "burn_in", "simulate");
      if (rows < 2 || cols < 2 || burn < 0) throw ConfigError("simulate: rows, cols must be >= 2 and burn_in >= 0");
      const NoiseSpec noise = noise_from_json(j["noise"], "noise");
      validate(noise);
      j["seed"] = sim_seed;
      detail::print_resolved(err, "simulate", j);
      const Grid2D y = simulate_ar2d(p, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), noise,
                                     static_cast<std::size_t>(burn), sim_seed);
      detail::write_field(y, sim_out);
      return kExitOk;
    }

    if (*con) {
      const ContaminationSpec spec = contamination_from_json(load_json(con_config));
      validate(spec);
      nlohmann::json j = to_json(spec);
      j["seed"] = con_seed;
      j["mask_seed"] = derive_seed(con_seed, 0);
      j["draw_seed"] = derive_seed(con_seed, 1);
      j["field_seed"] = derive_seed(con_seed, 2);
      detail::print_resolved(err, "contaminate", j);
      const Grid2D y = detail::read_field(con_in);
      const ContaminatedField c = contaminate(y, spec, con_seed);
      detail::write_field(c.z, con_out);
      if (!con_mask.empty()) {
        Grid2D m(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i)
          for (std::size_t jj = 0; jj < y.cols(); ++jj) m(i, jj) = c.replaced(i, jj) ? 1.0 : 0.0;
        write_grid_csv(m, con_mask);
      }
      err << "# replaced " << c.replaced_count() << " of " << y.size() << " sites\n";
      return kExitOk;
    }

    if (*est) {
      const Method m = method_or_throw(est_method);
      const OptimizerConfig oc = detail::optimizer_for(est_config);
      validate(oc);
      detail::print_resolved(err, "estimate", {{"in", est_in}, {"method", to_string(m)}, {"optimizer", to_json(oc)}});
      const Grid2D y = detail::read_field(est_in);
      const EstimateResult r = estimate(m, y, oc);
      out << "method,phi1,phi2,phi3,scale,objective,branch,feasible,converged,warning\n"
          << std::setprecision(12) << to_string(r.method) << ',' << r.params.phi1 << ',' << r.params.phi2 << ','
          << r.params.phi3 << ',' << r.scale << ',' << r.objective << ',' << to_string(r.branch) << ','
          << r.feasible << ',' << r.converged << ',' << r.warning << '\n';
      return kExitOk;
    }

    if (*mc) {
      ExperimentConfig c = experiment_from_json(load_json(mc_config));
      c.master_seed = mc_seed;
      if (mc_reps) c.replications = *mc_reps;
      validate(c);
      nlohmann::json j = to_json(c);
      j["jobs"] = mc_jobs;
      j["replication_1_seeds"] = {replication_seeds(c.master_seed, 0).field,
                                  replication_seeds(c.master_seed, 0).contamination};
      detail::print_resolved(err, "mc", j);
      const McReport report = run_experiment(c, mc_jobs);
      if (mc_out.empty()) {
        emit_report(report, out);
      } else {
        emit_report(report, mc_out);
      }
      if (!mc_raw.empty()) {
        std::ofstream os(mc_raw);
        if (!os) throw std::runtime_error("cannot open '" + mc_raw + "' for writing");
        emit_raw(report, os);
      }
      for (const auto& m : report.methods) {
        if (m.excluded) err << "# " << to_string(m.method) << ": excluded " << m.excluded << " degenerate replications\n";
        if (mc_time) err << "# " << to_string(m.method) << ": " << m.wall_seconds << " s\n";
      }
      return kExitOk;
    }

    if (*fil) {
      const Method m = method_or_throw(fil_method);
      const OptimizerConfig oc = detail::optimizer_for(fil_config);
      validate(oc);
      detail::print_resolved(err, "filter",
                             {{"in", fil_in}, {"k", fil_k}, {"method", to_string(m)}, {"optimizer", to_json(oc)}});
      const ImageGray z = read_pgm(fil_in);
      const ImageGray zhat = approximate_image(z, fil_k, m, oc);
      write_pgm(zhat, fil_out);
      if (!fil_res.empty()) write_pgm_rescaled(residual_image(z, zhat), fil_res);
      return kExitOk;
    }

    if (*ind) {
      const ImageGray a = read_pgm(ind_a);
      const ImageGray b = read_pgm(ind_b);
      out << "index,value\n" << std::setprecision(12);
      out << "ssim," << ssim(a, b) << '\n';
      out << "cq_1_1," << cq_index(a, b, {1, 1}) << '\n';
      out << "cq_max," << cq_max(a, b) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

inline int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace bmm2d::cli
