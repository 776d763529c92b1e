#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "bmm2d/cli.hpp"
#include "oracles.hpp"

using namespace bmm2d;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = cli::dispatch(args, out, err);
  return {status, out.str(), err.str()};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ContaminationKinds) {
  using nlohmann::json;
  const auto a = contamination_from_json(json::parse(R"({"alpha":0.1,"kind":"additive_gaussian","variance":50})"));
  EXPECT_EQ(a.alpha, 0.1);
  EXPECT_EQ(std::get<AdditiveGaussian>(a.kind).variance, 50.0);
  const auto t = contamination_from_json(json::parse(R"({"alpha":0.1,"kind":"replace_student_t","df":2.3})"));
  EXPECT_EQ(std::get<ReplaceStudentT>(t.kind).df, 2.3);
  const auto r = contamination_from_json(json::parse(
      R"({"alpha":0.2,"kind":"replace_ar","params":[0.1,0.2,0.3],"noise":{"kind":"student_t","df":4}})"));
  EXPECT_EQ(std::get<ReplaceAr>(r.kind).params.phi3, 0.3);
  EXPECT_EQ(std::get<StudentTNoise>(std::get<ReplaceAr>(r.kind).noise).df, 4.0);
  const auto w = contamination_from_json(json::parse(R"({"alpha":0.1,"kind":"replace_white_noise","variance":5})"));
  EXPECT_EQ(std::get<ReplaceWhiteNoise>(w.kind).variance, 5.0);
  // to_json round trip
  for (const auto& s : {a, t, r, w}) EXPECT_EQ(to_json(contamination_from_json(to_json(s))), to_json(s));
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  using nlohmann::json;
  EXPECT_THROW((void)contamination_from_json(json::parse(R"({"alpha":0.1,"kind":"additive_gaussian","variance":50,"x":1})")),
               ConfigError);
  EXPECT_THROW((void)contamination_from_json(json::parse(R"({"alpha":"0.1","kind":"additive_gaussian","variance":50})")),
               ConfigError);
  EXPECT_THROW((void)contamination_from_json(json::parse(R"({"alpha":0.1,"kind":"innovation"})")), ConfigError);
  EXPECT_THROW((void)experiment_from_json(json::parse(R"({"windw":32})")), ConfigError);
  EXPECT_THROW((void)experiment_from_json(json::parse(R"({"methods":["LS","RA"]})")), ConfigError);
  EXPECT_THROW((void)experiment_from_json(json::parse(R"({"true_params":[0.1,0.2]})")), ConfigError);
  EXPECT_THROW((void)optimizer_from_json(json::parse(R"({"restarts":2.5})")), ConfigError);
}

TEST(Config, ExperimentRoundTrip) {
  const auto j = nlohmann::json::parse(R"({
    "true_params": [0.15, 0.17, 0.2], "window": 32, "replications": 200,
    "contamination": {"alpha": 0.1, "kind": "additive_gaussian", "variance": 50},
    "methods": ["ls", "bmm"], "master_seed": 7,
    "optimizer": {"restarts": 3, "max_evals": 300, "tolerance": 1e-6, "zeta": 0.01, "seed": 4},
    "burn_in": 40})");
  const ExperimentConfig c = experiment_from_json(j);
  EXPECT_EQ(c.window, 32);
  EXPECT_EQ(c.methods.size(), 2u);
  EXPECT_EQ(c.optimizer.restarts, 3);
  EXPECT_EQ(c.burn_in, 40u);
  ASSERT_TRUE(c.contamination.has_value());
  EXPECT_EQ(to_json(experiment_from_json(to_json(c))), to_json(c));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).status, 1);
  EXPECT_EQ(run({"frobnicate"}).status, 1);
  oracle::TempDir dir("cli");
  // --seed is mandatory for simulate / contaminate / mc
  EXPECT_EQ(run({"simulate", "--out", dir.file("a.csv")}).status, 1);
  EXPECT_EQ(run({"estimate", "--in", dir.file("missing.csv")}).status, 1);
  EXPECT_EQ(run({"--help"}).status, 0);
}

TEST(Cli, SimulateEstimatePipeline) {
  oracle::TempDir dir("cli");
  const std::string field = dir.file("field.csv");
  auto r = run({"simulate", "--seed", "7", "--rows", "40", "--cols", "40", "--out", field});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.err.find("\"seed\":7"), std::string::npos);
  const Grid2D y = read_grid_csv(field);
  EXPECT_EQ(y, simulate_ar2d({0.15, 0.17, 0.20}, 40, 40, GaussianNoise{0, 1}, 50, 7));

  r = run({"estimate", "--in", field, "--method", "ls"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream lines(r.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header, "method,phi1,phi2,phi3,scale,objective,branch,feasible,converged,warning");
  EXPECT_EQ(row.rfind("LS,", 0), 0u);
  const double phi1 = std::stod(row.substr(3));
  EXPECT_NEAR(phi1, estimate_ls(y).params.phi1, 1e-10);
}

TEST(Cli, SimulateConfigFileAndOverrides) {
  oracle::TempDir dir("cli");
  write_text(dir.file("sim.json"),
             R"({"params":[0.1,0.1,0.1],"rows":10,"cols":12,"noise":{"kind":"student_t","df":3},"burn_in":20})");
  auto r = run({"simulate", "--config", dir.file("sim.json"), "--rows", "8", "--seed", "3", "--out", dir.file("f.csv")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(read_grid_csv(dir.file("f.csv")),
            simulate_ar2d({0.1, 0.1, 0.1}, 8, 12, StudentTNoise{3}, 20, 3));
  write_text(dir.file("bad.json"), R"({"params":[0.1,0.1,0.1],"colour":1})");
  r = run({"simulate", "--config", dir.file("bad.json"), "--seed", "3", "--out", dir.file("g.csv")});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
  r = run({"simulate", "--params", "0.5,0.5,0.5", "--seed", "3", "--out", dir.file("g.csv")});
  EXPECT_EQ(r.status, 2);
}

TEST(Cli, EstimateDegenerateInput) {
  oracle::TempDir dir("cli");
  write_text(dir.file("tiny.csv"), "2,2\n1,2\n3,4\n");
  const auto r = run({"estimate", "--in", dir.file("tiny.csv"), "--method", "ls"});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("3x3"), std::string::npos);
  write_text(dir.file("broken.csv"), "2,2\n1,2\n3\n");
  EXPECT_EQ(run({"estimate", "--in", dir.file("broken.csv")}).status, 2);
  EXPECT_EQ(run({"estimate", "--in", dir.file("tiny.csv"), "--method", "ra"}).status, 1);
}

TEST(Cli, ContaminateDoesNotTouchInput) {
  oracle::TempDir dir("cli");
  ASSERT_EQ(run({"simulate", "--seed", "1", "--rows", "20", "--cols", "20", "--out", dir.file("y.csv")}).status, 0);
  const std::string before = slurp(dir.file("y.csv"));
  write_text(dir.file("c.json"), R"({"alpha":0.2,"kind":"replace_white_noise","variance":50})");
  const auto r = run({"contaminate", "--in", dir.file("y.csv"), "--config", dir.file("c.json"), "--seed", "5",
                      "--out", dir.file("z.csv"), "--mask", dir.file("m.csv")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(dir.file("y.csv")), before);
  const Grid2D y = read_grid_csv(dir.file("y.csv"));
  const auto ref = contaminate(y, {0.2, ReplaceWhiteNoise{50}}, 5);
  EXPECT_EQ(read_grid_csv(dir.file("z.csv")), ref.z);
  const Grid2D mask = read_grid_csv(dir.file("m.csv"));
  for (std::size_t k = 0; k < mask.size(); ++k) EXPECT_EQ(mask.values()[k] == 1.0, bool(ref.mask[k]));
  EXPECT_NE(r.err.find("mask_seed"), std::string::npos);
}

TEST(Cli, McWritesReport) {
  oracle::TempDir dir("cli");
  write_text(dir.file("mc.json"), R"({"window": 10, "replications": 3, "methods": ["ls", "m"],
    "contamination": {"alpha": 0.1, "kind": "additive_gaussian", "variance": 50},
    "optimizer": {"restarts": 2, "max_evals": 100}})");
  const auto r = run({"mc", "--config", dir.file("mc.json"), "--seed", "11", "--out", dir.file("r.csv"), "--raw",
                      dir.file("raw.csv"), "--time", "--jobs", "2"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::ifstream is(dir.file("r.csv"));
  const auto rows = parse_report(is);
  ASSERT_EQ(rows.size(), 6u);
  ExperimentConfig c;
  c.window = 10;
  c.replications = 3;
  c.methods = {Method::LS, Method::M};
  c.contamination = ContaminationSpec{0.1, AdditiveGaussian{50}};
  c.optimizer.restarts = 2;
  c.optimizer.max_evals = 100;
  c.master_seed = 11;
  const McReport ref = run_experiment(c);
  EXPECT_NEAR(rows[0].cell.mean, ref.methods[0].cells[0].mean, 1e-11);
  EXPECT_NEAR(rows[5].cell.mean, ref.methods[1].cells[2].mean, 1e-11);
  EXPECT_NE(r.err.find("\"master_seed\":11"), std::string::npos);
  EXPECT_NE(slurp(dir.file("raw.csv")).find("method,param,replication,estimate"), std::string::npos);
  // mc requires --seed
  EXPECT_EQ(run({"mc", "--config", dir.file("mc.json")}).status, 1);
  write_text(dir.file("bad.json"), R"({"window": 3})");
  EXPECT_EQ(run({"mc", "--config", dir.file("bad.json"), "--seed", "1"}).status, 2);
}

TEST(Cli, FilterAndIndices) {
  oracle::TempDir dir("cli");
  ASSERT_EQ(run({"simulate", "--seed", "2", "--rows", "40", "--cols", "40", "--out", dir.file("t.pgm")}).status, 0);
  EXPECT_TRUE(std::filesystem::exists(dir.file("t.pgm.scale")));
  auto r = run({"indices", "--a", dir.file("t.pgm"), "--b", dir.file("t.pgm")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "index,value\nssim,1\ncq_1_1,1\ncq_max,1\n");

  r = run({"filter", "--in", dir.file("t.pgm"), "--k", "8", "--method", "ls", "--out", dir.file("a.pgm"),
           "--residual", dir.file("w.pgm")});
  ASSERT_EQ(r.status, 0) << r.err;
  const ImageGray z = read_pgm(dir.file("t.pgm"));
  const ImageGray a = read_pgm(dir.file("a.pgm"));
  const ImageGray zhat = approximate_image(z, 8, Method::LS, OptimizerConfig{});
  for (std::size_t k = 0; k < a.size(); ++k)
    EXPECT_EQ(a.values()[k], std::clamp(std::round(zhat.values()[k]), 0.0, 255.0));
  const PgmScale sc = read_pgm_scale(dir.file("w.pgm.scale"));
  const PgmScale ref = rescale_for_pgm(residual_image(z, zhat));
  EXPECT_EQ(sc.min, ref.min);
  EXPECT_EQ(sc.max, ref.max);

  r = run({"indices", "--a", dir.file("t.pgm"), "--b", dir.file("a.pgm")});
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("ssim,"), std::string::npos);

  write_text(dir.file("p2.pgm"), "P2\n2 2\n255\n0 1 2 3\n");
  r = run({"indices", "--a", dir.file("p2.pgm"), "--b", dir.file("t.pgm")});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("P2"), std::string::npos);
}
