#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "bmm2d/montecarlo.hpp"
#include "oracles.hpp"

using namespace bmm2d;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.window = 12;
  c.replications = 6;
  c.contamination = ContaminationSpec{0.1, AdditiveGaussian{50}};
  c.master_seed = 99;
  c.optimizer.restarts = 2;
  c.optimizer.max_evals = 150;
  return c;
}

void expect_same_report(const McReport& a, const McReport& b) {
  ASSERT_EQ(a.methods.size(), b.methods.size());
  for (std::size_t m = 0; m < a.methods.size(); ++m) {
    EXPECT_EQ(a.methods[m].method, b.methods[m].method);
    EXPECT_EQ(a.methods[m].n, b.methods[m].n);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(a.methods[m].cells[k].mean, b.methods[m].cells[k].mean);
      EXPECT_EQ(a.methods[m].cells[k].variance, b.methods[m].cells[k].variance);
      EXPECT_EQ(a.methods[m].cells[k].mse, b.methods[m].cells[k].mse);
    }
  }
}

}  // namespace

TEST(Aggregate, KnownValues) {
  const std::vector<double> xs{0.1, 0.2, 0.3, 0.6};
  const McCell c = aggregate(xs, 0.25);
  EXPECT_NEAR(c.mean, 0.3, 1e-15);
  EXPECT_NEAR(c.variance, (0.04 + 0.01 + 0.0 + 0.09) / 3.0, 1e-15);
  EXPECT_NEAR(c.mse, (0.0225 + 0.0025 + 0.0025 + 0.1225) / 4.0, 1e-15);
  const McCell one = aggregate(std::vector<double>{0.4}, 0.5);
  EXPECT_EQ(one.variance, 0.0);
  EXPECT_NEAR(one.mse, 0.01, 1e-15);
}

TEST(Aggregate, MseDecomposition) {
  std::mt19937_64 eng(1);
  std::normal_distribution<double> n(0.2, 0.05);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> xs(3 + t);
    for (double& x : xs) x = n(eng);
    const McCell c = aggregate(xs, 0.15);
    const double nn = static_cast<double>(xs.size());
    const double bias = c.mean - 0.15;
    EXPECT_NEAR(c.mse, c.variance * (nn - 1) / nn + bias * bias, 1e-12);
  }
}

TEST(RunExperiment, SingleReplicationLs) {
  ExperimentConfig c;
  c.window = 16;
  c.replications = 1;
  c.methods = {Method::LS};
  c.master_seed = 5;
  const McReport r = run_experiment(c);
  ASSERT_EQ(r.methods.size(), 1u);
  const auto seeds = replication_seeds(5, 0);
  const Grid2D y = simulate_ar2d(c.true_params, 16, 16, GaussianNoise{0, 1}, 50, seeds.field);
  const auto ls = estimate_ls(y);
  EXPECT_EQ(r.methods[0].cells[0].mean, ls.params.phi1);
  EXPECT_EQ(r.methods[0].cells[2].mean, ls.params.phi3);
  EXPECT_EQ(r.methods[0].cells[0].variance, 0.0);
  EXPECT_EQ(r.methods[0].n, 1);
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  const ExperimentConfig c = small_config();
  const McReport a = run_experiment(c, 1);
  const McReport b = run_experiment(c, 3);
  expect_same_report(a, b);
}

TEST(RunExperiment, MethodListDoesNotChangeOtherMethods) {
  ExperimentConfig c = small_config();
  c.methods = {Method::LS, Method::BMM};
  const McReport both = run_experiment(c);
  c.methods = {Method::BMM};
  const McReport only = run_experiment(c);
  EXPECT_EQ(both.find(Method::BMM)->cells[0].mean, only.find(Method::BMM)->cells[0].mean);
  EXPECT_EQ(both.methods.front().method, Method::LS);
}

TEST(RunExperiment, CanonicalMethodOrder) {
  ExperimentConfig c = small_config();
  c.replications = 2;
  c.methods = {Method::BMM, Method::LS, Method::GM, Method::M};
  const McReport r = run_experiment(c);
  ASSERT_EQ(r.methods.size(), 4u);
  EXPECT_EQ(r.methods[0].method, Method::LS);
  EXPECT_EQ(r.methods[1].method, Method::M);
  EXPECT_EQ(r.methods[2].method, Method::GM);
  EXPECT_EQ(r.methods[3].method, Method::BMM);
}

TEST(ReplicationSeeds, DistinctAcrossReplications) {
  std::set<std::uint64_t> seen;
  for (int r = 0; r < 1000; ++r) {
    const auto s = replication_seeds(7, r);
    EXPECT_NE(s.field, s.contamination);
    seen.insert(s.field);
    seen.insert(s.contamination);
  }
  EXPECT_EQ(seen.size(), 2000u);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c;
  c.window = 3;
  EXPECT_THROW(validate(c), DomainError);
  c = {};
  c.replications = 0;
  EXPECT_THROW(validate(c), DomainError);
  c = {};
  c.methods.clear();
  EXPECT_THROW(validate(c), DomainError);
  c = {};
  c.true_params = {0.5, 0.5, 0.5};
  EXPECT_THROW(validate(c), DomainError);
}

TEST(Report, CsvRoundTrip) {
  ExperimentConfig c = small_config();
  c.replications = 3;
  const McReport r = run_experiment(c);
  std::stringstream ss;
  emit_report(r, ss);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "method,param,true,mean,variance,mse,n");
  const auto rows = parse_report(ss);
  ASSERT_EQ(rows.size(), 12u);
  for (const auto& row : rows) {
    const auto* m = r.find(row.method);
    ASSERT_NE(m, nullptr);
    const auto& cell = m->cells[row.param - 1];
    EXPECT_EQ(row.cell.mean, cell.mean);
    EXPECT_EQ(row.cell.variance, cell.variance);
    EXPECT_EQ(row.cell.mse, cell.mse);
    EXPECT_EQ(row.n, 3);
    EXPECT_EQ(row.truth, c.true_params[row.param - 1]);
  }
  EXPECT_EQ(rows[0].method, Method::LS);
  EXPECT_EQ(rows[11].method, Method::BMM);
  EXPECT_EQ(rows[11].param, 3);
}

TEST(Report, RawCsv) {
  ExperimentConfig c = small_config();
  c.replications = 2;
  c.methods = {Method::LS};
  const McReport r = run_experiment(c);
  std::ostringstream os;
  emit_raw(r, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "method,param,replication,estimate");
  int n = 0;
  while (std::getline(is, line)) ++n;
  EXPECT_EQ(n, 6);
}

TEST(Report, ParseErrors) {
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW((void)parse_report(bad_header), ParseError);
  std::istringstream bad_row("method,param,true,mean,variance,mse,n\nLS,phi1,0.15,x,1,1,3\n");
  EXPECT_THROW((void)parse_report(bad_row), ParseError);
  std::istringstream bad_method("method,param,true,mean,variance,mse,n\nRA,phi1,0.15,1,1,1,3\n");
  EXPECT_THROW((void)parse_report(bad_method), ParseError);
}
