#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "nro/algorithms.hpp"
#include "nro/bench.hpp"
#include "nro/convexset.hpp"
#include "test_support.hpp"

namespace nro {
namespace {

namespace fs = std::filesystem;

PortfolioConfig small_portfolio(std::uint64_t seed, int horizon) {
  PortfolioConfig cfg;
  cfg.n_assets = 2;
  cfg.horizon = horizon;
  cfg.transaction_cost = 0.35;
  cfg.periods = synth_returns(seed, 2, horizon);
  return cfg;
}

std::string write_temp(const std::string& name, const std::string& body) {
  const fs::path path = fs::temp_directory_path() / ("nro_test_" + name);
  std::ofstream(path, std::ios::binary) << body;
  return path.string();
}

TEST(Example, Shape) {
  const RobustProblem p = build_example();
  EXPECT_EQ(p.n, 2);
  ASSERT_EQ(p.robust.size(), 1u);
  EXPECT_TRUE(validate(p).empty());
  EXPECT_EQ(p.f.value(testing::vec2(1, 2)), -3.0);
  EXPECT_EQ(p.lower, Vec::Constant(2, -10.0));
  EXPECT_EQ(p.upper, Vec::Constant(2, 10.0));
  EXPECT_EQ(p.x_nominal, Vec::Zero(2));
  EXPECT_NEAR(robust_residual(p, 0, testing::vec2(2, 1), testing::vec2(1, 2)), 0.0, 1e-15);
}

TEST(Portfolio, SizesAndValidation) {
  const RobustProblem p = build_portfolio(small_portfolio(1, 3));
  EXPECT_EQ(p.n, 3 * (3 * 2 + 2));
  ASSERT_EQ(p.robust.size(), 3u);
  for (const RobustConstraint& rc : p.robust) {
    EXPECT_EQ(rc.uset->dim(), 6);
    EXPECT_EQ(rc.h.arity_out(), 6);
  }
  EXPECT_TRUE(validate(p).empty());
}

TEST(Portfolio, SynthReturnsPassValidation) {
  const std::vector<PeriodReturns> periods = synth_returns(1, 2, 7);
  ASSERT_EQ(periods.size(), 7u);
  PortfolioConfig cfg = small_portfolio(1, 7);
  EXPECT_NO_THROW(check_portfolio(cfg));
  EXPECT_TRUE(validate(build_portfolio(cfg)).empty());
  const std::vector<PeriodReturns> again = synth_returns(1, 2, 7);
  for (int t = 0; t < 7; ++t) {
    EXPECT_EQ(periods[t].cov_center, again[t].cov_center);
    EXPECT_EQ(periods[t].mu_lo, again[t].mu_lo);
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(periods[t].cov_center).eigenvalues().minCoeff();
    EXPECT_GT(lmin, periods[t].cov_radii.norm());
  }
}

TEST(Portfolio, PsdMarginViolationIsRejected) {
  PortfolioConfig cfg = small_portfolio(3, 1);
  cfg.periods[0].cov_radii = Mat::Constant(2, 2, 10.0);
  EXPECT_THROW(build_portfolio(cfg), Error);
  cfg = small_portfolio(3, 1);
  cfg.periods[0].mu_lo = Vec::Zero(3);
  EXPECT_THROW(build_portfolio(cfg), Error);
  cfg = small_portfolio(3, 2);
  cfg.periods.pop_back();
  EXPECT_THROW(build_portfolio(cfg), Error);
}

TEST(Portfolio, ConstraintIsAffineInUncertainty) {
  const RobustProblem p = build_portfolio(small_portfolio(5, 2));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(p.n);
    for (int j = 0; j < p.n; ++j) x(j) = unif(rng);
    const int i = trial % 2;
    Vec u1(6);
    Vec u2(6);
    for (int k = 0; k < 6; ++k) {
      u1(k) = unif(rng);
      u2(k) = unif(rng);
    }
    const double a = 0.5 * (unif(rng) + 1.0);
    const double mixed = robust_residual(p, i, x, a * u1 + (1.0 - a) * u2);
    const double split = a * robust_residual(p, i, x, u1) + (1.0 - a) * robust_residual(p, i, x, u2);
    EXPECT_NEAR(mixed, split, 1e-12);
  }
}

// Shrinks the mean box and the covariance radii around their centers.
PortfolioConfig tightened(PortfolioConfig cfg, double factor) {
  for (PeriodReturns& pr : cfg.periods) {
    const Vec mid = 0.5 * (pr.mu_lo + pr.mu_hi);
    const Vec half = 0.5 * (pr.mu_hi - pr.mu_lo);
    pr.mu_lo = mid - factor * half;
    pr.mu_hi = mid + factor * half;
    pr.cov_radii *= factor;
  }
  return cfg;
}

TEST(Portfolio, TightSinglePeriodConvergesQuickly) {
  const RobustProblem p = build_portfolio(tightened(small_portfolio(7, 1), 0.01));
  const SolveResult sup = superset_solve(p);
  ASSERT_EQ(sup.status, SolveStatus::kOptimal) << sup.message;
  EXPECT_LE(sup.errm, 1e-5);
  EXPECT_LE(sup.iterations, 10);
  const SolveResult pol = polak_solve(p);
  ASSERT_EQ(pol.status, SolveStatus::kOptimal) << pol.message;
  EXPECT_LE(pol.errm, 1e-5);
  EXPECT_NEAR(pol.objective, sup.objective, 1e-4);
}

TEST(Portfolio, PointUncertaintyTakesOneIteration) {
  PortfolioConfig cfg = small_portfolio(7, 1);
  cfg.periods[0].cov_radii.setZero();
  cfg.periods[0].mu_hi = cfg.periods[0].mu_lo;
  const RobustProblem p = build_portfolio(cfg);
  const SolveResult sup = superset_solve(p);
  ASSERT_EQ(sup.status, SolveStatus::kOptimal) << sup.message;
  EXPECT_EQ(sup.iterations, 1);
  const SolveResult pol = polak_solve(p);
  ASSERT_EQ(pol.status, SolveStatus::kOptimal) << pol.message;
  EXPECT_EQ(pol.iterations, 1);
}

TEST(Production, SizesAndValidation) {
  ProductionConfig cfg;
  const std::vector<double> loads = synth_load(1, 24, 80, 140);
  cfg.loads = Eigen::Map<const Vec>(loads.data(), 24);
  const RobustProblem p = build_production(cfg);
  EXPECT_EQ(p.n, 73);
  EXPECT_EQ(p.robust.size(), 24u);
  EXPECT_TRUE(validate(p).empty());
}

TEST(Production, InvalidConfigsAreRejected) {
  ProductionConfig cfg;
  cfg.loads = Vec::Constant(2, 100.0);
  cfg.uset_size = 0.0;
  EXPECT_THROW(build_production(cfg), Error);
  cfg.uset_size = 0.5;
  cfg.loads(1) = -1.0;
  EXPECT_THROW(build_production(cfg), Error);
  cfg.loads = Vec();
  EXPECT_THROW(build_production(cfg), Error);
}

TEST(Production, EllipsoidMembersHavePositiveCosts) {
  for (double p : {0.7, 0.8, 0.9, 0.999}) {
    ProductionConfig cfg;
    cfg.loads = Vec::Constant(1, 100.0);
    cfg.uset_size = p;
    const RobustProblem prob = build_production(cfg);
    for (const Vec& c : prob.robust[0].uset->sample_members(1000, 3)) {
      EXPECT_GT(c.minCoeff(), 0.0) << "p=" << p;
    }
  }
}

TEST(Production, SinglePeriodClosedForm) {
  ProductionConfig cfg;
  cfg.loads = Vec::Constant(1, 100.0);
  cfg.uset_size = 1e-6;
  const RobustProblem p = build_production(cfg);
  for (const SolveResult& r : {superset_solve(p), polak_solve(p)}) {
    ASSERT_EQ(r.status, SolveStatus::kOptimal) << r.message;
    // argmin 10 (x - 100)^2 + 5 x^2
    EXPECT_NEAR(r.x(0), 200.0 / 3.0, 1e-2);
    EXPECT_NEAR(r.x(2), 0.0, 1e-4);
    EXPECT_NEAR(r.objective, 10.0 * std::pow(100.0 / 3.0, 2) + 5.0 * std::pow(200.0 / 3.0, 2), 1.0);
  }
}

TEST(Production, RampLimitsHold) {
  ProductionConfig cfg;
  cfg.loads = (Vec(5) << 60.0, 140.0, 70.0, 150.0, 80.0).finished();
  cfg.ramp = 15.0;
  cfg.uset_size = 0.8;
  const RobustProblem p = build_production(cfg);
  const int T = 5;
  for (const SolveResult& r : {superset_solve(p), polak_solve(p)}) {
    ASSERT_EQ(r.status, SolveStatus::kOptimal) << r.message;
    for (int t = 0; t < T; ++t) EXPECT_LE(std::abs(r.x(t + 1) - r.x(t)), cfg.ramp + 1e-8) << "t=" << t;
  }
}

int interior_maxima(const std::vector<double>& v) {
  int count = 0;
  for (std::size_t t = 1; t + 1 < v.size(); ++t) count += v[t] > v[t - 1] && v[t] > v[t + 1];
  return count;
}

TEST(SynthLoad, DoublePeakWithinRange) {
  const std::vector<double> v = synth_load(7, 24, 80, 140);
  ASSERT_EQ(v.size(), 24u);
  for (double x : v) {
    EXPECT_GE(x, 80.0);
    EXPECT_LE(x, 140.0);
  }
  EXPECT_EQ(interior_maxima(v), 2);
  EXPECT_EQ(v, synth_load(7, 24, 80, 140));
  for (int k = 1; k <= 3; ++k) {
    const LoadPattern lp = load_pattern(k);
    EXPECT_EQ(interior_maxima(synth_load(lp.seed, 24, lp.base, lp.peak)), 2) << "pattern " << k;
  }
}

TEST(SynthLoad, FlatWhenBaseEqualsPeak) {
  for (double x : synth_load(4, 12, 95.0, 95.0)) EXPECT_EQ(x, 95.0);
  EXPECT_THROW(synth_load(1, 0, 1, 2), Error);
  EXPECT_THROW(load_pattern(4), Error);
}

TEST(LoadSeries, ParsesAndRejects) {
  EXPECT_EQ(load_series(write_temp("one.csv", "t,value\n1,42.5\n")), std::vector<double>{42.5});
  EXPECT_EQ(load_series(write_temp("crlf.csv", "t,value\r\n1,1.5\r\n2,2\r\n")), (std::vector<double>{1.5, 2.0}));
  try {
    load_series(write_temp("nan.csv", "t,value\n1,3\n2,NaN\n3,4\n"));
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_series(write_temp("empty.csv", "")), Error);
  EXPECT_THROW(load_series(write_temp("header.csv", "t,value\n")), Error);
  EXPECT_THROW(load_series(write_temp("bad.csv", "t,value\n1,abc\n")), Error);
  EXPECT_THROW(load_series(write_temp("missing_header.csv", "1,2\n")), Error);
  EXPECT_THROW(load_series("/nonexistent/loads.csv"), Error);
}

TEST(LoadSeries, BundledPatternsMatchGenerator) {
  for (int k = 1; k <= 3; ++k) {
    const std::vector<double> v =
        load_series(std::string(NRO_DATA_DIR) + "/loads_pattern" + std::to_string(k) + ".csv");
    const LoadPattern lp = load_pattern(k);
    const std::vector<double> ref = synth_load(lp.seed, 24, lp.base, lp.peak);
    ASSERT_EQ(v.size(), 24u);
    for (int t = 0; t < 24; ++t) EXPECT_NEAR(v[t], ref[t], 1e-12 * ref[t]);
  }
}

}  // namespace
}  // namespace nro
