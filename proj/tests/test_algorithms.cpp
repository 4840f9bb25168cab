#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "nro/algorithms.hpp"
#include "nro/bench.hpp"
#include "nro/convexset.hpp"
#include "test_support.hpp"

namespace nro {
namespace {

using testing::vec2;

SolverOptions kelley_from_wide_box() {
  SolverOptions opt;
  opt.cut_strategy = CutStrategy::kKelley;
  opt.initial_supersets = std::vector<Polytope>{Polytope::box(vec2(0, 0), vec2(1, 2))};
  return opt;
}

TEST(SupersetSolve, KelleyTrajectory) {
  const SolveResult r = superset_solve(build_example(), kelley_from_wide_box());
  ASSERT_GE(r.trace.size(), 3u);
  const double s3 = std::sqrt(3.0);
  const std::vector<Vec> xs{vec2(2, 1), vec2(s3, s3), vec2(2, 2)};
  const std::vector<Vec> us{vec2(1, 2), vec2(1, 1), vec2(0.75, 0.75)};
  const std::vector<double> lams{0.25, s3 / 6.0, 1.0 / 3.0};
  for (int k = 0; k < 3; ++k) {
    SCOPED_TRACE(k);
    EXPECT_LE((r.trace[k].x - xs[k]).norm(), 1e-6);
    EXPECT_LE((r.trace[k].u[0] - us[k]).norm(), 1e-6);
    EXPECT_NEAR(r.trace[k].lambda[0], lams[k], 1e-6);
  }
  // rows 0..3 are the initial box; cut k is row 4 + k
  const Polytope& s = r.polytopes[0];
  ASSERT_GE(s.rows(), 7);
  const double n5 = std::sqrt(5.0);
  EXPECT_NEAR(s.row(4).a(0), 1 / n5, 1e-9);
  EXPECT_NEAR(s.row(4).a(1), 2 / n5, 1e-9);
  EXPECT_NEAR(s.row(4).d, 3 / n5, 1e-9);
  EXPECT_NEAR(s.row(5).d, 1.5 / std::sqrt(2.0), 1e-9);
  // linearizing u^2 - 1 at (0.75, 0.75) gives u1 + u2 <= 17/12
  EXPECT_NEAR(s.row(6).d, (17.0 / 12.0) / std::sqrt(2.0), 1e-9);
}

TEST(SupersetSolve, FirstProjectionCut) {
  SolverOptions opt = kelley_from_wide_box();
  opt.cut_strategy = CutStrategy::kProjection;
  const SolveResult r = superset_solve(build_example(), opt);
  const Halfspace& h = r.polytopes[0].row(4);
  const double n5 = std::sqrt(5.0);
  EXPECT_EQ(h.provenance, Provenance::kProjection);
  EXPECT_NEAR(h.a(0), 1 / n5, 1e-9);
  EXPECT_NEAR(h.a(1), 2 / n5, 1e-9);
  EXPECT_NEAR(h.d, 1.0, 1e-6);
}

void expect_invariants(const SolveResult& r, const RobustProblem& problem) {
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    EXPECT_LE(worst_violation(problem, r.trace[k].x), 1e-6) << "k=" << k;
    if (k > 0) EXPECT_LE(r.trace[k].objective, r.trace[k - 1].objective + 1e-9) << "k=" << k;
    if (k > 0) EXPECT_GT(r.trace[k].k, r.trace[k - 1].k);
    if (k > 0 && r.trace[k].upper_bound && r.trace[k - 1].upper_bound) {
      EXPECT_LE(*r.trace[k].upper_bound, *r.trace[k - 1].upper_bound);
    }
    if (r.trace[k].lower_bound) EXPECT_LE(*r.trace[k].lower_bound, r.trace[k].objective + 1e-6) << "k=" << k;
  }
}

class ExampleConvergence : public ::testing::TestWithParam<CutStrategy> {};

TEST_P(ExampleConvergence, ReachesOptimum) {
  const RobustProblem p = build_example();
  SolverOptions opt;
  opt.cut_strategy = GetParam();
  const SolveResult r = superset_solve(p, opt);
  ASSERT_EQ(r.status, SolveStatus::kOptimal) << r.message;
  const double xs = std::sqrt(3.0 * std::sqrt(2.0));
  EXPECT_LE(r.errm, 1e-5);
  EXPECT_LE(r.iterations, 50);
  EXPECT_NEAR(r.objective, -2.0 * xs, 1e-4);
  EXPECT_NEAR(r.x(0), xs, 1e-3);
  EXPECT_NEAR(r.x(1), xs, 1e-3);
  expect_invariants(r, p);
  ASSERT_TRUE(r.lower_bound.has_value());
  EXPECT_LE(*r.lower_bound, r.objective + 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Strategies, ExampleConvergence,
                         ::testing::Values(CutStrategy::kKelley, CutStrategy::kProjection,
                                           CutStrategy::kGradientFree, CutStrategy::kHybrid),
                         [](const ::testing::TestParamInfo<CutStrategy>& info) {
                           std::string name = to_string(info.param);
                           std::erase(name, '-');
                           return name;
                         });

TEST(PolakSolve, ExampleParity) {
  const RobustProblem p = build_example();
  const SolveResult polak = polak_solve(p);
  ASSERT_EQ(polak.status, SolveStatus::kOptimal) << polak.message;
  EXPECT_LE(polak.errm, 1e-5);
  EXPECT_NEAR(polak.objective, -2.0 * std::sqrt(3.0 * std::sqrt(2.0)), 1e-4);
  // relaxation objectives are non-decreasing
  for (std::size_t k = 1; k < polak.trace.size(); ++k) {
    EXPECT_GE(polak.trace[k].objective, polak.trace[k - 1].objective - 1e-9);
  }
}

RobustProblem infeasible_instance() {
  RobustProblem p;
  p.name = "infeasible";
  p.n = 1;
  p.f = SmoothFn::linear(Vec::Ones(1));
  auto set = std::make_shared<ConvexSet>(1);
  set->add_lower(0, 0.0).add_upper(0, 1.0);
  RobustConstraint rc;
  rc.h = SmoothFn::constant(1, Vec::Ones(1));
  rc.b = SmoothFn(
      1, 1, [](const Vec& x) -> Vec { return Vec::Constant(1, -1.0 - x(0) * x(0)); },
      [](const Vec& x) -> Mat { return Mat::Constant(1, 1, -2.0 * x(0)); });
  rc.uset = set;
  p.robust.push_back(rc);
  p.lower = Vec::Constant(1, -5.0);
  p.upper = Vec::Constant(1, 5.0);
  p.x_nominal = Vec::Constant(1, 0.5);
  return p;
}

TEST(FeasibilityRestoration, CertifiesInfeasibility) {
  const SolveResult r = superset_solve(infeasible_instance());
  EXPECT_EQ(r.status, SolveStatus::kInfeasibleCertified) << r.message;
  ASSERT_TRUE(r.infeasibility_p.has_value());
  EXPECT_NEAR(*r.infeasibility_p, 2.0, 1e-4);
  EXPECT_NEAR(r.x(0), 0.0, 1e-4);
  EXPECT_TRUE(r.trace.empty());
}

TEST(FeasibilityRestoration, FeasibleExampleStopsAtFirstIteration) {
  const RobustProblem p = build_example();
  std::vector<Polytope> boxes{p.robust[0].uset->bounding_box()};
  const RestorationResult fr = feasibility_restoration(p, boxes);
  EXPECT_TRUE(fr.feasible);
  ASSERT_EQ(fr.trace.size(), 1u);
  EXPECT_EQ(fr.trace[0].k, 0);
  EXPECT_LE(fr.p, 1e-8);
}

TEST(PolakSolve, InfeasibleSampleProblem) {
  const SolveResult r = polak_solve(infeasible_instance());
  EXPECT_EQ(r.status, SolveStatus::kInfeasibleCertified) << r.message;
}

TEST(Errm, FullMeasureAtKelleyStart) {
  const RobustProblem p = build_example();
  std::vector<ErrmPoints> pts(1);
  pts[0].lambda = {0.25};
  pts[0].points = {vec2(1, 2)};
  const ErrmBreakdown e = errm_full(p, vec2(2, 1), pts);
  EXPECT_NEAR(e.stationarity, 0.0, 1e-12);
  EXPECT_NEAR(e.activity, 0.0, 1e-12);
  EXPECT_NEAR(e.distance, std::sqrt(5.0) - 1.0, 1e-8);
  EXPECT_NEAR(e.total, std::sqrt(5.0) - 1.0, 1e-8);
}

TEST(Errm, FullMeasureVanishesAtOptimum) {
  const RobustProblem p = build_example();
  const double xs = std::sqrt(3.0 * std::sqrt(2.0));
  std::vector<ErrmPoints> pts(1);
  pts[0].lambda = {xs / 6.0};
  pts[0].points = {vec2(std::sqrt(0.5), std::sqrt(0.5))};
  EXPECT_LE(errm_full(p, vec2(xs, xs), pts).total, 1e-8);
}

TEST(Errm, PolakMeasure) {
  const RobustProblem p = build_example();
  // support of (4, 1) over the quarter disk is sqrt(17) < 6
  EXPECT_EQ(errm_polak(p, vec2(2, 1)), 0.0);
  EXPECT_NEAR(worst_violation(p, vec2(2, 1)), std::sqrt(17.0) - 6.0, 1e-8);
  EXPECT_NEAR(errm_polak(p, vec2(3, 3)), 9.0 * std::sqrt(2.0) - 6.0, 1e-8);
}

TEST(Errm, SupersetMeasure) {
  const RobustProblem p = build_example();
  SolutionPair pair;
  pair.x = vec2(2, 1);
  pair.lambda = {0.25};
  pair.u = {vec2(1, 2)};
  pair.mu_zero = {false};
  EXPECT_NEAR(errm_superset(pair, p), std::sqrt(5.0) - 1.0, 1e-8);
  pair.mu_zero = {true};
  EXPECT_EQ(errm_superset(pair, p), 0.0);
}

TEST(LowerBound, SandwichOnExample) {
  const RobustProblem p = build_example();
  const double lb = lower_bound(p, {{vec2(1, 0), vec2(0, 1)}});
  EXPECT_LE(lb, -2.0 * std::sqrt(3.0 * std::sqrt(2.0)) + 1e-8);
  EXPECT_NEAR(lb, -2.0 * std::sqrt(6.0), 1e-6);
}

TEST(SolveOptions, StrategyNamesRoundTrip) {
  for (CutStrategy s : {CutStrategy::kKelley, CutStrategy::kProjection, CutStrategy::kGradientFree,
                        CutStrategy::kHybrid}) {
    EXPECT_EQ(cut_strategy_from_string(to_string(s)), s);
  }
  EXPECT_THROW(cut_strategy_from_string("newton"), Error);
}

TEST(SolveOptions, InvalidProblemIsRejected) {
  RobustProblem p = build_example();
  p.lower(0) = 20.0;
  EXPECT_THROW(superset_solve(p), Error);
  EXPECT_THROW(polak_solve(p), Error);
}

TEST(SolveOptions, TraceSinkSeesEveryRecord) {
  SolverOptions opt;
  int seen = 0;
  opt.trace_sink = [&](const IterateTrace&) { ++seen; };
  const SolveResult r = superset_solve(build_example(), opt);
  EXPECT_EQ(seen, static_cast<int>(r.trace.size() + r.restoration_trace.size()));
}

}  // namespace
}  // namespace nro
