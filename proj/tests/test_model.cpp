#include <gtest/gtest.h>

#include <random>

#include "nro/convexset.hpp"
#include "nro/model.hpp"
#include "test_support.hpp"

namespace nro {
namespace {

using testing::vec2;

RobustProblem example_like() {
  RobustProblem p;
  p.name = "example";
  p.n = 2;
  p.f = SmoothFn::linear(vec2(-1, -1));
  RobustConstraint rc;
  rc.h = SmoothFn(
      2, 2, [](const Vec& x) -> Vec { return x.array().square().matrix(); },
      [](const Vec& x) -> Mat { return Mat(2.0 * x.asDiagonal()); });
  rc.b = SmoothFn::constant(2, Vec::Constant(1, 6.0));
  rc.uset = testing::quarter_disk();
  p.robust.push_back(rc);
  p.lower = Vec::Constant(2, -10);
  p.upper = Vec::Constant(2, 10);
  p.x_nominal = Vec::Zero(2);
  return p;
}

TEST(RobustResidual, SpecExamples) {
  const RobustProblem p = example_like();
  EXPECT_DOUBLE_EQ(robust_residual(p, 0, vec2(2, 1), vec2(1, 2)), 0.0);
  EXPECT_DOUBLE_EQ(robust_residual(p, 0, vec2(0, 0), vec2(0.3, 0.4)), -6.0);
  EXPECT_DOUBLE_EQ(robust_residual(p, 0, vec2(2, 1), vec2(1, 0)), -2.0);
}

TEST(RobustResidual, AffineInU) {
  const RobustProblem p = example_like();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  std::uniform_real_distribution<double> alpha_dist(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Vec x = vec2(unif(rng), unif(rng));
    const Vec u = vec2(unif(rng), unif(rng));
    const Vec v = vec2(unif(rng), unif(rng));
    const double a = alpha_dist(rng);
    const double lhs = robust_residual(p, 0, x, a * u + (1 - a) * v);
    const double rhs = a * robust_residual(p, 0, x, u) + (1 - a) * robust_residual(p, 0, x, v);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(RobustResidual, NonFiniteCarriesContext) {
  RobustProblem p = example_like();
  p.robust[0].b = SmoothFn(
      2, 1, [](const Vec& x) -> Vec { return Vec::Constant(1, std::log(x(0))); },
      [](const Vec& x) -> Mat { return Mat::Constant(1, 2, 1.0 / x(0)); });
  try {
    robust_residual(p, 0, vec2(-1, 0), vec2(0, 0));
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("constraint 0"), std::string::npos);
  }
}

TEST(SmoothFn, JacobianMatchesFiniteDifferences) {
  const RobustProblem p = example_like();
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const Vec x = testing::uniform_in_box(rng, p.lower, p.upper);
    EXPECT_LE(testing::jacobian_fd_error(p.f, x), 1e-5);
    EXPECT_LE(testing::jacobian_fd_error(p.robust[0].h, x), 1e-5);
    EXPECT_LE(testing::jacobian_fd_error(p.robust[0].b, x), 1e-5);
  }
}

TEST(SmoothFn, RejectsNonFinite) {
  const SmoothFn fn(
      1, 1, [](const Vec&) -> Vec { return Vec::Constant(1, std::nan("")); },
      [](const Vec&) -> Mat { return Mat::Zero(1, 1); });
  EXPECT_THROW(fn.eval(Vec::Zero(1)), EvaluationError);
}

TEST(Validate, ExampleIsAccepted) { EXPECT_TRUE(validate(example_like()).empty()); }

TEST(Validate, DimensionMismatch) {
  RobustProblem p = example_like();
  auto box3 = std::make_shared<ConvexSet>(3);
  box3->add_box(Vec::Zero(3), Vec::Ones(3));
  p.robust[0].uset = box3;
  const auto report = validate(p);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, ViolationKind::kDimensionMismatch);
}

TEST(Validate, EmptyUncertaintySetIsReportedAndDropped) {
  RobustProblem p;
  p.n = 1;
  p.f = SmoothFn::linear(Vec::Constant(1, 1.0));
  auto set = std::make_shared<ConvexSet>(1);
  set->add_upper(0, -1.0).add_lower(0, 1.0);
  p.robust.push_back({SmoothFn::linear(Vec::Constant(1, 1.0)), SmoothFn::constant(1, Vec::Zero(1)), set, "u"});
  p.lower = Vec::Constant(1, -1);
  p.upper = Vec::Constant(1, 1);
  p.x_nominal = Vec::Zero(1);
  const auto report = validate(p);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, ViolationKind::kEmptyUncertaintySet);
  EXPECT_TRUE(drop_vacuous_constraints(p).robust.empty());
}

TEST(Validate, EmptyGeneralSetDetectedBySolve) {
  // disk of radius 1 around the origin intersected with u1 >= 2
  auto set = testing::unit_disk();
  set->add_halfspace(vec2(-1, 0), -2.0);
  EXPECT_TRUE(set->empty());
  EXPECT_FALSE(testing::quarter_disk()->empty());
}

TEST(Validate, BoundsAndNominal) {
  RobustProblem p = example_like();
  p.upper(0) = std::numeric_limits<double>::infinity();
  p.x_nominal(1) = 20;
  const auto report = validate(p);
  ASSERT_EQ(report.size(), 2u);
  EXPECT_EQ(report[0].kind, ViolationKind::kBadBounds);
  EXPECT_EQ(report[1].kind, ViolationKind::kNominalOutsideBounds);
}

}  // namespace
}  // namespace nro
