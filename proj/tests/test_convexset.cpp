#include <gtest/gtest.h>

#include <cmath>

#include "nro/convexset.hpp"
#include "test_support.hpp"

namespace nro {
namespace {

using testing::vec2;

std::vector<std::shared_ptr<ConvexSet>> test_sets() {
  auto ell = std::make_shared<ConvexSet>(3);
  ell->add_ellipsoid({0, 1, 2}, (Vec(3) << 10, 5, 1).finished(), (Vec(3) << 7, 3.5, 0.7).finished());
  auto box = std::make_shared<ConvexSet>(2);
  box->add_box(Vec::Zero(2), Vec::Ones(2));
  auto mixed = std::make_shared<ConvexSet>(4);
  mixed->add_lower(0, -1).add_upper(0, 1).add_lower(1, 0.5).add_upper(1, 0.75);
  mixed->add_ellipsoid({2, 3}, vec2(1, 2), vec2(0.5, 0.25));
  return {testing::quarter_disk(), ell, box, mixed};
}

TEST(ConvexSet, ContainsExamples) {
  const auto qd = testing::quarter_disk();
  EXPECT_FALSE(qd->contains(vec2(1, 2)));
  EXPECT_TRUE(qd->contains(vec2(0, 0)));
  EXPECT_TRUE(qd->contains(vec2(std::sqrt(0.5), std::sqrt(0.5))));
}

TEST(ConvexSet, ProjectionExamples) {
  const auto qd = testing::quarter_disk();
  Projection p = qd->project(vec2(1, 2));
  EXPECT_NEAR(p.z(0), 1 / std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(p.z(1), 2 / std::sqrt(5.0), 1e-9);
  ASSERT_EQ(p.active.size(), 1u);
  EXPECT_EQ(p.active[0], 0);
  // 2 (z - y) + mult * 2 z = 0  ->  mult = sqrt(5) - 1
  EXPECT_NEAR(p.mult(0), std::sqrt(5.0) - 1.0, 1e-7);
  p = qd->project(vec2(0.5, 0.5));
  EXPECT_EQ(p.z, vec2(0.5, 0.5));
  EXPECT_TRUE(p.active.empty());
  p = qd->project(vec2(-1, 0.5));
  EXPECT_NEAR(p.z(0), 0.0, 1e-12);
  EXPECT_NEAR(p.z(1), 0.5, 1e-9);
  ASSERT_EQ(p.active.size(), 1u);
  EXPECT_EQ(p.active[0], 1);
  EXPECT_NEAR(p.mult(1), 2.0, 1e-7);
}

TEST(ConvexSet, SupportExamples) {
  const auto qd = testing::quarter_disk();
  Support s = qd->support_max(vec2(4, 1));
  EXPECT_NEAR(s.value, std::sqrt(17.0), 1e-8);
  EXPECT_NEAR(s.u(0), 4 / std::sqrt(17.0), 1e-6);
  EXPECT_NEAR(qd->support_max(vec2(0, 0)).value, 0.0, 1e-15);
  s = qd->support_max(vec2(1, 1));
  EXPECT_NEAR(s.value, std::sqrt(2.0), 1e-8);
}

TEST(ConvexSet, BoundingBoxExamples) {
  const auto qd = testing::quarter_disk();
  const Polytope b = qd->bounding_box();
  EXPECT_NEAR(b.row(0).d, 1.0, 1e-7);
  EXPECT_NEAR(b.row(1).d, 0.0, 1e-7);
  EXPECT_NEAR(b.row(2).d, 1.0, 1e-7);
  EXPECT_NEAR(b.row(3).d, 0.0, 1e-7);
  ConvexSet box(2);
  box.add_box(Vec::Zero(2), Vec::Ones(2));
  const Polytope bb = box.bounding_box(0.0);
  EXPECT_EQ(bb.d(), (Vec(4) << 1, 0, 1, 0).finished());
  ConvexSet ell(2);
  ell.add_ellipsoid({0, 1}, vec2(3, -1), vec2(2, 0.5));
  const Polytope eb = ell.bounding_box(0.0);
  EXPECT_EQ(eb.d(), (Vec(4) << 5, -1, -0.5, 1.5).finished());
}

TEST(ConvexSet, StructuredDetection) {
  EXPECT_FALSE(testing::quarter_disk()->structured());
  ConvexSet ell(3);
  ell.add_ellipsoid({0, 1, 2}, Vec::Zero(3), Vec::Ones(3));
  EXPECT_TRUE(ell.structured());
}

class SetProperties : public ::testing::TestWithParam<int> {};

TEST_P(SetProperties, ProjectionAndSupport) {
  const auto set = test_sets()[GetParam()];
  const std::vector<Vec> members = set->sample_members(1000, 17 + GetParam());
  const Polytope box = set->bounding_box();
  std::mt19937_64 rng(99 + GetParam());
  Vec lo(set->dim());
  Vec hi(set->dim());
  for (int i = 0; i < set->dim(); ++i) {
    hi(i) = box.row(2 * i).d + 2.0;
    lo(i) = -box.row(2 * i + 1).d - 2.0;
  }
  for (const Vec& v : members) EXPECT_TRUE(box.contains(v, 0.0));
  for (int t = 0; t < 20; ++t) {
    const Vec y = testing::uniform_in_box(rng, lo, hi);
    const Projection p = set->project(y);
    EXPECT_TRUE(set->contains(p.z, 1e-8));
    EXPECT_LE((set->project(p.z).z - p.z).norm(), 1e-8);
    double worst = -1.0;
    for (const Vec& v : members) worst = std::max(worst, (y - p.z).dot(v - p.z));
    EXPECT_LE(worst, 1e-8);
    Vec stat = 2.0 * (p.z - y);
    for (int j = 0; j < set->size(); ++j) {
      EXPECT_GE(p.mult(j), 0.0);
      if (p.mult(j) > 0.0) stat += p.mult(j) * set->gradient(j, p.z);
    }
    EXPECT_LE(stat.norm(), 1e-6);

    const Vec c = testing::uniform_in_box(rng, Vec::Constant(set->dim(), -1.0), Vec::Constant(set->dim(), 1.0));
    const Support s = set->support_max(c);
    EXPECT_TRUE(set->contains(s.u, 1e-8));
    for (const Vec& v : members) EXPECT_GE(s.value + 1e-8, c.dot(v));
  }
}

TEST_P(SetProperties, ConvexitySmoke) {
  const auto set = test_sets()[GetParam()];
  const std::vector<Vec> members = set->sample_members(200, 5);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k + 1 < members.size(); k += 2) {
    const double a = unif(rng);
    EXPECT_TRUE(set->contains(a * members[k] + (1 - a) * members[k + 1], 1e-8));
  }
}

INSTANTIATE_TEST_SUITE_P(Sets, SetProperties, ::testing::Range(0, 4));

TEST(ConvexSet, SamplingIsDeterministic) {
  const auto qd = testing::quarter_disk();
  const auto a = qd->sample_members(10, 42);
  const auto b = qd->sample_members(10, 42);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(a[k], b[k]);
}

}  // namespace
}  // namespace nro
