#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nro/convexset.hpp"
#include "nro/lp.hpp"
#include "nro/polytope.hpp"
#include "test_support.hpp"

namespace nro {
namespace {

using testing::vec2;

void expect_cut(const Halfspace& h, const Vec& a, double d, double tol) {
  const double norm = a.norm();
  EXPECT_NEAR(h.a(0), a(0) / norm, tol);
  EXPECT_NEAR(h.a(1), a(1) / norm, tol);
  EXPECT_NEAR(h.d, d / norm, tol);
}

TEST(KelleyCut, SpecExamples) {
  const auto qd = testing::quarter_disk();
  auto cuts = kelley_cut(*qd, vec2(1, 2));
  ASSERT_EQ(cuts.size(), 1u);
  expect_cut(cuts[0], vec2(1, 2), 3.0, 1e-14);
  EXPECT_EQ(cuts[0].provenance, Provenance::kKelley);
  cuts = kelley_cut(*testing::unit_disk(), vec2(2, 0));
  ASSERT_EQ(cuts.size(), 1u);
  expect_cut(cuts[0], vec2(1, 0), 1.25, 1e-14);
  cuts = kelley_cut(*qd, vec2(1, 1));
  ASSERT_EQ(cuts.size(), 1u);
  expect_cut(cuts[0], vec2(1, 1), 1.5, 1e-14);
  EXPECT_THROW(kelley_cut(*qd, vec2(0.2, 0.2)), DegenerateCutError);
}

TEST(KelleyCut, OneCutPerViolatedComponent) {
  const auto qd = testing::quarter_disk();
  // (-2, -0.5) violates the disk and both sign constraints
  const auto cuts = kelley_cut(*qd, vec2(-2, -0.5));
  EXPECT_EQ(cuts.size(), 3u);
}

TEST(ProjectionCut, SpecExamples) {
  const auto qd = testing::quarter_disk();
  auto cuts = projection_cut(*qd, vec2(1, 2));
  ASSERT_EQ(cuts.size(), 1u);
  expect_cut(cuts[0], vec2(1, 2), std::sqrt(5.0), 1e-8);
  cuts = projection_cut(*qd, vec2(2, 0));
  ASSERT_GE(cuts.size(), 1u);
  expect_cut(cuts[0], vec2(1, 0), 1.0, 1e-8);
  cuts = projection_cut(*qd, vec2(1, 1));
  ASSERT_EQ(cuts.size(), 1u);
  expect_cut(cuts[0], vec2(1, 1), std::sqrt(2.0), 1e-8);
}

TEST(GradientFreeCut, SpecExamples) {
  const auto qd = testing::quarter_disk();
  expect_cut(gradient_free_cut(*qd, vec2(1, 2)), vec2(1, 2), std::sqrt(5.0), 1e-8);
  expect_cut(gradient_free_cut(*testing::unit_disk(), vec2(2, 0)), vec2(1, 0), 1.0, 1e-8);
  ConvexSet box(2);
  box.add_box(Vec::Zero(2), Vec::Ones(2));
  expect_cut(gradient_free_cut(box, vec2(2, 2)), vec2(1, 1), 2.0, 1e-12);
  EXPECT_THROW(gradient_free_cut(box, vec2(0.5, 0.5)), DegenerateCutError);
}

TEST(Polytope, AppendAndDuplicates) {
  Polytope s0 = Polytope::box(Vec::Zero(2), vec2(1, 2));
  EXPECT_TRUE(s0.append(Halfspace::normalized(vec2(1, 2), 3.0, Provenance::kKelley)));
  EXPECT_EQ(s0.rows(), 5);
  EXPECT_FALSE(s0.append({vec2(2, 4), 6.0, Provenance::kKelley}));
  EXPECT_EQ(s0.rows(), 5);
  for (const Halfspace& h : s0.halfspaces()) EXPECT_NEAR(h.a.norm(), 1.0, 1e-15);
  const int added = s0.append_cuts({Halfspace::normalized(vec2(1, 0), 0.9, Provenance::kKelley),
                                    Halfspace::normalized(vec2(0, 1), 1.9, Provenance::kKelley)});
  EXPECT_EQ(added, 2);
}

TEST(Polytope, Vertices) {
  EXPECT_EQ(Polytope::box(Vec::Zero(2), Vec::Ones(2)).vertices().size(), 4u);
  Polytope s0 = Polytope::box(Vec::Zero(2), vec2(1, 2));
  s0.append(Halfspace::normalized(vec2(1, 2), 3.0, Provenance::kKelley));
  const auto v = s0.vertices();
  ASSERT_EQ(v.size(), 4u);
  const std::vector<Vec> expected = {vec2(0, 0), vec2(1, 0), vec2(0, 1.5), vec2(1, 1)};
  for (const Vec& e : expected) {
    bool found = false;
    for (const Vec& w : v) found = found || (w - e).norm() < 1e-12;
    EXPECT_TRUE(found) << e.transpose();
  }
  Polytope tri(2);
  tri.append(Halfspace::normalized(vec2(-1, 0), 0, Provenance::kKelley));
  tri.append(Halfspace::normalized(vec2(0, -1), 0, Provenance::kKelley));
  tri.append(Halfspace::normalized(vec2(1, 1), 1, Provenance::kKelley));
  EXPECT_EQ(tri.vertices().size(), 3u);
  EXPECT_THROW(Polytope(5).vertices(), DimensionError);
}

std::vector<std::shared_ptr<ConvexSet>> cut_sets() {
  auto ell = std::make_shared<ConvexSet>(3);
  ell->add_ellipsoid({0, 1, 2}, (Vec(3) << 10, 5, 1).finished(), (Vec(3) << 7, 3.5, 0.7).finished());
  auto box = std::make_shared<ConvexSet>(2);
  box->add_box(Vec::Zero(2), Vec::Ones(2));
  return {testing::quarter_disk(), ell, box};
}

// Validity, exclusion, tightness and monotone shrinkage for all three cut families.
TEST(Cuts, PropertySuite) {
  const auto sets = cut_sets();
  std::mt19937_64 rng(2024);
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const ConvexSet& set = *sets[s];
    const auto members = set.sample_members(1000, 7 + s);
    const Polytope box = set.bounding_box();
    Vec lo(set.dim());
    Vec hi(set.dim());
    for (int i = 0; i < set.dim(); ++i) {
      const double w = box.row(2 * i).d + box.row(2 * i + 1).d;
      hi(i) = box.row(2 * i).d + w;
      lo(i) = -box.row(2 * i + 1).d - w;
    }
    Polytope poly = box;
    int generated = 0;
    while (generated < 20) {
      const Vec u = testing::uniform_in_box(rng, lo, hi);
      if (set.contains(u, 1e-6)) continue;
      ++generated;
      std::vector<Halfspace> cuts = kelley_cut(set, u);
      const Projection proj = set.project(u);
      const std::vector<Halfspace> pc = projection_cut(set, u);
      const Halfspace gf = gradient_free_cut(set, u);
      for (const Halfspace& h : pc) EXPECT_NEAR(h.a.dot(proj.z), h.d, 1e-9);
      EXPECT_NEAR(gf.a.dot(proj.z), gf.d, 1e-9);
      cuts.insert(cuts.end(), pc.begin(), pc.end());
      cuts.push_back(gf);
      for (const Halfspace& h : cuts) {
        EXPECT_GT(h.a.dot(u) - h.d, 1e-10);
        double worst = -1e300;
        for (const Vec& v : members) worst = std::max(worst, h.a.dot(v) - h.d);
        EXPECT_LE(worst, 1e-8);
      }
      const Polytope before = poly;
      poly.append_cuts(cuts);
      for (int t = 0; t < 50; ++t) {
        const Vec w = testing::uniform_in_box(rng, lo, hi);
        if (poly.contains(w)) EXPECT_TRUE(before.contains(w));
      }
    }
  }
}

// The LP optimum over a bounded polytope equals the best vertex.
TEST(SolveLp, DualityAgainstVertexEnumeration) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 1 + trial % 4;
    Polytope poly = Polytope::box(Vec::Constant(p, -2.0), Vec::Constant(p, 2.0));
    for (int k = 0; k < 6; ++k) {
      Vec a(p);
      for (int i = 0; i < p; ++i) a(i) = normal(rng);
      poly.append(Halfspace::normalized(a, 0.5 + std::abs(normal(rng)), Provenance::kKelley));
    }
    Vec c(p);
    for (int i = 0; i < p; ++i) c(i) = normal(rng);
    const LPResult lp = solve_lp(c, poly);
    double best = -1e300;
    for (const Vec& v : poly.vertices()) best = std::max(best, c.dot(v));
    EXPECT_NEAR(lp.value, best, 1e-8) << "trial " << trial;
    EXPECT_NEAR(lp.gamma.dot(poly.d()), best, 1e-8);
    EXPECT_LE((poly.B().transpose() * lp.gamma - c).norm(), 1e-9);
    EXPECT_GE(lp.gamma.minCoeff(), 0.0);
  }
}

}  // namespace
}  // namespace nro
