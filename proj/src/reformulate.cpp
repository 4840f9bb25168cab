#include "nro/reformulate.hpp"

#include <algorithm>
#include <cmath>

#include "nro/convexset.hpp"
#include "nro/lp.hpp"

namespace nro {

RowTag ReformulationLayout::variable_tag(int j) const {
  for (std::size_t i = 0; i < gamma_offset.size(); ++i) {
    if (j >= gamma_offset[i] && j < gamma_offset[i] + gamma_size[i]) return {static_cast<int>(i), RowRole::kSign};
  }
  return {};
}

namespace {

// Embeds c(x) as a function of the full reformulation vector.
SmoothFn lift(const SmoothFn& c, int n, int total) {
  return SmoothFn(
      total, c.arity_out(), [c, n](const Vec& z) -> Vec { return c.eval(z.head(n)); },
      [c, n, total](const Vec& z) -> Mat {
        Mat j = Mat::Zero(c.arity_out(), total);
        j.leftCols(n) = c.jacobian(z.head(n));
        return j;
      });
}

}  // namespace

Reformulation build(const RobustProblem& problem, const std::vector<Polytope>& polytopes, bool phase1,
                    const Vec* warm_x, const NLPSolution* warm) {
  const int n = problem.n;
  const int count = static_cast<int>(problem.robust.size());
  if (static_cast<int>(polytopes.size()) != count) {
    throw DimensionError("reformulation: one polytope per robust constraint is required");
  }
  Reformulation out;
  ReformulationLayout& layout = out.layout;
  layout.n = n;
  layout.phase1 = phase1;
  int offset = n;
  int eq_row = 0;
  for (int i = 0; i < count; ++i) {
    const Polytope& poly = polytopes[i];
    if (poly.rows() == 0) throw DimensionError("reformulation: superset " + std::to_string(i) + " has no rows");
    if (poly.dim() != problem.robust[i].h.arity_out()) {
      throw DimensionError("reformulation: superset " + std::to_string(i) + " has the wrong dimension");
    }
    layout.gamma_offset.push_back(offset);
    layout.gamma_size.push_back(poly.rows());
    offset += poly.rows();
    layout.eq_offset.push_back(eq_row);
    eq_row += poly.dim();
  }
  if (phase1) layout.p_index = offset++;
  layout.total = offset;
  const int total = layout.total;
  const int p_index = layout.p_index;

  NLP& nlp = out.nlp;
  nlp.n = total;
  if (phase1) {
    Vec c = Vec::Zero(total);
    c(p_index) = 1.0;
    nlp.objective = SmoothFn::linear(c);
  } else {
    nlp.objective = lift(problem.f, n, total);
  }

  for (int i = 0; i < count; ++i) {
    const RobustConstraint& rc = problem.robust[i];
    const int g0 = layout.gamma_offset[i];
    const Vec d = polytopes[i].d();
    const Mat bt = polytopes[i].B().transpose();
    const SmoothFn b = rc.b;
    const SmoothFn h = rc.h;
    // gamma^T d - b(x) (- p) <= 0
    nlp.ineq.emplace_back(
        total, 1,
        [=](const Vec& z) -> Vec {
          double v = z.segment(g0, d.size()).dot(d) - b.value(z.head(n));
          if (p_index >= 0) v -= z(p_index);
          return Vec::Constant(1, v);
        },
        [=](const Vec& z) -> Mat {
          Mat j = Mat::Zero(1, total);
          j.block(0, 0, 1, n) = -b.jacobian(z.head(n));
          j.block(0, g0, 1, d.size()) = d.transpose();
          if (p_index >= 0) j(0, p_index) = -1.0;
          return j;
        });
    layout.ineq_rows.push_back({i, RowRole::kDualObjective});
    // h(x) - B^T gamma = 0
    const int pdim = static_cast<int>(bt.rows());
    nlp.eq.emplace_back(
        total, pdim, [=](const Vec& z) -> Vec { return h.eval(z.head(n)) - bt * z.segment(g0, d.size()); },
        [=](const Vec& z) -> Mat {
          Mat j = Mat::Zero(pdim, total);
          j.leftCols(n) = h.jacobian(z.head(n));
          j.block(0, g0, pdim, d.size()) = -bt;
          return j;
        });
    for (int r = 0; r < pdim; ++r) layout.eq_rows.push_back({i, RowRole::kDualEquality});
  }
  for (const DeterministicConstraint& dc : problem.deterministic) {
    const SmoothFn lifted = lift(dc.c, n, total);
    if (dc.kind == ConstraintKind::kEquality) {
      nlp.eq.push_back(lifted);
      for (int r = 0; r < dc.c.arity_out(); ++r) layout.eq_rows.push_back({});
    } else {
      nlp.ineq.push_back(lifted);
      for (int r = 0; r < dc.c.arity_out(); ++r) layout.ineq_rows.push_back({});
    }
  }

  nlp.linear_vars.assign(total, 1);
  std::fill(nlp.linear_vars.begin(), nlp.linear_vars.begin() + n, 0);
  nlp.lower = Vec::Zero(total);
  nlp.upper = Vec::Constant(total, kGammaUpper);
  nlp.lower.head(n) = problem.lower;
  nlp.upper.head(n) = problem.upper;
  if (phase1) nlp.upper(p_index) = 1e10;

  const Vec x0 = (warm_x != nullptr ? *warm_x : problem.x_nominal).cwiseMax(problem.lower).cwiseMin(problem.upper);
  nlp.x0 = Vec::Zero(total);
  nlp.x0.head(n) = x0;
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    const Vec hx = problem.robust[i].h.eval(x0);
    const LPResult lp = solve_lp(hx, polytopes[i], Sense::kMax);
    nlp.x0.segment(layout.gamma_offset[i], layout.gamma_size[i]) = lp.gamma.cwiseMin(kGammaUpper);
    worst = std::max(worst, lp.value - problem.robust[i].b.value(x0));
  }
  if (phase1) nlp.x0(p_index) = worst;

  if (warm != nullptr && warm->mult_eq.size() == nlp.eq_rows() && warm->mult_ineq.size() == nlp.ineq_rows()) {
    nlp.mult_eq0 = warm->mult_eq;
    nlp.mult_ineq0 = warm->mult_ineq;
  }
  return out;
}

SolutionPair recover_pair(const NLPSolution& sol, const ReformulationLayout& layout,
                          const std::vector<Polytope>& polytopes, const RobustProblem& problem) {
  const int count = static_cast<int>(problem.robust.size());
  SolutionPair pair;
  pair.x = sol.x.head(layout.n);
  if (layout.phase1) pair.p = sol.x(layout.p_index);
  double scale = 1.0;
  if (sol.mult_eq.size()) scale = std::max(scale, sol.mult_eq.lpNorm<Eigen::Infinity>());
  if (sol.mult_ineq.size()) scale = std::max(scale, sol.mult_ineq.lpNorm<Eigen::Infinity>());
  for (int i = 0; i < count; ++i) {
    const Vec gamma = sol.x.segment(layout.gamma_offset[i], layout.gamma_size[i]);
    if (gamma.maxCoeff() >= kGammaUpper * (1.0 - 1e-9)) {
      throw Error("recover_pair: dual variables of constraint " + std::to_string(i) + " reached their upper bound");
    }
    const double mu = sol.mult_ineq(i);
    const Vec v = sol.mult_eq.segment(layout.eq_offset[i], polytopes[i].dim());
    pair.lambda.push_back(mu);
    if (mu > kMuThreshold) {
      const Vec u = v / mu;
      const double viol = polytopes[i].max_violation(u);
      if (viol > 1e-6 * std::max(1.0, u.lpNorm<Eigen::Infinity>())) {
        throw MultiplierConsistencyError("recover_pair: v/mu violates superset " + std::to_string(i) + " by " +
                                         std::to_string(viol));
      }
      pair.u.push_back(u);
      pair.mu_zero.push_back(false);
    } else {
      if (v.lpNorm<Eigen::Infinity>() > 1e-6 * scale) {
        throw MultiplierConsistencyError("recover_pair: mu = 0 but the dual-equality multipliers of constraint " +
                                         std::to_string(i) + " do not vanish");
      }
      const ConvexSet& set = *problem.robust[i].uset;
      pair.u.push_back(set.project(set.box_centroid()).z);
      pair.mu_zero.push_back(true);
    }
  }
  return pair;
}

}  // namespace nro
