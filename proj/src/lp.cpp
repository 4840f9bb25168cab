#include "nro/lp.hpp"

#include <algorithm>
#include <limits>

#include "nro/qp.hpp"

namespace nro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Phase 1: min s  s.t.  B u - s <= d,  s >= 0, started from u = 0.
Vec feasible_point(const Polytope& poly) {
  const int p = poly.dim();
  const int m = poly.rows();
  const Mat b = poly.B();
  const Vec d = poly.d();
  QPProblem qp;
  qp.H = Mat::Zero(p + 1, p + 1);
  qp.q = Vec::Zero(p + 1);
  qp.q(p) = 1.0;
  qp.A_eq = Mat::Zero(0, p + 1);
  qp.b_eq = Vec::Zero(0);
  qp.A_ineq = Mat(m, p + 1);
  qp.A_ineq.leftCols(p) = b;
  qp.A_ineq.col(p).setConstant(-1.0);
  qp.b_ineq = d;
  qp.lower = Vec::Constant(p + 1, -kInf);
  qp.upper = Vec::Constant(p + 1, kInf);
  qp.lower(p) = 0.0;
  Vec start = Vec::Zero(p + 1);
  start(p) = std::max(0.0, (-d).maxCoeff());
  const QPResult r = solve_qp(qp, start);
  if (r.status != QPStatus::kOptimal) throw Error("solve_lp: phase-1 problem failed");
  if (r.z(p) > 1e-9 * std::max(1.0, d.lpNorm<Eigen::Infinity>())) throw Error("solve_lp: polytope is empty");
  return r.z.head(p);
}

}  // namespace

LPResult solve_lp(const Vec& c, const Polytope& poly, Sense sense) {
  if (c.size() != poly.dim()) throw DimensionError("solve_lp: objective has the wrong dimension");
  if (poly.rows() == 0) throw Error("solve_lp: polytope has no rows");
  const int p = poly.dim();
  const Vec start = feasible_point(poly);
  QPProblem qp;
  qp.H = Mat::Zero(p, p);
  qp.q = sense == Sense::kMax ? Vec(-c) : c;
  qp.A_eq = Mat::Zero(0, p);
  qp.b_eq = Vec::Zero(0);
  qp.A_ineq = poly.B();
  qp.b_ineq = poly.d();
  qp.lower = Vec::Constant(p, -kInf);
  qp.upper = Vec::Constant(p, kInf);
  const QPResult r = solve_qp(qp, start);
  if (r.status == QPStatus::kUnbounded) throw Error("solve_lp: objective is unbounded over the polytope");
  if (r.status != QPStatus::kOptimal) throw Error("solve_lp: active-set iteration failed");
  LPResult out;
  out.u = r.z;
  out.value = c.dot(r.z);
  out.gamma = r.mult_ineq;
  return out;
}

}  // namespace nro
