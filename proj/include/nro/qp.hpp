#pragma once

#include <vector>

#include "nro/model.hpp"

namespace nro {

/// min 1/2 z^T H z + q^T z  s.t.  A_eq z = b_eq,  A_ineq z <= b_ineq,  lower <= z <= upper.
/// H must be positive semidefinite. Bounds may be infinite.
struct QPProblem {
  Mat H;
  Vec q;
  Mat A_eq;
  Vec b_eq;
  Mat A_ineq;
  Vec b_ineq;
  Vec lower;
  Vec upper;

  int n() const { return static_cast<int>(q.size()); }
};

/// Working set used to warm start the active-set iteration.
struct QPWorkingSet {
  std::vector<int> active_ineq;
  // -1 fixed at lower bound, +1 fixed at upper bound, 0 free
  std::vector<signed char> bound_state;
};

enum class QPStatus { kOptimal, kInfeasibleStart, kInfeasible, kUnbounded, kMaxIter };

struct QPResult {
  QPStatus status = QPStatus::kMaxIter;
  Vec z;
  // q + H z + A_eq^T mult_eq + A_ineq^T mult_ineq + mult_bounds = 0
  Vec mult_eq;
  Vec mult_ineq;    // >= 0
  Vec mult_bounds;  // <= 0 at lower bounds, >= 0 at upper bounds
  double objective = 0.0;
  int iterations = 0;
  QPWorkingSet working_set;
};

struct QPOptions {
  int max_iter = 0;              // 0 selects 50 + 5 (n + m)
  double feasibility_tol = 1e-9;  // relative to row scale
};

/// Primal active-set method started from a feasible point. Equality rows are always
/// in the working set; `guess` seeds inequality rows and fixed bounds that are tight at
/// `start`. Zero-curvature faces are traversed along the projected gradient, so H = 0
/// (linear programs) takes the same path.
QPResult solve_qp(const QPProblem& qp, const Vec& start, const QPWorkingSet* guess = nullptr,
                  const QPOptions& options = {});

/// Dual active-set method for positive definite H; needs no feasible start. Reports
/// kInfeasible for inconsistent constraints and kUnbounded when H is not positive definite.
/// `hold` (-1/+1 per variable) predicts bounds active at the solution; those variables are
/// eliminated and released again when their bound multiplier has the wrong sign.
QPResult solve_qp_dual(const QPProblem& qp, const QPOptions& options = {},
                       const std::vector<signed char>* hold = nullptr);

}  // namespace nro
