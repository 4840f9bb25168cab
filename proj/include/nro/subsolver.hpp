#pragma once

#include <string>
#include <vector>

#include "nro/model.hpp"

namespace nro {

/// Dense smooth NLP:  min f(x)  s.t.  eq(x) = 0,  ineq(x) <= 0,  lower <= x <= upper.
/// Each entry of `eq`/`ineq` may be vector valued; rows are stacked in order.
struct NLP {
  int n = 0;
  SmoothFn objective;
  std::vector<SmoothFn> eq;
  std::vector<SmoothFn> ineq;
  Vec lower;
  Vec upper;
  Vec x0;
  // Optional warm-start multipliers (empty = none), stacked like the rows.
  Vec mult_eq0;
  Vec mult_ineq0;
  // Optional; nonzero marks a variable that enters every function linearly.
  std::vector<char> linear_vars;

  int eq_rows() const;
  int ineq_rows() const;
};

enum class NLPStatus { kOptimal, kInfeasible, kMaxIter, kEvaluationError };

std::string to_string(NLPStatus status);

/// Multiplier convention at a stationary point:
///   grad f + J_eq^T mult_eq + J_ineq^T mult_ineq + mult_bounds = 0,
/// with mult_ineq >= 0 and mult_bounds <= 0 on active lower bounds, >= 0 on upper ones.
struct NLPSolution {
  NLPStatus status = NLPStatus::kMaxIter;
  Vec x;
  Vec mult_eq;
  Vec mult_ineq;
  Vec mult_bounds;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  int iterations = 0;
  std::string message;
};

struct NLPOptions {
  double feasibility_tol = 1e-8;
  double stationarity_tol = 1e-8;
  int max_iter = 200;
  // "infeasible" once the elastic restoration has stalled this long above the threshold
  int infeasible_stall_iters = 20;
  double infeasible_violation = 1e-6;
  bool verbose = false;
  // Forward-difference Lagrangian Hessian shifted by hessian_shift * scale; false selects BFGS.
  bool exact_hessian = true;
  double hessian_shift = 1e-8;
};

/// SQP with a finite-difference Lagrangian Hessian (or damped BFGS), l1-penalty line search
/// with second-order correction, and an elastic mode that takes over when the linearized
/// constraints are inconsistent.
NLPSolution solve_nlp(const NLP& nlp, const NLPOptions& options = {});

}  // namespace nro
