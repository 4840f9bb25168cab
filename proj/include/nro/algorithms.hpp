#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nro/model.hpp"
#include "nro/polytope.hpp"
#include "nro/reformulate.hpp"
#include "nro/subsolver.hpp"

namespace nro {

enum class CutStrategy { kKelley, kProjection, kGradientFree, kHybrid };

std::string to_string(CutStrategy strategy);
CutStrategy cut_strategy_from_string(const std::string& text);

struct IterateTrace {
  int k = 0;
  std::string phase;  // "phase1", "superset" or "polak"
  double objective = 0.0;
  double errm = 0.0;
  std::vector<int> cut_counts;      // rows (superset) or samples (polak) per constraint
  double worst_violation = 0.0;     // max_i (max_{u in U_i} u^T h_i(x) - b_i(x))
  std::optional<double> upper_bound;
  std::optional<double> lower_bound;
  double wall_millis = 0.0;
  Vec x;
  std::vector<double> lambda;
  std::vector<Vec> u;
  double p = 0.0;                   // phase-I slack
  // Supersets after this iteration's cuts; filled only when geometry logging is on.
  std::vector<Polytope> geometry;
};

struct SolverOptions {
  double epsilon = 1e-5;
  int max_outer_iters = 200;
  CutStrategy cut_strategy = CutStrategy::kProjection;
  bool compute_lower_bound = true;
  int lower_bound_every = 5;
  std::uint64_t seed = 0;
  bool log_geometry = false;
  // Replaces the bounding boxes as S_0 (one polytope per robust constraint).
  std::optional<std::vector<Polytope>> initial_supersets;
  std::function<void(const IterateTrace&)> trace_sink;
  NLPOptions nlp;
};

enum class SolveStatus { kOptimal, kInfeasibleCertified, kStalled, kIterationLimit };

std::string to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::kIterationLimit;
  Vec x;
  double objective = 0.0;
  double errm = 0.0;
  std::optional<double> upper_bound;
  std::optional<double> lower_bound;
  std::optional<double> infeasibility_p;
  int iterations = 0;
  double millis = 0.0;
  std::string message;
  std::vector<IterateTrace> trace;
  std::vector<IterateTrace> restoration_trace;
  std::vector<Polytope> polytopes;        // superset path
  std::vector<std::vector<Vec>> samples;  // polak path, and projection samples of the superset path
};

struct ErrmBreakdown {
  double stationarity = 0.0;  // norm of the Lagrangian gradient
  double violation = 0.0;     // robust violation
  double negativity = 0.0;    // negative multipliers
  double activity = 0.0;      // complementarity
  double distance = 0.0;      // distance of the points to U
  double total = 0.0;
};

/// Finite point sets with multipliers, one entry per robust constraint.
struct ErrmPoints {
  std::vector<double> lambda;
  std::vector<Vec> points;
};

/// Full first-order error. `side_gradient` (optional) is added inside the stationarity
/// norm, e.g. the multiplier terms of deterministic constraints and bounds.
ErrmBreakdown errm_full(const RobustProblem& problem, const Vec& x, const std::vector<ErrmPoints>& pairs,
                        const Vec* side_gradient = nullptr);

/// max_i ||u_i - proj_{U_i}(u_i)||, with mu_zero constraints contributing 0.
double errm_superset(const SolutionPair& pair, const RobustProblem& problem);

/// max_i [max_{u in U_i} u^T h_i(x) - b_i(x)]^+.
double errm_polak(const RobustProblem& problem, const Vec& x);

/// max_i (max_{u in U_i} u^T h_i(x) - b_i(x)), without the positive part.
double worst_violation(const RobustProblem& problem, const Vec& x);

/// min f subject to u^T h_i(x) <= b_i(x) for every listed sample.
NLPSolution solve_sample_problem(const RobustProblem& problem, const std::vector<std::vector<Vec>>& samples,
                                 const Vec& x0, const NLPOptions& options = {});

SolveResult polak_solve(const RobustProblem& problem, const SolverOptions& options = {});

struct RestorationResult {
  Vec x;
  double p = 0.0;
  bool feasible = false;  // p reached 0
  bool stalled = false;
  std::string message;
  std::vector<Polytope> polytopes;
  std::vector<IterateTrace> trace;
  NLPSolution last;
};

RestorationResult feasibility_restoration(const RobustProblem& problem, std::vector<Polytope> boxes,
                                          const SolverOptions& options = {});

SolveResult superset_solve(const RobustProblem& problem, const SolverOptions& options = {});

/// Objective of the sample problem over `samples` plus each set's nominal member.
double lower_bound(const RobustProblem& problem, const std::vector<std::vector<Vec>>& samples,
                   const NLPOptions& options = {});

/// project(U_i, centroid of the bounding box of U_i).
Vec nominal_sample(const RobustProblem& problem, int i);

}  // namespace nro
