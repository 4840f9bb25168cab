#include "nro/algorithms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "nro/convexset.hpp"

namespace nro {

std::string to_string(CutStrategy strategy) {
  switch (strategy) {
    case CutStrategy::kKelley:
      return "kelley";
    case CutStrategy::kProjection:
      return "projection";
    case CutStrategy::kGradientFree:
      return "gradient-free";
    case CutStrategy::kHybrid:
      return "hybrid";
  }
  return "unknown";
}

CutStrategy cut_strategy_from_string(const std::string& text) {
  if (text == "kelley") return CutStrategy::kKelley;
  if (text == "projection") return CutStrategy::kProjection;
  if (text == "gradient-free") return CutStrategy::kGradientFree;
  if (text == "hybrid") return CutStrategy::kHybrid;
  throw Error("unknown cut strategy '" + text + "'");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasibleCertified:
      return "infeasible-certified";
    case SolveStatus::kStalled:
      return "stalled";
    case SolveStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double millis_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<Halfspace> make_cuts(const ConvexSet& set, const Vec& u, CutStrategy strategy) {
  switch (strategy) {
    case CutStrategy::kKelley:
      return kelley_cut(set, u);
    case CutStrategy::kProjection:
      return projection_cut(set, u);
    case CutStrategy::kGradientFree:
      return {gradient_free_cut(set, u)};
    case CutStrategy::kHybrid: {
      std::vector<Halfspace> cuts = projection_cut(set, u);
      if (set.project(u).active.size() >= 2) {
        const std::vector<Halfspace> extra = kelley_cut(set, u);
        cuts.insert(cuts.end(), extra.begin(), extra.end());
      }
      return cuts;
    }
  }
  return {};
}

void check_problem(const RobustProblem& problem) {
  std::ostringstream os;
  bool bad = false;
  for (const Violation& v : validate(problem)) {
    if (v.kind == ViolationKind::kEmptyUncertaintySet) continue;
    os << (bad ? "; " : "") << v.message;
    bad = true;
  }
  if (bad) throw Error("invalid problem: " + os.str());
}

struct ProjectedPair {
  double errm = 0.0;
  std::vector<Vec> z;  // projections of the non-degenerate u_i (empty vector otherwise)
};

ProjectedPair project_pair(const SolutionPair& pair, const RobustProblem& problem) {
  ProjectedPair out;
  for (std::size_t i = 0; i < pair.u.size(); ++i) {
    if (pair.mu_zero[i]) {
      out.z.emplace_back();
      continue;
    }
    const Vec z = problem.robust[i].uset->project(pair.u[i]).z;
    out.errm = std::max(out.errm, (pair.u[i] - z).norm());
    out.z.push_back(z);
  }
  return out;
}

std::vector<int> row_counts(const std::vector<Polytope>& polys) {
  std::vector<int> c;
  for (const Polytope& p : polys) c.push_back(p.rows());
  return c;
}

// Shared superset loop for the phase-I problem and the main problem.
struct LoopResult {
  SolveStatus status = SolveStatus::kIterationLimit;
  Vec x;
  double objective = 0.0;
  double errm = 0.0;
  double p = 0.0;
  bool restored = false;
  std::string message;
  std::vector<Polytope> polytopes;
  std::vector<IterateTrace> trace;
  std::vector<std::vector<Vec>> samples;
  std::optional<double> lower_bound;
  NLPSolution last;
};

LoopResult superset_loop(const RobustProblem& problem, std::vector<Polytope> polys, bool phase1, const Vec& x_start,
                         const SolverOptions& options, Clock::time_point start) {
  LoopResult out;
  out.samples.resize(problem.robust.size());
  Vec x_warm = x_start;
  NLPSolution warm;
  bool have_warm = false;
  double best_errm = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  std::optional<double> best_upper;

  auto finish = [&](SolveStatus status, const std::string& message) {
    out.status = status;
    out.message = message;
    out.polytopes = polys;
  };

  for (int k = 0; k < options.max_outer_iters; ++k) {
    const Reformulation ref = build(problem, polys, phase1, &x_warm, have_warm ? &warm : nullptr);
    const NLPSolution sol = solve_nlp(ref.nlp, options.nlp);
    if (sol.status != NLPStatus::kOptimal) {
      finish(SolveStatus::kStalled, "subsolver failure at k=" + std::to_string(k) + ": " + to_string(sol.status) +
                                        (sol.message.empty() ? "" : " (" + sol.message + ")"));
      return out;
    }
    SolutionPair pair;
    try {
      pair = recover_pair(sol, ref.layout, polys, problem);
    } catch (const Error& e) {
      finish(SolveStatus::kStalled, e.what());
      return out;
    }
    warm = sol;
    have_warm = true;
    x_warm = pair.x;
    out.last = sol;
    out.x = pair.x;
    out.p = pair.p;
    out.objective = phase1 ? pair.p : problem.f.value(pair.x);

    const ProjectedPair proj = project_pair(pair, problem);
    out.errm = proj.errm;
    for (std::size_t i = 0; i < proj.z.size(); ++i) {
      if (proj.z[i].size() > 0) out.samples[i].push_back(proj.z[i]);
    }

    IterateTrace tr;
    tr.k = k;
    tr.phase = phase1 ? "phase1" : "superset";
    tr.objective = out.objective;
    tr.errm = out.errm;
    tr.worst_violation = worst_violation(problem, pair.x);
    tr.x = pair.x;
    tr.lambda = pair.lambda;
    tr.u = pair.u;
    tr.p = pair.p;
    if (!phase1) {
      best_upper = best_upper ? std::min(*best_upper, out.objective) : out.objective;
      tr.upper_bound = best_upper;
    }

    bool done = false;
    if (phase1 && pair.p <= 1e-8) {
      out.restored = true;
      done = true;
      finish(SolveStatus::kOptimal, "feasible point found");
    } else if (out.errm <= options.epsilon) {
      done = true;
      finish(phase1 ? SolveStatus::kInfeasibleCertified : SolveStatus::kOptimal,
             phase1 ? "phase-I stationary point with positive slack" : "converged");
    }
    const bool want_lb = !phase1 && options.compute_lower_bound &&
                         (done || (options.lower_bound_every > 0 && k % options.lower_bound_every == 0));
    if (want_lb) {
      try {
        tr.lower_bound = lower_bound(problem, out.samples, options.nlp);
        out.lower_bound = tr.lower_bound;
      } catch (const Error&) {
        // a failed bound solve leaves the bound unreported
      }
    }

    if (!done) {
      int added = 0;
      try {
        for (std::size_t i = 0; i < pair.u.size(); ++i) {
          if (pair.mu_zero[i]) continue;
          const ConvexSet& set = *problem.robust[i].uset;
          if (set.contains(pair.u[i])) continue;
          added += polys[i].append_cuts(make_cuts(set, pair.u[i], options.cut_strategy));
        }
      } catch (const DegenerateCutError& e) {
        done = true;
        finish(SolveStatus::kStalled, std::string("degenerate cut: ") + e.what());
      }
      if (!done && added == 0) {
        done = true;
        finish(SolveStatus::kStalled, "no cut could be generated while errm > epsilon");
      }
      if (!done) {
        if (out.errm < best_errm - 1e-12) {
          best_errm = out.errm;
          since_improvement = 0;
        } else if (++since_improvement >= 25) {
          done = true;
          finish(SolveStatus::kStalled, "errm plateau over 25 iterations");
        }
      }
    }
    tr.cut_counts = row_counts(polys);
    if (options.log_geometry) tr.geometry = polys;
    tr.wall_millis = millis_since(start);
    if (options.trace_sink) options.trace_sink(tr);
    out.trace.push_back(std::move(tr));
    if (done) return out;
  }
  finish(SolveStatus::kIterationLimit, "outer iteration limit reached");
  return out;
}

}  // namespace

ErrmBreakdown errm_full(const RobustProblem& problem, const Vec& x, const std::vector<ErrmPoints>& pairs,
                        const Vec* side_gradient) {
  if (pairs.size() != problem.robust.size()) throw DimensionError("errm_full: one entry per robust constraint");
  ErrmBreakdown e;
  Vec grad = problem.f.gradient(x);
  if (side_gradient != nullptr) grad += *side_gradient;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const RobustConstraint& rc = problem.robust[i];
    const ErrmPoints& a = pairs[i];
    if (a.lambda.size() != a.points.size()) throw DimensionError("errm_full: lambda and points differ in size");
    const Mat jh = rc.h.jacobian(x);
    const Vec gb = rc.b.gradient(x);
    const Vec hx = rc.h.eval(x);
    const double bx = rc.b.value(x);
    for (std::size_t s = 0; s < a.points.size(); ++s) {
      const Vec& u = a.points[s];
      grad += a.lambda[s] * (jh.transpose() * u - gb);
      e.negativity += std::max(0.0, -a.lambda[s]);
      e.activity += std::abs(u.dot(hx) - bx);
      e.distance += (u - rc.uset->project(u).z).norm();
    }
    e.violation += std::max(0.0, rc.uset->support_max(hx).value - bx);
  }
  e.stationarity = grad.norm();
  e.total = e.stationarity + e.violation + e.negativity + e.activity + e.distance;
  return e;
}

double errm_superset(const SolutionPair& pair, const RobustProblem& problem) {
  return project_pair(pair, problem).errm;
}

double worst_violation(const RobustProblem& problem, const Vec& x) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const RobustConstraint& rc : problem.robust) {
    worst = std::max(worst, rc.uset->support_max(rc.h.eval(x)).value - rc.b.value(x));
  }
  return problem.robust.empty() ? 0.0 : worst;
}

double errm_polak(const RobustProblem& problem, const Vec& x) { return std::max(0.0, worst_violation(problem, x)); }

Vec nominal_sample(const RobustProblem& problem, int i) {
  const ConvexSet& set = *problem.robust.at(i).uset;
  return set.project(set.box_centroid()).z;
}

NLPSolution solve_sample_problem(const RobustProblem& problem, const std::vector<std::vector<Vec>>& samples,
                                 const Vec& x0, const NLPOptions& options) {
  if (samples.size() != problem.robust.size()) throw DimensionError("sample problem: one sample list per constraint");
  const int n = problem.n;
  NLP nlp;
  nlp.n = n;
  nlp.objective = problem.f;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].empty()) continue;
    const RobustConstraint& rc = problem.robust[i];
    Mat u(samples[i].size(), rc.h.arity_out());
    for (std::size_t s = 0; s < samples[i].size(); ++s) u.row(s) = samples[i][s].transpose();
    const SmoothFn h = rc.h;
    const SmoothFn b = rc.b;
    const int rows = static_cast<int>(u.rows());
    nlp.ineq.emplace_back(
        n, rows, [=](const Vec& x) -> Vec { return u * h.eval(x) - Vec::Constant(rows, b.value(x)); },
        [=](const Vec& x) -> Mat {
          Mat j = u * h.jacobian(x);
          j.rowwise() -= b.gradient(x).transpose();
          return j;
        });
  }
  for (const DeterministicConstraint& dc : problem.deterministic) {
    (dc.kind == ConstraintKind::kEquality ? nlp.eq : nlp.ineq).push_back(dc.c);
  }
  nlp.lower = problem.lower;
  nlp.upper = problem.upper;
  nlp.x0 = x0.cwiseMax(problem.lower).cwiseMin(problem.upper);
  return solve_nlp(nlp, options);
}

double lower_bound(const RobustProblem& problem, const std::vector<std::vector<Vec>>& samples,
                   const NLPOptions& options) {
  std::vector<std::vector<Vec>> all = samples;
  all.resize(problem.robust.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i].push_back(nominal_sample(problem, static_cast<int>(i)));
  const NLPSolution sol = solve_sample_problem(problem, all, problem.x_nominal, options);
  if (sol.status != NLPStatus::kOptimal) throw Error("lower_bound: sample problem failed (" + to_string(sol.status) + ")");
  return sol.objective;
}

SolveResult polak_solve(const RobustProblem& original, const SolverOptions& options) {
  const auto start = Clock::now();
  check_problem(original);
  const RobustProblem problem = drop_vacuous_constraints(original);
  const int count = static_cast<int>(problem.robust.size());
  SolveResult result;
  result.samples.resize(count);
  for (int i = 0; i < count; ++i) result.samples[i].push_back(nominal_sample(problem, i));

  Vec x = problem.x_nominal;
  for (int k = 0; k < options.max_outer_iters; ++k) {
    const NLPSolution sol = solve_sample_problem(problem, result.samples, x, options.nlp);
    result.iterations = k + 1;
    if (sol.status == NLPStatus::kInfeasible) {
      result.status = SolveStatus::kInfeasibleCertified;
      result.infeasibility_p = sol.constraint_violation;
      result.x = sol.x;
      result.message = "sample problem infeasible at k=" + std::to_string(k);
      break;
    }
    if (sol.status != NLPStatus::kOptimal) {
      result.status = SolveStatus::kStalled;
      result.x = sol.x;
      result.message = "subsolver failure at k=" + std::to_string(k) + ": " + to_string(sol.status);
      break;
    }
    x = sol.x;
    IterateTrace tr;
    tr.k = k;
    tr.phase = "polak";
    tr.objective = sol.objective;
    tr.x = x;
    tr.lower_bound = sol.objective;
    double t_max = problem.robust.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
    std::vector<Vec> worst(count);
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i) {
      const RobustConstraint& rc = problem.robust[i];
      const Support s = rc.uset->support_max(rc.h.eval(x));
      t[i] = s.value - rc.b.value(x);
      worst[i] = s.u;
      t_max = std::max(t_max, t[i]);
    }
    tr.worst_violation = t_max;
    tr.errm = std::max(0.0, t_max);
    tr.u = worst;
    result.x = x;
    result.objective = sol.objective;
    result.errm = tr.errm;
    result.lower_bound = sol.objective;
    const bool done = t_max <= options.epsilon;
    if (!done) {
      for (int i = 0; i < count; ++i) {
        if (t[i] > options.epsilon) result.samples[i].push_back(worst[i]);
      }
    }
    for (int i = 0; i < count; ++i) tr.cut_counts.push_back(static_cast<int>(result.samples[i].size()));
    tr.wall_millis = millis_since(start);
    if (options.trace_sink) options.trace_sink(tr);
    result.trace.push_back(std::move(tr));
    if (done) {
      result.status = SolveStatus::kOptimal;
      result.upper_bound = sol.objective;
      result.message = "converged";
      break;
    }
    if (k + 1 == options.max_outer_iters) {
      result.status = SolveStatus::kIterationLimit;
      result.message = "outer iteration limit reached";
    }
  }
  result.millis = millis_since(start);
  return result;
}

RestorationResult feasibility_restoration(const RobustProblem& problem, std::vector<Polytope> boxes,
                                          const SolverOptions& options) {
  const auto start = Clock::now();
  LoopResult loop = superset_loop(problem, std::move(boxes), true, problem.x_nominal, options, start);
  RestorationResult r;
  r.x = loop.x;
  r.p = loop.p;
  r.feasible = loop.restored;
  r.stalled = !loop.restored && loop.status != SolveStatus::kInfeasibleCertified;
  r.message = loop.message;
  r.polytopes = std::move(loop.polytopes);
  r.trace = std::move(loop.trace);
  r.last = std::move(loop.last);
  return r;
}

SolveResult superset_solve(const RobustProblem& original, const SolverOptions& options) {
  const auto start = Clock::now();
  check_problem(original);
  const RobustProblem problem = drop_vacuous_constraints(original);
  const int count = static_cast<int>(problem.robust.size());
  std::vector<Polytope> polys;
  if (options.initial_supersets) {
    polys = *options.initial_supersets;
    if (static_cast<int>(polys.size()) != count) throw DimensionError("initial_supersets: one per robust constraint");
  } else {
    for (const RobustConstraint& rc : problem.robust) polys.push_back(rc.uset->bounding_box());
  }

  SolveResult result;
  RestorationResult fr = feasibility_restoration(problem, polys, options);
  result.restoration_trace = fr.trace;
  if (!fr.feasible) {
    result.x = fr.x;
    result.polytopes = fr.polytopes;
    result.objective = problem.f.value(fr.x);
    result.iterations = 0;
    if (fr.stalled) {
      result.status = SolveStatus::kStalled;
      result.message = "feasibility restoration: " + fr.message;
    } else {
      result.status = SolveStatus::kInfeasibleCertified;
      result.infeasibility_p = fr.p;
      result.errm = fr.trace.empty() ? 0.0 : fr.trace.back().errm;
      result.message = fr.message;
    }
    result.millis = millis_since(start);
    return result;
  }

  LoopResult loop = superset_loop(problem, fr.polytopes, false, fr.x, options, start);
  result.status = loop.status;
  result.x = loop.x;
  result.objective = loop.objective;
  result.errm = loop.errm;
  result.message = loop.message;
  result.polytopes = std::move(loop.polytopes);
  result.samples = std::move(loop.samples);
  result.iterations = static_cast<int>(loop.trace.size());
  if (!loop.trace.empty()) result.upper_bound = loop.trace.back().upper_bound;
  result.lower_bound = loop.lower_bound;
  result.trace = std::move(loop.trace);
  result.millis = millis_since(start);
  return result;
}

}  // namespace nro
