#include "nro/model.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "nro/convexset.hpp"

namespace nro {

SmoothFn::SmoothFn(int arity_in, int arity_out, EvalFn eval, JacobianFn jacobian)
    : arity_in_(arity_in), arity_out_(arity_out), eval_(std::move(eval)), jacobian_(std::move(jacobian)) {
  if (arity_in <= 0 || arity_out <= 0) throw DimensionError("SmoothFn: arities must be positive");
}

Vec SmoothFn::eval(const Vec& x) const {
  if (x.size() != arity_in_) throw DimensionError("SmoothFn::eval: input size mismatch");
  Vec v = eval_(x);
  if (v.size() != arity_out_) throw DimensionError("SmoothFn::eval: output size mismatch");
  if (!v.allFinite()) throw EvaluationError("SmoothFn::eval: non-finite value");
  return v;
}

Mat SmoothFn::jacobian(const Vec& x) const {
  if (x.size() != arity_in_) throw DimensionError("SmoothFn::jacobian: input size mismatch");
  Mat j = jacobian_(x);
  if (j.rows() != arity_out_ || j.cols() != arity_in_) {
    throw DimensionError("SmoothFn::jacobian: shape mismatch");
  }
  if (!j.allFinite()) throw EvaluationError("SmoothFn::jacobian: non-finite value");
  return j;
}

SmoothFn SmoothFn::affine(Mat a, Vec b) {
  const int in = static_cast<int>(a.cols());
  const int out = static_cast<int>(a.rows());
  if (b.size() != out) throw DimensionError("SmoothFn::affine: offset size mismatch");
  return SmoothFn(
      in, out, [a, b](const Vec& x) -> Vec { return a * x + b; }, [a](const Vec&) -> Mat { return a; });
}

SmoothFn SmoothFn::linear(Vec c, double c0) {
  Mat a = c.transpose();
  return affine(std::move(a), Vec::Constant(1, c0));
}

SmoothFn SmoothFn::constant(int arity_in, Vec value) {
  Mat zero = Mat::Zero(value.size(), arity_in);
  return affine(std::move(zero), std::move(value));
}

double robust_residual(const RobustProblem& problem, int i, const Vec& x, const Vec& u) {
  const RobustConstraint& rc = problem.robust.at(i);
  if (u.size() != rc.h.arity_out()) throw DimensionError("robust_residual: u has the wrong dimension");
  try {
    const double r = u.dot(rc.h.eval(x)) - rc.b.value(x);
    if (!std::isfinite(r)) throw EvaluationError("non-finite residual");
    return r;
  } catch (const EvaluationError& e) {
    std::ostringstream os;
    os.precision(17);
    os << "robust_residual: constraint " << i << " at x = [" << x.transpose() << "], u = ["
       << u.transpose() << "]: " << e.what();
    throw EvaluationError(os.str());
  }
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kDimensionMismatch:
      return "dimension-mismatch";
    case ViolationKind::kBadBounds:
      return "bad-bounds";
    case ViolationKind::kNominalOutsideBounds:
      return "nominal-outside-bounds";
    case ViolationKind::kEmptyUncertaintySet:
      return "empty-uncertainty-set";
    case ViolationKind::kMissingFunction:
      return "missing-function";
  }
  return "unknown";
}

namespace {

void check_fn(const SmoothFn& fn, int n, int out, int index, const std::string& what,
              std::vector<Violation>* report) {
  if (fn.empty()) {
    report->push_back({ViolationKind::kMissingFunction, index, what + " is not set"});
    return;
  }
  if (fn.arity_in() != n) {
    report->push_back({ViolationKind::kDimensionMismatch, index,
                       what + " takes " + std::to_string(fn.arity_in()) + " inputs, expected " +
                           std::to_string(n)});
  }
  if (out > 0 && fn.arity_out() != out) {
    report->push_back({ViolationKind::kDimensionMismatch, index,
                       what + " returns " + std::to_string(fn.arity_out()) + " values, expected " +
                           std::to_string(out)});
  }
}

}  // namespace

std::vector<Violation> validate(const RobustProblem& problem) {
  std::vector<Violation> report;
  const int n = problem.n;
  if (n <= 0) {
    report.push_back({ViolationKind::kDimensionMismatch, -1, "n must be positive"});
    return report;
  }
  check_fn(problem.f, n, 1, -1, "objective", &report);
  if (problem.lower.size() != n || problem.upper.size() != n) {
    report.push_back({ViolationKind::kBadBounds, -1, "bounds must have n entries"});
  } else {
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(problem.lower(j)) || !std::isfinite(problem.upper(j))) {
        report.push_back({ViolationKind::kBadBounds, -1, "bound on x" + std::to_string(j) + " is not finite"});
      } else if (problem.lower(j) > problem.upper(j)) {
        report.push_back({ViolationKind::kBadBounds, -1, "empty bound interval on x" + std::to_string(j)});
      }
    }
    if (problem.x_nominal.size() != n) {
      report.push_back({ViolationKind::kDimensionMismatch, -1, "x_nominal must have n entries"});
    } else {
      for (int j = 0; j < n; ++j) {
        if (problem.x_nominal(j) < problem.lower(j) || problem.x_nominal(j) > problem.upper(j)) {
          report.push_back({ViolationKind::kNominalOutsideBounds, -1,
                            "x_nominal(" + std::to_string(j) + ") lies outside its bounds"});
        }
      }
    }
  }
  for (int i = 0; i < static_cast<int>(problem.robust.size()); ++i) {
    const RobustConstraint& rc = problem.robust[i];
    const std::string tag = "robust constraint " + std::to_string(i);
    check_fn(rc.h, n, 0, i, tag + " h", &report);
    check_fn(rc.b, n, 1, i, tag + " b", &report);
    if (!rc.uset) {
      report.push_back({ViolationKind::kMissingFunction, i, tag + " has no uncertainty set"});
      continue;
    }
    if (!rc.h.empty() && rc.uset->dim() != rc.h.arity_out()) {
      report.push_back({ViolationKind::kDimensionMismatch, i,
                        tag + ": uncertainty set has dimension " + std::to_string(rc.uset->dim()) +
                            " but h returns " + std::to_string(rc.h.arity_out()) + " values"});
      continue;
    }
    if (rc.uset->empty()) {
      report.push_back({ViolationKind::kEmptyUncertaintySet, i, tag + ": uncertainty set is empty"});
    }
  }
  for (int i = 0; i < static_cast<int>(problem.deterministic.size()); ++i) {
    check_fn(problem.deterministic[i].c, n, 0, -1, "deterministic constraint " + std::to_string(i), &report);
  }
  return report;
}

RobustProblem drop_vacuous_constraints(const RobustProblem& problem) {
  RobustProblem out = problem;
  out.robust.clear();
  for (int i = 0; i < static_cast<int>(problem.robust.size()); ++i) {
    const RobustConstraint& rc = problem.robust[i];
    if (rc.uset && rc.uset->empty()) {
      std::cerr << "warning: robust constraint " << i << (rc.label.empty() ? "" : " (" + rc.label + ")")
                << " has an empty uncertainty set and is dropped\n";
      continue;
    }
    out.robust.push_back(rc);
  }
  return out;
}

}  // namespace nro
