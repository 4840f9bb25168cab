#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nro {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A callable produced a NaN or infinite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent sizes between functions, sets and variables.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A vector-valued C^1 map R^in -> R^out with an analytic Jacobian.
class SmoothFn {
 public:
  using EvalFn = std::function<Vec(const Vec&)>;
  using JacobianFn = std::function<Mat(const Vec&)>;

  SmoothFn() = default;
  SmoothFn(int arity_in, int arity_out, EvalFn eval, JacobianFn jacobian);

  int arity_in() const { return arity_in_; }
  int arity_out() const { return arity_out_; }
  bool empty() const { return !eval_; }

  /// Throws EvaluationError on non-finite output.
  Vec eval(const Vec& x) const;
  /// (arity_out x arity_in); throws EvaluationError on non-finite output.
  Mat jacobian(const Vec& x) const;

  // Convenience for scalar functions (arity_out == 1).
  double value(const Vec& x) const { return eval(x)(0); }
  Vec gradient(const Vec& x) const { return jacobian(x).row(0).transpose(); }

  /// x -> A x + b.
  static SmoothFn affine(Mat a, Vec b);
  /// x -> c^T x + c0 (scalar).
  static SmoothFn linear(Vec c, double c0 = 0.0);
  static SmoothFn constant(int arity_in, Vec value);

 private:
  int arity_in_ = 0;
  int arity_out_ = 0;
  EvalFn eval_;
  JacobianFn jacobian_;
};

class ConvexSet;

/// u^T h(x) <= b(x) for every u in the uncertainty set.
struct RobustConstraint {
  SmoothFn h;  // R^n -> R^p
  SmoothFn b;  // R^n -> R
  std::shared_ptr<const ConvexSet> uset;
  std::string label;
};

enum class ConstraintKind { kEquality, kInequality };

/// c(x) = 0 or c(x) <= 0, componentwise.
struct DeterministicConstraint {
  SmoothFn c;
  ConstraintKind kind = ConstraintKind::kInequality;
  std::string label;
};

struct RobustProblem {
  std::string name;
  int n = 0;
  SmoothFn f;
  std::vector<RobustConstraint> robust;
  std::vector<DeterministicConstraint> deterministic;
  Vec lower;
  Vec upper;
  Vec x_nominal;
};

/// u^T h_i(x) - b_i(x). Throws EvaluationError carrying (i, x, u) on non-finite values.
double robust_residual(const RobustProblem& problem, int i, const Vec& x, const Vec& u);

enum class ViolationKind {
  kDimensionMismatch,
  kBadBounds,
  kNominalOutsideBounds,
  kEmptyUncertaintySet,
  kMissingFunction,
};

struct Violation {
  ViolationKind kind;
  int constraint = -1;  // robust constraint index, -1 when not applicable
  std::string message;
};

std::string to_string(ViolationKind kind);

/// Mechanical checks: dimensions, finite nonempty bounds, nominal point, nonempty sets.
std::vector<Violation> validate(const RobustProblem& problem);

/// Copy of the problem without robust constraints whose uncertainty set is empty.
/// Each dropped constraint is logged as a warning to stderr.
RobustProblem drop_vacuous_constraints(const RobustProblem& problem);

}  // namespace nro
