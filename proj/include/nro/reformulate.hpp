#pragma once

#include <vector>

#include "nro/model.hpp"
#include "nro/polytope.hpp"
#include "nro/subsolver.hpp"

namespace nro {

/// The subsolver returned multipliers that do not describe a point of the superset.
class MultiplierConsistencyError : public Error {
 public:
  using Error::Error;
};

enum class RowRole { kDualObjective, kDualEquality, kSign, kDeterministic };

struct RowTag {
  int constraint = -1;  // robust constraint index, -1 for deterministic rows
  RowRole role = RowRole::kDeterministic;
};

/// Variable order: x (n), gamma_0, ..., gamma_{I-1}, then p when phase1.
/// Inequality rows: one dual-objective row per robust constraint, then deterministic rows.
/// Equality rows: p_i dual-equality rows per robust constraint, then deterministic rows.
struct ReformulationLayout {
  int n = 0;
  std::vector<int> gamma_offset;
  std::vector<int> gamma_size;
  bool phase1 = false;
  int p_index = -1;
  int total = 0;
  std::vector<int> eq_offset;  // first dual-equality row of each robust constraint
  std::vector<RowTag> ineq_rows;
  std::vector<RowTag> eq_rows;

  /// Role of a variable bound: kSign for gamma entries, kDeterministic otherwise.
  RowTag variable_tag(int j) const;
};

constexpr double kGammaUpper = 1e6;
constexpr double kMuThreshold = 1e-7;

struct Reformulation {
  NLP nlp;
  ReformulationLayout layout;
};

/// Builds the dualized reformulation over the given supersets. The start point is
/// `warm_x` (or x_nominal); gamma is initialized with the LP dual of max h(x)^T u over
/// each superset, so the dual equalities hold exactly at the start.
Reformulation build(const RobustProblem& problem, const std::vector<Polytope>& polytopes, bool phase1,
                    const Vec* warm_x = nullptr, const NLPSolution* warm = nullptr);

struct SolutionPair {
  Vec x;
  std::vector<double> lambda;
  std::vector<Vec> u;
  std::vector<bool> mu_zero;
  double p = 0.0;  // phase-I slack (0 otherwise)
};

SolutionPair recover_pair(const NLPSolution& sol, const ReformulationLayout& layout,
                          const std::vector<Polytope>& polytopes, const RobustProblem& problem);

}  // namespace nro
