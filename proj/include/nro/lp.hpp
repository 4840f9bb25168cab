#pragma once

#include "nro/model.hpp"
#include "nro/polytope.hpp"

namespace nro {

enum class Sense { kMax, kMin };

struct LPResult {
  Vec u;
  double value = 0.0;
  // gamma >= 0 with B^T gamma = c (max) or B^T gamma = -c (min)
  Vec gamma;
};

/// Optimizes c^T u over a polytope. Throws Error for an empty polytope or an
/// unbounded direction.
LPResult solve_lp(const Vec& c, const Polytope& poly, Sense sense = Sense::kMax);

}  // namespace nro
