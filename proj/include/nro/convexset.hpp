#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nro/model.hpp"
#include "nro/polytope.hpp"

namespace nro {

enum class ComponentTag { kGeneral, kBound, kEllipsoid, kHalfspace };

/// One convex scalar inequality g_j(u) <= 0 plus optional structure.
struct SetComponent {
  SmoothFn g;
  ComponentTag tag = ComponentTag::kGeneral;
  // kBound: u_index <= value (side = +1) or u_index >= value (side = -1)
  int index = -1;
  int side = 0;
  double value = 0.0;
  // kEllipsoid: sum_k ((u_{idx_k} - center_k) / radii_k)^2 - 1
  std::vector<int> indices;
  Vec center;
  Vec radii;
  // kHalfspace: a^T u - value
  Vec a;
};

struct Projection {
  Vec z;
  std::vector<int> active;  // components with g_j(z) = 0 (within tolerance)
  Vec mult;                 // 2 (z - y) + sum_j mult_j grad g_j(z) = 0, mult >= 0
};

struct Support {
  Vec u;
  double value = 0.0;
};

/// U = {u in R^p : g_j(u) <= 0 for all j}.
class ConvexSet {
 public:
  explicit ConvexSet(int dim);

  ConvexSet& add_general(SmoothFn g);
  ConvexSet& add_upper(int i, double value);
  ConvexSet& add_lower(int i, double value);
  ConvexSet& add_box(const Vec& lo, const Vec& hi);
  /// Axis-aligned ellipsoid on the coordinates `indices`; radii must be positive.
  ConvexSet& add_ellipsoid(std::vector<int> indices, Vec center, Vec radii);
  ConvexSet& add_halfspace(Vec a, double d);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(components_.size()); }
  const SetComponent& component(int j) const { return components_[j]; }

  Vec values(const Vec& u) const;
  Vec gradient(int j, const Vec& u) const;
  double max_violation(const Vec& u) const;
  bool contains(const Vec& u, double eps_set = 1e-8) const;

  /// True when projection and support have closed forms (bounds and ellipsoids on
  /// disjoint coordinate blocks, every coordinate bounded).
  bool structured() const { return structured_; }

  /// Detects a provably empty set (crossed bounds, or a phase-I solve with positive value).
  bool empty() const;

  Projection project(const Vec& y) const;
  Support support_max(const Vec& c) const;
  /// Axis-aligned box containing U, inflated by `margin`.
  Polytope bounding_box(double margin = 1e-9) const;
  Vec box_centroid() const;

  /// Rejection sampling inside the bounding box; deterministic for a fixed seed.
  std::vector<Vec> sample_members(int count, std::uint64_t seed) const;

 private:
  void refresh_structure();
  Projection project_structured(const Vec& y) const;
  Projection project_general(const Vec& y) const;
  Support support_general(const Vec& c) const;
  std::vector<int> active_components(const Vec& z) const;
  // Gauss-Newton steps on the free coordinates until the binding components vanish.
  void pull_to_boundary(const std::vector<int>& binding, const Vec& lower, const Vec& upper, Vec* z) const;

  int dim_;
  std::vector<SetComponent> components_;
  bool structured_ = true;
  // structured fast path data
  Vec lo_;
  Vec hi_;
  std::vector<int> block_of_;  // ellipsoid component per coordinate, -1 for box coordinates
};

}  // namespace nro
