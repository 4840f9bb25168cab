#pragma once

#include <string>
#include <vector>

#include "nro/model.hpp"

namespace nro {

class ConvexSet;

/// No valid separating cut exists at the requested point.
class DegenerateCutError : public Error {
 public:
  using Error::Error;
};

enum class Provenance { kInitialBox, kKelley, kProjection, kGradientFree };

std::string to_string(Provenance provenance);
Provenance provenance_from_string(const std::string& text);

/// a^T u <= d with ||a||_2 = 1.
struct Halfspace {
  Vec a;
  double d = 0.0;
  Provenance provenance = Provenance::kInitialBox;

  /// Scales (a, d) so that ||a|| = 1. Throws DegenerateCutError for a zero normal.
  static Halfspace normalized(const Vec& a, double d, Provenance provenance);
};

/// S = {u : B u <= d}. Rows are only ever appended.
class Polytope {
 public:
  Polytope() = default;
  explicit Polytope(int dim) : dim_(dim) {}

  /// {lo <= u <= hi}, stored as 2p rows: u_i <= hi_i then -u_i <= -lo_i.
  static Polytope box(const Vec& lo, const Vec& hi);

  int dim() const { return dim_; }
  int rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<Halfspace>& halfspaces() const { return rows_; }
  const Halfspace& row(int r) const { return rows_[r]; }

  Mat B() const;
  Vec d() const;

  /// max_r (a_r^T u - d_r); <= 0 inside.
  double max_violation(const Vec& u) const;
  bool contains(const Vec& u, double tol = 1e-9) const { return max_violation(u) <= tol; }

  /// Normalizes and appends; returns false for a duplicate row.
  bool append(const Halfspace& cut);
  /// Returns the number of rows actually added.
  int append_cuts(const std::vector<Halfspace>& cuts);

  /// Vertex enumeration by brute force; dim <= 4 only.
  std::vector<Vec> vertices(double tol = 1e-9) const;

 private:
  int dim_ = 0;
  std::vector<Halfspace> rows_;
};

/// One cut per violated component g_j at u (linearization at u).
std::vector<Halfspace> kelley_cut(const ConvexSet& set, const Vec& u);

/// One cut per active component at z = proj(u) that separates u.
std::vector<Halfspace> projection_cut(const ConvexSet& set, const Vec& u);

/// (u - z)^T v <= (u - z)^T z with z = proj(u).
Halfspace gradient_free_cut(const ConvexSet& set, const Vec& u);

}  // namespace nro
