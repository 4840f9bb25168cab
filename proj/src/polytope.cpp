#include "nro/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>

#include "nro/convexset.hpp"

namespace nro {

std::string to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kInitialBox:
      return "initial-box";
    case Provenance::kKelley:
      return "kelley";
    case Provenance::kProjection:
      return "proj-cut";
    case Provenance::kGradientFree:
      return "grad-free";
  }
  return "unknown";
}

Provenance provenance_from_string(const std::string& text) {
  if (text == "initial-box") return Provenance::kInitialBox;
  if (text == "kelley") return Provenance::kKelley;
  if (text == "proj-cut") return Provenance::kProjection;
  if (text == "grad-free") return Provenance::kGradientFree;
  throw Error("unknown cut provenance '" + text + "'");
}

Halfspace Halfspace::normalized(const Vec& a, double d, Provenance provenance) {
  const double norm = a.norm();
  if (!(norm > 1e-300) || !std::isfinite(norm) || !std::isfinite(d)) {
    throw DegenerateCutError("halfspace with zero or non-finite normal");
  }
  return {a / norm, d / norm, provenance};
}

Polytope Polytope::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size()) throw DimensionError("Polytope::box: size mismatch");
  const int p = static_cast<int>(lo.size());
  Polytope poly(p);
  for (int i = 0; i < p; ++i) {
    Vec e = Vec::Zero(p);
    e(i) = 1.0;
    poly.rows_.push_back({e, hi(i), Provenance::kInitialBox});
    poly.rows_.push_back({-e, -lo(i), Provenance::kInitialBox});
  }
  return poly;
}

Mat Polytope::B() const {
  Mat b(rows(), dim_);
  for (int r = 0; r < rows(); ++r) b.row(r) = rows_[r].a.transpose();
  return b;
}

Vec Polytope::d() const {
  Vec d(rows());
  for (int r = 0; r < rows(); ++r) d(r) = rows_[r].d;
  return d;
}

double Polytope::max_violation(const Vec& u) const {
  if (u.size() != dim_) throw DimensionError("Polytope: point has the wrong dimension");
  double v = -std::numeric_limits<double>::infinity();
  for (const Halfspace& h : rows_) v = std::max(v, h.a.dot(u) - h.d);
  return v;
}

bool Polytope::append(const Halfspace& cut) {
  if (cut.a.size() != dim_) throw DimensionError("Polytope::append: cut has the wrong dimension");
  const Halfspace h = Halfspace::normalized(cut.a, cut.d, cut.provenance);
  for (const Halfspace& r : rows_) {
    if (r.a.dot(h.a) > 1.0 - 1e-10 && std::abs(r.d - h.d) < 1e-10) return false;
  }
  rows_.push_back(h);
  return true;
}

int Polytope::append_cuts(const std::vector<Halfspace>& cuts) {
  int added = 0;
  for (const Halfspace& c : cuts) added += append(c) ? 1 : 0;
  return added;
}

std::vector<Vec> Polytope::vertices(double tol) const {
  if (dim_ > 4) throw DimensionError("Polytope::vertices: only dimension <= 4 is supported");
  std::vector<Vec> out;
  const int m = rows();
  std::vector<int> pick(dim_);
  std::function<void(int, int)> rec = [&](int depth, int start) {
    if (depth == dim_) {
      Mat a(dim_, dim_);
      Vec d(dim_);
      for (int k = 0; k < dim_; ++k) {
        a.row(k) = rows_[pick[k]].a.transpose();
        d(k) = rows_[pick[k]].d;
      }
      Eigen::FullPivLU<Mat> lu(a);
      if (lu.rank() < dim_) return;
      const Vec v = lu.solve(d);
      if (max_violation(v) > tol * std::max(1.0, v.lpNorm<Eigen::Infinity>())) return;
      for (const Vec& w : out) {
        if ((w - v).lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, v.lpNorm<Eigen::Infinity>())) return;
      }
      out.push_back(v);
      return;
    }
    for (int r = start; r < m; ++r) {
      pick[depth] = r;
      rec(depth + 1, r + 1);
    }
  };
  rec(0, 0);
  return out;
}

std::vector<Halfspace> kelley_cut(const ConvexSet& set, const Vec& u) {
  const Vec g = set.values(u);
  std::vector<Halfspace> cuts;
  bool violated = false;
  for (int j = 0; j < set.size(); ++j) {
    if (g(j) <= 0.0) continue;
    violated = true;
    const Vec grad = set.gradient(j, u);
    if (grad.norm() <= 1e-14) continue;
    cuts.push_back(Halfspace::normalized(grad, grad.dot(u) - g(j), Provenance::kKelley));
  }
  if (!violated) throw DegenerateCutError("kelley_cut: point lies inside the set");
  if (cuts.empty()) throw DegenerateCutError("kelley_cut: every violated component has a zero gradient");
  return cuts;
}

std::vector<Halfspace> projection_cut(const ConvexSet& set, const Vec& u) {
  const Projection proj = set.project(u);
  if ((u - proj.z).norm() <= 1e-14 * std::max(1.0, u.norm())) {
    throw DegenerateCutError("projection_cut: point lies inside the set");
  }
  std::vector<Halfspace> cuts;
  for (int j : proj.active) {
    const Vec grad = set.gradient(j, proj.z);
    if (grad.norm() <= 1e-14) continue;
    const Halfspace h =
        Halfspace::normalized(grad, grad.dot(proj.z) - set.component(j).g.value(proj.z), Provenance::kProjection);
    if (h.a.dot(u) - h.d > 1e-12 * std::max(1.0, std::abs(h.d))) cuts.push_back(h);
  }
  if (cuts.empty()) throw DegenerateCutError("projection_cut: no active component separates the point");
  return cuts;
}

Halfspace gradient_free_cut(const ConvexSet& set, const Vec& u) {
  const Projection proj = set.project(u);
  const Vec w = u - proj.z;
  if (w.norm() <= 1e-8) throw DegenerateCutError("gradient_free_cut: point is within 1e-8 of the set");
  return Halfspace::normalized(w, w.dot(proj.z), Provenance::kGradientFree);
}

}  // namespace nro
