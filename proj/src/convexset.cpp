#include "nro/convexset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "nro/subsolver.hpp"

namespace nro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Stand-in for a missing coordinate bound inside the general-path subproblems.
constexpr double kFarBound = 1e8;

Vec unit(int p, int i, double sign = 1.0) {
  Vec e = Vec::Zero(p);
  e(i) = sign;
  return e;
}

}  // namespace

ConvexSet::ConvexSet(int dim) : dim_(dim) {
  if (dim <= 0) throw DimensionError("ConvexSet: dimension must be positive");
  refresh_structure();
}

ConvexSet& ConvexSet::add_general(SmoothFn g) {
  if (g.arity_in() != dim_ || g.arity_out() != 1) {
    throw DimensionError("ConvexSet::add_general: component must map R^p -> R");
  }
  SetComponent c;
  c.g = std::move(g);
  components_.push_back(std::move(c));
  refresh_structure();
  return *this;
}

ConvexSet& ConvexSet::add_upper(int i, double value) {
  if (i < 0 || i >= dim_) throw DimensionError("ConvexSet::add_upper: index out of range");
  SetComponent c;
  c.tag = ComponentTag::kBound;
  c.index = i;
  c.side = 1;
  c.value = value;
  c.g = SmoothFn::linear(unit(dim_, i), -value);
  components_.push_back(std::move(c));
  refresh_structure();
  return *this;
}

ConvexSet& ConvexSet::add_lower(int i, double value) {
  if (i < 0 || i >= dim_) throw DimensionError("ConvexSet::add_lower: index out of range");
  SetComponent c;
  c.tag = ComponentTag::kBound;
  c.index = i;
  c.side = -1;
  c.value = value;
  c.g = SmoothFn::linear(unit(dim_, i, -1.0), value);
  components_.push_back(std::move(c));
  refresh_structure();
  return *this;
}

ConvexSet& ConvexSet::add_box(const Vec& lo, const Vec& hi) {
  if (lo.size() != dim_ || hi.size() != dim_) throw DimensionError("ConvexSet::add_box: size mismatch");
  for (int i = 0; i < dim_; ++i) {
    add_lower(i, lo(i));
    add_upper(i, hi(i));
  }
  return *this;
}

ConvexSet& ConvexSet::add_ellipsoid(std::vector<int> indices, Vec center, Vec radii) {
  const int k = static_cast<int>(indices.size());
  if (k == 0 || center.size() != k || radii.size() != k) {
    throw DimensionError("ConvexSet::add_ellipsoid: inconsistent sizes");
  }
  for (int t = 0; t < k; ++t) {
    if (indices[t] < 0 || indices[t] >= dim_) throw DimensionError("ConvexSet::add_ellipsoid: index out of range");
    if (!(radii(t) > 0.0)) throw DimensionError("ConvexSet::add_ellipsoid: radii must be positive");
  }
  const int p = dim_;
  auto eval = [indices, center, radii](const Vec& u) -> Vec {
    double s = -1.0;
    for (std::size_t t = 0; t < indices.size(); ++t) {
      const double w = (u(indices[t]) - center(t)) / radii(t);
      s += w * w;
    }
    return Vec::Constant(1, s);
  };
  auto jac = [indices, center, radii, p](const Vec& u) -> Mat {
    Mat j = Mat::Zero(1, p);
    for (std::size_t t = 0; t < indices.size(); ++t) {
      j(0, indices[t]) = 2.0 * (u(indices[t]) - center(t)) / (radii(t) * radii(t));
    }
    return j;
  };
  SetComponent c;
  c.tag = ComponentTag::kEllipsoid;
  c.g = SmoothFn(p, 1, eval, jac);
  c.indices = std::move(indices);
  c.center = std::move(center);
  c.radii = std::move(radii);
  components_.push_back(std::move(c));
  refresh_structure();
  return *this;
}

ConvexSet& ConvexSet::add_halfspace(Vec a, double d) {
  if (a.size() != dim_) throw DimensionError("ConvexSet::add_halfspace: size mismatch");
  SetComponent c;
  c.tag = ComponentTag::kHalfspace;
  c.g = SmoothFn::linear(a, -d);
  c.a = std::move(a);
  c.value = d;
  components_.push_back(std::move(c));
  refresh_structure();
  return *this;
}

void ConvexSet::refresh_structure() {
  lo_ = Vec::Constant(dim_, -kInf);
  hi_ = Vec::Constant(dim_, kInf);
  block_of_.assign(dim_, -1);
  structured_ = true;
  std::vector<char> has_bound(dim_, 0);
  for (int j = 0; j < size(); ++j) {
    const SetComponent& c = components_[j];
    switch (c.tag) {
      case ComponentTag::kBound:
        has_bound[c.index] = 1;
        if (c.side > 0) {
          hi_(c.index) = std::min(hi_(c.index), c.value);
        } else {
          lo_(c.index) = std::max(lo_(c.index), c.value);
        }
        break;
      case ComponentTag::kEllipsoid:
        for (int i : c.indices) {
          if (block_of_[i] >= 0) structured_ = false;
          block_of_[i] = j;
        }
        break;
      default:
        structured_ = false;
    }
  }
  for (int i = 0; i < dim_; ++i) {
    if (block_of_[i] >= 0 && has_bound[i]) structured_ = false;
    if (block_of_[i] < 0 && (!std::isfinite(lo_(i)) || !std::isfinite(hi_(i)))) structured_ = false;
  }
  if (!structured_) block_of_.assign(dim_, -1);
}

Vec ConvexSet::values(const Vec& u) const {
  if (u.size() != dim_) throw DimensionError("ConvexSet: point has the wrong dimension");
  Vec v(size());
  for (int j = 0; j < size(); ++j) v(j) = components_[j].g.value(u);
  return v;
}

Vec ConvexSet::gradient(int j, const Vec& u) const { return components_.at(j).g.gradient(u); }

double ConvexSet::max_violation(const Vec& u) const {
  if (size() == 0) return -kInf;
  return values(u).maxCoeff();
}

bool ConvexSet::contains(const Vec& u, double eps_set) const { return max_violation(u) <= eps_set; }

bool ConvexSet::empty() const {
  for (int i = 0; i < dim_; ++i) {
    if (lo_(i) > hi_(i)) return true;
  }
  if (structured_ || size() == 0) return false;
  // phase-I:  min s  s.t.  g_j(u) <= s
  NLP nlp;
  nlp.n = dim_ + 1;
  const int n = nlp.n;
  nlp.objective = SmoothFn::linear(unit(n, dim_));
  for (int j = 0; j < size(); ++j) {
    if (components_[j].tag == ComponentTag::kBound) continue;
    const SmoothFn& g = components_[j].g;
    const int p = dim_;
    nlp.ineq.emplace_back(
        n, 1, [g, p](const Vec& x) -> Vec { return Vec::Constant(1, g.value(x.head(p)) - x(p)); },
        [g, p](const Vec& x) -> Mat {
          Mat jm(1, p + 1);
          jm.leftCols(p) = g.jacobian(x.head(p));
          jm(0, p) = -1.0;
          return jm;
        });
  }
  nlp.lower = Vec(n);
  nlp.upper = Vec(n);
  for (int i = 0; i < dim_; ++i) {
    nlp.lower(i) = std::isfinite(lo_(i)) ? lo_(i) : -kFarBound;
    nlp.upper(i) = std::isfinite(hi_(i)) ? hi_(i) : kFarBound;
  }
  nlp.lower(dim_) = -1.0;
  nlp.upper(dim_) = kFarBound;
  nlp.x0 = Vec::Zero(n);
  nlp.x0.head(dim_) = Vec::Zero(dim_).cwiseMax(nlp.lower.head(dim_)).cwiseMin(nlp.upper.head(dim_));
  nlp.x0(dim_) = std::max(0.0, max_violation(nlp.x0.head(dim_)));
  const NLPSolution sol = solve_nlp(nlp);
  return sol.x(dim_) > 1e-8;
}

std::vector<int> ConvexSet::active_components(const Vec& z) const {
  std::vector<int> active;
  const Vec g = values(z);
  for (int j = 0; j < size(); ++j) {
    if (g(j) >= -1e-9) active.push_back(j);
  }
  return active;
}

Projection ConvexSet::project(const Vec& y) const {
  if (y.size() != dim_) throw DimensionError("ConvexSet::project: point has the wrong dimension");
  if (size() == 0) return {y, {}, Vec()};
  if (structured_) return project_structured(y);
  if (max_violation(y) <= 0.0) {
    Projection p{y, {}, Vec::Zero(size())};
    const Vec g = values(y);
    for (int j = 0; j < size(); ++j) {
      if (g(j) >= 0.0) p.active.push_back(j);
    }
    return p;
  }
  return project_general(y);
}

Projection ConvexSet::project_structured(const Vec& y) const {
  Projection p;
  p.z = y;
  p.mult = Vec::Zero(size());
  for (int i = 0; i < dim_; ++i) {
    if (block_of_[i] < 0) p.z(i) = std::clamp(y(i), lo_(i), hi_(i));
  }
  for (int j = 0; j < size(); ++j) {
    const SetComponent& c = components_[j];
    if (c.tag != ComponentTag::kEllipsoid) continue;
    const int k = static_cast<int>(c.indices.size());
    Vec w(k);
    for (int t = 0; t < k; ++t) w(t) = y(c.indices[t]) - c.center(t);
    const Vec r2 = c.radii.cwiseProduct(c.radii);
    if (w.cwiseQuotient(c.radii).squaredNorm() <= 1.0) continue;
    // phi(t) = sum w^2 r^2 / (r^2 + t)^2 - 1 is convex and decreasing; Newton from t = 0
    // increases monotonically to the root.
    double t = 0.0;
    for (int it = 0; it < 500; ++it) {
      double phi = -1.0;
      double dphi = 0.0;
      for (int s = 0; s < k; ++s) {
        const double q = r2(s) + t;
        const double term = w(s) * w(s) * r2(s) / (q * q);
        phi += term;
        dphi -= 2.0 * term / q;
      }
      if (phi <= 1e-15 || dphi >= 0.0) break;
      const double step = -phi / dphi;
      t += step;
      if (step <= 1e-16 * t) break;
    }
    for (int s = 0; s < k; ++s) p.z(c.indices[s]) = c.center(s) + w(s) * r2(s) / (r2(s) + t);
    p.mult(j) = t;
  }
  const Vec g = values(p.z);
  for (int j = 0; j < size(); ++j) {
    const SetComponent& c = components_[j];
    if (c.tag == ComponentTag::kBound) {
      const bool tight = (c.side > 0) ? p.z(c.index) >= c.value : p.z(c.index) <= c.value;
      if (!tight) continue;
      p.active.push_back(j);
      // the first tight duplicate carries the multiplier
      const double m = 2.0 * c.side * (y(c.index) - p.z(c.index));
      bool taken = false;
      for (int q : p.active) {
        const SetComponent& o = components_[q];
        if (q != j && o.tag == ComponentTag::kBound && o.index == c.index && o.side == c.side) taken = true;
      }
      if (!taken) p.mult(j) = std::max(0.0, m);
    } else if (g(j) >= -1e-12 || p.mult(j) > 0.0) {
      p.active.push_back(j);
    }
  }
  return p;
}

Projection ConvexSet::project_general(const Vec& y) const {
  NLP nlp;
  nlp.n = dim_;
  nlp.objective = SmoothFn(
      dim_, 1, [y](const Vec& u) -> Vec { return Vec::Constant(1, (u - y).squaredNorm()); },
      [y](const Vec& u) -> Mat { return 2.0 * (u - y).transpose(); });
  std::vector<int> general;
  for (int j = 0; j < size(); ++j) {
    if (components_[j].tag == ComponentTag::kBound) continue;
    general.push_back(j);
    nlp.ineq.push_back(components_[j].g);
  }
  nlp.lower = Vec(dim_);
  nlp.upper = Vec(dim_);
  for (int i = 0; i < dim_; ++i) {
    nlp.lower(i) = std::isfinite(lo_(i)) ? lo_(i) : -kFarBound;
    nlp.upper(i) = std::isfinite(hi_(i)) ? hi_(i) : kFarBound;
  }
  nlp.x0 = y.cwiseMax(nlp.lower).cwiseMin(nlp.upper);
  const NLPSolution sol = solve_nlp(nlp);
  if (sol.status != NLPStatus::kOptimal && sol.constraint_violation > 1e-6) {
    throw Error("ConvexSet::project: subproblem failed (" + to_string(sol.status) + ")");
  }
  Vec z = sol.x;

  std::vector<int> binding;
  for (int k = 0; k < static_cast<int>(general.size()); ++k) {
    if (sol.mult_ineq(k) > 0.0 || components_[general[k]].g.value(z) > -1e-9) binding.push_back(general[k]);
  }
  pull_to_boundary(binding, nlp.lower, nlp.upper, &z);

  Projection p;
  p.z = z;
  p.active = active_components(z);
  p.mult = Vec::Zero(size());
  if (!p.active.empty()) {
    Mat grads(dim_, p.active.size());
    for (std::size_t k = 0; k < p.active.size(); ++k) grads.col(k) = gradient(p.active[k], z);
    const Vec lam = grads.completeOrthogonalDecomposition().solve(Vec(-2.0 * (z - y)));
    for (std::size_t k = 0; k < p.active.size(); ++k) p.mult(p.active[k]) = std::max(0.0, lam(k));
  }
  return p;
}

Support ConvexSet::support_max(const Vec& c) const {
  if (c.size() != dim_) throw DimensionError("ConvexSet::support_max: direction has the wrong dimension");
  if (structured_) {
    Support s;
    s.u = Vec::Zero(dim_);
    for (int i = 0; i < dim_; ++i) {
      if (block_of_[i] >= 0) continue;
      if (c(i) > 0.0) {
        s.u(i) = hi_(i);
      } else if (c(i) < 0.0) {
        s.u(i) = lo_(i);
      } else {
        s.u(i) = 0.5 * (lo_(i) + hi_(i));
      }
    }
    for (const SetComponent& comp : components_) {
      if (comp.tag != ComponentTag::kEllipsoid) continue;
      const int k = static_cast<int>(comp.indices.size());
      Vec rc(k);
      for (int t = 0; t < k; ++t) rc(t) = comp.radii(t) * c(comp.indices[t]);
      const double norm = rc.norm();
      for (int t = 0; t < k; ++t) {
        s.u(comp.indices[t]) = comp.center(t) + (norm > 0.0 ? comp.radii(t) * rc(t) / norm : 0.0);
      }
    }
    s.value = c.dot(s.u);
    return s;
  }
  if (c.lpNorm<Eigen::Infinity>() == 0.0) {
    const Vec u = project(box_centroid()).z;
    return {u, 0.0};
  }
  return support_general(c);
}

void ConvexSet::pull_to_boundary(const std::vector<int>& binding, const Vec& lower, const Vec& upper,
                                 Vec* z) const {
  for (int it = 0; it < 3 && !binding.empty(); ++it) {
    std::vector<int> free_idx;
    for (int i = 0; i < dim_; ++i) {
      if ((*z)(i) > lower(i) && (*z)(i) < upper(i)) free_idx.push_back(i);
    }
    if (free_idx.empty()) break;
    Mat a(binding.size(), free_idx.size());
    Vec r(binding.size());
    for (std::size_t k = 0; k < binding.size(); ++k) {
      const Vec grad = gradient(binding[k], *z);
      for (std::size_t c = 0; c < free_idx.size(); ++c) a(k, c) = grad(free_idx[c]);
      r(k) = -components_[binding[k]].g.value(*z);
    }
    if (r.lpNorm<Eigen::Infinity>() <= 1e-15) break;
    const Vec dz = a.completeOrthogonalDecomposition().solve(r);
    if (!dz.allFinite() || dz.lpNorm<Eigen::Infinity>() > 1e-4) break;
    for (std::size_t c = 0; c < free_idx.size(); ++c) {
      (*z)(free_idx[c]) = std::clamp((*z)(free_idx[c]) + dz(c), lower(free_idx[c]), upper(free_idx[c]));
    }
  }
}

Support ConvexSet::support_general(const Vec& c) const {
  NLP nlp;
  nlp.n = dim_;
  nlp.objective = SmoothFn::linear(-c);
  for (const SetComponent& comp : components_) {
    if (comp.tag != ComponentTag::kBound) nlp.ineq.push_back(comp.g);
  }
  nlp.lower = Vec(dim_);
  nlp.upper = Vec(dim_);
  for (int i = 0; i < dim_; ++i) {
    nlp.lower(i) = std::isfinite(lo_(i)) ? lo_(i) : -kFarBound;
    nlp.upper(i) = std::isfinite(hi_(i)) ? hi_(i) : kFarBound;
  }
  nlp.x0 = Vec::Zero(dim_).cwiseMax(nlp.lower).cwiseMin(nlp.upper);
  const NLPSolution sol = solve_nlp(nlp);
  std::vector<int> general;
  for (int j = 0; j < size(); ++j) {
    if (components_[j].tag != ComponentTag::kBound) general.push_back(j);
  }
  if (sol.status != NLPStatus::kOptimal && sol.constraint_violation > 1e-6) {
    throw Error("ConvexSet::support_max: subproblem failed (" + to_string(sol.status) + ")");
  }
  for (int i = 0; i < dim_; ++i) {
    const bool far_lo = !std::isfinite(lo_(i)) && sol.x(i) <= -0.5 * kFarBound;
    const bool far_hi = !std::isfinite(hi_(i)) && sol.x(i) >= 0.5 * kFarBound;
    if (far_lo || far_hi) throw Error("ConvexSet::support_max: set is unbounded in this direction");
  }
  Vec u = sol.x;
  std::vector<int> binding;
  for (std::size_t k = 0; k < general.size(); ++k) {
    if (sol.mult_ineq(k) > 0.0 || components_[general[k]].g.value(u) > -1e-9) binding.push_back(general[k]);
  }
  pull_to_boundary(binding, nlp.lower, nlp.upper, &u);
  return {u, c.dot(u)};
}

Polytope ConvexSet::bounding_box(double margin) const {
  Vec lo(dim_);
  Vec hi(dim_);
  if (structured_) {
    lo = lo_;
    hi = hi_;
    for (const SetComponent& comp : components_) {
      if (comp.tag != ComponentTag::kEllipsoid) continue;
      for (std::size_t t = 0; t < comp.indices.size(); ++t) {
        lo(comp.indices[t]) = comp.center(t) - comp.radii(t);
        hi(comp.indices[t]) = comp.center(t) + comp.radii(t);
      }
    }
  } else {
    for (int i = 0; i < dim_; ++i) {
      hi(i) = support_general(unit(dim_, i)).value;
      lo(i) = -support_general(unit(dim_, i, -1.0)).value;
    }
  }
  return Polytope::box(lo.array() - margin, hi.array() + margin);
}

Vec ConvexSet::box_centroid() const {
  const Polytope box = bounding_box(0.0);
  Vec lo(dim_);
  Vec hi(dim_);
  for (int i = 0; i < dim_; ++i) {
    hi(i) = box.row(2 * i).d;
    lo(i) = -box.row(2 * i + 1).d;
  }
  return 0.5 * (lo + hi);
}

std::vector<Vec> ConvexSet::sample_members(int count, std::uint64_t seed) const {
  const Polytope box = bounding_box(0.0);
  Vec lo(dim_);
  Vec hi(dim_);
  for (int i = 0; i < dim_; ++i) {
    hi(i) = box.row(2 * i).d;
    lo(i) = -box.row(2 * i + 1).d;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(count);
  const long long max_tries = 2000LL * std::max(count, 1) + 100000;
  long long tries = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++tries > max_tries) throw Error("ConvexSet::sample_members: acceptance rate too low");
    Vec u(dim_);
    for (int i = 0; i < dim_; ++i) u(i) = lo(i) + (hi(i) - lo(i)) * unif(rng);
    if (contains(u, 0.0)) out.push_back(std::move(u));
  }
  return out;
}

}  // namespace nro
