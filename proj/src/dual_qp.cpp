#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nro/qp.hpp"

namespace nro {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Goldfarb-Idnani dual active set with the J = L^{-T} Q, R factor pair.
// Constraint ids: -(r+1) equality row r; [0, mi) inequality rows; [mi, mi+n) lower
// bounds; [mi+n, mi+2n) upper bounds. Every constraint is written n^T z + c0 (>= 0 or = 0).
class DualActiveSet {
 public:
  DualActiveSet(const QPProblem& qp, const QPOptions& options)
      : qp_(qp), options_(options), n_(qp.n()), me_(static_cast<int>(qp.A_eq.rows())),
        mi_(static_cast<int>(qp.A_ineq.rows())) {}

  QPResult run() {
    QPResult result;
    Eigen::LLT<Mat> llt(qp_.H);
    if (llt.info() != Eigen::Success) {
      result.status = QPStatus::kUnbounded;
      result.z = Vec::Zero(n_);
      return result;
    }
    j_ = llt.matrixU().solve(Mat::Identity(n_, n_));
    r_ = Mat::Zero(n_, n_ + 1);
    u_ = Vec::Zero(n_ + 1);
    active_.assign(n_ + 1, 0);
    iq_ = 0;
    x_ = llt.solve(Vec(-qp_.q));

    const int total = mi_ + 2 * n_;
    is_active_.assign(total, 0);
    usable_.assign(total, 1);
    for (int j = 0; j < n_; ++j) {
      if (!std::isfinite(qp_.lower(j))) usable_[mi_ + j] = 0;
      if (!std::isfinite(qp_.upper(j))) usable_[mi_ + n_ + j] = 0;
    }
    row_scale_ = Vec(mi_);
    for (int r = 0; r < mi_; ++r) row_scale_(r) = std::max(qp_.A_ineq.row(r).norm(), 1e-300);

    for (int r = 0; r < me_; ++r) {
      const int k = -(r + 1);
      const Vec d = jt_normal(k);
      const Vec z = primal_direction(d);
      const Vec rr = dual_direction(d);
      const Vec np = normal(k);
      const double zn = z.dot(np);
      x_norm_ = x_.lpNorm<Eigen::Infinity>();
      const double val = value(k);
      if (zn <= 1e-20 * d.squaredNorm()) {
        if (std::abs(val) <= tolerance(k)) continue;  // dependent but consistent
        result.status = QPStatus::kInfeasible;
        result.z = x_;
        return result;
      }
      const double t = -val / zn;
      x_ += t * z;
      u_.head(iq_) -= t * rr;
      u_(iq_) = t;
      active_[iq_] = k;
      Vec dd = d;
      if (!add_constraint(&dd)) delete_constraint(iq_ - 1);
    }
    meq_ = iq_;

    const int max_iter = options_.max_iter > 0 ? options_.max_iter : 50 + 5 * (n_ + me_ + mi_);
    std::vector<char> excluded(total, 0);
    int iter = 0;
    while (true) {
      if (++iter > max_iter) {
        result.status = QPStatus::kMaxIter;
        result.z = x_;
        result.iterations = iter;
        return result;
      }
      // most violated inactive constraint, measured in normalized units
      int p = -1;
      double worst = 0.0;
      const Vec ax = mi_ ? Vec(qp_.A_ineq * x_) : Vec();
      x_norm_ = x_.lpNorm<Eigen::Infinity>();
      for (int k = 0; k < total; ++k) {
        if (!usable_[k] || is_active_[k] || excluded[k]) continue;
        const double v = k < mi_ ? qp_.b_ineq(k) - ax(k) : value(k);
        if (v >= -tolerance(k)) continue;
        const double scaled = k < mi_ ? v / row_scale_(k) : v;
        if (scaled < worst) {
          worst = scaled;
          p = k;
        }
      }
      if (p < 0) break;

      const Vec x_old = x_;
      const Vec u_old = u_;
      const std::vector<int> active_old = active_;
      const int iq_old = iq_;
      double up = 0.0;
      bool added = false;
      while (true) {
        const Vec d = jt_normal(p);
        const Vec z = primal_direction(d);
        const Vec rr = dual_direction(d);
        double t1 = kInf;
        int l = -1;
        for (int pos = meq_; pos < iq_; ++pos) {
          if (rr(pos) > 0.0) {
            const double ratio = u_(pos) / rr(pos);
            if (ratio < t1) {
              t1 = ratio;
              l = pos;
            }
          }
        }
        const Vec np = normal(p);
        const double zn = z.dot(np);
        double t2 = kInf;
        if (zn > 1e-20 * d.squaredNorm()) t2 = -value(p) / zn;
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          result.status = QPStatus::kInfeasible;
          result.z = x_;
          result.iterations = iter;
          return result;
        }
        if (!std::isfinite(t2)) {
          u_.head(iq_) -= t * rr;
          up += t;
          delete_constraint(l);
          continue;
        }
        x_ += t * z;
        u_.head(iq_) -= t * rr;
        up += t;
        if (t2 <= t1) {
          u_(iq_) = up;
          active_[iq_] = p;
          Vec dd = d;
          if (add_constraint(&dd)) {
            is_active_[p] = 1;
            added = true;
          } else {
            // numerically dependent: undo this constraint and try another one
            delete_constraint(iq_ - 1);
            x_ = x_old;
            u_ = u_old;
            active_ = active_old;
            rebuild(iq_old);
            excluded[p] = 1;
          }
          break;
        }
        delete_constraint(l);
      }
      if (added) std::fill(excluded.begin(), excluded.end(), 0);
    }

    result.status = QPStatus::kOptimal;
    result.z = x_;
    result.iterations = iter;
    result.mult_eq = Vec::Zero(me_);
    result.mult_ineq = Vec::Zero(mi_);
    result.mult_bounds = Vec::Zero(n_);
    result.working_set.bound_state.assign(n_, 0);
    for (int pos = 0; pos < iq_; ++pos) {
      const int k = active_[pos];
      const double m = u_(pos);
      if (k < 0) {
        result.mult_eq(-(k + 1)) = -m;
      } else if (k < mi_) {
        result.mult_ineq(k) = std::max(0.0, m);
        result.working_set.active_ineq.push_back(k);
      } else if (k < mi_ + n_) {
        result.mult_bounds(k - mi_) = -std::max(0.0, m);
        result.working_set.bound_state[k - mi_] = -1;
      } else {
        result.mult_bounds(k - mi_ - n_) = std::max(0.0, m);
        result.working_set.bound_state[k - mi_ - n_] = 1;
      }
    }
    std::sort(result.working_set.active_ineq.begin(), result.working_set.active_ineq.end());
    result.objective = 0.5 * x_.dot(qp_.H * x_) + qp_.q.dot(x_);
    return result;
  }

 private:
  Vec normal(int k) const {
    if (k < 0) return qp_.A_eq.row(-(k + 1)).transpose();
    if (k < mi_) return -qp_.A_ineq.row(k).transpose();
    Vec e = Vec::Zero(n_);
    if (k < mi_ + n_) {
      e(k - mi_) = 1.0;
    } else {
      e(k - mi_ - n_) = -1.0;
    }
    return e;
  }

  double value(int k) const {
    if (k < 0) return qp_.A_eq.row(-(k + 1)).dot(x_) - qp_.b_eq(-(k + 1));
    if (k < mi_) return qp_.b_ineq(k) - qp_.A_ineq.row(k).dot(x_);
    if (k < mi_ + n_) return x_(k - mi_) - qp_.lower(k - mi_);
    return qp_.upper(k - mi_ - n_) - x_(k - mi_ - n_);
  }

  double tolerance(int k) const {
    const double xs = x_norm_;
    if (k < 0) {
      const int r = -(k + 1);
      return 1e-11 * (1.0 + std::abs(qp_.b_eq(r)) + qp_.A_eq.row(r).lpNorm<Eigen::Infinity>() * xs);
    }
    if (k < mi_) return 1e-11 * (1.0 + std::abs(qp_.b_ineq(k)) + qp_.A_ineq.row(k).lpNorm<Eigen::Infinity>() * xs);
    const int j = k < mi_ + n_ ? k - mi_ : k - mi_ - n_;
    return 1e-11 * (1.0 + std::abs(x_(j)));
  }

  Vec jt_normal(int k) const {
    if (k < 0 || k < mi_) return j_.transpose() * normal(k);
    if (k < mi_ + n_) return j_.row(k - mi_).transpose();
    return -j_.row(k - mi_ - n_).transpose();
  }

  Vec primal_direction(const Vec& d) const { return j_.rightCols(n_ - iq_) * d.tail(n_ - iq_); }

  Vec dual_direction(const Vec& d) const {
    if (iq_ == 0) return Vec();
    return r_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
  }

  bool add_constraint(Vec* dp) {
    Vec& d = *dp;
    const double d_norm = d.norm();
    for (int c = n_ - 1; c >= iq_ + 1; --c) {
      double cc = d(c - 1);
      double ss = d(c);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d(c) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(c - 1) = -h;
      } else {
        d(c - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = j_(k, c - 1);
        const double t2 = j_(k, c);
        j_(k, c - 1) = t1 * cc + t2 * ss;
        j_(k, c) = xny * (t1 + j_(k, c - 1)) - t2;
      }
    }
    ++iq_;
    for (int i = 0; i < iq_; ++i) r_(i, iq_ - 1) = d(i);
    if (std::abs(d(iq_ - 1)) <= 1e-12 * d_norm) return false;
    return true;
  }

  void delete_constraint(int pos) {
    if (active_[pos] >= 0) is_active_[active_[pos]] = 0;
    for (int i = pos; i < iq_ - 1; ++i) {
      active_[i] = active_[i + 1];
      u_(i) = u_(i + 1);
      r_.col(i) = r_.col(i + 1);
    }
    active_[iq_ - 1] = active_[iq_];
    u_(iq_ - 1) = u_(iq_);
    u_(iq_) = 0.0;
    r_.col(iq_ - 1).setZero();
    --iq_;
    for (int c = pos; c < iq_; ++c) {
      double cc = r_(c, c);
      double ss = r_(c + 1, c);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      r_(c + 1, c) = 0.0;
      if (cc < 0.0) {
        r_(c, c) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r_(c, c) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = c + 1; k < iq_; ++k) {
        const double t1 = r_(c, k);
        const double t2 = r_(c + 1, k);
        r_(c, k) = t1 * cc + t2 * ss;
        r_(c + 1, k) = xny * (t1 + r_(c, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = j_(k, c);
        const double t2 = j_(k, c + 1);
        j_(k, c) = t1 * cc + t2 * ss;
        j_(k, c + 1) = xny * (j_(k, c) + t1) - t2;
      }
    }
  }

  // Refactorizes J and R for the first `count` entries of active_.
  void rebuild(int count) {
    Eigen::LLT<Mat> llt(qp_.H);
    j_ = llt.matrixU().solve(Mat::Identity(n_, n_));
    r_.setZero();
    iq_ = 0;
    std::fill(is_active_.begin(), is_active_.end(), 0);
    const std::vector<int> list(active_.begin(), active_.begin() + count);
    const Vec u = u_;
    for (int k : list) {
      Vec d = jt_normal(k);
      active_[iq_] = k;
      if (add_constraint(&d) && k >= 0) is_active_[k] = 1;
    }
    u_ = u;
  }

  const QPProblem& qp_;
  QPOptions options_;
  int n_;
  int me_;
  int mi_;
  Mat j_;
  Mat r_;
  Vec u_;
  Vec x_;
  Vec row_scale_;
  std::vector<int> active_;
  std::vector<char> is_active_;
  std::vector<char> usable_;
  int iq_ = 0;
  int meq_ = 0;
  double x_norm_ = 0.0;
};

}  // namespace

namespace {

// Re-solves the KKT system of the final working set directly. Small curvature makes the
// dual iteration pass through large intermediate points, which costs absolute accuracy.
void polish(const QPProblem& qp, QPResult* result) {
  const int n = qp.n();
  const int me = static_cast<int>(qp.A_eq.rows());
  const int mi = static_cast<int>(qp.A_ineq.rows());
  const std::vector<signed char>& state = result->working_set.bound_state;
  std::vector<int> free_idx;
  Vec z = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (state[j] < 0) {
      z(j) = qp.lower(j);
    } else if (state[j] > 0) {
      z(j) = qp.upper(j);
    } else {
      free_idx.push_back(j);
    }
  }
  std::vector<int> eq_rows(me);
  for (int r = 0; r < me; ++r) eq_rows[r] = r;
  const std::vector<int>& in_rows = result->working_set.active_ineq;
  const int nf = static_cast<int>(free_idx.size());
  const int ma = static_cast<int>(eq_rows.size() + in_rows.size());
  if (nf == 0 && ma == 0) return;
  Mat a(ma, n);
  Vec b(ma);
  int row = 0;
  for (int r : eq_rows) {
    a.row(row) = qp.A_eq.row(r);
    b(row++) = qp.b_eq(r);
  }
  for (int r : in_rows) {
    a.row(row) = qp.A_ineq.row(r);
    b(row++) = qp.b_ineq(r);
  }
  Mat kkt = Mat::Zero(nf + ma, nf + ma);
  Vec rhs(nf + ma);
  const Vec hz = qp.H * z;
  for (int p = 0; p < nf; ++p) {
    for (int q = 0; q < nf; ++q) kkt(p, q) = qp.H(free_idx[p], free_idx[q]);
    for (int r = 0; r < ma; ++r) {
      kkt(p, nf + r) = a(r, free_idx[p]);
      kkt(nf + r, p) = a(r, free_idx[p]);
    }
    rhs(p) = -qp.q(free_idx[p]) - hz(free_idx[p]);
  }
  rhs.tail(ma) = b - a * z;
  const Eigen::PartialPivLU<Mat> lu(kkt);
  const Vec sol = lu.solve(rhs);
  if (!sol.allFinite() || (kkt * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
    return;
  }
  for (int p = 0; p < nf; ++p) z(free_idx[p]) = sol(p);
  const Vec w = sol.tail(ma);

  // the polished point replaces the dual iterate only if it certifies optimality itself
  const double zs = 1.0 + z.lpNorm<Eigen::Infinity>();
  for (int j = 0; j < n; ++j) {
    if (z(j) < qp.lower(j) - 1e-12 * zs || z(j) > qp.upper(j) + 1e-12 * zs) return;
  }
  if (mi > 0) {
    const Vec slack = qp.A_ineq * z - qp.b_ineq;
    for (int r = 0; r < mi; ++r) {
      if (slack(r) > 1e-12 * (1.0 + std::abs(qp.b_ineq(r)) + qp.A_ineq.row(r).lpNorm<Eigen::Infinity>() * zs)) return;
    }
  }
  const double mtol = 1e-13 * std::max(1.0, w.size() ? w.lpNorm<Eigen::Infinity>() : 0.0);
  Vec mult_eq = Vec::Zero(me);
  Vec mult_ineq = Vec::Zero(mi);
  row = 0;
  for (int r : eq_rows) mult_eq(r) = w(row++);
  for (int r : in_rows) {
    if (w(row) < -mtol) return;
    mult_ineq(r) = std::max(0.0, w(row++));
  }
  Vec grad = qp.q + qp.H * z;
  if (me > 0) grad += qp.A_eq.transpose() * mult_eq;
  if (mi > 0) grad += qp.A_ineq.transpose() * mult_ineq;
  Vec mult_bounds = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (state[j] == 0) continue;
    const double m = -grad(j);
    if ((state[j] < 0 && m > mtol && qp.lower(j) < qp.upper(j)) || (state[j] > 0 && m < -mtol && qp.lower(j) < qp.upper(j))) {
      return;
    }
    mult_bounds(j) = state[j] < 0 ? std::min(0.0, m) : std::max(0.0, m);
  }
  result->z = z;
  result->mult_eq = mult_eq;
  result->mult_ineq = mult_ineq;
  result->mult_bounds = mult_bounds;
  result->objective = 0.5 * z.dot(qp.H * z) + qp.q.dot(z);
}

QPResult solve_full(const QPProblem& qp, const QPOptions& options) {
  for (int j = 0; j < qp.n(); ++j) {
    if (qp.lower(j) > qp.upper(j)) {
      QPResult r;
      r.status = QPStatus::kInfeasible;
      r.z = Vec::Zero(qp.n());
      return r;
    }
  }
  DualActiveSet solver(qp, options);
  QPResult result = solver.run();
  if (result.status == QPStatus::kOptimal) polish(qp, &result);
  return result;
}

// Solves with the variables in `fixed` (-1 lower, +1 upper) held at their bounds, then
// releases every held variable whose bound multiplier has the wrong sign.
QPResult solve_with_fixed(const QPProblem& qp, std::vector<signed char> fixed, const QPOptions& options) {
  const int n = qp.n();
  const int me = static_cast<int>(qp.A_eq.rows());
  const int mi = static_cast<int>(qp.A_ineq.rows());
  for (int round = 0; round < 50; ++round) {
    std::vector<int> free_idx;
    std::vector<int> held;
    Vec zfix = Vec::Zero(n);
    for (int j = 0; j < n; ++j) {
      if (fixed[j] == 0) {
        free_idx.push_back(j);
      } else {
        held.push_back(j);
        zfix(j) = fixed[j] < 0 ? qp.lower(j) : qp.upper(j);
      }
    }
    if (held.empty()) return solve_full(qp, options);
    const int nf = static_cast<int>(free_idx.size());
    QPProblem red;
    red.H = Mat(nf, nf);
    for (int a = 0; a < nf; ++a)
      for (int b = 0; b < nf; ++b) red.H(a, b) = qp.H(free_idx[a], free_idx[b]);
    const Vec hz = qp.H * zfix;
    red.q = Vec(nf);
    red.lower = Vec(nf);
    red.upper = Vec(nf);
    for (int a = 0; a < nf; ++a) {
      red.q(a) = qp.q(free_idx[a]) + hz(free_idx[a]);
      red.lower(a) = qp.lower(free_idx[a]);
      red.upper(a) = qp.upper(free_idx[a]);
    }
    red.A_eq = Mat(me, nf);
    red.A_ineq = Mat(mi, nf);
    for (int a = 0; a < nf; ++a) {
      red.A_eq.col(a) = qp.A_eq.col(free_idx[a]);
      red.A_ineq.col(a) = qp.A_ineq.col(free_idx[a]);
    }
    red.b_eq = qp.b_eq - qp.A_eq * zfix;
    red.b_ineq = qp.b_ineq - qp.A_ineq * zfix;
    if (nf == 0) return solve_full(qp, options);
    const QPResult rr = solve_full(red, options);
    if (rr.status != QPStatus::kOptimal) return solve_full(qp, options);

    QPResult out = rr;
    out.z = zfix;
    for (int a = 0; a < nf; ++a) out.z(free_idx[a]) = rr.z(a);
    out.mult_bounds = Vec::Zero(n);
    out.working_set.bound_state.assign(n, 0);
    for (int a = 0; a < nf; ++a) {
      out.mult_bounds(free_idx[a]) = rr.mult_bounds(a);
      out.working_set.bound_state[free_idx[a]] = rr.working_set.bound_state[a];
    }
    const Vec residual = qp.q + qp.H * out.z + qp.A_eq.transpose() * out.mult_eq + qp.A_ineq.transpose() * out.mult_ineq;
    const double tol = 1e-10 * std::max(1.0, residual.lpNorm<Eigen::Infinity>() + qp.q.lpNorm<Eigen::Infinity>());
    bool released = false;
    for (int j : held) {
      const double m = -residual(j);
      if ((fixed[j] < 0 && m > tol && qp.lower(j) < qp.upper(j)) ||
          (fixed[j] > 0 && m < -tol && qp.lower(j) < qp.upper(j))) {
        fixed[j] = 0;
        released = true;
      } else {
        out.mult_bounds(j) = m;
        out.working_set.bound_state[j] = fixed[j];
      }
    }
    if (!released) {
      out.objective = 0.5 * out.z.dot(qp.H * out.z) + qp.q.dot(out.z);
      return out;
    }
  }
  return solve_full(qp, options);
}

}  // namespace

QPResult solve_qp_dual(const QPProblem& qp, const QPOptions& options, const std::vector<signed char>* hold) {
  const int n = qp.n();
  if (qp.H.rows() != n || qp.H.cols() != n || qp.lower.size() != n || qp.upper.size() != n ||
      qp.A_eq.cols() != n || qp.A_ineq.cols() != n || qp.A_eq.rows() != qp.b_eq.size() ||
      qp.A_ineq.rows() != qp.b_ineq.size()) {
    throw DimensionError("solve_qp_dual: inconsistent problem dimensions");
  }
  if (hold != nullptr && static_cast<int>(hold->size()) == n) {
    std::vector<signed char> fixed(n, 0);
    for (int j = 0; j < n; ++j) {
      if ((*hold)[j] < 0 && std::isfinite(qp.lower(j))) fixed[j] = -1;
      if ((*hold)[j] > 0 && std::isfinite(qp.upper(j))) fixed[j] = 1;
    }
    return solve_with_fixed(qp, std::move(fixed), options);
  }
  return solve_full(qp, options);
}

}  // namespace nro
