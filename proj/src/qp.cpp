#include "nro/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nro {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Greedy independence filter: keeps a row if its component orthogonal to the span of
// the already-kept rows is non-negligible. `basis` holds orthonormal rows.
class RowBasis {
 public:
  explicit RowBasis(int n) : n_(n) {}

  bool try_add(const Vec& row) {
    const double norm = row.norm();
    if (norm == 0.0) return false;
    Vec r = row / norm;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& b : basis_) r -= b.dot(r) * b;
    }
    const double rn = r.norm();
    if (rn < 1e-9) return false;
    basis_.push_back(r / rn);
    return true;
  }

  int n() const { return n_; }

 private:
  int n_;
  std::vector<Vec> basis_;
};

struct WorkingRow {
  bool eq;
  int idx;
};

class ActiveSetSolver {
 public:
  ActiveSetSolver(const QPProblem& qp, const QPOptions& options)
      : qp_(qp), options_(options), n_(qp.n()), me_(static_cast<int>(qp.A_eq.rows())),
        mi_(static_cast<int>(qp.A_ineq.rows())) {
    eq_scale_.resize(me_);
    for (int r = 0; r < me_; ++r) {
      eq_scale_(r) = std::max(1.0, qp_.A_eq.row(r).lpNorm<Eigen::Infinity>());
    }
    ineq_scale_.resize(mi_);
    for (int r = 0; r < mi_; ++r) {
      ineq_scale_(r) = std::max(1.0, qp_.A_ineq.row(r).lpNorm<Eigen::Infinity>());
    }
  }

  QPResult run(const Vec& start, const QPWorkingSet* guess) {
    QPResult result;
    z_ = start;
    if (!start_is_feasible()) {
      result.status = QPStatus::kInfeasibleStart;
      result.z = z_;
      return result;
    }
    seed_working_set(guess);

    const int max_iter = options_.max_iter > 0 ? options_.max_iter : 50 + 5 * (n_ + me_ + mi_);
    const double hnorm = qp_.H.size() ? qp_.H.lpNorm<Eigen::Infinity>() : 0.0;
    const double qnorm = qp_.q.size() ? qp_.q.lpNorm<Eigen::Infinity>() : 0.0;

    for (int iter = 0; iter < max_iter; ++iter) {
      result.iterations = iter + 1;
      const Vec g = qp_.H * z_ + qp_.q;
      const double mult_tol = 1e-11 * std::max({1.0, qnorm, g.lpNorm<Eigen::Infinity>()});

      collect_free_and_rows();
      Vec p_free;
      Vec lambda;
      bool stationary = false;
      double alpha_cap = 1.0;
      if (!solve_eqp(g, &p_free, &lambda)) {
        // Zero curvature on the current face: move along the projected gradient.
        if (!projected_gradient(g, &p_free, &lambda)) {
          stationary = true;
        } else {
          const double curvature = quad_form(p_free);
          const double slope = g_free(g).dot(p_free);
          if (curvature > 1e-14 * std::max(1.0, hnorm) * p_free.squaredNorm()) {
            alpha_cap = -slope / curvature;
          } else {
            alpha_cap = kInf;
          }
        }
      } else {
        const double pn = p_free.size() ? p_free.lpNorm<Eigen::Infinity>() : 0.0;
        stationary = pn <= 1e-13 * (1.0 + z_.lpNorm<Eigen::Infinity>());
      }

      if (stationary) {
        // Multipliers of working rows and fixed bounds; drop the most negative one.
        Vec full_residual = g;
        for (std::size_t k = 0; k < rows_.size(); ++k) {
          full_residual += lambda(static_cast<Eigen::Index>(k)) * row_vec(rows_[k]);
        }
        int drop_row = -1;
        int drop_bound = -1;
        double most_negative = -mult_tol;
        for (std::size_t k = 0; k < rows_.size(); ++k) {
          if (rows_[k].eq) continue;
          const double m = lambda(static_cast<Eigen::Index>(k)) * ineq_scale_(rows_[k].idx);
          if (m < most_negative) {
            most_negative = m;
            drop_row = static_cast<int>(k);
            drop_bound = -1;
          }
        }
        for (int j = 0; j < n_; ++j) {
          if (bound_state_[j] == 0 || fixed_equal_[j]) continue;
          // multiplier of the active bound constraint, >= 0 when correct
          const double m = bound_state_[j] < 0 ? full_residual(j) : -full_residual(j);
          if (m < most_negative) {
            most_negative = m;
            drop_bound = j;
            drop_row = -1;
          }
        }
        if (drop_row < 0 && drop_bound < 0) {
          finish(lambda, full_residual, &result);
          result.status = QPStatus::kOptimal;
          return result;
        }
        if (drop_row >= 0) {
          in_working_[rows_[drop_row].idx] = 0;
        } else {
          bound_state_[drop_bound] = 0;
        }
        continue;
      }

      // Ratio test along p.
      Vec p = Vec::Zero(n_);
      for (std::size_t k = 0; k < free_.size(); ++k) p(free_[k]) = p_free(static_cast<Eigen::Index>(k));
      const double pnorm = p.lpNorm<Eigen::Infinity>();
      double alpha = alpha_cap;
      int block_row = -1;
      int block_bound = -1;
      int block_side = 0;
      for (int r = 0; r < mi_; ++r) {
        if (in_working_[r]) continue;
        const double ap = qp_.A_ineq.row(r).dot(p);
        if (ap <= 1e-13 * ineq_scale_(r) * pnorm) continue;
        const double slack = qp_.b_ineq(r) - qp_.A_ineq.row(r).dot(z_);
        const double a = std::max(0.0, slack) / ap;
        if (a < alpha) {
          alpha = a;
          block_row = r;
          block_bound = -1;
        }
      }
      for (int j : free_) {
        if (p(j) < -1e-15 * pnorm && std::isfinite(qp_.lower(j))) {
          const double aa = std::max(0.0, (z_(j) - qp_.lower(j)) / -p(j));
          if (aa < alpha) {
            alpha = aa;
            block_bound = j;
            block_side = -1;
            block_row = -1;
          }
        } else if (p(j) > 1e-15 * pnorm && std::isfinite(qp_.upper(j))) {
          const double aa = std::max(0.0, (qp_.upper(j) - z_(j)) / p(j));
          if (aa < alpha) {
            alpha = aa;
            block_bound = j;
            block_side = 1;
            block_row = -1;
          }
        }
      }
      if (!std::isfinite(alpha)) {
        result.status = QPStatus::kUnbounded;
        result.z = z_;
        return result;
      }
      z_ += alpha * p;
      if (block_bound >= 0) {
        z_(block_bound) = block_side < 0 ? qp_.lower(block_bound) : qp_.upper(block_bound);
        bound_state_[block_bound] = static_cast<signed char>(block_side);
      } else if (block_row >= 0) {
        in_working_[block_row] = 1;
      }
    }
    result.status = QPStatus::kMaxIter;
    result.z = z_;
    result.working_set = working_set();
    return result;
  }

 private:
  bool start_is_feasible() const {
    const double tol = options_.feasibility_tol;
    for (int j = 0; j < n_; ++j) {
      const double s = std::max(1.0, std::abs(z_(j)));
      if (z_(j) < qp_.lower(j) - tol * s || z_(j) > qp_.upper(j) + tol * s) return false;
      if (qp_.lower(j) > qp_.upper(j)) return false;
    }
    const double zn = std::max(1.0, z_.lpNorm<Eigen::Infinity>());
    for (int r = 0; r < me_; ++r) {
      const double v = qp_.A_eq.row(r).dot(z_) - qp_.b_eq(r);
      if (std::abs(v) > tol * eq_scale_(r) * zn) return false;
    }
    for (int r = 0; r < mi_; ++r) {
      const double v = qp_.A_ineq.row(r).dot(z_) - qp_.b_ineq(r);
      if (v > tol * ineq_scale_(r) * zn) return false;
    }
    return true;
  }

  void seed_working_set(const QPWorkingSet* guess) {
    bound_state_.assign(n_, 0);
    fixed_equal_.assign(n_, 0);
    in_working_.assign(mi_, 0);
    eq_kept_.assign(me_, 1);
    const double zn = std::max(1.0, z_.lpNorm<Eigen::Infinity>());
    const double tight = 1e-9 * zn;

    for (int j = 0; j < n_; ++j) {
      if (qp_.lower(j) == qp_.upper(j)) {
        fixed_equal_[j] = 1;
        bound_state_[j] = -1;
        z_(j) = qp_.lower(j);
      }
    }
    if (guess != nullptr) {
      if (static_cast<int>(guess->bound_state.size()) == n_) {
        for (int j = 0; j < n_; ++j) {
          if (fixed_equal_[j]) continue;
          const signed char s = guess->bound_state[j];
          if (s < 0 && std::abs(z_(j) - qp_.lower(j)) <= tight) {
            bound_state_[j] = -1;
            z_(j) = qp_.lower(j);
          } else if (s > 0 && std::abs(z_(j) - qp_.upper(j)) <= tight) {
            bound_state_[j] = 1;
            z_(j) = qp_.upper(j);
          }
        }
      }
      for (int r : guess->active_ineq) {
        if (r < 0 || r >= mi_) continue;
        const double v = qp_.A_ineq.row(r).dot(z_) - qp_.b_ineq(r);
        if (std::abs(v) <= tight * ineq_scale_(r)) in_working_[r] = 1;
      }
    }

    // Equality rows first, in the full space: dependent ones are redundant for good.
    RowBasis basis(n_);
    for (int r = 0; r < me_; ++r) {
      eq_kept_[r] = basis.try_add(qp_.A_eq.row(r).transpose()) ? 1 : 0;
    }
    // Fixed bounds and seeded inequality rows must keep the working set independent.
    for (int j = 0; j < n_; ++j) {
      if (bound_state_[j] == 0) continue;
      Vec e = Vec::Zero(n_);
      e(j) = 1.0;
      if (!basis.try_add(e)) {
        if (fixed_equal_[j]) continue;  // the pinned value is still enforced by bounds
        bound_state_[j] = 0;
      }
    }
    for (int r = 0; r < mi_; ++r) {
      if (!in_working_[r]) continue;
      if (!basis.try_add(qp_.A_ineq.row(r).transpose())) in_working_[r] = 0;
    }
  }

  void collect_free_and_rows() {
    free_.clear();
    for (int j = 0; j < n_; ++j) {
      if (bound_state_[j] == 0) free_.push_back(j);
    }
    rows_.clear();
    // Rows that are dependent on the free columns stay satisfied along the null space of
    // the others, so they are left out of the linear algebra (pinned bounds can cause this).
    const int nf = static_cast<int>(free_.size());
    RowBasis basis(nf);
    auto restricted = [&](const Mat& a, int r) {
      Vec v(nf);
      for (int c = 0; c < nf; ++c) v(c) = a(r, free_[c]);
      return v;
    };
    for (int r = 0; r < me_; ++r) {
      if (eq_kept_[r] && basis.try_add(restricted(qp_.A_eq, r))) rows_.push_back({true, r});
    }
    for (int r = 0; r < mi_; ++r) {
      if (in_working_[r] && basis.try_add(restricted(qp_.A_ineq, r))) rows_.push_back({false, r});
    }
  }

  Vec row_vec(const WorkingRow& row) const {
    return row.eq ? Vec(qp_.A_eq.row(row.idx).transpose()) : Vec(qp_.A_ineq.row(row.idx).transpose());
  }

  Mat working_matrix_free() const {
    const int nf = static_cast<int>(free_.size());
    const int mw = static_cast<int>(rows_.size());
    Mat a(mw, nf);
    for (int k = 0; k < mw; ++k) {
      const auto& src = rows_[k].eq ? qp_.A_eq : qp_.A_ineq;
      for (int c = 0; c < nf; ++c) a(k, c) = src(rows_[k].idx, free_[c]);
    }
    return a;
  }

  Vec g_free(const Vec& g) const {
    Vec out(free_.size());
    for (std::size_t k = 0; k < free_.size(); ++k) out(static_cast<Eigen::Index>(k)) = g(free_[k]);
    return out;
  }

  double quad_form(const Vec& p_free) const {
    double acc = 0.0;
    const int nf = static_cast<int>(free_.size());
    for (int a = 0; a < nf; ++a) {
      if (p_free(a) == 0.0) continue;
      double row = 0.0;
      for (int b = 0; b < nf; ++b) row += qp_.H(free_[a], free_[b]) * p_free(b);
      acc += p_free(a) * row;
    }
    return acc;
  }

  // Newton step on the current face: [H_FF A^T; A 0][p; lambda] = [-g_F; 0].
  // Null-space step on the current face; false when the reduced Hessian is not
  // positive definite there.
  bool solve_eqp(const Vec& g, Vec* p_free, Vec* lambda) const {
    const int nf = static_cast<int>(free_.size());
    const int mw = static_cast<int>(rows_.size());
    if (nf == 0) {
      p_free->resize(0);
      *lambda = Vec::Zero(mw);
      return true;
    }
    Mat hf(nf, nf);
    for (int a = 0; a < nf; ++a) {
      for (int b = 0; b < nf; ++b) hf(a, b) = qp_.H(free_[a], free_[b]);
    }
    const Vec gf = g_free(g);
    const Mat aw = working_matrix_free();
    Mat z = Mat::Identity(nf, nf);
    Eigen::HouseholderQR<Mat> qr;
    if (mw > 0) {
      qr.compute(aw.transpose());
      z = (qr.householderQ() * Mat::Identity(nf, nf)).rightCols(nf - mw);
    }
    if (z.cols() == 0) {
      p_free->setZero(nf);
    } else {
      const Mat hr = z.transpose() * hf * z;
      Eigen::LDLT<Mat> ldlt(hr);
      const double floor = 1e-12 * std::max(1.0, hf.lpNorm<Eigen::Infinity>());
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
          ldlt.vectorD().minCoeff() <= floor) {
        return false;
      }
      *p_free = -z * ldlt.solve(z.transpose() * gf);
    }
    if (mw > 0) {
      *lambda = qr.solve(Vec(-(gf + hf * *p_free)));
    } else {
      lambda->resize(0);
    }
    return p_free->allFinite() && lambda->allFinite();
  }

  bool projected_gradient(const Vec& g, Vec* p_free, Vec* lambda) const {
    const int nf = static_cast<int>(free_.size());
    const int mw = static_cast<int>(rows_.size());
    const Vec gf = g_free(g);
    const Mat aw = working_matrix_free();
    if (mw == 0) {
      *p_free = -gf;
      lambda->resize(0);
      return gf.lpNorm<Eigen::Infinity>() > 1e-14 * std::max(1.0, g.lpNorm<Eigen::Infinity>());
    }
    Eigen::HouseholderQR<Mat> qr(aw.transpose());
    const Mat q = qr.householderQ() * Mat::Identity(nf, nf);
    const Mat z = q.rightCols(nf - mw);
    *p_free = -z * (z.transpose() * gf);
    // A^T lambda = -g_F in the least-squares sense
    *lambda = qr.solve(-gf);
    const double scale = std::max(1.0, gf.lpNorm<Eigen::Infinity>());
    return p_free->lpNorm<Eigen::Infinity>() > 1e-13 * scale;
  }

  QPWorkingSet working_set() const {
    QPWorkingSet ws;
    ws.bound_state = bound_state_;
    for (int r = 0; r < mi_; ++r) {
      if (in_working_[r]) ws.active_ineq.push_back(r);
    }
    return ws;
  }

  void finish(const Vec& lambda, const Vec& full_residual, QPResult* result) const {
    result->z = z_;
    result->mult_eq = Vec::Zero(me_);
    result->mult_ineq = Vec::Zero(mi_);
    result->mult_bounds = Vec::Zero(n_);
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const double m = lambda(static_cast<Eigen::Index>(k));
      if (rows_[k].eq) {
        result->mult_eq(rows_[k].idx) = m;
      } else {
        result->mult_ineq(rows_[k].idx) = std::max(0.0, m);
      }
    }
    for (int j = 0; j < n_; ++j) {
      if (bound_state_[j] == 0) continue;
      double m = -full_residual(j);
      if (!fixed_equal_[j]) m = bound_state_[j] < 0 ? std::min(0.0, m) : std::max(0.0, m);
      result->mult_bounds(j) = m;
    }
    result->objective = 0.5 * z_.dot(qp_.H * z_) + qp_.q.dot(z_);
    result->working_set = working_set();
  }

  const QPProblem& qp_;
  QPOptions options_;
  int n_;
  int me_;
  int mi_;
  Vec eq_scale_;
  Vec ineq_scale_;
  Vec z_;
  std::vector<signed char> bound_state_;
  std::vector<char> fixed_equal_;
  std::vector<char> in_working_;
  std::vector<char> eq_kept_;
  std::vector<int> free_;
  std::vector<WorkingRow> rows_;
};

}  // namespace

QPResult solve_qp(const QPProblem& qp, const Vec& start, const QPWorkingSet* guess,
                  const QPOptions& options) {
  const int n = qp.n();
  if (qp.H.rows() != n || qp.H.cols() != n || qp.lower.size() != n || qp.upper.size() != n ||
      start.size() != n || qp.A_eq.cols() != n || qp.A_ineq.cols() != n ||
      qp.A_eq.rows() != qp.b_eq.size() || qp.A_ineq.rows() != qp.b_ineq.size()) {
    throw DimensionError("solve_qp: inconsistent problem dimensions");
  }
  ActiveSetSolver solver(qp, options);
  return solver.run(start, guess);
}

}  // namespace nro
