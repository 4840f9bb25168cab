#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "nro/qp.hpp"
#include "nro/subsolver.hpp"

namespace nro {

int NLP::eq_rows() const {
  int m = 0;
  for (const SmoothFn& c : eq) m += c.arity_out();
  return m;
}

int NLP::ineq_rows() const {
  int m = 0;
  for (const SmoothFn& c : ineq) m += c.arity_out();
  return m;
}

std::string to_string(NLPStatus status) {
  switch (status) {
    case NLPStatus::kOptimal:
      return "optimal";
    case NLPStatus::kInfeasible:
      return "infeasible";
    case NLPStatus::kMaxIter:
      return "max-iter";
    case NLPStatus::kEvaluationError:
      return "evaluation-error";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMax = 1e12;
constexpr double kMinShift = 1e-12;

// Function values and derivatives of the scaled problem at one point.
struct Point {
  Vec x;
  double f = 0.0;
  Vec g;
  Vec ce;
  Mat je;
  Vec ci;
  Mat ji;
};

class SqpSolver {
 public:
  SqpSolver(const NLP& nlp, const NLPOptions& options)
      : nlp_(nlp), options_(options), n_(nlp.n), me_(nlp.eq_rows()), mi_(nlp.ineq_rows()) {}

  NLPSolution run() {
    NLPSolution out;
    check_dimensions();
    shift_ = options_.hessian_shift;
    Point cur;
    cur.x = nlp_.x0.cwiseMax(nlp_.lower).cwiseMin(nlp_.upper);
    try {
      compute_scaling(cur.x);
      evaluate(&cur);
    } catch (const EvaluationError& e) {
      out.status = NLPStatus::kEvaluationError;
      out.x = cur.x;
      out.message = e.what();
      return out;
    }

    Mat hess = Mat::Identity(n_, n_);
    bool hess_scaled = false;
    Vec lam_e = Vec::Zero(me_);
    Vec lam_i = Vec::Zero(mi_);
    if (nlp_.mult_eq0.size() == me_) lam_e = nlp_.mult_eq0.cwiseQuotient(eq_scale_) * obj_scale_;
    if (nlp_.mult_ineq0.size() == mi_) {
      lam_i = (nlp_.mult_ineq0.cwiseQuotient(ineq_scale_) * obj_scale_).cwiseMax(0.0);
    }
    double rho = 1.0;
    if (me_ + mi_ > 0) {
      rho = std::max(rho, 2.0 * std::max(lam_e.size() ? lam_e.lpNorm<Eigen::Infinity>() : 0.0,
                                         lam_i.size() ? lam_i.lpNorm<Eigen::Infinity>() : 0.0));
    }
    QPWorkingSet ws;
    int infeasible_count = 0;
    int stalled_steps = 0;
    Vec mb = Vec::Zero(n_);

    for (int it = 0; it < options_.max_iter; ++it) {
      out.iterations = it + 1;
      if (options_.exact_hessian) hess = model_hessian(cur, lam_e, lam_i);
      StepResult step = compute_step(cur, hess, &rho, &ws);
      if (!step.ok) {
        finalize(cur, lam_e, lam_i, &out);
        out.status = NLPStatus::kMaxIter;
        out.message = "QP subproblem failed";
        return out;
      }

      const Kkt kkt = kkt_error(cur, step.lam_e, step.lam_i);
      if (options_.verbose) {
        std::cerr << "sqp it " << it << " f=" << cur.f << " viol=" << kkt.feasibility
                  << " stat=" << kkt.stationarity << " compl=" << kkt.complementarity
                  << " |d|=" << step.d.lpNorm<Eigen::Infinity>() << " rho=" << rho
                  << " slack=" << step.slack_sum << "\n";
      }
      if (kkt.converged) {
        finalize(cur, step.lam_e, step.lam_i, &out);
        out.status = NLPStatus::kOptimal;
        return out;
      }

      const double viol = violation(cur);
      if (step.slack_sum > 1e-9 && viol > options_.infeasible_violation) {
        if (++infeasible_count >= options_.infeasible_stall_iters) {
          finalize(cur, step.lam_e, step.lam_i, &out);
          out.status = NLPStatus::kInfeasible;
          out.message = "elastic restoration stalled";
          return out;
        }
      } else {
        infeasible_count = 0;
      }

      const double lam_max = std::max(step.lam_e.size() ? step.lam_e.lpNorm<Eigen::Infinity>() : 0.0,
                                      step.lam_i.size() ? step.lam_i.lpNorm<Eigen::Infinity>() : 0.0);
      rho = std::min(kRhoMax, std::max(rho, 1.5 * lam_max));

      Point next;
      double alpha = 0.0;
      if (!line_search(cur, step, rho, &next, &alpha)) {
        shift_ = std::min(1e-2, shift_ * 100.0);
        // No acceptable step; restart curvature information.
        if (++stalled_steps > 3) {
          finalize(cur, step.lam_e, step.lam_i, &out);
          out.status = kkt.acceptable ? NLPStatus::kOptimal : NLPStatus::kMaxIter;
          out.message = "line search stalled";
          return out;
        }
        hess = Mat::Identity(n_, n_);
        hess_scaled = false;
        continue;
      }
      stalled_steps = 0;
      // full steps relax the curvature shift, damped ones restore it
      shift_ = alpha == 1.0 ? std::max(kMinShift, shift_ * 0.1) : std::max(shift_, options_.hessian_shift);

      // Damped BFGS on the Lagrangian gradient.
      const Vec s = next.x - cur.x;
      const Vec y = lagrangian_gradient(next, step.lam_e, step.lam_i) -
                    lagrangian_gradient(cur, step.lam_e, step.lam_i);
      bfgs_update(s, y, &hess, &hess_scaled);
      lam_e = step.lam_e;
      lam_i = step.lam_i;
      mb = step.mult_bounds;
      cur = std::move(next);
    }
    finalize(cur, lam_e, lam_i, &out);
    const Kkt kkt = kkt_error(cur, lam_e, lam_i);
    out.status = NLPStatus::kMaxIter;
    out.message = kkt.acceptable ? "iteration limit (acceptable point)" : "iteration limit";
    return out;
  }

 private:
  struct StepResult {
    bool ok = false;
    Vec d;
    Vec lam_e;
    Vec lam_i;
    Vec mult_bounds;
    double slack_sum = 0.0;
    double lin_violation = 0.0;
    std::vector<int> active_ineq;
    std::vector<signed char> bound_state;
  };

  struct Kkt {
    double stationarity = 0.0;
    double feasibility = 0.0;
    double complementarity = 0.0;
    bool converged = false;
    bool acceptable = false;
  };

  void check_dimensions() const {
    if (n_ <= 0 || nlp_.lower.size() != n_ || nlp_.upper.size() != n_ || nlp_.x0.size() != n_) {
      throw DimensionError("solve_nlp: bounds/start size differs from n");
    }
    if (!nlp_.linear_vars.empty() && static_cast<int>(nlp_.linear_vars.size()) != n_) {
      throw DimensionError("solve_nlp: linear_vars size differs from n");
    }
    if (nlp_.objective.arity_in() != n_ || nlp_.objective.arity_out() != 1) {
      throw DimensionError("solve_nlp: objective must map R^n -> R");
    }
    for (const SmoothFn& c : nlp_.eq) {
      if (c.arity_in() != n_) throw DimensionError("solve_nlp: equality arity differs from n");
    }
    for (const SmoothFn& c : nlp_.ineq) {
      if (c.arity_in() != n_) throw DimensionError("solve_nlp: inequality arity differs from n");
    }
    for (int j = 0; j < n_; ++j) {
      if (nlp_.lower(j) > nlp_.upper(j)) throw DimensionError("solve_nlp: empty variable box");
    }
  }

  // Gradient-based scaling at the start point: no row gradient larger than 100.
  void compute_scaling(const Vec& x) {
    const Vec g = nlp_.objective.gradient(x);
    const double gmax = g.lpNorm<Eigen::Infinity>();
    obj_scale_ = gmax > 100.0 ? 100.0 / gmax : 1.0;
    eq_scale_ = Vec::Ones(me_);
    ineq_scale_ = Vec::Ones(mi_);
    int row = 0;
    for (const SmoothFn& c : nlp_.eq) {
      const Mat j = c.jacobian(x);
      for (int r = 0; r < j.rows(); ++r, ++row) {
        const double m = j.row(r).lpNorm<Eigen::Infinity>();
        eq_scale_(row) = m > 100.0 ? 100.0 / m : 1.0;
      }
    }
    row = 0;
    for (const SmoothFn& c : nlp_.ineq) {
      const Mat j = c.jacobian(x);
      for (int r = 0; r < j.rows(); ++r, ++row) {
        const double m = j.row(r).lpNorm<Eigen::Infinity>();
        ineq_scale_(row) = m > 100.0 ? 100.0 / m : 1.0;
      }
    }
  }

  void evaluate_values(Point* p) const {
    p->f = obj_scale_ * nlp_.objective.value(p->x);
    p->ce.resize(me_);
    int row = 0;
    for (const SmoothFn& c : nlp_.eq) {
      const Vec v = c.eval(p->x);
      p->ce.segment(row, v.size()) = v;
      row += static_cast<int>(v.size());
    }
    p->ce = p->ce.cwiseProduct(eq_scale_);
    p->ci.resize(mi_);
    row = 0;
    for (const SmoothFn& c : nlp_.ineq) {
      const Vec v = c.eval(p->x);
      p->ci.segment(row, v.size()) = v;
      row += static_cast<int>(v.size());
    }
    p->ci = p->ci.cwiseProduct(ineq_scale_);
  }

  void evaluate_derivatives(Point* p) const {
    p->g = obj_scale_ * nlp_.objective.gradient(p->x);
    p->je.resize(me_, n_);
    int row = 0;
    for (const SmoothFn& c : nlp_.eq) {
      const Mat j = c.jacobian(p->x);
      p->je.middleRows(row, j.rows()) = j;
      row += static_cast<int>(j.rows());
    }
    p->je = eq_scale_.asDiagonal() * p->je;
    p->ji.resize(mi_, n_);
    row = 0;
    for (const SmoothFn& c : nlp_.ineq) {
      const Mat j = c.jacobian(p->x);
      p->ji.middleRows(row, j.rows()) = j;
      row += static_cast<int>(j.rows());
    }
    p->ji = ineq_scale_.asDiagonal() * p->ji;
  }

  void evaluate(Point* p) const {
    evaluate_values(p);
    evaluate_derivatives(p);
  }

  double violation(const Point& p) const {
    double v = p.ce.lpNorm<1>();
    for (int r = 0; r < mi_; ++r) v += std::max(0.0, p.ci(r));
    return v;
  }

  double max_violation(const Point& p) const {
    double v = me_ ? p.ce.lpNorm<Eigen::Infinity>() : 0.0;
    for (int r = 0; r < mi_; ++r) v = std::max(v, p.ci(r));
    return v;
  }

  Vec lagrangian_gradient(const Point& p, const Vec& lam_e, const Vec& lam_i) const {
    Vec grad = p.g;
    if (me_) grad += p.je.transpose() * lam_e;
    if (mi_) grad += p.ji.transpose() * lam_i;
    return grad;
  }

  Kkt kkt_error(const Point& p, const Vec& lam_e, const Vec& lam_i) const {
    Kkt k;
    Vec grad = lagrangian_gradient(p, lam_e, lam_i);
    // bound multipliers absorb gradient components pushing into an active bound
    for (int j = 0; j < n_; ++j) {
      const double scale = 1e-10 * std::max(1.0, std::abs(p.x(j)));
      const bool at_lower = std::isfinite(nlp_.lower(j)) && p.x(j) - nlp_.lower(j) <= scale;
      const bool at_upper = std::isfinite(nlp_.upper(j)) && nlp_.upper(j) - p.x(j) <= scale;
      if (at_lower && grad(j) > 0.0) grad(j) = 0.0;
      if (at_upper && grad(j) < 0.0) grad(j) = 0.0;
    }
    k.stationarity = grad.lpNorm<Eigen::Infinity>();
    k.feasibility = max_violation(p);
    for (int r = 0; r < mi_; ++r) {
      k.complementarity = std::max(k.complementarity, std::abs(lam_i(r) * std::min(0.0, p.ci(r))));
    }
    // largest term in the Lagrangian gradient, so cancellation error does not block convergence
    Vec terms = p.g.cwiseAbs();
    if (me_) terms += p.je.cwiseAbs().transpose() * lam_e.cwiseAbs();
    if (mi_) terms += p.ji.cwiseAbs().transpose() * lam_i.cwiseAbs();
    const double stat_scale = std::max(1.0, terms.maxCoeff());
    k.converged = k.stationarity <= options_.stationarity_tol * stat_scale &&
                  k.feasibility <= options_.feasibility_tol &&
                  k.complementarity <= options_.stationarity_tol * stat_scale;
    k.acceptable = k.stationarity <= 1e-6 * stat_scale && k.feasibility <= 1e-7 &&
                   k.complementarity <= 1e-6 * stat_scale;
    return k;
  }

  // Solves the QP model around `cur`; an inconsistent linearization switches to the
  // elastic model with l1-penalized slacks on every row.
  StepResult compute_step(const Point& cur, const Mat& hess, double* rho, QPWorkingSet* ws) {
    StepResult result;
    QPProblem qp;
    qp.H = hess;
    qp.q = cur.g;
    qp.lower = nlp_.lower - cur.x;
    qp.upper = nlp_.upper - cur.x;
    qp.A_eq = cur.je;
    qp.b_eq = -cur.ce;
    qp.A_ineq = cur.ji;
    qp.b_ineq = -cur.ci;
    std::vector<signed char> hold(n_, 0);
    for (int j = 0; j < n_; ++j) {
      if (qp.lower(j) == 0.0) hold[j] = -1;
      if (qp.upper(j) == 0.0) hold[j] = 1;
    }
    QPResult qpr = solve_qp_dual(qp, {}, &hold);
    if (qpr.status == QPStatus::kInfeasible || qpr.status == QPStatus::kMaxIter) {
      const int ns = 2 * me_ + mi_;
      const int nv = n_ + ns;
      const double reg = 1e-8 * std::max(1.0, hess.diagonal().maxCoeff());
      double rho_qp = *rho;
      for (int attempt = 0; attempt < 4; ++attempt) {
        QPProblem el;
        el.H = Mat::Zero(nv, nv);
        el.H.topLeftCorner(n_, n_) = hess;
        el.H.bottomRightCorner(ns, ns).diagonal().setConstant(reg);
        el.q = Vec::Zero(nv);
        el.q.head(n_) = cur.g;
        el.q.tail(ns).setConstant(rho_qp);
        el.lower = Vec::Zero(nv);
        el.upper = Vec::Constant(nv, kInf);
        el.lower.head(n_) = qp.lower;
        el.upper.head(n_) = qp.upper;
        el.A_eq = Mat::Zero(me_, nv);
        el.A_eq.leftCols(n_) = cur.je;
        el.A_eq.middleCols(n_, me_) = -Mat::Identity(me_, me_);
        el.A_eq.middleCols(n_ + me_, me_) = Mat::Identity(me_, me_);
        el.b_eq = qp.b_eq;
        el.A_ineq = Mat::Zero(mi_, nv);
        el.A_ineq.leftCols(n_) = cur.ji;
        el.A_ineq.rightCols(mi_) = -Mat::Identity(mi_, mi_);
        el.b_ineq = qp.b_ineq;
        std::vector<signed char> el_hold(nv, -1);
        std::copy(hold.begin(), hold.end(), el_hold.begin());
        qpr = solve_qp_dual(el, {}, &el_hold);
        if (qpr.status != QPStatus::kOptimal) break;
        result.slack_sum = qpr.z.tail(ns).sum();
        if (result.slack_sum <= 1e-10 || rho_qp >= kRhoMax) break;
        rho_qp = std::min(kRhoMax, rho_qp * 100.0);
      }
      *rho = std::max(*rho, rho_qp);
    }
    if (qpr.status != QPStatus::kOptimal) {
      if (options_.verbose) std::cerr << "QP status " << static_cast<int>(qpr.status) << "\n";
      return result;
    }

    result.ok = true;
    result.d = qpr.z.head(n_);
    result.lam_e = qpr.mult_eq;
    result.lam_i = qpr.mult_ineq;
    result.mult_bounds = qpr.mult_bounds.head(n_);
    const Vec re = me_ ? Vec(cur.je * result.d + cur.ce) : Vec();
    const Vec ri = mi_ ? Vec(cur.ji * result.d + cur.ci) : Vec();
    result.lin_violation = me_ ? re.lpNorm<1>() : 0.0;
    for (int r = 0; r < mi_; ++r) result.lin_violation += std::max(0.0, ri(r));
    ws->active_ineq = qpr.working_set.active_ineq;
    ws->bound_state.assign(qpr.working_set.bound_state.begin(), qpr.working_set.bound_state.begin() + n_);
    result.active_ineq = ws->active_ineq;
    result.bound_state = ws->bound_state;
    return result;
  }

  double merit(const Point& p, double rho) const { return p.f + rho * violation(p); }

  bool try_point(const Vec& x, Point* p) const {
    p->x = x.cwiseMax(nlp_.lower).cwiseMin(nlp_.upper);
    try {
      evaluate_values(p);
    } catch (const EvaluationError&) {
      return false;
    }
    return true;
  }

  // Minimum-norm correction pulling the active rows back onto their linearization.
  bool second_order_correction(const Point& cur, const StepResult& step, const Point& trial,
                               Vec* x_out) const {
    std::vector<int> free_idx;
    for (int j = 0; j < n_; ++j) {
      if (step.bound_state.size() > static_cast<std::size_t>(j) && step.bound_state[j] != 0) continue;
      free_idx.push_back(j);
    }
    const int nf = static_cast<int>(free_idx.size());
    const int m = me_ + static_cast<int>(step.active_ineq.size());
    if (m == 0 || nf == 0) return false;
    Mat a(m, nf);
    Vec rhs(m);
    int k = 0;
    for (int r = 0; r < me_; ++r, ++k) {
      for (int c = 0; c < nf; ++c) a(k, c) = cur.je(r, free_idx[c]);
      rhs(k) = -trial.ce(r);
    }
    for (int r : step.active_ineq) {
      for (int c = 0; c < nf; ++c) a(k, c) = cur.ji(r, free_idx[c]);
      rhs(k++) = -trial.ci(r);
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
    const Vec corr = cod.solve(rhs);
    if (!corr.allFinite()) return false;
    Vec x = trial.x;
    for (int c = 0; c < nf; ++c) x(free_idx[c]) += corr(c);
    *x_out = x;
    return true;
  }

  bool line_search(const Point& cur, const StepResult& step, double rho, Point* next, double* alpha_out) const {
    const double phi0 = merit(cur, rho);
    const double slope = cur.g.dot(step.d) - rho * violation(cur) + rho * step.lin_violation;
    // Armijo with a descent estimate that stays negative for tiny steps.
    const double descent = std::min(slope, -0.0);
    const double noise = 1e-14 * std::max(1.0, std::abs(phi0));
    double alpha = 1.0;
    for (int ls = 0; ls < 40; ++ls) {
      Point trial;
      if (try_point(cur.x + alpha * step.d, &trial)) {
        const double phi = merit(trial, rho);
        if (phi <= phi0 + 1e-4 * alpha * descent + noise) {
          evaluate_derivatives(&trial);
          *next = std::move(trial);
          *alpha_out = alpha;
          return true;
        }
        if (ls == 0) {
          Vec x_soc;
          Point soc;
          if (second_order_correction(cur, step, trial, &x_soc) && try_point(x_soc, &soc)) {
            if (merit(soc, rho) <= phi0 + 1e-4 * descent + noise) {
              evaluate_derivatives(&soc);
              *next = std::move(soc);
              *alpha_out = 1.0;
              return true;
            }
          }
        }
      }
      alpha *= 0.5;
      if (alpha * step.d.lpNorm<Eigen::Infinity>() < 1e-16 * (1.0 + cur.x.lpNorm<Eigen::Infinity>())) break;
    }
    return false;
  }

  // Forward-difference Hessian of the Lagrangian, shifted until positive definite.
  // Columns of variables that enter every function linearly are skipped after the
  // first evaluation.
  Mat model_hessian(const Point& cur, const Vec& lam_e, const Vec& lam_i) {
    const bool detect = linear_.empty();
    if (detect) {
      linear_.assign(n_, 0);
      if (static_cast<int>(nlp_.linear_vars.size()) == n_) linear_ = nlp_.linear_vars;
    }
    Mat h = Mat::Zero(n_, n_);
    Point probe;
    for (int j = 0; j < n_; ++j) {
      if (linear_[j]) continue;
      const double step = 1e-6 * std::max(1.0, std::abs(cur.x(j)));
      probe.x = cur.x;
      probe.x(j) += step;
      try {
        evaluate_derivatives(&probe);
      } catch (const EvaluationError&) {
        continue;
      }
      const Vec dg = probe.g - cur.g;
      const Mat dje = probe.je - cur.je;
      const Mat dji = probe.ji - cur.ji;
      if (detect && dg.isZero(0.0) && dje.isZero(0.0) && dji.isZero(0.0)) {
        linear_[j] = 1;
        continue;
      }
      Vec col = dg;
      if (me_) col += dje.transpose() * lam_e;
      if (mi_) col += dji.transpose() * lam_i;
      h.col(j) = col / step;
    }
    std::vector<int> nonlin;
    for (int j = 0; j < n_; ++j) {
      if (!linear_[j]) nonlin.push_back(j);
    }
    const int nn = static_cast<int>(nonlin.size());
    Mat block(nn, nn);
    for (int a = 0; a < nn; ++a)
      for (int b = 0; b < nn; ++b) block(a, b) = 0.5 * (h(nonlin[a], nonlin[b]) + h(nonlin[b], nonlin[a]));
    const double scale = std::max(1.0, nn ? block.cwiseAbs().maxCoeff() : 0.0);
    const double shift = shift_ * scale;
    if (nn > 0) {
      // negative curvature is mirrored, near-zero curvature lifted to the shift
      Eigen::SelfAdjointEigenSolver<Mat> eig(block);
      const Vec lam = eig.eigenvalues().cwiseAbs().cwiseMax(shift);
      block = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
    }
    Mat out = Mat::Zero(n_, n_);
    for (int a = 0; a < nn; ++a)
      for (int b = 0; b < nn; ++b) out(nonlin[a], nonlin[b]) = block(a, b);
    for (int j = 0; j < n_; ++j) {
      if (linear_[j]) out(j, j) = shift;
    }
    return out;
  }

  static void bfgs_update(const Vec& s, const Vec& y_raw, Mat* hess, bool* scaled) {
    const double ss = s.squaredNorm();
    if (ss < 1e-30) return;
    Vec y = y_raw;
    if (!*scaled) {
      const double sy = s.dot(y);
      if (sy > 0.0) {
        const double gamma = std::clamp(y.squaredNorm() / sy, 1e-6, 1e8);
        *hess = gamma * Mat::Identity(hess->rows(), hess->cols());
        *scaled = true;
      }
    }
    const Vec hs = *hess * s;
    const double shs = s.dot(hs);
    if (shs <= 0.0) return;
    double sy = s.dot(y);
    // Powell damping keeps the update positive definite.
    if (sy < 0.2 * shs) {
      const double theta = 0.8 * shs / (shs - sy);
      y = theta * y + (1.0 - theta) * hs;
      sy = s.dot(y);
    }
    if (sy <= 1e-16 * shs) return;
    *hess += (y * y.transpose()) / sy - (hs * hs.transpose()) / shs;
    *hess = 0.5 * (*hess + hess->transpose());
  }

  void finalize(const Point& p, const Vec& lam_e, const Vec& lam_i, NLPSolution* out) const {
    out->x = p.x;
    out->objective = p.f / obj_scale_;
    out->mult_eq = lam_e.cwiseProduct(eq_scale_) / obj_scale_;
    out->mult_ineq = lam_i.cwiseProduct(ineq_scale_) / obj_scale_;
    // bound multipliers from the unscaled stationarity residual
    Vec grad = p.g / obj_scale_;
    if (me_) grad += (p.je.transpose() * lam_e) / obj_scale_;
    if (mi_) grad += (p.ji.transpose() * lam_i) / obj_scale_;
    out->mult_bounds = Vec::Zero(n_);
    for (int j = 0; j < n_; ++j) {
      const double scale = 1e-10 * std::max(1.0, std::abs(p.x(j)));
      const bool at_lower = std::isfinite(nlp_.lower(j)) && p.x(j) - nlp_.lower(j) <= scale;
      const bool at_upper = std::isfinite(nlp_.upper(j)) && nlp_.upper(j) - p.x(j) <= scale;
      if (at_lower && grad(j) > 0.0) out->mult_bounds(j) = -grad(j);
      if (at_upper && grad(j) < 0.0) out->mult_bounds(j) = -grad(j);
    }
    const Kkt k = kkt_error(p, lam_e, lam_i);
    out->kkt_residual = std::max({k.stationarity / obj_scale_, k.feasibility, k.complementarity});
    double viol = 0.0;
    for (int r = 0; r < me_; ++r) viol = std::max(viol, std::abs(p.ce(r) / eq_scale_(r)));
    for (int r = 0; r < mi_; ++r) viol = std::max(viol, p.ci(r) / ineq_scale_(r));
    out->constraint_violation = viol;
  }

  const NLP& nlp_;
  NLPOptions options_;
  int n_;
  int me_;
  int mi_;
  double obj_scale_ = 1.0;
  std::vector<char> linear_;
  double shift_ = 0.0;
  Vec eq_scale_;
  Vec ineq_scale_;
};

}  // namespace

NLPSolution solve_nlp(const NLP& nlp, const NLPOptions& options) {
  SqpSolver solver(nlp, options);
  return solver.run();
}

}  // namespace nro
