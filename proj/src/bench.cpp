#include "nro/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "nro/convexset.hpp"

namespace nro {

RobustProblem build_example() {
  RobustProblem p;
  p.name = "example";
  p.n = 2;
  p.f = SmoothFn::linear((Vec(2) << -1.0, -1.0).finished());
  auto disk = std::make_shared<ConvexSet>(2);
  disk->add_general(SmoothFn(
      2, 1, [](const Vec& u) -> Vec { return Vec::Constant(1, u.squaredNorm() - 1.0); },
      [](const Vec& u) -> Mat { return 2.0 * u.transpose(); }));
  disk->add_lower(0, 0.0);
  disk->add_lower(1, 0.0);
  RobustConstraint rc;
  rc.h = SmoothFn(
      2, 2, [](const Vec& x) -> Vec { return x.array().square().matrix(); },
      [](const Vec& x) -> Mat { return Mat(2.0 * x.asDiagonal()); });
  rc.b = SmoothFn::constant(2, Vec::Constant(1, 6.0));
  rc.uset = disk;
  rc.label = "quarter-disk";
  p.robust.push_back(rc);
  p.lower = Vec::Constant(2, -10.0);
  p.upper = Vec::Constant(2, 10.0);
  p.x_nominal = Vec::Zero(2);
  return p;
}

void check_portfolio(const PortfolioConfig& cfg) {
  const int n = cfg.n_assets;
  if (n < 1 || cfg.horizon < 1) throw Error("portfolio: n_assets and horizon must be positive");
  if (static_cast<int>(cfg.periods.size()) != cfg.horizon) throw Error("portfolio: one data period per horizon step");
  if (cfg.initial_holding.size() != 0 && cfg.initial_holding.size() != n) {
    throw Error("portfolio: initial holding has the wrong size");
  }
  for (int t = 0; t < cfg.horizon; ++t) {
    const PeriodReturns& pr = cfg.periods[t];
    const std::string where = "portfolio period " + std::to_string(t) + ": ";
    if (pr.mu_lo.size() != n || pr.mu_hi.size() != n || pr.cov_center.rows() != n || pr.cov_center.cols() != n ||
        pr.cov_radii.rows() != n || pr.cov_radii.cols() != n) {
      throw Error(where + "inconsistent dimensions");
    }
    if ((pr.mu_lo.array() > pr.mu_hi.array()).any()) throw Error(where + "empty mean box");
    if ((pr.cov_radii.array() < 0.0).any()) throw Error(where + "negative covariance radius");
    const Mat sym = 0.5 * (pr.cov_center + pr.cov_center.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(sym).eigenvalues().minCoeff();
    if (!(lmin > pr.cov_radii.norm())) {
      throw Error(where + "covariance ellipsoid is not inside the PSD cone (min eigenvalue " + std::to_string(lmin) +
                  " <= ||r||_F " + std::to_string(pr.cov_radii.norm()) + ")");
    }
  }
}

RobustProblem build_portfolio(const PortfolioConfig& cfg) {
  check_portfolio(cfg);
  const int n = cfg.n_assets;
  const int T = cfg.horizon;
  const int block = 3 * n + 2;
  const int nv = block * T;
  auto x_at = [=](int t) { return t * block; };
  auto s_at = [=](int t) { return t * block + n; };
  auto c_at = [=](int t) { return t * block + n + 1; };
  auto plus_at = [=](int t) { return t * block + n + 2; };
  auto minus_at = [=](int t) { return t * block + 2 * n + 2; };
  const Vec x0 = cfg.initial_holding.size() == n ? cfg.initial_holding : Vec::Constant(n, 1.0 / n);

  RobustProblem p;
  p.name = "portfolio";
  p.n = nv;
  Vec obj = Vec::Zero(nv);
  for (int t = 0; t < T; ++t) {
    obj(s_at(t)) = -1.0;
    obj(c_at(t)) = 1.0;
  }
  p.f = SmoothFn::linear(obj);

  const double lam = cfg.risk_aversion;
  const int pdim = n + n * n;
  for (int t = 0; t < T; ++t) {
    const PeriodReturns& pr = cfg.periods[t];
    auto set = std::make_shared<ConvexSet>(pdim);
    for (int i = 0; i < n; ++i) set->add_lower(i, pr.mu_lo(i)).add_upper(i, pr.mu_hi(i));
    std::vector<int> idx;
    std::vector<double> center;
    std::vector<double> radii;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int k = n + i * n + j;
        if (pr.cov_radii(i, j) > 0.0) {
          idx.push_back(k);
          center.push_back(pr.cov_center(i, j));
          radii.push_back(pr.cov_radii(i, j));
        } else {
          set->add_lower(k, pr.cov_center(i, j)).add_upper(k, pr.cov_center(i, j));
        }
      }
    }
    if (!idx.empty()) {
      set->add_ellipsoid(idx, Eigen::Map<Vec>(center.data(), center.size()),
                         Eigen::Map<Vec>(radii.data(), radii.size()));
    }
    const int xo = x_at(t);
    const int so = s_at(t);
    RobustConstraint rc;
    rc.h = SmoothFn(
        nv, pdim,
        [=](const Vec& z) -> Vec {
          const Vec x = z.segment(xo, n);
          Vec h(pdim);
          h.head(n) = -x;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) h(n + i * n + j) = lam * x(i) * x(j);
          return h;
        },
        [=](const Vec& z) -> Mat {
          const Vec x = z.segment(xo, n);
          Mat jm = Mat::Zero(pdim, nv);
          for (int i = 0; i < n; ++i) jm(i, xo + i) = -1.0;
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              jm(n + i * n + j, xo + i) += lam * x(j);
              jm(n + i * n + j, xo + j) += lam * x(i);
            }
          }
          return jm;
        });
    Vec bneg = Vec::Zero(nv);
    bneg(so) = -1.0;
    rc.b = SmoothFn::linear(bneg);
    rc.uset = set;
    rc.label = "return-" + std::to_string(t + 1);
    p.robust.push_back(rc);
  }

  // budget: sum_i x_it = 1
  Mat budget = Mat::Zero(T, nv);
  for (int t = 0; t < T; ++t) budget.block(t, x_at(t), 1, n).setOnes();
  p.deterministic.push_back({SmoothFn::affine(budget, Vec::Constant(T, -1.0)), ConstraintKind::kEquality, "budget"});
  // x_t - x_{t-1} - x_t^+ + x_t^- = 0
  Mat split = Mat::Zero(n * T, nv);
  Vec split_rhs = Vec::Zero(n * T);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      const int r = t * n + i;
      split(r, x_at(t) + i) = 1.0;
      if (t > 0) {
        split(r, x_at(t - 1) + i) = -1.0;
      } else {
        split_rhs(r) = -x0(i);
      }
      split(r, plus_at(t) + i) = -1.0;
      split(r, minus_at(t) + i) = 1.0;
    }
  }
  p.deterministic.push_back({SmoothFn::affine(split, split_rhs), ConstraintKind::kEquality, "turnover-split"});
  // U * sum_i (x^+ + x^-) - c_t <= 0
  Mat cost = Mat::Zero(T, nv);
  for (int t = 0; t < T; ++t) {
    cost.block(t, plus_at(t), 1, n).setConstant(cfg.transaction_cost);
    cost.block(t, minus_at(t), 1, n).setConstant(cfg.transaction_cost);
    cost(t, c_at(t)) = -1.0;
  }
  p.deterministic.push_back({SmoothFn::affine(cost, Vec::Zero(T)), ConstraintKind::kInequality, "transaction-cost"});

  p.lower = Vec::Zero(nv);
  p.upper = Vec::Zero(nv);
  p.x_nominal = Vec::Zero(nv);
  for (int t = 0; t < T; ++t) {
    p.upper.segment(x_at(t), n).setOnes();
    p.lower(s_at(t)) = -10.0;
    p.upper(s_at(t)) = 10.0;
    p.upper(c_at(t)) = 10.0;
    p.upper.segment(plus_at(t), n).setConstant(2.0);
    p.upper.segment(minus_at(t), n).setConstant(2.0);
    p.x_nominal.segment(x_at(t), n) = x0;
    p.x_nominal(s_at(t)) = -10.0;
  }
  return p;
}

std::vector<PeriodReturns> synth_returns(std::uint64_t seed, int n, int horizon) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<PeriodReturns> out;
  for (int t = 0; t < horizon; ++t) {
    PeriodReturns pr;
    pr.mu_lo = Vec(n);
    pr.mu_hi = Vec(n);
    Vec vol(n);
    for (int i = 0; i < n; ++i) {
      const double m = 0.02 + 0.08 * unif(rng);
      const double w = 0.01 + 0.02 * unif(rng);
      pr.mu_lo(i) = m - w;
      pr.mu_hi(i) = m + w;
      vol(i) = 0.1 + 0.2 * unif(rng);
    }
    Mat corr = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) corr(i, j) = corr(j, i) = (unif(rng) - 0.5) / std::max(1, n - 1);
    }
    pr.cov_center = vol.asDiagonal() * corr * vol.asDiagonal();
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(pr.cov_center).eigenvalues().minCoeff();
    pr.cov_radii = Mat::Constant(n, n, 0.5 * lmin / n);
    out.push_back(std::move(pr));
  }
  return out;
}

RobustProblem build_production(const ProductionConfig& cfg) {
  const int T = static_cast<int>(cfg.loads.size());
  if (T < 1) throw Error("production: at least one load period is required");
  if ((cfg.loads.array() <= 0.0).any()) throw Error("production: loads must be positive");
  if (!(cfg.uset_size > 0.0 && cfg.uset_size <= 1.0)) throw Error("production: uncertainty size must lie in (0, 1]");
  if (cfg.nominal_costs.size() != 3) throw Error("production: three nominal costs are required");
  if (!(cfg.ramp > 0.0)) throw Error("production: ramp limit must be positive");
  const int nv = 3 * T + 1;
  auto x_at = [](int t) { return t; };
  auto u_at = [T](int t) { return T + 1 + t; };
  auto s_at = [T](int t) { return 2 * T + 1 + t; };
  const Vec d = cfg.loads;
  const double dmax = d.maxCoeff();

  RobustProblem p;
  p.name = "production";
  p.n = nv;
  Vec obj = Vec::Zero(nv);
  for (int t = 0; t < T; ++t) obj(s_at(t)) = 1.0;
  p.f = SmoothFn::linear(obj);

  auto set = std::make_shared<ConvexSet>(3);
  set->add_ellipsoid({0, 1, 2}, cfg.nominal_costs, cfg.uset_size * cfg.nominal_costs);
  for (int t = 0; t < T; ++t) {
    const int xi = x_at(t);
    const int ui = u_at(t);
    const double dt = d(t);
    RobustConstraint rc;
    rc.h = SmoothFn(
        nv, 3,
        [=](const Vec& z) -> Vec {
          Vec h(3);
          h << (z(xi) - dt) * (z(xi) - dt), z(xi) * z(xi), z(ui) * z(ui);
          return h;
        },
        [=](const Vec& z) -> Mat {
          Mat jm = Mat::Zero(3, nv);
          jm(0, xi) = 2.0 * (z(xi) - dt);
          jm(1, xi) = 2.0 * z(xi);
          jm(2, ui) = 2.0 * z(ui);
          return jm;
        });
    Vec bs = Vec::Zero(nv);
    bs(s_at(t)) = 1.0;
    rc.b = SmoothFn::linear(bs);
    rc.uset = set;
    rc.label = "cost-" + std::to_string(t + 1);
    p.robust.push_back(rc);
  }
  // x_{t+1} - x_t - u_t = 0
  Mat ramp = Mat::Zero(T, nv);
  for (int t = 0; t < T; ++t) {
    ramp(t, x_at(t + 1)) = 1.0;
    ramp(t, x_at(t)) = -1.0;
    ramp(t, u_at(t)) = -1.0;
  }
  p.deterministic.push_back({SmoothFn::affine(ramp, Vec::Zero(T)), ConstraintKind::kEquality, "ramp"});

  p.lower = Vec(nv);
  p.upper = Vec(nv);
  p.x_nominal = Vec::Zero(nv);
  const double c1_max = cfg.nominal_costs(0) * (1.0 + cfg.uset_size);
  for (int t = 0; t <= T; ++t) {
    p.lower(x_at(t)) = -10.0 * dmax;
    p.upper(x_at(t)) = 10.0 * dmax;
  }
  for (int t = 0; t < T; ++t) {
    p.lower(u_at(t)) = -cfg.ramp;
    p.upper(u_at(t)) = cfg.ramp;
    p.lower(s_at(t)) = 0.0;
    p.upper(s_at(t)) = 1e9;
    // x = 0, u = 0 costs at most c1 d^2, so this nominal point is robustly feasible
    p.x_nominal(s_at(t)) = 1.01 * c1_max * d(t) * d(t);
  }
  return p;
}

std::vector<double> load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_series: cannot open '" + path + "'");
  std::string line;
  int lineno = 0;
  std::vector<double> out;
  auto trim = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    return s.substr(b);
  };
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
      if (line != "t,value") throw Error(path + ":" + std::to_string(lineno) + ": expected header 't,value'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(path + ":" + std::to_string(lineno) + ": expected two columns");
    const std::string field = trim(line.substr(comma + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      throw Error(path + ":" + std::to_string(lineno) + ": cannot parse '" + field + "'");
    }
    if (used != field.size()) throw Error(path + ":" + std::to_string(lineno) + ": cannot parse '" + field + "'");
    if (!std::isfinite(v)) throw Error(path + ":" + std::to_string(lineno) + ": non-finite value");
    out.push_back(v);
  }
  if (!header) throw Error("load_series: '" + path + "' is empty");
  if (out.empty()) throw Error("load_series: '" + path + "' has no data rows");
  return out;
}

std::vector<double> synth_load(std::uint64_t seed, int horizon, double base, double peak) {
  if (horizon < 1) throw Error("synth_load: horizon must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double a = 7.0 + 2.0 * unif(rng);
  const double b = 17.0 + 3.0 * unif(rng);
  const double height = 0.55 + 0.3 * unif(rng);
  const double w1 = 1.8 + unif(rng);
  const double w2 = 2.0 + unif(rng);
  std::vector<double> shape(horizon);
  for (int t = 0; t < horizon; ++t) {
    const double tau = 24.0 * t / horizon;
    shape[t] = height * std::exp(-std::pow((tau - a) / w1, 2)) + std::exp(-std::pow((tau - b) / w2, 2));
  }
  const auto [lo, hi] = std::minmax_element(shape.begin(), shape.end());
  const double smin = *lo;
  const double span = *hi - smin;
  std::vector<double> out(horizon, base);
  if (span > 0.0 && peak != base) {
    for (int t = 0; t < horizon; ++t) out[t] = base + (peak - base) * (shape[t] - smin) / span;
  }
  return out;
}

LoadPattern load_pattern(int k) {
  switch (k) {
    case 1:
      return {1, 80.0, 140.0};
    case 2:
      return {2, 70.0, 125.0};
    case 3:
      return {3, 90.0, 150.0};
    default:
      throw Error("load_pattern: pattern must be 1, 2 or 3");
  }
}

}  // namespace nro
