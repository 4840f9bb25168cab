#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nro/model.hpp"

namespace nro {

/// minimize -x1 - x2  s.t.  u1 x1^2 + u2 x2^2 <= 6 for all u in the unit quarter disk.
RobustProblem build_example();

/// Uncertainty data of one portfolio period: a box on the means and an axis-aligned
/// ellipsoid on the covariance entries (row-major vec(Q)).
struct PeriodReturns {
  Vec mu_lo;
  Vec mu_hi;
  Mat cov_center;
  Mat cov_radii;
};

struct PortfolioConfig {
  int n_assets = 2;
  int horizon = 7;
  double transaction_cost = 0.35;
  double risk_aversion = 1.0;
  std::vector<PeriodReturns> periods;  // one per period
  // holdings before the first period; empty means equal weights
  Vec initial_holding;
};

/// Throws Error when a period violates lambda_min(C) > ||r||_F or has inconsistent sizes.
void check_portfolio(const PortfolioConfig& cfg);

/// Variables per period t: x_t (n), s_t, c_t, x_t^+ (n), x_t^- (n).
RobustProblem build_portfolio(const PortfolioConfig& cfg);

/// Seeded synthetic mean boxes and covariance ellipsoids satisfying the PSD margin.
std::vector<PeriodReturns> synth_returns(std::uint64_t seed, int n, int horizon);

struct ProductionConfig {
  Vec loads;                  // d_t, t = 1..T
  Vec nominal_costs = (Vec(3) << 10.0, 5.0, 1.0).finished();
  double uset_size = 0.7;     // p in (0, 1]
  double ramp = 80.0;         // U
};

/// Variables: x_1..x_{T+1}, u_1..u_T, s_1..s_T.
RobustProblem build_production(const ProductionConfig& cfg);

/// CSV with header `t,value`; throws Error with the offending line number.
std::vector<double> load_series(const std::string& path);

/// Daily double-peak load curve with values in [base, peak].
std::vector<double> synth_load(std::uint64_t seed, int horizon, double base, double peak);

/// Bundled load pattern k (1..3): the parameters used to generate data/loads_pattern<k>.csv.
struct LoadPattern {
  std::uint64_t seed;
  double base;
  double peak;
};
LoadPattern load_pattern(int k);

}  // namespace nro
