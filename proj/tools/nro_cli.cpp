#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nro/algorithms.hpp"
#include "nro/bench.hpp"
#include "nro/convexset.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using nro::Vec;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitUnfinished = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Family parameters. solve takes one value per list, compare sweeps the cross product.
struct FamilyArgs {
  std::string instance;
  std::vector<int> horizon;
  std::vector<double> ramp;
  std::vector<double> uset_size;
  std::vector<double> transaction_cost;
  std::vector<int> pattern;
  std::string loads;
  std::uint64_t seed = 7;
  std::vector<double> initial_box;
};

struct SolverArgs {
  std::vector<std::string> algorithm{"superset"};
  std::vector<std::string> cuts{"projection"};
  double epsilon = 1e-5;
  int max_iters = 200;
  bool no_lower_bound = false;
  int lower_bound_every = 5;
  bool geometry = false;
};

struct Instance {
  std::string name;
  json params;
  nro::RobustProblem problem;
};

struct Solver {
  std::string name;
  std::string algorithm;  // "superset" or "polak"
  nro::CutStrategy cuts = nro::CutStrategy::kProjection;
};

template <class T>
std::vector<T> or_default(const std::vector<T>& given, std::vector<T> fallback) {
  return given.empty() ? fallback : given;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<Instance> make_instances(const FamilyArgs& a, bool sweep) {
  std::vector<Instance> out;
  if (a.instance == "example") {
    out.push_back({"example", json::object(), nro::build_example()});
  } else if (a.instance == "production") {
    const std::vector<double> ramps = or_default(a.ramp, sweep ? std::vector<double>{80, 120, 160} : std::vector<double>{80});
    const std::vector<double> sizes =
        or_default(a.uset_size, sweep ? std::vector<double>{0.7, 0.8, 0.9} : std::vector<double>{0.7});
    std::vector<std::pair<std::string, std::vector<double>>> series;
    if (!a.loads.empty()) {
      if (!a.pattern.empty()) throw UsageError("--loads and --pattern are mutually exclusive");
      std::vector<double> loads = nro::load_series(a.loads);
      if (!a.horizon.empty()) {
        if (a.horizon.size() > 1) throw UsageError("--horizon takes one value with --loads");
        if (a.horizon[0] < 1 || a.horizon[0] > static_cast<int>(loads.size())) {
          throw UsageError("--horizon exceeds the length of " + a.loads);
        }
        loads.resize(a.horizon[0]);
      }
      series.emplace_back(fs::path(a.loads).stem().string(), loads);
    } else {
      const std::vector<int> horizons = or_default(a.horizon, {24});
      for (int k : or_default(a.pattern, sweep ? std::vector<int>{1, 2, 3} : std::vector<int>{1})) {
        for (int T : horizons) {
          if (T < 1) throw UsageError("--horizon must be positive");
          const nro::LoadPattern lp = nro::load_pattern(k);
          std::string label = "pattern" + std::to_string(k);
          if (horizons.size() > 1 || T != 24) label += "-T" + std::to_string(T);
          series.emplace_back(label, nro::synth_load(lp.seed, T, lp.base, lp.peak));
        }
      }
    }
    for (const auto& [label, loads] : series) {
      for (double p : sizes) {
        for (double ramp : ramps) {
          nro::ProductionConfig cfg;
          cfg.loads = to_vec(loads);
          cfg.uset_size = p;
          cfg.ramp = ramp;
          std::ostringstream name;
          name << "production-" << label << "-p" << p << "-U" << ramp;
          json params = {{"loads", label}, {"horizon", loads.size()}, {"uset_size", p}, {"ramp", ramp}};
          out.push_back({name.str(), params, nro::build_production(cfg)});
        }
      }
    }
  } else if (a.instance == "portfolio") {
    for (int T : or_default(a.horizon, sweep ? std::vector<int>{7, 14} : std::vector<int>{7})) {
      if (T < 1) throw UsageError("--horizon must be positive");
      for (double tc : or_default(a.transaction_cost, {0.35})) {
        nro::PortfolioConfig cfg;
        cfg.n_assets = 2;
        cfg.horizon = T;
        cfg.transaction_cost = tc;
        cfg.periods = nro::synth_returns(a.seed, 2, T);
        std::ostringstream name;
        name << "portfolio-T" << T << "-U" << tc << "-seed" << a.seed;
        json params = {{"assets", 2}, {"horizon", T}, {"transaction_cost", tc}, {"data_seed", a.seed}};
        out.push_back({name.str(), params, nro::build_portfolio(cfg)});
      }
    }
  } else {
    throw UsageError("unknown instance '" + a.instance + "' (example, portfolio, production)");
  }
  for (const Instance& inst : out) {
    const auto report = nro::validate(inst.problem);
    if (!report.empty()) throw nro::Error(inst.name + ": " + report.front().message);
  }
  return out;
}

std::vector<Solver> make_solvers(const SolverArgs& a) {
  std::vector<std::string> algos;
  for (const std::string& s : a.algorithm) {
    if (s == "both") {
      algos.push_back("superset");
      algos.push_back("polak");
    } else if (s == "superset" || s == "polak") {
      algos.push_back(s);
    } else {
      throw UsageError("unknown algorithm '" + s + "' (superset, polak, both)");
    }
  }
  std::vector<nro::CutStrategy> cuts;
  for (const std::string& c : a.cuts) {
    try {
      cuts.push_back(nro::cut_strategy_from_string(c));
    } catch (const nro::Error& e) {
      throw UsageError(e.what());
    }
  }
  std::vector<Solver> out;
  for (const std::string& algo : algos) {
    if (algo == "polak") {
      out.push_back({"polak", "polak", nro::CutStrategy::kProjection});
      continue;
    }
    for (nro::CutStrategy c : cuts) out.push_back({"superset-" + nro::to_string(c), "superset", c});
  }
  std::map<std::string, int> seen;
  for (Solver& s : out) {
    const int n = ++seen[s.name];
    if (n > 1) s.name += "#" + std::to_string(n);
  }
  return out;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json polytope_json(const nro::Polytope& poly) {
  json rows = json::array();
  for (const nro::Halfspace& h : poly.halfspaces()) {
    rows.push_back({{"a", vec_json(h.a)}, {"d", h.d}, {"provenance", nro::to_string(h.provenance)}});
  }
  return rows;
}

json trace_json(const nro::IterateTrace& tr) {
  json u = json::array();
  for (const Vec& ui : tr.u) u.push_back(vec_json(ui));
  json j = {{"k", tr.k},
            {"phase", tr.phase},
            {"objective", tr.objective},
            {"errm", tr.errm},
            {"cut_counts", tr.cut_counts},
            {"worst_violation", tr.worst_violation},
            {"upper_bound", optional_json(tr.upper_bound)},
            {"lower_bound", optional_json(tr.lower_bound)},
            {"wall_millis", tr.wall_millis},
            {"x", vec_json(tr.x)},
            {"lambda", tr.lambda},
            {"u", u},
            {"p", tr.p}};
  if (!tr.geometry.empty()) {
    json g = json::array();
    for (const nro::Polytope& poly : tr.geometry) g.push_back(polytope_json(poly));
    j["geometry"] = g;
  }
  return j;
}

json summary_json(const Instance& inst, const Solver& solver, const SolverArgs& args, std::uint64_t seed,
                  const nro::SolveResult& r) {
  json j = {{"instance", inst.name},
            {"family", inst.params},
            {"algorithm", solver.algorithm},
            {"epsilon", args.epsilon},
            {"seed", seed},
            {"status", nro::to_string(r.status)},
            {"objective", r.objective},
            {"errm", r.errm},
            {"upper_bound", optional_json(r.upper_bound)},
            {"lower_bound", optional_json(r.lower_bound)},
            {"infeasibility_p", optional_json(r.infeasibility_p)},
            {"iterations", r.iterations},
            {"millis", r.millis},
            {"message", r.message},
            {"x", vec_json(r.x)}};
  if (solver.algorithm == "superset") j["cuts"] = nro::to_string(solver.cuts);
  // portfolio instances are posed as minimization of the negated return
  if (inst.problem.name == "portfolio") j["reported_return"] = -r.objective;
  return j;
}

bool finished(nro::SolveStatus s) {
  return s == nro::SolveStatus::kOptimal || s == nro::SolveStatus::kInfeasibleCertified;
}

struct RunOutcome {
  bool ran = false;
  nro::SolveResult result;
  std::string error;
};

// Runs one (instance, solver) cell, streaming the trace to `trace_path`.
RunOutcome run_one(const Instance& inst, const Solver& solver, const SolverArgs& args, std::uint64_t seed,
                   const FamilyArgs& family, const fs::path& trace_path) {
  RunOutcome out;
  std::ofstream trace(trace_path, std::ios::binary);
  if (!trace) {
    out.error = "cannot write " + trace_path.string();
    return out;
  }
  nro::SolverOptions opt;
  opt.epsilon = args.epsilon;
  opt.max_outer_iters = args.max_iters;
  opt.cut_strategy = solver.cuts;
  opt.compute_lower_bound = !args.no_lower_bound;
  opt.lower_bound_every = args.lower_bound_every;
  opt.seed = seed;
  opt.log_geometry = args.geometry;
  if (!family.initial_box.empty()) {
    std::vector<nro::Polytope> boxes;
    for (const nro::RobustConstraint& rc : inst.problem.robust) {
      const int p = rc.uset->dim();
      if (static_cast<int>(family.initial_box.size()) != 2 * p) {
        throw UsageError("--initial-box needs " + std::to_string(2 * p) + " values (lower bounds, then upper bounds)");
      }
      const Vec all = to_vec(family.initial_box);
      boxes.push_back(nro::Polytope::box(all.head(p), all.tail(p)));
    }
    opt.initial_supersets = boxes;
  }
  opt.trace_sink = [&trace](const nro::IterateTrace& tr) { trace << trace_json(tr).dump() << '\n' << std::flush; };
  try {
    out.result = solver.algorithm == "polak" ? nro::polak_solve(inst.problem, opt)
                                             : nro::superset_solve(inst.problem, opt);
    out.ran = true;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw nro::Error("cannot write " + path.string());
  f << text;
}

int cmd_solve(const FamilyArgs& family, const SolverArgs& args, const std::string& out_dir) {
  for (const auto* list : {&family.ramp, &family.uset_size, &family.transaction_cost}) {
    if (list->size() > 1) throw UsageError("solve takes a single value per family parameter");
  }
  if (family.horizon.size() > 1 || family.pattern.size() > 1) {
    throw UsageError("solve takes a single value per family parameter");
  }
  const std::vector<Instance> instances = make_instances(family, false);
  const std::vector<Solver> solvers = make_solvers(args);
  fs::create_directories(out_dir);
  int code = kExitOk;
  for (const Solver& s : solvers) {
    const fs::path dir = solvers.size() == 1 ? fs::path(out_dir) : fs::path(out_dir) / s.name;
    fs::create_directories(dir);
    const RunOutcome run = run_one(instances[0], s, args, family.seed, family, dir / "trace.jsonl");
    if (!run.ran) {
      std::cerr << "error: " << s.name << ": " << run.error << "\n";
      return kExitUnfinished;
    }
    write_text(dir / "summary.json", summary_json(instances[0], s, args, family.seed, run.result).dump(2) + "\n");
    std::cout << s.name << ": " << nro::to_string(run.result.status) << " objective " << fmt17(run.result.objective)
              << " errm " << fmt17(run.result.errm) << " iterations " << run.result.iterations << "\n";
    if (!finished(run.result.status)) code = kExitUnfinished;
  }
  return code;
}

// Performance profile: r = t / min_s t per instance, rho_s(tau) = share of instances with r <= tau.
std::string profile_csv(const std::vector<std::string>& solvers, const std::vector<std::vector<double>>& times) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = solvers.size();
  std::vector<std::vector<double>> ratios(m);
  std::vector<double> taus;
  for (const std::vector<double>& row : times) {
    const double best = *std::min_element(row.begin(), row.end());
    for (std::size_t s = 0; s < m; ++s) {
      const double r = std::isfinite(row[s]) && std::isfinite(best) ? row[s] / best : inf;
      ratios[s].push_back(r);
      if (std::isfinite(r)) taus.push_back(r);
    }
  }
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  for (std::vector<double>& r : ratios) std::sort(r.begin(), r.end());
  std::ostringstream os;
  os << "tau";
  for (const std::string& s : solvers) os << "," << s;
  os << "\n";
  const double total = static_cast<double>(times.size());
  for (double tau : taus) {
    os << fmt17(tau);
    for (std::size_t s = 0; s < m; ++s) {
      const auto count = std::upper_bound(ratios[s].begin(), ratios[s].end(), tau) - ratios[s].begin();
      os << "," << fmt17(static_cast<double>(count) / total);
    }
    os << "\n";
  }
  return os.str();
}

int cmd_compare(const FamilyArgs& family, const SolverArgs& args, const std::string& out_dir, int workers) {
  const std::vector<Instance> instances = make_instances(family, true);
  const std::vector<Solver> solvers = make_solvers(args);
  if (solvers.size() < 2) throw UsageError("compare needs at least two solver configurations");
  const fs::path root(out_dir);
  fs::create_directories(root / "runs");

  struct Cell {
    std::size_t inst;
    std::size_t solver;
    RunOutcome run;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (std::size_t s = 0; s < solvers.size(); ++s) cells.push_back({i, s, {}});

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto work = [&]() {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      Cell& cell = cells[c];
      const Instance& inst = instances[cell.inst];
      const Solver& solver = solvers[cell.solver];
      const fs::path dir = root / "runs" / (inst.name + "__" + solver.name);
      try {
        fs::create_directories(dir);
        cell.run = run_one(inst, solver, args, family.seed, family, dir / "trace.jsonl");
        if (cell.run.ran) {
          write_text(dir / "summary.json", summary_json(inst, solver, args, family.seed, cell.run.result).dump(2) + "\n");
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(log_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cerr << inst.name << " / " << solver.name << ": "
                << (cell.run.ran ? nro::to_string(cell.run.result.status) : "error: " + cell.run.error) << "\n";
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::max(1, workers); ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  const double inf = std::numeric_limits<double>::infinity();
  std::ostringstream csv;
  csv << "instance,solver,status,iterations,millis,objective,errm\n";
  std::vector<std::vector<double>> times(instances.size(), std::vector<double>(solvers.size(), inf));
  int code = kExitOk;
  for (const Cell& cell : cells) {
    const nro::SolveResult& r = cell.run.result;
    const bool ok = cell.run.ran && finished(r.status);
    if (!ok) code = kExitUnfinished;
    const std::string status = cell.run.ran ? nro::to_string(r.status) : "error";
    // wall time of the outer loop; a zero reading would make every ratio infinite
    const double millis = cell.run.ran ? std::max(r.millis, 1e-6) : inf;
    if (ok) times[cell.inst][cell.solver] = millis;
    csv << instances[cell.inst].name << "," << solvers[cell.solver].name << "," << status << ","
        << (cell.run.ran ? r.iterations : 0) << "," << fmt17(ok ? millis : inf) << ","
        << fmt17(cell.run.ran ? r.objective : std::nan("")) << "," << fmt17(cell.run.ran ? r.errm : std::nan(""))
        << "\n";
  }
  write_text(root / "compare.csv", csv.str());
  std::vector<std::string> names;
  for (const Solver& s : solvers) names.push_back(s.name);
  write_text(root / "profile.csv", profile_csv(names, times));

  std::cout << "instance";
  for (const Solver& s : solvers) std::cout << "  " << s.name << " (iters, ms)";
  std::cout << "\n";
  for (std::size_t i = 0; i < instances.size(); ++i) {
    std::cout << instances[i].name;
    for (std::size_t s = 0; s < solvers.size(); ++s) {
      const Cell& cell = cells[i * solvers.size() + s];
      if (cell.run.ran && finished(cell.run.result.status)) {
        std::printf("  %d, %.1f", cell.run.result.iterations, cell.run.result.millis);
        std::fflush(stdout);
      } else {
        std::cout << "  DNF";
      }
    }
    std::cout << "\n";
  }
  return code;
}

int cmd_replay(const std::string& trace_path, const std::string& out_dir) {
  std::ifstream in(trace_path);
  if (!in) throw UsageError("cannot open trace '" + trace_path + "'");
  std::ostringstream csv;
  csv << "k,a1,a2,d,provenance\n";
  std::string line;
  int lineno = 0;
  int records = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw nro::Error(trace_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (rec.value("phase", "") == "phase1") continue;
    if (!rec.contains("geometry")) {
      throw nro::Error(trace_path + ":" + std::to_string(lineno) +
                       ": record has no geometry (solve with --geometry and a superset algorithm)");
    }
    const json& geometry = rec["geometry"];
    if (geometry.size() != 1) throw nro::Error("replay supports a single robust constraint");
    const int k = rec["k"].get<int>();
    for (const json& row : geometry[0]) {
      const std::vector<double> a = row["a"].get<std::vector<double>>();
      if (a.size() != 2) throw nro::Error("replay: dimension " + std::to_string(a.size()) + " is unsupported (2 only)");
      csv << k << "," << fmt17(a[0]) << "," << fmt17(a[1]) << "," << fmt17(row["d"].get<double>()) << ","
          << row["provenance"].get<std::string>() << "\n";
    }
    ++records;
  }
  if (records == 0) throw nro::Error("replay: '" + trace_path + "' holds no superset records");
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "geometry.csv", csv.str());
  return kExitOk;
}

void add_family_options(CLI::App* cmd, FamilyArgs& f) {
  cmd->add_option("--instance", f.instance, "example, portfolio or production")->required();
  cmd->add_option("--horizon", f.horizon, "number of periods")->delimiter(',');
  cmd->add_option("--ramp", f.ramp, "production ramp limit U")->delimiter(',');
  cmd->add_option("--uset-size", f.uset_size, "production ellipsoid size p in (0, 1]")->delimiter(',');
  cmd->add_option("--transaction-cost", f.transaction_cost, "portfolio transaction cost")->delimiter(',');
  cmd->add_option("--pattern", f.pattern, "bundled production load pattern (1, 2, 3)")->delimiter(',');
  cmd->add_option("--loads", f.loads, "production load CSV with header t,value");
  cmd->add_option("--seed", f.seed, "seed for synthetic data and the solver");
  cmd->add_option("--initial-box", f.initial_box, "initial superset box: lower bounds then upper bounds")
      ->delimiter(',');
}

void add_solver_options(CLI::App* cmd, SolverArgs& s) {
  cmd->add_option("--algorithm", s.algorithm, "superset, polak or both")->delimiter(',');
  cmd->add_option("--cuts", s.cuts, "kelley, projection, gradient-free or hybrid")->delimiter(',');
  cmd->add_option("--epsilon", s.epsilon, "termination tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", s.max_iters, "outer iteration limit")->check(CLI::PositiveNumber);
  cmd->add_option("--lower-bound-every", s.lower_bound_every, "lower bound cadence in iterations");
  cmd->add_flag("--no-lower-bound", s.no_lower_bound, "skip lower bound solves");
  cmd->add_flag("--geometry", s.geometry, "log superset rows in the trace (for replay)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear robust optimization by polytopic supersets"};
  app.require_subcommand(1);

  FamilyArgs family;
  SolverArgs solver;
  std::string out_dir = ".";
  int workers = 1;
  std::string trace_path;

  CLI::App* solve = app.add_subcommand("solve", "solve one instance, writing summary.json and trace.jsonl");
  add_family_options(solve, family);
  add_solver_options(solve, solver);
  solve->add_option("--out-dir", out_dir, "output directory");

  CLI::App* compare = app.add_subcommand("compare", "run a sweep, writing compare.csv and profile.csv");
  add_family_options(compare, family);
  add_solver_options(compare, solver);
  compare->add_option("--out-dir", out_dir, "output directory");
  compare->add_option("--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);

  CLI::App* replay = app.add_subcommand("replay", "turn a geometry trace into geometry.csv");
  replay->add_option("--trace", trace_path, "trace.jsonl written with --geometry")->required();
  replay->add_option("--out-dir", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(family, solver, out_dir);
    if (*compare) return cmd_compare(family, solver, out_dir, workers);
    return cmd_replay(trace_path, out_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
