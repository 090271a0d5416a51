// ergodic-lab: JSON-config driven experiments on effective Hamiltonians and
// stochastic Mather measures. See README for the config schema.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ergolab/accept.hpp"
#include "ergolab/cell.hpp"
#include "ergolab/grid.hpp"
#include "ergolab/lab.hpp"
#include "ergolab/lp.hpp"
#include "ergolab/measure.hpp"
#include "ergolab/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using namespace ergolab;

const std::set<std::string> kTasks = {
    "solve-cell", "mather",        "sweep-eps", "sweep-p",   "derivative-check",
    "semiconvexity", "rate",       "lp-compare", "one-sided", "accept"};

struct Run {
  fs::path out_dir;
  std::vector<std::string> files;
  std::vector<CheckResult> checks;
  std::string diagnostics;

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out_dir);
    std::ofstream os(out_dir / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + (out_dir / name).string());
    os << content;
    files.push_back(name);
  }
  void check(const std::string& name, double value, double tol) {
    checks.push_back({name, value <= tol, value, tol});
  }
};

struct Config {
  json raw;
  std::string task;

  HamiltonianModel model() const { return HamiltonianModel::from_json(raw.at("model").dump()); }

  TorusGrid grid() const {
    const auto& g = raw.at("grid");
    const auto sizes = g.at("sizes").get<std::vector<int>>();
    const int dim = g.value("dim", static_cast<int>(sizes.size()));
    if (dim == 1) {
      if (sizes.size() != 1) throw ConfigError("grid: 1D needs one size");
      return TorusGrid::make_1d(sizes[0]);
    }
    if (sizes.size() != 2) throw ConfigError("grid: 2D needs two sizes");
    return TorusGrid::make_2d(sizes[0], sizes[1]);
  }

  Vec vec(const char* key, Vec dflt = Vec::Zero()) const {
    if (!raw.contains(key)) return dflt;
    Vec v = Vec::Zero();
    const auto& j = raw.at(key);
    if (j.is_number()) {
      v[0] = j.get<double>();
    } else {
      const auto a = j.get<std::vector<double>>();
      if (a.empty() || a.size() > 2) throw ConfigError(std::string(key) + ": need 1 or 2 entries");
      for (std::size_t k = 0; k < a.size(); ++k) v[k] = a[k];
    }
    return v;
  }

  double num(const char* key) const { return raw.at(key).get<double>(); }
  double num(const char* key, double dflt) const { return raw.value(key, dflt); }
  std::vector<double> list(const char* key) const {
    return raw.at(key).get<std::vector<double>>();
  }

  VGridSpec vgrid() const {
    const auto& v = raw.at("vgrid");
    return {v.at("radius").get<double>(), v.at("points_per_axis").get<int>()};
  }

  SolverOptions solver() const {
    SolverOptions opts;
    opts.tol = num("tol", opts.tol);
    if (opts.tol <= 0) throw ConfigError("tol must be > 0");
    return opts;
  }
};

void validate_keys(const json& raw, const std::string& task) {
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"solve-cell", {"model", "grid", "eps", "p", "tol"}},
      {"mather", {"model", "grid", "eps", "p", "tol"}},
      {"sweep-eps", {"model", "grid", "eps_samples", "p", "tol"}},
      {"sweep-p", {"model", "grid", "eps", "p_samples", "tol"}},
      {"derivative-check", {"model", "grid", "eps_samples", "p", "tol"}},
      {"semiconvexity", {"model", "grid", "eps", "p", "eta_list", "tol"}},
      {"rate", {"model", "grid", "eps_samples", "c0_reference", "tol"}},
      {"lp-compare", {"model", "grid", "eps", "p", "vgrid", "gap_tol", "tol"}},
      {"one-sided", {"model", "grid", "p", "xi", "vgrid", "tol"}},
      {"accept", {}},
  };
  std::set<std::string> ok = allowed.at(task);
  ok.insert("task");
  ok.insert("output_dir");
  ok.insert("seed");
  for (const auto& [key, _] : raw.items())
    if (!ok.count(key))
      throw ConfigError("config key '" + key + "' is not recognized for task " + task);
  if (raw.contains("task") && raw.at("task").get<std::string>() != task)
    throw ConfigError("config task '" + raw.at("task").get<std::string>() +
                      "' disagrees with the command line");
}

std::string plot_series(const std::string& xname, const std::string& yname,
                        const std::vector<double>& xs, const std::vector<double>& ys) {
  std::ostringstream os;
  os << xname << ',' << yname << '\n';
  for (std::size_t k = 0; k < xs.size(); ++k)
    os << format_double(xs[k]) << ',' << format_double(ys[k]) << '\n';
  return os.str();
}

void emit_plotdata(Run& run, const std::string& kind, const std::vector<double>& xs,
                   const std::vector<std::vector<double>>& cols) {
  if (kind == "c_of_eps") {
    run.write("c_of_eps.csv", plot_series("eps", "c", xs, cols.at(0)));
  } else if (kind == "hbar_of_p") {
    run.write("hbar_of_p.csv", plot_series("p", "hbar", xs, cols.at(0)));
  } else if (kind == "one_sided") {
    std::ostringstream os;
    os << "p,dminus,dplus\n";
    for (std::size_t k = 0; k < xs.size(); ++k)
      os << format_double(xs[k]) << ',' << format_double(cols.at(0)[k]) << ','
         << format_double(cols.at(1)[k]) << '\n';
    run.write("one_sided.csv", os.str());
  } else {
    throw ConfigError("emit_plotdata: unknown kind " + kind);
  }
}

// ---- tasks ------------------------------------------------------------------

void task_solve_cell(const Config& cfg, Run& run) {
  const HamiltonianModel model = cfg.model();
  const TorusGrid grid = cfg.grid();
  const SolverOptions opts = cfg.solver();
  const CellSolution cell = solve_cell(model, grid, cfg.vec("p"), cfg.num("eps"), opts);
  {
    std::ostringstream os;
    write_csv(cell.u, os);
    run.write("u.csv", os.str());
  }
  run.write("solution.json", cell.to_json("u.csv"));
  run.check("cell_residual", cell.residual_linf, opts.tol);
  if (model.family() == Family::free) {
    const double expected = 0.5 * cfg.vec("p").squaredNorm();
    run.check("trivial_c", std::abs(cell.c - expected), 1e-10);
  }
}

void task_mather(const Config& cfg, Run& run) {
  const HamiltonianModel model = cfg.model();
  const CellSolution cell =
      solve_cell(model, cfg.grid(), cfg.vec("p"), cfg.num("eps"), cfg.solver());
  const GraphMeasure mu = invariant_density(model, cell);
  {
    std::ostringstream os;
    write_csv(mu.theta(), os);
    run.write("theta.csv", os.str());
  }
  {
    std::ostringstream os;
    write_csv(mu.vfield_base(), os);
    run.write("vfield.csv", os.str());
  }
  run.write("measure.json", mu.to_json("theta.csv", "vfield.csv"));
  run.check("holonomy_residual", holonomy_residual(mu, mu.eps()), 1e-10);
  run.check("mass", std::abs(integrate(mu.theta()) - 1.0), 1e-12);
}

void task_sweep_eps(const Config& cfg, Run& run) {
  const HamiltonianModel model = cfg.model();
  const TorusGrid grid = cfg.grid();
  const SolverOptions opts = cfg.solver();
  const Vec p = cfg.vec("p");
  std::vector<double> eps = cfg.list("eps_samples"), cs;
  double worst = 0.0;
  for (double e : eps) {
    const CellSolution cell = solve_cell(model, grid, p, e, opts);
    cs.push_back(cell.c);
    worst = std::max(worst, cell.residual_linf);
  }
  emit_plotdata(run, "c_of_eps", eps, {cs});
  run.check("sweep_residual", worst, opts.tol);
}

void task_sweep_p(const Config& cfg, Run& run) {
  const HamiltonianModel model = cfg.model();
  const TorusGrid grid = cfg.grid();
  const SolverOptions opts = cfg.solver();
  const double eps = cfg.num("eps");
  std::vector<double> ps = cfg.list("p_samples"), cs;
  double worst = 0.0;
  for (double p : ps) {
    Vec pv = Vec::Zero();
    pv[0] = p;
    const CellSolution cell = solve_cell(model, grid, pv, eps, opts);
    cs.push_back(cell.c);
    worst = std::max(worst, cell.residual_linf);
  }
  {
    std::ostringstream os;
    os << "p,c\n";
    for (std::size_t k = 0; k < ps.size(); ++k)
      os << format_double(ps[k]) << ',' << format_double(cs[k]) << '\n';
    run.write("c_of_p.csv", os.str());
  }
  if (model.dim() == 1 && model.is_mechanical() && model.power() == 2) {
    std::vector<double> hbars;
    for (double p : ps) hbars.push_back(inviscid_oracle(model, p).hbar);
    emit_plotdata(run, "hbar_of_p", ps, {hbars});
  }
  run.check("sweep_residual", worst, opts.tol);

  // midpoint convexity on uniformly spaced samples
  bool uniform = ps.size() >= 3;
  for (std::size_t k = 2; k < ps.size() && uniform; ++k)
    if (std::abs((ps[k] - ps[k - 1]) - (ps[1] - ps[0])) > 1e-12) uniform = false;
  if (uniform) {
    double viol = 0.0;
    for (std::size_t k = 1; k + 1 < ps.size(); ++k)
      viol = std::max(viol, 2.0 * cs[k] - cs[k - 1] - cs[k + 1]);
    run.check("p_convexity", viol, 1e-8);
  }
}

void task_derivative_check(const Config& cfg, Run& run) {
  const HamiltonianModel model = cfg.model();
  const TorusGrid grid = cfg.grid();
  const SolverOptions opts = cfg.solver();
  const Vec p = cfg.vec("p");
  std::vector<DerivativeReport> rows;
  double worst_forms = 0.0;
  for (double eps : cfg.list("eps_samples")) {
    const CellSolution cell = solve_cell(model, grid, p, eps, opts);
    const GraphMeasure mu = invariant_density(model, cell);
    rows.push_back(c_prime(model, cell, mu, opts));
    worst_forms = std::max(worst_forms, rows.back().discrepancy_forms);
  }
  run.write("derivative_sweep.csv", derivative_csv(rows));
  run.check("forms_identity", worst_forms, 1e-10);
}

void task_semiconvexity(const Config& cfg, Run& run) {
  const auto rows = semiconvexity_probe(cfg.model(), cfg.grid(), cfg.vec("p"),
                                        cfg.num("eps"), cfg.list("eta_list"), cfg.solver());
  run.write("semiconvexity.csv", semiconvexity_csv(rows));
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) worst = std::max(worst, r.bound - r.second_difference);
  run.check("semiconvexity", worst, 1e-8);
}

void task_rate(const Config& cfg, Run& run) {
  std::optional<double> c0;
  if (cfg.raw.contains("c0_reference")) c0 = cfg.num("c0_reference");
  const RateFit fit = rate_probe(cfg.model(), cfg.grid(), cfg.list("eps_samples"), c0,
                                 cfg.solver());
  run.write("rate.csv", rate_csv(fit));
  run.check("rate_bounded", std::isfinite(fit.slope_bound) ? 0.0 : 1.0, 0.5);
  if (cfg.model().is_mechanical())
    run.check("rate_sandwich", fit.sandwich_ok ? 0.0 : 1.0, 0.5);
}

void task_lp_compare(const Config& cfg, Run& run) {
  const LpPdeGap gap = lp_vs_pde_gap(cfg.model(), cfg.vec("p"), cfg.num("eps"), cfg.grid(),
                                     cfg.vgrid());
  ordered_json j;
  j["hbar_lp"] = gap.hbar_lp;
  j["pde_c"] = gap.pde_c;
  j["gap"] = gap.gap;
  run.write("lp_compare.json", j.dump(2));
  {
    HolonomicLP lp = HolonomicLP::build(cfg.model(), cfg.grid(), cfg.vgrid(), cfg.vec("p"),
                                        cfg.num("eps"));
    std::ostringstream os;
    lp.export_text(os);
    run.write("lp_export.txt", os.str());
  }
  run.check("lp_gap", gap.gap, cfg.num("gap_tol", 5e-2));
}

void task_one_sided(const Config& cfg, Run& run) {
  const OneSidedReport rep = one_sided_dhbar_inviscid(cfg.model(), cfg.grid(), cfg.vgrid(),
                                                      cfg.vec("p"), cfg.vec("xi"));
  emit_plotdata(run, "one_sided", {cfg.vec("p")[0]}, {{rep.dminus}, {rep.dplus}});
  ordered_json j;
  j["dminus"] = rep.dminus;
  j["dplus"] = rep.dplus;
  if (rep.oracle_dhbar) j["oracle_dhbar"] = *rep.oracle_dhbar;
  run.write("one_sided.json", j.dump(2));
  run.check("one_sided_order", rep.dminus - rep.dplus, 1e-8);
  if (rep.oracle_dhbar)
    run.check("one_sided_oracle_gap",
              std::max(std::abs(rep.dminus - *rep.oracle_dhbar),
                       std::abs(rep.dplus - *rep.oracle_dhbar)),
              2e-2);
}

void task_accept(Run& run) {
  run.checks = run_acceptance(run.out_dir.string(), std::cout);
  for (const char* sub : {"run1", "run2"})
    for (const auto& e : fs::directory_iterator(run.out_dir / sub))
      run.files.push_back(std::string(sub) + "/" + e.path().filename().string());
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

std::string config_hash(const json& raw) {
  // FNV-1a over the canonical dump
  const std::string s = raw.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

int dispatch(const std::string& task, const Config& cfg, Run& run) {
  const std::string started = iso_now();
  std::string error;
  int code = 0;
  try {
    if (task == "solve-cell")
      task_solve_cell(cfg, run);
    else if (task == "mather")
      task_mather(cfg, run);
    else if (task == "sweep-eps")
      task_sweep_eps(cfg, run);
    else if (task == "sweep-p")
      task_sweep_p(cfg, run);
    else if (task == "derivative-check")
      task_derivative_check(cfg, run);
    else if (task == "semiconvexity")
      task_semiconvexity(cfg, run);
    else if (task == "rate")
      task_rate(cfg, run);
    else if (task == "lp-compare")
      task_lp_compare(cfg, run);
    else if (task == "one-sided")
      task_one_sided(cfg, run);
    else if (task == "accept")
      task_accept(run);
  } catch (const ConfigError& e) {
    error = e.what();
    code = 2;
  } catch (const PreconditionError& e) {
    error = e.what();
    code = 2;
  } catch (const std::exception& e) {
    error = e.what();
    code = 3;
  }

  if (task != "accept")
    for (const auto& c : run.checks) std::cout << check_line(c) << '\n';
  if (!error.empty()) std::cerr << "error: " << error << '\n';

  ordered_json manifest;
  manifest["config_hash"] = config_hash(cfg.raw);
  manifest["artifact_version"] = "0.1.0";
  manifest["started"] = started;
  manifest["finished"] = iso_now();
  manifest["files"] = run.files;
  auto& checks = manifest["checks"] = ordered_json::array();
  for (const auto& c : run.checks) {
    ordered_json jc;
    jc["name"] = c.name;
    jc["pass"] = c.pass;
    jc["value"] = c.value;
    jc["tolerance"] = c.tolerance;
    checks.push_back(jc);
  }
  if (!error.empty()) manifest["error"] = error;
  fs::create_directories(run.out_dir);
  std::ofstream os(run.out_dir / "manifest.json", std::ios::binary);
  os << manifest.dump(2) << '\n';

  if (code != 0) return code;
  for (const auto& c : run.checks)
    if (!c.pass) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for effective Hamiltonians and Mather measures"};
  std::string task, config_path, out_dir;
  int threads = 0;
  app.add_option("task", task, "task name")->required()->check(CLI::IsMember(kTasks));
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--out", out_dir, "output directory (overrides config output_dir)");
  app.add_option("--threads", threads, "worker thread cap");
  CLI11_PARSE(app, argc, argv);

  if (threads == 0) {
    if (const char* env = std::getenv("ERGODIC_LAB_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) Eigen::setNbThreads(threads);

  Config cfg;
  cfg.task = task;
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ergolab::ConfigError("cannot open config: " + config_path);
      cfg.raw = json::parse(is);
    } else if (task != "accept") {
      throw ergolab::ConfigError("--config is required for task " + task);
    } else {
      cfg.raw = json::object();
    }
    validate_keys(cfg.raw, task);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  Run run;
  if (!out_dir.empty())
    run.out_dir = out_dir;
  else if (cfg.raw.contains("output_dir"))
    run.out_dir = cfg.raw.at("output_dir").get<std::string>();
  else
    run.out_dir = "out";

  return dispatch(task, cfg, run);
}
