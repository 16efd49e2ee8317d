// lindstedt: solve, verify and analyze Lindstedt series from JSON model specs.
//
// exit codes: 0 success, 1 contract violation, 2 input error

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lindstedt/lindstedt.hpp"

namespace fs = std::filesystem;
using namespace lindstedt;

namespace {

struct Common {
  std::string spec_path;
  std::string out_dir = "out";
  int order = 0;
  bool plotdata = false;
};

ParsedSpec load(const Common& c) {
  if (c.spec_path.empty()) throw InputError("--spec is required");
  ParsedSpec p = load_spec_file(c.spec_path);
  if (c.order > 0) p.order = c.order;
  if (p.order < 1) throw InputError("no order given (use --order or the spec file's \"order\")");
  return p;
}

json base_config(const ParsedSpec& p) {
  json j;
  j["spec"] = p.source;
  j["order"] = p.order;
  return j;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("not a number: '" + item + "'");
    }
  }
  return out;
}

int cmd_solve(const Common& c) {
  ParsedSpec p = load(c);
  Model m(p.model, p.omega);
  SolveReport r = solve_lindstedt(m, p.order);
  const std::string hash = config_hash("solve", base_config(p));
  fs::path dir = ensure_dir(c.out_dir);
  write_series_csv((dir / "series.csv").string(), r.series);
  json rep = solve_report_json(m, r, p.order, hash);
  if (m.kind() == ModelKind::maximal_torus || m.kind() == ModelKind::standard_map ||
      m.kind() == ModelKind::lower_tori) {
    try {
      check_compatibility(m, r.compat);
      rep["compatibility_ok"] = true;
    } catch (const ContractViolation&) {
      rep["compatibility_ok"] = false;
      write_json((dir / "report.json").string(), rep);
      throw;
    }
  }
  write_json((dir / "report.json").string(), rep);
  if (c.plotdata) plot_norms((dir / "norms.dat").string(), ft_order_norms(r.series));
  std::cout << "wrote " << (dir / "series.csv").string() << " and " << (dir / "report.json").string() << '\n';
  return 0;
}

int cmd_verify(const Common& c, double tol, bool dump) {
  ParsedSpec p = load(c);
  if (p.order > 5) throw InputError("verify-trees supports order <= 5");
  Model m(p.model, p.omega);
  std::vector<TreeCheck> checks = verify_trees(m, p.order, m.omega().tau);
  json cfg = base_config(p);
  cfg["tolerance"] = tol;
  json rep = report_header("verify-trees", config_hash("verify-trees", cfg), &m.omega());
  rep["model"] = to_string(m.kind());
  json entries = json::array();
  double worst = 0;
  int viol = 0;
  for (const auto& t : checks) {
    worst = std::max(worst, t.rel_error);
    viol += t.sb_violations;
    entries.push_back({{"k", t.k},
                       {"nu", t.nu},
                       {"n_trees", t.n_trees},
                       {"tree_sum", to_json(t.tree_sum)},
                       {"recursion_value", to_json(t.recursion)},
                       {"rel_error", t.rel_error},
                       {"siegel_bryuno_worst_margin", t.sb_worst_margin ? json(*t.sb_worst_margin) : json(nullptr)}});
  }
  rep["entries"] = entries;
  rep["max_rel_error"] = worst;
  rep["siegel_bryuno_violations"] = viol;
  fs::path dir = ensure_dir(c.out_dir);
  write_json((dir / "trees.json").string(), rep);
  if (dump) {
    TreeEnumerator en(m, p.order);
    std::ofstream out(dir / "trees.txt", std::ios::binary);
    for (const auto& t : checks)
      for (const auto& s : en.subs(t.k, t.nu)) out << t.k << ' ' << mode_to_string(t.nu) << ' ' << to_tree(s).serialize() << '\n';
  }
  std::cout << "max rel_error " << format_double(worst) << ", Siegel-Bryuno violations " << viol << '\n';
  if (worst > tol)
    throw ContractViolation("tree oracle", "tree sums differ from the recursion by " + format_double(worst));
  if (viol > 0) throw ContractViolation("siegel-bryuno bound", std::to_string(viol) + " scale counts exceed the bound");
  return 0;
}

RotationVector rotation_from_cli(const std::string& omega_json, const std::string& alpha) {
  if (!omega_json.empty() && !alpha.empty()) throw InputError("use either --omega or --alpha");
  if (!alpha.empty()) {
    json j;
    j["values"] = parse_list(alpha);
    j["kind"] = "map";
    return parse_rotation(j);
  }
  if (omega_json.empty()) throw InputError("--omega or --alpha is required");
  return parse_rotation(parse_json_text(omega_json, "--omega"));
}

int cmd_bryuno(const Common& c, const std::string& omega_json, const std::string& alpha, int n_max, bool vector) {
  RotationVector w = rotation_from_cli(omega_json, alpha);
  BryunoReport b = vector ? bryuno_omega(w, n_max) : bryuno_function(w, n_max);
  json cfg = {{"omega", omega_json}, {"alpha", alpha}, {"n_max", n_max}, {"vector", vector}};
  json rep = report_header("bryuno", config_hash("bryuno", cfg), nullptr);
  rep["alpha_or_omega"] = w.values;
  rep.update(bryuno_json(b));
  fs::path dir = ensure_dir(c.out_dir);
  write_json((dir / "bryuno.json").string(), rep);
  if (c.plotdata) plot_bryuno((dir / "bryuno.dat").string(), b);
  std::cout << "B = " << format_double(b.value) << (b.converged ? "" : " (not converged)") << '\n';
  return 0;
}

struct MeasureOpts {
  std::string a_list;
  std::string omega_json;
  double gamma = 0.05;
  double tau_prime = 0;  // 0: tau + r + 1
  double eps0 = 0.1;
  int halvings = 3;
  int nu_max = 200;
  int grid_n = 20000;
};

json run_measure(const MeasureOpts& o, const std::vector<double>& a, const RotationVector& w, const fs::path& dir,
                 bool plot) {
  const double tp = o.tau_prime > 0 ? o.tau_prime : w.tau + w.dim() + 1.0;
  json reports = json::array();
  std::vector<double> e0s, fr;
  for (int h = 0; h <= o.halvings; ++h) {
    double e0 = o.eps0 / std::pow(2.0, h);
    MeasureReport r = melnikov_measure(a, o.gamma, tp, e0, w, o.nu_max, o.grid_n, w.tau);
    reports.push_back(measure_json(r));
    e0s.push_back(e0);
    fr.push_back(r.fraction);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < fr.size(); ++i) monotone = monotone && fr[i] < fr[i - 1];
  if (plot) write_plotdata((dir / "measure.dat").string(), "eps0", "excluded_fraction", e0s, fr);
  return {{"a", a}, {"gamma", o.gamma}, {"tau_prime", tp}, {"tau", w.tau}, {"reports", reports},
          {"strictly_decreasing", monotone}};
}

int cmd_measure(const Common& c, const MeasureOpts& o) {
  RotationVector w = rotation_from_cli(o.omega_json, "");
  if (w.kind != Dynamics::flow) throw InputError("measure needs a flow frequency vector");
  if (w.nu_max == 0) stamp_diophantine(w, w.dim() == 1 ? 1.0 : std::max(1.0, w.dim() - 1.0), o.nu_max);
  std::vector<double> a = parse_list(o.a_list);
  json cfg = {{"a", o.a_list}, {"omega", o.omega_json}, {"gamma", o.gamma}, {"tau_prime", o.tau_prime},
              {"eps0", o.eps0}, {"halvings", o.halvings}, {"nu_max", o.nu_max}, {"grid_n", o.grid_n}};
  json rep = report_header("measure", config_hash("measure", cfg), &w);
  fs::path dir = ensure_dir(c.out_dir);
  rep.update(run_measure(o, a, w, dir, c.plotdata));
  write_json((dir / "measure.json").string(), rep);
  std::cout << "excluded fractions:";
  for (const auto& r : rep["reports"]) std::cout << ' ' << format_double(r["excluded_fraction"].get<double>());
  std::cout << '\n';
  return 0;
}

struct IntegrateOpts {
  double eps = 0.05;
  double offset = 0.1;
  double periods = 200;
  double h = 0;
};

json run_integrate(const Model& m, const FTSeries& u, const IntegrateOpts& o, const fs::path& dir, bool plot) {
  AttractivityReport ar = attractivity_check(m, u, o.eps, o.offset, o.periods);
  json j = {{"eps", o.eps},
            {"offset", o.offset},
            {"periods", o.periods},
            {"T", ar.T},
            {"verdict", ar.verdict},
            {"on_solution_deviation", ar.on_solution_deviation},
            {"perturbed_deviation", ar.perturbed_deviation},
            {"tube", ar.tube},
            {"step", ar.perturbed.h},
            {"step_halved", ar.perturbed.halved}};
  if (plot && !ar.perturbed.samples.empty()) {
    std::vector<double> t, dev;
    for (const auto& s : ar.perturbed.samples) {
      t.push_back(s.t);
      dev.push_back(std::abs(s.x - truncation_at(m, u, o.eps, s.t).first));
    }
    write_plotdata((dir / "trajectory.dat").string(), "t", "abs_deviation", t, dev);
  }
  return j;
}

int cmd_integrate(const Common& c, const IntegrateOpts& o) {
  ParsedSpec p = load(c);
  if (p.model.kind != ModelKind::dissipative) throw InputError("integrate needs a dissipative spec");
  Model m(p.model, p.omega);
  SolveReport r = solve_lindstedt(m, p.order);
  json cfg = base_config(p);
  cfg["eps"] = o.eps;
  cfg["offset"] = o.offset;
  cfg["periods"] = o.periods;
  cfg["h"] = o.h;
  json rep = report_header("integrate", config_hash("integrate", cfg), &m.omega());
  fs::path dir = ensure_dir(c.out_dir);
  rep.update(run_integrate(m, r.series, o, dir, c.plotdata));
  write_json((dir / "integrate.json").string(), rep);
  std::cout << "verdict: " << rep["verdict"].get<std::string>() << '\n';
  return 0;
}

struct AnalyzeOpts {
  bool radius = false, davie = false, borel = false, measure = false, integrate = false;
  std::string davie_omegas;
  MeasureOpts mo;
  IntegrateOpts io;
};

int cmd_analyze(const Common& c, AnalyzeOpts o) {
  ParsedSpec p = load(c);
  Model m(p.model, p.omega);
  SolveReport r = solve_lindstedt(m, p.order);
  std::vector<double> norms = ft_order_norms(r.series);
  json cfg = base_config(p);
  cfg["flags"] = {o.radius, o.davie, o.borel, o.measure, o.integrate};
  cfg["davie_omegas"] = o.davie_omegas;
  cfg["measure"] = {o.mo.a_list, o.mo.gamma, o.mo.tau_prime, o.mo.eps0, o.mo.halvings, o.mo.nu_max, o.mo.grid_n};
  cfg["integrate"] = {o.io.eps, o.io.offset, o.io.periods, o.io.h};
  json rep = report_header("analyze", config_hash("analyze", cfg), &m.omega());
  rep["model"] = to_string(m.kind());
  rep["norms"] = norms;
  fs::path dir = ensure_dir(c.out_dir);
  if (c.plotdata) plot_norms((dir / "norms.dat").string(), norms);
  if (o.radius) rep["radius"] = radius_json(radius_estimate(norms));
  if (o.borel) {
    BorelReport b = borel_transform(norms);
    rep["borel"] = borel_json(b);
    if (c.plotdata) {
      std::vector<double> k, lb;
      for (std::size_t i = 0; i < b.b.size(); ++i)
        if (b.b[i] > 0) {
          k.push_back(double(i));
          lb.push_back(std::log(b.b[i]));
        }
      write_plotdata((dir / "borel.dat").string(), "k", "log_b", k, lb);
    }
  }
  if (o.davie) {
    std::vector<std::pair<std::string, RotationVector>> rs;
    json arr = o.davie_omegas.empty()
                   ? json::array({json{{"name", "silver"}}, json{{"name", "golden"}},
                                  json{{"cf", {{"preperiod", {1, 200}}, {"period", {1}}}}}})
                   : parse_json_text(o.davie_omegas, "--davie-omegas");
    if (!arr.is_array()) throw InputError("--davie-omegas must be a JSON array");
    for (const auto& j : arr) rs.emplace_back(j.dump(), parse_rotation(j));
    rep["davie"] = davie_json(davie_compare(rs, p.order));
  }
  if (o.measure) {
    std::vector<double> a = parse_list(o.mo.a_list);
    if (a.empty() && m.stationary()) a = m.stationary()->a;
    RotationVector w = m.omega();
    rep["measure"] = run_measure(o.mo, a, w, dir, c.plotdata);
  }
  if (o.integrate) {
    if (m.kind() != ModelKind::dissipative) throw InputError("--integrate needs a dissipative spec");
    rep["integrate"] = run_integrate(m, r.series, o.io, dir, c.plotdata);
  }
  write_json((dir / "analysis.json").string(), rep);
  std::cout << "wrote " << (dir / "analysis.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lindstedt series: solve, verify and analyze"};
  app.require_subcommand(1);

  Common c;
  auto add_common = [&](CLI::App* sub, bool with_spec) {
    if (with_spec) {
      sub->add_option("--spec", c.spec_path, "model spec (JSON)")->required()->check(CLI::ExistingFile);
      sub->add_option("--order", c.order, "maximal order K (overrides the spec file)")->check(CLI::PositiveNumber);
    }
    sub->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    sub->add_flag("--plotdata", c.plotdata, "write two-column data files");
  };

  auto* solve = app.add_subcommand("solve", "compute the series; writes series.csv and report.json");
  add_common(solve, true);

  double tol = 1e-10;
  bool dump = false;
  auto* verify = app.add_subcommand("verify-trees", "compare tree sums with the recursion; writes trees.json");
  add_common(verify, true);
  verify->add_option("--tol", tol, "relative tolerance")->capture_default_str();
  verify->add_flag("--dump-trees", dump, "also write trees.txt with serialized trees");

  std::string omega_json, alpha;
  int n_max = 30;
  bool vec = false;
  auto* bry = app.add_subcommand("bryuno", "Bryuno sums; writes bryuno.json");
  add_common(bry, false);
  bry->add_option("--omega", omega_json, "rotation vector as JSON, e.g. '{\"name\":\"golden\"}'");
  bry->add_option("--alpha", alpha, "rotation number as a float");
  bry->add_option("--n-max", n_max, "number of terms")->capture_default_str()->check(CLI::PositiveNumber);
  bry->add_flag("--vector", vec, "vector form via brute-force small divisors");

  AnalyzeOpts ao;
  auto add_measure = [](CLI::App* sub, MeasureOpts& mo) {
    sub->add_option("--a", mo.a_list, "comma-separated eigenvalues a_i");
    sub->add_option("--gamma", mo.gamma, "Melnikov constant")->capture_default_str();
    sub->add_option("--tau-prime", mo.tau_prime, "Melnikov exponent (default tau + r + 1)");
    sub->add_option("--eps0", mo.eps0, "largest eps0")->capture_default_str();
    sub->add_option("--halvings", mo.halvings, "number of eps0 halvings")->capture_default_str();
    sub->add_option("--nu-max", mo.nu_max, "search radius")->capture_default_str();
    sub->add_option("--grid-n", mo.grid_n, "grid points")->capture_default_str();
  };
  auto add_integrate = [](CLI::App* sub, IntegrateOpts& io) {
    sub->add_option("--eps", io.eps, "eps (damping 1/eps)")->capture_default_str();
    sub->add_option("--offset", io.offset, "initial offset")->capture_default_str();
    sub->add_option("--periods", io.periods, "forcing periods")->capture_default_str();
  };
  auto* an = app.add_subcommand("analyze", "radius, Bryuno ordering, Borel, measure, attractivity");
  add_common(an, true);
  an->add_flag("--radius", ao.radius, "radius estimate");
  an->add_flag("--davie", ao.davie, "standard-map radius versus B ordering");
  an->add_flag("--borel", ao.borel, "Borel transform of the norms");
  an->add_flag("--measure", ao.measure, "Melnikov excluded measure");
  an->add_flag("--integrate", ao.integrate, "attractivity run (dissipative)");
  an->add_option("--davie-omegas", ao.davie_omegas, "JSON array of rotation numbers");
  add_measure(an, ao.mo);
  add_integrate(an, ao.io);

  MeasureOpts mo;
  auto* meas = app.add_subcommand("measure", "Melnikov excluded measure; writes measure.json");
  add_common(meas, false);
  meas->add_option("--omega", mo.omega_json, "frequency vector as JSON")->required();
  add_measure(meas, mo);

  IntegrateOpts io;
  auto* integ = app.add_subcommand("integrate", "integrate the dissipative ODE; writes integrate.json");
  add_common(integ, true);
  add_integrate(integ, io);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*solve) return cmd_solve(c);
    if (*verify) return cmd_verify(c, tol, dump);
    if (*bry) return cmd_bryuno(c, omega_json, alpha, n_max, vec);
    if (*an) return cmd_analyze(c, ao);
    if (*meas) return cmd_measure(c, mo);
    if (*integ) return cmd_integrate(c, io);
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return 1;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const BudgetExceeded& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
