#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lindstedt/analysis.hpp"
#include "lindstedt/diophantine.hpp"
#include "lindstedt/error.hpp"
#include "lindstedt/models.hpp"
#include "lindstedt/series.hpp"

namespace lindstedt {

using json = nlohmann::ordered_json;

/// Parses JSON text; syntax errors become InputError with line and column.
inline json parse_json_text(const std::string& text, const std::string& source = "<input>") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t pos = e.byte == 0 ? 0 : e.byte - 1;
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    auto cut = msg.find("parse error");
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                     (cut == std::string::npos ? msg : msg.substr(cut)) + ")");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

template <class T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw InputError("field '" + what + "' has the wrong type");
  }
}

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& [key, val] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InputError("unknown key '" + key + "' in " + where);
}

}  // namespace detail

/// Omega forms: {"values": [...]}, {"surd": [{"a","b","m","c"}, ...]}, {"cf": {"preperiod", "period"}},
/// {"name": "golden" | "silver"}; optional "kind" (flow | map), "tau", "nu_max".
inline RotationVector parse_rotation(const json& j) {
  detail::reject_unknown(j, {"values", "surd", "cf", "name", "kind", "tau", "nu_max"}, "omega");
  int forms = int(j.contains("values")) + int(j.contains("surd")) + int(j.contains("cf")) + int(j.contains("name"));
  if (forms != 1) throw InputError("omega needs exactly one of values, surd, cf, name");
  RotationVector w;
  if (j.contains("values")) {
    w.values = detail::get_as<std::vector<double>>(j["values"], "omega.values");
  } else if (j.contains("surd")) {
    std::vector<Surd> ss;
    const json& arr = j["surd"].is_array() ? j["surd"] : json::array({j["surd"]});
    for (const auto& s : arr) {
      detail::reject_unknown(s, {"a", "b", "m", "c"}, "omega.surd");
      Surd x;
      x.a = s.value("a", 0LL);
      x.b = s.value("b", 0LL);
      x.m = s.value("m", 0LL);
      x.c = s.value("c", 1LL);
      if (x.c == 0) throw InputError("omega.surd: c must be nonzero");
      if (x.m < 0) throw InputError("omega.surd: m must be nonnegative");
      ss.push_back(x);
    }
    if (ss.empty()) throw InputError("omega.surd is empty");
    for (const auto& s : ss) w.values.push_back(s.value());
    w.surds = ss;
  } else if (j.contains("cf")) {
    detail::reject_unknown(j["cf"], {"preperiod", "period"}, "omega.cf");
    CFSpec c;
    c.preperiod = detail::get_as<std::vector<long long>>(j["cf"].value("preperiod", json::array()), "omega.cf.preperiod");
    c.period = detail::get_as<std::vector<long long>>(j["cf"].value("period", json::array()), "omega.cf.period");
    if (c.period.empty()) throw InputError("omega.cf.period must be nonempty (rational inputs are not allowed)");
    for (auto v : c.preperiod)
      if (v < 1) throw InputError("omega.cf: partial quotients must be positive");
    for (auto v : c.period)
      if (v < 1) throw InputError("omega.cf: partial quotients must be positive");
    w = from_cf(c);
  } else {
    std::string name = detail::get_as<std::string>(j["name"], "omega.name");
    if (name == "golden")
      w = golden_map();
    else if (name == "silver")
      w = silver_map();
    else
      throw InputError("unknown omega name '" + name + "' (golden, silver)");
  }
  if (j.contains("kind")) {
    std::string k = detail::get_as<std::string>(j["kind"], "omega.kind");
    if (k == "flow")
      w.kind = Dynamics::flow;
    else if (k == "map")
      w.kind = Dynamics::map;
    else
      throw InputError("omega.kind must be flow or map");
  } else if (!j.contains("cf") && !j.contains("name")) {
    w.kind = Dynamics::flow;
  }
  if (j.contains("tau")) w.tau = detail::get_as<double>(j["tau"], "omega.tau");
  if (j.contains("nu_max")) {
    w.nu_max = detail::get_as<int>(j["nu_max"], "omega.nu_max");
    if (w.nu_max < 1) throw InputError("omega.nu_max must be >= 1");
    if (!j.contains("tau")) w.tau = w.dim() == 1 ? 1.0 : std::max(1.0, w.dim() - 1.0);
  }
  if (w.values.empty()) throw InputError("omega has no components");
  return w;
}

struct ParsedSpec {
  ModelSpec model;
  RotationVector omega;
  int order = 0;  // 0 when absent
  json source;    // normalized document used for the config hash
};

inline ParsedSpec parse_model_spec(const json& j) {
  detail::reject_unknown(j, {"model", "omega", "order", "forcing", "g_taylor", "beta0", "alpha0", "c0", "r", "s",
                             "tolerances", "comment"},
                         "model spec");
  ParsedSpec p;
  p.source = j;
  if (!j.contains("model")) throw InputError("model spec lacks 'model'");
  p.model.kind = model_kind_from_string(detail::get_as<std::string>(j["model"], "model"));
  if (!j.contains("omega")) throw InputError("model spec lacks 'omega'");
  p.omega = parse_rotation(j["omega"]);
  if (p.model.kind == ModelKind::standard_map && !j["omega"].contains("kind")) p.omega.kind = Dynamics::map;
  if (p.model.kind != ModelKind::standard_map && !j["omega"].contains("kind")) p.omega.kind = Dynamics::flow;
  if (j.contains("order")) {
    p.order = detail::get_as<int>(j["order"], "order");
    if (p.order < 1) throw InputError("order must be >= 1");
  }
  if (j.contains("forcing")) {
    if (!j["forcing"].is_array()) throw InputError("forcing must be an array");
    for (const auto& t : j["forcing"]) {
      detail::reject_unknown(t, {"nu", "re", "im"}, "forcing term");
      if (!t.contains("nu")) throw InputError("forcing term lacks 'nu'");
      ForcingTerm ft;
      ft.nu = detail::get_as<Mode>(t["nu"], "forcing.nu");
      ft.coeff = cplx(detail::get_as<double>(t.value("re", json(0.0)), "forcing.re"),
                      detail::get_as<double>(t.value("im", json(0.0)), "forcing.im"));
      p.model.forcing.push_back(ft);
    }
  }
  if (j.contains("g_taylor")) p.model.g_taylor = detail::get_as<std::vector<double>>(j["g_taylor"], "g_taylor");
  if (j.contains("beta0")) p.model.beta0 = detail::get_as<std::vector<double>>(j["beta0"], "beta0");
  if (j.contains("alpha0")) p.model.alpha0 = detail::get_as<std::vector<double>>(j["alpha0"], "alpha0");
  if (j.contains("c0")) p.model.c0 = detail::get_as<double>(j["c0"], "c0");
  if (j.contains("r")) p.model.r = detail::get_as<int>(j["r"], "r");
  if (j.contains("s")) p.model.s = detail::get_as<int>(j["s"], "s");
  if (p.model.kind == ModelKind::lower_tori && !j.contains("r")) p.model.r = p.omega.dim();
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    detail::reject_unknown(t, {"stationary", "nondeg", "compat", "hermitian"}, "tolerances");
    p.model.tol.stationary = t.value("stationary", p.model.tol.stationary);
    p.model.tol.nondeg = t.value("nondeg", p.model.tol.nondeg);
    p.model.tol.compat = t.value("compat", p.model.tol.compat);
    p.model.tol.hermitian = t.value("hermitian", p.model.tol.hermitian);
  }
  return p;
}

inline ParsedSpec load_spec_file(const std::string& path) { return parse_model_spec(parse_json_text(read_file(path), path)); }

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const std::string& command, const json& config) {
  return fnv1a_hex(command + "\n" + config.dump());
}

inline json to_json(const cplx& z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const CVec& v) {
  json a = json::array();
  for (const auto& z : v) a.push_back(to_json(z));
  return a;
}

inline json rotation_json(const RotationVector& w) {
  json j;
  j["values"] = w.values;
  j["kind"] = w.kind == Dynamics::map ? "map" : "flow";
  j["gamma"] = w.gamma;
  j["tau"] = w.tau;
  j["nu_max"] = w.nu_max;
  return j;
}

/// Header shared by every report: config hash and the gamma / nu_max stamps.
inline json report_header(const std::string& command, const std::string& hash, const RotationVector* w) {
  json j;
  j["command"] = command;
  j["config_hash"] = hash;
  if (w) {
    j["gamma"] = w->gamma;
    j["tau"] = w->tau;
    j["nu_max"] = w->nu_max;
  } else {
    j["gamma"] = nullptr;
    j["tau"] = nullptr;
    j["nu_max"] = nullptr;
  }
  return j;
}

inline json solve_report_json(const Model& m, const SolveReport& r, int K, const std::string& hash) {
  json j = report_header("solve", hash, &m.omega());
  j["model"] = to_string(m.kind());
  j["order"] = K;
  j["n"] = m.n();
  j["d"] = m.d();
  j["omega"] = rotation_json(m.omega());
  json compat = json::array();
  for (const auto& c : r.compat)
    compat.push_back({{"k", c.k}, {"value", to_json(c.value)}, {"abs", c.abs}, {"scale", c.scale}, {"rel", c.rel}});
  j["compatibility"] = compat;
  j["min_divisor"] = r.min_divisor;
  json zm = json::array();
  for (std::size_t k = 0; k < r.zero_mode.size(); ++k)
    if (!r.zero_mode[k].empty()) zm.push_back({{"k", k}, {"value", to_json(r.zero_mode[k])}});
  j["zero_mode"] = zm;
  j["max_hermitian_violation"] = r.max_hermitian_violation;
  j["norms"] = ft_order_norms(r.series);
  j["nnz"] = r.series.nnz();
  if (m.kind() == ModelKind::dissipative) {
    j["c0"] = m.c0();
    j["a"] = m.a();
  }
  if (m.stationary()) {
    j["stationary"] = {{"gradient_norm", m.stationary()->gradient_norm},
                       {"a", m.stationary()->a},
                       {"distinct", m.stationary()->distinct},
                       {"classification", m.stationary()->classification}};
  }
  return j;
}

inline json growth_json(const GrowthTest& g) {
  return {{"class", to_string(g.growth)}, {"mean", g.mean}, {"sd", g.sd}, {"t", g.t_stat},
          {"first_k", g.first_k}, {"last_k", g.last_k}};
}

inline json radius_json(const RadiusEstimate& r) {
  json j;
  j["norms"] = r.norms;
  j["root_test"] = r.root_test;
  j["rho"] = r.rho ? json(*r.rho) : json(nullptr);
  j["slope"] = r.slope;
  j["r2"] = r.r2;
  j["window"] = {r.window_lo, r.window_hi};
  j["growth"] = growth_json(r.growth);
  return j;
}

inline json borel_json(const BorelReport& b) {
  return {{"b", b.b}, {"original", growth_json(b.original)}, {"transformed", growth_json(b.transformed)},
          {"signature", b.signature}};
}

inline json davie_json(const DavieReport& d) {
  json e = json::array();
  for (const auto& x : d.entries)
    e.push_back({{"label", x.label}, {"alpha", x.alpha}, {"B", x.B}, {"rho", x.rho ? json(*x.rho) : json(nullptr)}});
  return {{"entries", e}, {"separated_pairs", d.separated_pairs}, {"violations", d.violations}, {"verdict", d.verdict}};
}

inline json measure_json(const MeasureReport& r) {
  json top = json::array();
  for (const auto& c : r.top) top.push_back({{"nu", c.nu}, {"i", c.i}, {"lo", c.lo}, {"hi", c.hi}});
  return {{"eps0", r.eps0},
          {"excluded_fraction", r.fraction},
          {"grid_fraction", r.grid_fraction},
          {"grid_n", r.grid_n},
          {"grid_too_coarse", r.grid_too_coarse},
          {"thinnest_interval", r.thinnest},
          {"m0", r.m0},
          {"margin_ok", r.margin_ok},
          {"analytic_shape_c1", r.analytic_shape},
          {"n_intervals", r.n_intervals},
          {"contributions", top}};
}

inline json bryuno_json(const BryunoReport& b) {
  json j;
  j["kind"] = b.kind == BryunoReport::Kind::scalar ? "scalar" : "vector";
  j["n_max"] = b.n_max;
  j["partial_sums"] = b.partial_sums;
  j["value"] = b.value;
  j["tail"] = b.tail_known ? json(b.tail) : json(nullptr);
  j["converged"] = b.converged;
  if (b.kind == BryunoReport::Kind::scalar) {
    j["q_n"] = b.q_n;
  } else {
    j["alpha_n"] = b.alpha_n;
    j["alpha_argmin"] = b.alpha_argmin;
  }
  return j;
}

/// Writes a JSON document with a trailing newline.
inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline void write_series_csv(const std::string& path, const FTSeries& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  write_csv(out, u);
}

/// Two-column gnuplot data with a comment header.
inline void write_plotdata(const std::string& path, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<double>& x, const std::vector<double>& y) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << "# " << xlabel << ' ' << ylabel << '\n';
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) out << format_double(x[i]) << ' ' << format_double(y[i]) << '\n';
}

/// (k, log norm_k) for the nonzero orders.
inline void plot_norms(const std::string& path, const std::vector<double>& norms) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < norms.size(); ++k)
    if (norms[k] > 0) {
      x.push_back(double(k));
      y.push_back(std::log(norms[k]));
    }
  write_plotdata(path, "k", "log_norm", x, y);
}

inline void plot_bryuno(const std::string& path, const BryunoReport& b) {
  std::vector<double> x;
  for (std::size_t n = 0; n < b.partial_sums.size(); ++n) x.push_back(double(n + 1));
  write_plotdata(path, "n", "partial_sum", x, b.partial_sums);
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (!std::filesystem::is_directory(p)) throw InputError("output directory " + dir + " is not writable");
  return p;
}

}  // namespace lindstedt
