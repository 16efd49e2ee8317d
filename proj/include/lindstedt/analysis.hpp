#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lindstedt/diophantine.hpp"
#include "lindstedt/error.hpp"
#include "lindstedt/models.hpp"
#include "lindstedt/parallel.hpp"
#include "lindstedt/series.hpp"

namespace lindstedt {

struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) throw InputError("fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

enum class Growth { geometric, factorial_like };

inline std::string to_string(Growth g) { return g == Growth::geometric ? "geometric" : "factorial-like"; }

struct GrowthTest {
  Growth growth = Growth::geometric;
  double mean = 0, sd = 0, t_stat = 0;
  int first_k = 0, last_k = 0;
};

/// Second differences of log|a_k| over the tail window; factorial-like when their mean is
/// positive with t-statistic > 3.
inline GrowthTest classify_growth(const std::vector<double>& a) {
  const int K = static_cast<int>(a.size()) - 1;
  int lo = std::max(1, std::min(K / 2 + 1, K - 5));
  std::vector<int> ks;
  std::vector<double> la;
  for (int k = lo; k <= K; ++k)
    if (a[k] != 0 && std::isfinite(a[k])) {
      ks.push_back(k);
      la.push_back(std::log(std::abs(a[k])));
    }
  GrowthTest g;
  if (ks.size() < 4) throw InputError("growth classification needs at least four nonzero terms in the tail");
  g.first_k = ks.front();
  g.last_k = ks.back();
  std::vector<double> d2;
  for (std::size_t i = 1; i + 1 < la.size(); ++i) {
    double h1 = ks[i] - ks[i - 1], h2 = ks[i + 1] - ks[i];
    // divided second difference, normalized to unit spacing
    d2.push_back(2.0 * ((la[i + 1] - la[i]) / h2 - (la[i] - la[i - 1]) / h1) / (h1 + h2));
  }
  double m = 0;
  for (double v : d2) m += v;
  m /= d2.size();
  double ss = 0;
  for (double v : d2) ss += (v - m) * (v - m);
  g.mean = m;
  g.sd = d2.size() > 1 ? std::sqrt(ss / (d2.size() - 1)) : 0;
  double se = g.sd / std::sqrt(double(d2.size()));
  g.t_stat = se > 0 ? m / se : (m > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  g.growth = (m > 1e-3 && g.t_stat > 3) ? Growth::factorial_like : Growth::geometric;
  return g;
}

struct RadiusEstimate {
  std::vector<double> norms;
  std::vector<double> root_test;  // norm_k^{1/k}
  std::optional<double> rho;      // absent for factorial-like growth
  double slope = 0, r2 = 0;
  int window_lo = 0, window_hi = 0;
  GrowthTest growth;
};

/// Least-squares slope of log norm_k over the last half of orders; rho = exp(-slope).
inline RadiusEstimate radius_estimate(const std::vector<double>& norms) {
  const int K = static_cast<int>(norms.size()) - 1;
  if (K < 4) throw InputError("radius_estimate: too few orders");
  RadiusEstimate r;
  r.norms = norms;
  for (int k = 0; k <= K; ++k) r.root_test.push_back(k == 0 ? 0.0 : std::pow(norms[k], 1.0 / k));
  std::vector<double> x, y;
  r.window_lo = K / 2 + 1;
  r.window_hi = K;
  for (int k = r.window_lo; k <= K; ++k)
    if (norms[k] > 0) {
      x.push_back(k);
      y.push_back(std::log(norms[k]));
    }
  if (x.size() < 3) throw InputError("radius_estimate: too few nonzero orders in the window");
  LineFit f = fit_line(x, y);
  r.slope = f.slope;
  r.r2 = f.r2;
  r.growth = classify_growth(norms);
  if (r.growth.growth == Growth::geometric) r.rho = std::exp(-f.slope);
  return r;
}

struct BorelReport {
  std::vector<double> b;
  GrowthTest original, transformed;
  std::string signature;
};

inline BorelReport borel_transform(const std::vector<double>& a) {
  if (a.size() < 9) throw InputError("borel_transform needs K >= 8");
  BorelReport r;
  double lf = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (k > 1) lf += std::log(double(k));
    r.b.push_back(a[k] == 0 ? 0.0 : std::copysign(std::exp(std::log(std::abs(a[k])) - lf), a[k]));
  }
  r.original = classify_growth(a);
  r.transformed = classify_growth(r.b);
  if (r.original.growth == Growth::factorial_like && r.transformed.growth == Growth::geometric)
    r.signature = "borel-summable";
  else if (r.original.growth == Growth::geometric && r.transformed.growth == Growth::geometric)
    r.signature = "convergent";
  else
    r.signature = "undetermined";
  return r;
}

// ---- Bryuno ordering ------------------------------------------------------------------

struct DavieEntry {
  std::string label;
  double alpha = 0;
  double B = 0;
  std::optional<double> rho;
  std::vector<double> norms;
};

struct DavieReport {
  std::vector<DavieEntry> entries;
  int separated_pairs = 0;  // pairs with B ratio >= 1.5
  int violations = 0;
  std::string verdict;  // consistent | inconsistent | inconclusive
};

/// Standard-map radius estimates versus B(alpha); only pairs with B ratio >= 1.5 are compared.
inline DavieReport davie_compare(const std::vector<std::pair<std::string, RotationVector>>& rotations, int K,
                                 double separation = 1.5) {
  DavieReport rep;
  rep.entries.resize(rotations.size());
  parallel_for(rotations.size(), [&](std::size_t idx) {
    const auto& [label, w] = rotations[idx];
    ModelSpec spec;
    spec.kind = ModelKind::standard_map;
    Model m(spec, w);
    SolveReport sr = solve_lindstedt(m, K);
    DavieEntry& e = rep.entries[idx];
    e.label = label;
    e.alpha = w.values.front();
    e.norms = ft_order_norms(sr.series);
    e.rho = radius_estimate(e.norms).rho;
    int nb = 30;
    BryunoReport br = bryuno_function(w, nb);
    while (!br.converged && nb < 200) br = bryuno_function(w, nb *= 2);
    e.B = br.value;
  });
  for (std::size_t i = 0; i < rep.entries.size(); ++i)
    for (std::size_t j = 0; j < rep.entries.size(); ++j) {
      const auto& lo = rep.entries[i];
      const auto& hi = rep.entries[j];
      if (!(hi.B >= separation * lo.B)) continue;
      ++rep.separated_pairs;
      if (!lo.rho || !hi.rho || !(*hi.rho < *lo.rho)) ++rep.violations;
    }
  if (rep.entries.size() < 2)
    rep.verdict = "consistent";
  else if (rep.separated_pairs == 0)
    rep.verdict = "inconclusive";
  else
    rep.verdict = rep.violations == 0 ? "consistent" : "inconsistent";
  return rep;
}

// ---- Melnikov measure --------------------------------------------------------------------

struct MeasureContribution {
  Mode nu;
  int i = 0;  // index into a_list
  double lo = 0, hi = 0;  // excluded eps interval clipped to [0, eps0]
};

struct MeasureReport {
  double eps0 = 0;
  double fraction = 0;       // exact measure of the union of excluded intervals / eps0
  double grid_fraction = 0;  // uniform-grid estimate
  int grid_n = 0;
  bool grid_too_coarse = false;
  double thinnest = 0;
  double m0 = 0;
  bool margin_ok = true;  // tau' > tau + r
  double analytic_shape = 0;  // C = 1 shape of the analytic excluded-measure bound, divided by eps0
  std::size_t n_intervals = 0;
  std::vector<MeasureContribution> top;  // largest contributions
};

/// Excluded eps in [0, eps0] where | |omega.nu| - sqrt(eps a_i) | <= gamma |nu|^{-tau'} for some
/// i and 0 < |nu|_1 <= nu_max.
inline MeasureReport melnikov_measure(const std::vector<double>& a_list, double gamma, double tau_prime, double eps0,
                                      const RotationVector& w, int nu_max, int grid_n, double tau = 1.0) {
  if (!(eps0 > 0) || !(gamma > 0) || grid_n < 1) throw InputError("melnikov_measure: need eps0 > 0, gamma > 0, grid_n >= 1");
  for (double a : a_list)
    if (!(a > 0)) throw InputError("melnikov_measure: eigenvalues must be positive (elliptic case)");
  MeasureReport rep;
  rep.eps0 = eps0;
  const int r = w.dim();
  rep.margin_ok = tau_prime > tau + r;
  if (a_list.empty()) {
    rep.grid_n = grid_n;
    return rep;
  }
  const double A = *std::max_element(a_list.begin(), a_list.end());
  const double amin = *std::min_element(a_list.begin(), a_list.end());
  rep.m0 = std::pow(gamma / (4.0 * std::sqrt(eps0 * A)), 1.0 / tau);
  rep.analytic_shape =
      gamma * std::pow(std::sqrt(eps0 * A) / gamma, (tau_prime - r) / tau) * std::sqrt(eps0) / std::sqrt(amin) / eps0;
  const double reach = std::sqrt(eps0 * A);
  std::vector<MeasureContribution> iv;
  auto consider = [&](const Mode& nu) {
    double x = std::fabs(omega_dot(w, nu));
    double width = gamma * std::pow(double(l1(nu)), -tau_prime);
    if (x - width > reach) return;
    for (std::size_t i = 0; i < a_list.size(); ++i) {
      double lo = std::max(0.0, x - width);
      double hi = x + width;
      double elo = lo * lo / a_list[i], ehi = hi * hi / a_list[i];
      if (elo >= eps0) continue;
      iv.push_back({nu, static_cast<int>(i), elo, std::min(ehi, eps0)});
    }
  };
  // one representative per +-nu pair; |omega.nu| is even in nu
  if (r == 1) {
    for (int v = 1; v <= nu_max; ++v) consider(Mode{v});
  } else {
    Mode nu(r, 0);
    const double wl = w.values[r - 1];
    std::function<void(int, int)> rec = [&](int i, int budget) {
      if (i == r - 1) {
        Mode head = nu;
        head[i] = 0;
        double c = omega_dot(w, head);
        // |c + wl v| <= reach + gamma (widths never exceed gamma)
        double lo = (-c - reach - gamma) / wl, hi = (-c + reach + gamma) / wl;
        if (lo > hi) std::swap(lo, hi);
        int vlo = std::max(-budget, static_cast<int>(std::ceil(lo)));
        int vhi = std::min(budget, static_cast<int>(std::floor(hi)));
        for (int v = vlo; v <= vhi; ++v) {
          nu[i] = v;
          if (is_zero_mode(nu)) continue;
          Mode neg = mode_neg(nu);
          if (neg < nu) continue;  // keep the lexicographically smaller representative
          consider(nu);
        }
        nu[i] = 0;
        return;
      }
      for (int v = -budget; v <= budget; ++v) {
        nu[i] = v;
        rec(i + 1, budget - std::abs(v));
      }
      nu[i] = 0;
    };
    if (wl == 0) throw InputError("melnikov_measure: last frequency must be nonzero");
    rec(0, nu_max);
  }
  rep.n_intervals = iv.size();
  // exact union length
  std::vector<std::pair<double, double>> segs;
  for (const auto& c : iv) segs.push_back({c.lo, c.hi});
  std::sort(segs.begin(), segs.end());
  double total = 0, cur_lo = 0, cur_hi = -1;
  rep.thinnest = std::numeric_limits<double>::infinity();
  for (const auto& [lo, hi] : segs) {
    rep.thinnest = std::min(rep.thinnest, hi - lo);
    if (lo > cur_hi) {
      if (cur_hi > cur_lo) total += cur_hi - cur_lo;
      cur_lo = lo;
      cur_hi = hi;
    } else {
      cur_hi = std::max(cur_hi, hi);
    }
  }
  if (cur_hi > cur_lo) total += cur_hi - cur_lo;
  rep.fraction = total / eps0;
  // grid estimate with one refinement
  auto grid_estimate = [&](int n) {
    int hit = 0;
    std::size_t j = 0;
    // merged segments for point queries
    std::vector<std::pair<double, double>> merged;
    for (const auto& s : segs) {
      if (!merged.empty() && s.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, s.second);
      else
        merged.push_back(s);
    }
    for (int p = 0; p < n; ++p) {
      double e = eps0 * (p + 0.5) / n;
      while (j < merged.size() && merged[j].second < e) ++j;
      if (j < merged.size() && merged[j].first <= e) ++hit;
    }
    return double(hit) / n;
  };
  rep.grid_n = grid_n;
  if (!segs.empty() && rep.thinnest < eps0 / grid_n) rep.grid_n = grid_n * 8;
  rep.grid_fraction = grid_estimate(rep.grid_n);
  rep.grid_too_coarse = !segs.empty() && rep.thinnest < eps0 / rep.grid_n;
  if (segs.empty()) rep.thinnest = 0;
  std::sort(iv.begin(), iv.end(), [](const MeasureContribution& x, const MeasureContribution& y) {
    double lx = x.hi - x.lo, ly = y.hi - y.lo;
    if (lx != ly) return lx > ly;
    if (x.nu != y.nu) return x.nu < y.nu;
    return x.i < y.i;
  });
  for (std::size_t i = 0; i < std::min<std::size_t>(iv.size(), 20); ++i) rep.top.push_back(iv[i]);
  return rep;
}

// ---- response solution dynamics ----------------------------------------------------------

struct TrajectorySample {
  double t, x, v;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double h = 0;
  bool halved = false;
};

/// Forcing f(omega t) of the dissipative model.
inline double forcing_at(const Model& m, double t) {
  double s = 0;
  for (const auto& [nu, c] : m.f_modes()) s += (c * std::polar(1.0, m.x_of(nu) * t)).real();
  return s;
}

/// Fixed-step RK4 for  x'' + x'/eps + g(x) = f(omega t).
inline Trajectory integrate_ode(const Model& m, double eps, double x0, double v0, double T_final, double h = 0,
                                int sample_every = 100) {
  if (m.kind() != ModelKind::dissipative) throw InputError("integrate_ode needs the dissipative model");
  if (!(eps > 0)) throw InputError("integrate_ode needs eps > 0");
  double wn = 0;
  for (double v : m.omega().values) wn += v * v;
  wn = std::sqrt(wn);
  if (h <= 0) h = 1e-3 * 2 * std::numbers::pi / wn;
  const double gam = 1.0 / eps;
  const auto& g = m.spec().g_taylor;
  auto gval = [&](double x) {
    double s = 0;
    for (int j = static_cast<int>(g.size()) - 1; j >= 0; --j) s = s * x + g[j];
    return s;
  };
  auto acc = [&](double t, double x, double v) { return -gam * v - gval(x) + forcing_at(m, t); };
  for (int attempt = 0; attempt < 2; ++attempt) {
    Trajectory tr;
    tr.h = h;
    tr.halved = attempt > 0;
    const long steps = static_cast<long>(std::ceil(T_final / h - 1e-9));
    double x = x0, v = v0, t = 0;
    bool blown = false;
    tr.samples.push_back({t, x, v});
    for (long i = 1; i <= steps; ++i) {
      double k1x = v, k1v = acc(t, x, v);
      double k2x = v + 0.5 * h * k1v, k2v = acc(t + 0.5 * h, x + 0.5 * h * k1x, v + 0.5 * h * k1v);
      double k3x = v + 0.5 * h * k2v, k3v = acc(t + 0.5 * h, x + 0.5 * h * k2x, v + 0.5 * h * k2v);
      double k4x = v + h * k3v, k4v = acc(t + h, x + h * k3x, v + h * k3v);
      x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
      v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
      t = i * h;
      if (!std::isfinite(x) || !std::isfinite(v) || std::abs(x) > 1e8 || std::abs(v) > 1e8) {
        blown = true;
        break;
      }
      if (i % sample_every == 0 || i == steps) tr.samples.push_back({t, x, v});
    }
    if (!blown) return tr;
    h *= 0.5;
  }
  throw ContractViolation("integrator stability", "trajectory blew up after halving the step");
}

struct AttractivityReport {
  std::string verdict;  // attracted | not attracted | not applicable
  double on_solution_deviation = 0;
  double perturbed_deviation = 0;
  double tube = 0;
  double T = 0;
  Trajectory perturbed;
};

/// Response-solution value and time derivative of the truncated series at time t.
inline std::pair<double, double> truncation_at(const Model& m, const FTSeries& u, double eps, double t) {
  std::vector<double> psi(m.d());
  for (int j = 0; j < m.d(); ++j) psi[j] = m.omega().values[j] * t;
  double x = ft_eval(u, psi, eps)[0].real();
  FTSeries du(u.dim_d(), 1, u.max_order());
  for (int k = 0; k <= u.max_order(); ++k)
    for (const auto& [nu, c] : u.order(k)) du.set(k, nu, CVec{c[0] * cplx(0, m.x_of(nu))});
  double v = ft_eval(du, psi, eps)[0].real();
  return {x, v};
}

/// Integrate from the truncated response solution and from an offset start; compare both with the
/// truncation over the final 20% of `periods` forcing periods.
inline AttractivityReport attractivity_check(const Model& m, const FTSeries& u, double eps, double offset,
                                             double periods, double tube_factor = 10.0) {
  AttractivityReport rep;
  double wn = 0;
  for (double v : m.omega().values) wn += v * v;
  wn = std::sqrt(wn);
  rep.T = periods * 2 * std::numbers::pi / wn;
  if (!(m.a() > 0)) {
    rep.verdict = "not applicable";
    return rep;
  }
  auto [x0, v0] = truncation_at(m, u, eps, 0.0);
  auto deviation = [&](const Trajectory& tr) {
    double worst = 0;
    for (const auto& s : tr.samples)
      if (s.t >= 0.8 * rep.T - 1e-12) worst = std::max(worst, std::abs(s.x - truncation_at(m, u, eps, s.t).first));
    return worst;
  };
  Trajectory on = integrate_ode(m, eps, x0, v0, rep.T);
  rep.perturbed = integrate_ode(m, eps, x0 + offset, v0, rep.T);
  rep.on_solution_deviation = deviation(on);
  rep.perturbed_deviation = deviation(rep.perturbed);
  rep.tube = tube_factor * rep.on_solution_deviation + 1e-12;
  rep.verdict = rep.perturbed_deviation <= rep.tube ? "attracted" : "not attracted";
  return rep;
}

}  // namespace lindstedt
