#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lindstedt/error.hpp"
#include "lindstedt/series.hpp"

namespace lindstedt {

using bigint = boost::multiprecision::cpp_int;

/// (a + b sqrt(m)) / c
struct Surd {
  long long a = 0, b = 0, m = 0, c = 1;
  double value() const { return (double(a) + double(b) * std::sqrt(double(m))) / double(c); }
};

/// alpha = [0; preperiod..., period, period, ...]
struct CFSpec {
  std::vector<long long> preperiod;
  std::vector<long long> period;
};

/// flow: divisors are |omega.nu|.  map: divisors are the distance of omega.nu to the nearest integer.
enum class Dynamics { flow, map };

struct RotationVector {
  Dynamics kind = Dynamics::flow;
  std::vector<double> values;
  std::optional<std::vector<Surd>> surds;
  std::optional<CFSpec> cf;
  // Diophantine metadata; gamma is an estimate valid up to nu_max only.
  double gamma = 0;
  double tau = 1;
  int nu_max = 0;

  int dim() const { return static_cast<int>(values.size()); }
};

inline double log_big(const bigint& x) {
  if (x <= 0) return -std::numeric_limits<double>::infinity();
  std::size_t bits = boost::multiprecision::msb(x);
  if (bits < 1000) return std::log(x.convert_to<double>());
  bigint y = x >> (bits - 60);
  return std::log(y.convert_to<double>()) + double(bits - 60) * std::log(2.0);
}

inline double big_ratio(const bigint& p, const bigint& q) {
  // p/q in double without overflow
  std::size_t shift = 0;
  std::size_t mq = boost::multiprecision::msb(q);
  if (mq > 900) shift = mq - 900;
  return (p >> shift).convert_to<double>() / (q >> shift).convert_to<double>();
}

struct CFResult {
  long long a0 = 0;
  std::vector<bigint> a;  // a_1, a_2, ...
  std::vector<bigint> q;  // q_0 = 1, q_1 = a_1, ...
  bool truncated = false;  // float input ran out of precision before n_terms
  int valid_terms = 0;
};

namespace detail {

inline void fill_denominators(CFResult& r) {
  r.q.clear();
  bigint qm1 = 0, q0 = 1;
  r.q.push_back(q0);
  for (const auto& an : r.a) {
    bigint qn = an * q0 + qm1;
    r.q.push_back(qn);
    qm1 = q0;
    q0 = qn;
  }
  r.valid_terms = static_cast<int>(r.a.size());
}

inline bigint floor_div(const bigint& a, const bigint& b) {
  bigint q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) q -= 1;
  return q;
}

/// Continued fraction of the rational p/q (q > 0); first entry is floor(p/q).
inline std::vector<bigint> rational_cf(bigint p, bigint q, int max_terms) {
  std::vector<bigint> out;
  while (q != 0 && static_cast<int>(out.size()) < max_terms) {
    bigint a = floor_div(p, q);
    out.push_back(a);
    bigint r = p - a * q;
    p = q;
    q = r;
  }
  return out;
}

}  // namespace detail

/// Exact expansion of a quadratic surd in (0,1) via integer arithmetic on (P + sqrt(D)) / Q.
inline CFResult continued_fraction(const Surd& s, int n_terms) {
  if (s.m <= 0 || s.c == 0 || s.b == 0) throw InputError("surd must have b != 0, m > 0, c != 0");
  {
    long long r = static_cast<long long>(std::llround(std::sqrt(double(s.m))));
    for (long long t = std::max(0LL, r - 2); t <= r + 2; ++t)
      if (t * t == s.m) throw InputError("surd is rational (m is a perfect square)");
  }
  bigint P = s.a, D = bigint(s.b) * s.b * s.m, Q = s.c;
  if (s.b < 0) {
    P = -P;
    Q = -Q;
  }
  bigint QQ = Q < 0 ? bigint(-Q) : Q;
  if ((D - P * P) % Q != 0) {
    P *= QQ;
    D *= Q * Q;
    Q *= QQ;
  }
  bigint sD = boost::multiprecision::sqrt(D);
  auto next = [&]() {
    bigint a;
    if (Q > 0)
      a = detail::floor_div(P + sD, Q);
    else
      a = -(detail::floor_div(P + sD, -Q) + 1);
    P = a * Q - P;
    Q = (D - P * P) / Q;
    return a;
  };
  CFResult r;
  bigint a0 = next();
  r.a0 = a0.convert_to<long long>();
  for (int i = 0; i < n_terms; ++i) r.a.push_back(next());
  detail::fill_denominators(r);
  return r;
}

inline CFResult continued_fraction(const CFSpec& spec, int n_terms) {
  if (spec.period.empty()) throw InputError("continued fraction spec needs a nonempty period");
  for (long long v : spec.preperiod)
    if (v < 1) throw InputError("partial quotients must be >= 1");
  for (long long v : spec.period)
    if (v < 1) throw InputError("partial quotients must be >= 1");
  CFResult r;
  for (int i = 0; i < n_terms; ++i) {
    std::size_t pre = spec.preperiod.size();
    long long v = i < static_cast<int>(pre) ? spec.preperiod[i] : spec.period[(i - pre) % spec.period.size()];
    r.a.emplace_back(v);
  }
  detail::fill_denominators(r);
  return r;
}

/// Float path: the quotients valid for every real within one ulp of alpha (52-bit budget).
inline CFResult continued_fraction(double alpha, int n_terms) {
  if (!(alpha > 0 && alpha < 1)) throw InputError("continued_fraction: alpha must lie in (0,1)");
  int e;
  double mant = std::frexp(alpha, &e);  // alpha = mant * 2^e, mant in [0.5,1)
  bigint M = static_cast<long long>(std::ldexp(mant, 53));
  int sh = 53 - e;  // alpha = M / 2^sh
  bigint den = bigint(1) << sh;
  // one ulp of relative precision at 52 bits
  bigint lo_num = M * 2 - 1, hi_num = M * 2 + 1, den2 = den * 2;
  auto lo = detail::rational_cf(lo_num, den2, n_terms + 2);
  auto hi = detail::rational_cf(hi_num, den2, n_terms + 2);
  CFResult r;
  std::size_t common = 1;  // entry 0 is floor = 0
  while (common < lo.size() && common < hi.size() && lo[common] == hi[common]) ++common;
  // the last quotient of a finite expansion is ambiguous ([...,a] == [...,a-1,1])
  if (common == lo.size() || common == hi.size()) --common;
  for (std::size_t i = 1; i < common && static_cast<int>(r.a.size()) < n_terms; ++i) r.a.push_back(lo[i]);
  r.truncated = static_cast<int>(r.a.size()) < n_terms;
  detail::fill_denominators(r);
  return r;
}

inline double cf_value(const CFSpec& spec) {
  CFResult r = continued_fraction(spec, 80);
  bigint pm1 = 1, p0 = 0;  // p_{-1}=1, p_0=a0=0
  for (const auto& an : r.a) {
    bigint pn = an * p0 + pm1;
    pm1 = p0;
    p0 = pn;
  }
  return big_ratio(p0, r.q.back());
}

inline RotationVector golden_map() {
  RotationVector w;
  w.kind = Dynamics::map;
  w.surds = std::vector<Surd>{{-1, 1, 5, 2}};
  w.values = {w.surds->front().value()};
  return w;
}

inline RotationVector silver_map() {
  RotationVector w;
  w.kind = Dynamics::map;
  w.surds = std::vector<Surd>{{-1, 1, 2, 1}};
  w.values = {w.surds->front().value()};
  return w;
}

inline RotationVector from_cf(const CFSpec& spec) {
  RotationVector w;
  w.kind = Dynamics::map;
  w.cf = spec;
  w.values = {cf_value(spec)};
  return w;
}

inline CFResult continued_fraction(const RotationVector& w, int n_terms) {
  if (w.dim() != 1) throw InputError("continued fraction needs a single rotation number");
  if (w.cf) return continued_fraction(*w.cf, n_terms);
  if (w.surds) return continued_fraction(w.surds->front(), n_terms);
  return continued_fraction(w.values.front(), n_terms);
}

// ---- divisors ----------------------------------------------------------------

/// omega . nu (signed)
inline double omega_dot(const RotationVector& w, const Mode& nu) {
  long double s = 0;
  for (int i = 0; i < w.dim(); ++i) s += static_cast<long double>(w.values[i]) * nu[i];
  return static_cast<double>(s);
}

/// Size of the small divisor attached to nu.
inline double divisor_size(const RotationVector& w, const Mode& nu) {
  long double s = 0;
  for (int i = 0; i < w.dim(); ++i) s += static_cast<long double>(w.values[i]) * nu[i];
  if (w.kind == Dynamics::map) s -= std::nearbyint(s);
  return static_cast<double>(std::fabs(s));
}

inline bool is_resonant(const RotationVector& w, const Mode& nu) {
  double scale = 0;
  for (int i = 0; i < w.dim(); ++i) scale += std::fabs(w.values[i] * nu[i]);
  return divisor_size(w, nu) <= 1e-13 * std::max(1.0, scale);
}

inline std::string mode_to_string(const Mode& nu) {
  std::string s = "(";
  for (std::size_t i = 0; i < nu.size(); ++i) s += (i ? "," : "") + std::to_string(nu[i]);
  return s + ")";
}

/// Calls fn(nu) for all 0 < |nu|_1 <= R with first nonzero component positive (one of each +-nu pair).
/// fn returns false to stop early.
template <class Fn>
inline void for_each_half_mode(int d, int R, Fn&& fn) {
  Mode nu(d, 0);
  // recursive fill
  std::function<bool(int, int, bool)> rec = [&](int i, int budget, bool positive_seen) -> bool {
    if (i == d) {
      if (!positive_seen) return true;
      return fn(static_cast<const Mode&>(nu));
    }
    for (int v = -budget; v <= budget; ++v) {
      if (!positive_seen && v < 0) continue;
      nu[i] = v;
      if (!rec(i + 1, budget - std::abs(v), positive_seen || v > 0)) return false;
    }
    nu[i] = 0;
    return true;
  };
  rec(0, R, false);
}

/// Throws InputError naming a witness when some 0 < |nu|_1 <= R gives a vanishing divisor.
inline void check_independence(const RotationVector& w, int R) {
  std::optional<Mode> witness;
  for_each_half_mode(w.dim(), R, [&](const Mode& nu) {
    if (is_resonant(w, nu)) {
      witness = nu;
      return false;
    }
    return true;
  });
  if (witness)
    throw InputError("rotation vector is rationally dependent: omega.nu = 0 for nu = " + mode_to_string(*witness));
}

/// min over 0 < |nu|_1 <= nu_max of |omega.nu| |nu|_1^tau (an estimate, not a certificate).
inline double diophantine_constant(const RotationVector& w, double tau, int nu_max) {
  const int d = w.dim();
  if (d < 1 || nu_max < 1) throw InputError("diophantine_constant: need d >= 1 and nu_max >= 1");
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const Mode& nu) {
    int n1 = l1(nu);
    if (n1 == 0 || n1 > nu_max) return;
    best = std::min(best, divisor_size(w, nu) * std::pow(double(n1), tau));
  };
  if (d == 1) {
    for (int v = 1; v <= nu_max; ++v) consider(Mode{v});
    return best;
  }
  // For fixed leading components the product is minimized at nu_last = 0 or next to the
  // real root of omega.nu = 0 (flows); maps are scanned exhaustively in the last component.
  Mode nu(d, 0);
  std::function<void(int, int)> rec = [&](int i, int budget) {
    if (i == d - 1) {
      double wl = w.values[d - 1];
      if (w.kind == Dynamics::map || wl == 0) {
        for (int v = -budget; v <= budget; ++v) {
          nu[i] = v;
          consider(nu);
        }
      } else {
        Mode head(nu.begin(), nu.end());
        head[i] = 0;
        double c = omega_dot(w, head);
        double root = -c / wl;
        double fl = std::floor(root);
        for (double cand : {0.0, fl, fl + 1.0}) {
          double cl = std::clamp(cand, double(-budget), double(budget));
          nu[i] = static_cast<int>(cl);
          consider(nu);
        }
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
  rec(0, nu_max);
  return best;
}

/// Sharp scale of a divisor value x: 0 if x >= gamma, else the n >= 1 with 2^-n gamma <= x < 2^-(n-1) gamma.
inline int scale_of_value(double x, double gamma) {
  if (!(gamma > 0)) throw InputError("scale_of: gamma must be positive");
  x = std::fabs(x);
  if (x >= gamma) return 0;
  if (x == 0) return std::numeric_limits<int>::max();
  int n = 1;
  while (x < std::ldexp(gamma, -n)) ++n;
  return n;
}

inline int scale_of(const Mode& nu, const RotationVector& w, double gamma) {
  if (is_zero_mode(nu)) return -1;
  return scale_of_value(divisor_size(w, nu), gamma);
}

// ---- Bryuno sums ---------------------------------------------------------------

struct BryunoReport {
  enum class Kind { scalar, vector } kind = Kind::scalar;
  int n_max = 0;
  std::vector<double> partial_sums;  // index n-1 holds the sum through n
  double value = 0;                  // partial sum at n_max plus tail estimate
  double tail = 0;
  bool tail_known = false;
  bool converged = false;
  std::vector<std::string> q_n;      // scalar kind, decimal strings q_0..q_{n_max+1}
  std::vector<double> alpha_n;       // vector kind, alpha_1..alpha_{n_max}
  std::vector<Mode> alpha_argmin;
};

/// B(alpha) = sum_{n>=1} log(q_{n+1}) / q_n.
inline BryunoReport bryuno_function(const RotationVector& w, int n_max) {
  if (n_max < 1) throw InputError("bryuno_function: n_max must be >= 1");
  const bool exact = w.cf || w.surds;
  const int extra = exact ? 400 : 0;
  CFResult cf = continued_fraction(w, n_max + 1 + extra);
  if (static_cast<int>(cf.a.size()) < n_max + 1)
    throw InputError("bryuno_function: only " + std::to_string(cf.a.size()) +
                     " reliable partial quotients for the float input; need " + std::to_string(n_max + 1));
  BryunoReport rep;
  rep.kind = BryunoReport::Kind::scalar;
  rep.n_max = n_max;
  CompensatedSum s;
  for (int n = 1; n <= n_max; ++n) {
    s.add(log_big(cf.q[n + 1]) / cf.q[n].convert_to<double>());
    rep.partial_sums.push_back(s.value().real());
  }
  for (int n = 0; n <= n_max + 1; ++n) rep.q_n.push_back(cf.q[n].str());
  CompensatedSum t;
  const int avail = static_cast<int>(cf.a.size());
  for (int n = n_max + 1; n + 1 <= avail; ++n) {
    double term = log_big(cf.q[n + 1]) / cf.q[n].convert_to<double>();
    t.add(term);
    if (term < 1e-300) break;
  }
  rep.tail = t.value().real();
  rep.tail_known = exact;
  rep.converged = exact && rep.tail < 1e-12;
  rep.value = rep.partial_sums.back() + rep.tail;
  return rep;
}

/// Cost of an exhaustive |nu|_1 <= 2^n search, in candidate modes.
inline double omega_search_cost(int d, int n) {
  double R = std::ldexp(1.0, n);
  double c = 1;
  for (int i = 1; i < d; ++i) c *= 2 * R + 1;
  return c;
}

/// Bryuno sum for a vector: sum_{n>=1} 2^-n log(1/alpha_n), alpha_n = min_{0<|nu|_1<=2^n} divisor.
inline BryunoReport bryuno_omega(const RotationVector& w, int n_max, double budget = 5e8) {
  const int d = w.dim();
  if (n_max < 1) throw InputError("bryuno_omega: n_max must be >= 1");
  if (omega_search_cost(d, n_max) > budget)
    throw BudgetExceeded("bryuno_omega: search over |nu| <= 2^" + std::to_string(n_max) + " in d=" +
                         std::to_string(d) + " exceeds the budget");
  BryunoReport rep;
  rep.kind = BryunoReport::Kind::vector;
  rep.n_max = n_max;
  double best = std::numeric_limits<double>::infinity();
  Mode best_nu;
  int searched = 0;  // radius already covered
  CompensatedSum s;
  auto visit = [&](const Mode& nu) {
    int n1 = l1(nu);
    if (n1 <= searched) return;
    if (is_resonant(w, nu))
      throw InputError("rotation vector is rationally dependent: omega.nu = 0 for nu = " + mode_to_string(nu));
    double x = divisor_size(w, nu);
    if (x < best || (x == best && nu < best_nu)) {
      best = x;
      best_nu = nu;
    }
  };
  for (int n = 1; n <= n_max; ++n) {
    int R = 1 << n;
    if (d == 1) {
      for (int v = searched + 1; v <= R; ++v) visit(Mode{v});
    } else if (d == 2 && w.kind == Dynamics::flow && w.values[1] != 0) {
      // for each nu_1 only the two nu_2 closest to the root and the shell boundary matter
      for (int a = -R; a <= R; ++a) {
        int b_budget = R - std::abs(a);
        double root = -w.values[0] * a / w.values[1];
        double fl = std::floor(root);
        for (double cand : {fl, fl + 1.0, double(b_budget), double(-b_budget)}) {
          double cl = std::clamp(cand, double(-b_budget), double(b_budget));
          Mode nu{a, static_cast<int>(cl)};
          if (!is_zero_mode(nu)) visit(nu);
        }
      }
    } else {
      for_each_half_mode(d, R, [&](const Mode& nu) {
        visit(nu);
        return true;
      });
    }
    searched = R;
    rep.alpha_n.push_back(best);
    rep.alpha_argmin.push_back(best_nu);
    s.add(std::ldexp(1.0, -n) * std::log(1.0 / best));
    rep.partial_sums.push_back(s.value().real());
  }
  // tail: alpha_n cannot be bounded without searching further; report the last increment
  rep.tail = rep.partial_sums.size() > 1 ? rep.partial_sums.back() - rep.partial_sums[rep.partial_sums.size() - 2] : 0;
  rep.tail_known = false;
  rep.converged = false;
  rep.value = rep.partial_sums.back();
  return rep;
}

/// Fill gamma/tau/nu_max stamps with the brute-force estimate.
inline void stamp_diophantine(RotationVector& w, double tau, int nu_max) {
  check_independence(w, nu_max);
  w.tau = tau;
  w.nu_max = nu_max;
  w.gamma = diophantine_constant(w, tau, nu_max);
}

}  // namespace lindstedt
