#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lindstedt/error.hpp"

namespace lindstedt {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using Mode = std::vector<int>;

inline int l1(const Mode& nu) {
  int s = 0;
  for (int v : nu) s += std::abs(v);
  return s;
}

inline Mode mode_add(const Mode& a, const Mode& b) {
  Mode r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Mode mode_neg(const Mode& a) {
  Mode r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
  return r;
}

inline bool is_zero_mode(const Mode& a) {
  return std::all_of(a.begin(), a.end(), [](int v) { return v == 0; });
}

inline double vec_norm(const CVec& v) {
  double s = 0;
  for (const auto& c : v) s += std::norm(c);
  return std::sqrt(s);
}

inline double vec_maxabs(const CVec& v) {
  double s = 0;
  for (const auto& c : v) s = std::max(s, std::abs(c));
  return s;
}

/// Neumaier-compensated complex accumulator.
struct CompensatedSum {
  double re = 0, re_c = 0, im = 0, im_c = 0;

  static void add1(double& s, double& c, double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  void add(cplx z) {
    add1(re, re_c, z.real());
    add1(im, im_c, z.imag());
  }
  cplx value() const { return {re + re_c, im + im_c}; }
};

/// Per-order admissible Fourier support: |nu|_1 <= per_order * (k + offset).
/// per_order == 0 disables the check.
struct SupportBound {
  int per_order = 0;
  int offset = 0;

  bool admits(int k, const Mode& nu) const {
    return per_order == 0 || l1(nu) <= per_order * (k + offset);
  }
};

/// Truncated Fourier-Taylor series  u(psi, eps) = sum_k eps^k sum_nu u_{k,nu} e^{i nu.psi}
/// with C^n-valued coefficients and sparse storage.
class FTSeries {
 public:
  using OrderMap = std::map<Mode, CVec>;

  FTSeries() = default;
  FTSeries(int dim_d, int dim_n, int max_order, SupportBound bound = {})
      : d_(dim_d), n_(dim_n), K_(max_order), bound_(bound), orders_(max_order + 1) {
    if (dim_d < 0 || dim_n < 1 || max_order < 0)
      throw InputError("FTSeries: invalid dimensions");
  }

  int dim_d() const { return d_; }
  int dim_n() const { return n_; }
  int max_order() const { return K_; }
  SupportBound bound() const { return bound_; }
  void set_bound(SupportBound b) { bound_ = b; }

  const OrderMap& order(int k) const { return orders_.at(k); }

  const CVec* find(int k, const Mode& nu) const {
    if (k < 0 || k > K_) return nullptr;
    auto it = orders_[k].find(nu);
    return it == orders_[k].end() ? nullptr : &it->second;
  }

  CVec coeff(int k, const Mode& nu) const {
    const CVec* p = find(k, nu);
    return p ? *p : CVec(n_, cplx(0));
  }

  cplx coeff(int k, const Mode& nu, int comp) const {
    const CVec* p = find(k, nu);
    return p ? (*p)[comp] : cplx(0);
  }

  void set(int k, const Mode& nu, CVec v) {
    check_key(k, nu);
    if (static_cast<int>(v.size()) != n_) throw InputError("FTSeries::set: wrong component count");
    orders_[k][nu] = std::move(v);
  }

  void add_to(int k, const Mode& nu, const CVec& v) {
    check_key(k, nu);
    auto& slot = orders_[k][nu];
    if (slot.empty()) slot.assign(n_, cplx(0));
    for (int i = 0; i < n_; ++i) slot[i] += v[i];
  }

  void erase(int k, const Mode& nu) { orders_.at(k).erase(nu); }

  std::size_t nnz() const {
    std::size_t s = 0;
    for (const auto& o : orders_) s += o.size();
    return s;
  }

  /// Same series truncated (or zero padded) to a new order.
  FTSeries truncated(int max_order) const {
    FTSeries r(d_, n_, max_order, bound_);
    for (int k = 0; k <= std::min(K_, max_order); ++k) r.orders_[k] = orders_[k];
    return r;
  }

  /// Series holding only the orders >= 1 part (u - u^{(0)}).
  FTSeries without_order0() const {
    FTSeries r = *this;
    r.orders_[0].clear();
    return r;
  }

  /// Single component as a scalar series.
  FTSeries component(int i) const {
    FTSeries r(d_, 1, K_, bound_);
    for (int k = 0; k <= K_; ++k)
      for (const auto& [nu, c] : orders_[k]) r.orders_[k][nu] = CVec{c[i]};
    return r;
  }

  /// Coefficientwise absolute values (majorant series).
  FTSeries majorant() const {
    FTSeries r = *this;
    for (auto& o : r.orders_)
      for (auto& [nu, c] : o)
        for (auto& z : c) z = std::abs(z);
    return r;
  }

  double max_hermitian_violation() const {
    double worst = 0;
    for (int k = 0; k <= K_; ++k) worst = std::max(worst, hermitian_violation(k));
    return worst;
  }

  double hermitian_violation(int k) const {
    double worst = 0;
    for (const auto& [nu, c] : orders_.at(k)) {
      CVec m = coeff(k, mode_neg(nu));
      for (int i = 0; i < n_; ++i) worst = std::max(worst, std::abs(m[i] - std::conj(c[i])));
    }
    return worst;
  }

  /// Project order k onto real-valued functions: c_nu <- (c_nu + conj c_{-nu}) / 2.
  void symmetrize(int k) {
    OrderMap out;
    for (const auto& [nu, c] : orders_.at(k)) {
      CVec m = coeff(k, mode_neg(nu));
      CVec v(n_);
      for (int i = 0; i < n_; ++i) v[i] = 0.5 * (c[i] + std::conj(m[i]));
      CVec w(n_);
      for (int i = 0; i < n_; ++i) w[i] = std::conj(v[i]);
      out[mode_neg(nu)] = w;
      out[nu] = v;
    }
    orders_[k] = std::move(out);
  }

  void symmetrize() {
    for (int k = 0; k <= K_; ++k) symmetrize(k);
  }

 private:
  void check_key(int k, const Mode& nu) const {
    if (k < 0 || k > K_) throw std::out_of_range("FTSeries: order out of range");
    if (static_cast<int>(nu.size()) != d_) throw InputError("FTSeries: wrong mode dimension");
    if (!bound_.admits(k, nu))
      throw ContractViolation("support", "mode outside |nu| <= N_f (k + offset) at order " + std::to_string(k));
  }

  int d_ = 0, n_ = 1, K_ = 0;
  SupportBound bound_{};
  std::vector<OrderMap> orders_;
};

namespace detail {

inline void check_compatible(const FTSeries& a, const FTSeries& b) {
  if (a.dim_d() != b.dim_d()) throw InputError("series have different torus dimension");
  if (a.dim_n() != b.dim_n() && a.dim_n() != 1 && b.dim_n() != 1)
    throw InputError("series have incompatible component counts");
}

inline SupportBound merge_bound(SupportBound a, SupportBound b, bool product) {
  if (a.per_order == 0 || b.per_order == 0) return {};
  return {std::max(a.per_order, b.per_order), product ? a.offset + b.offset : std::max(a.offset, b.offset)};
}

}  // namespace detail

inline FTSeries ft_add(const FTSeries& a, const FTSeries& b, cplx scale_b = 1.0) {
  detail::check_compatible(a, b);
  if (a.dim_n() != b.dim_n()) throw InputError("ft_add: component counts differ");
  int K = std::min(a.max_order(), b.max_order());
  FTSeries r(a.dim_d(), a.dim_n(), K, detail::merge_bound(a.bound(), b.bound(), false));
  for (int k = 0; k <= K; ++k) {
    for (const auto& [nu, c] : a.order(k)) r.add_to(k, nu, c);
    for (const auto& [nu, c] : b.order(k)) {
      CVec v = c;
      for (auto& z : v) z *= scale_b;
      r.add_to(k, nu, v);
    }
  }
  return r;
}

/// Cauchy product in eps, convolution in nu; componentwise (scalar operands broadcast).
inline FTSeries ft_mul(const FTSeries& a, const FTSeries& b) {
  detail::check_compatible(a, b);
  const int n = std::max(a.dim_n(), b.dim_n());
  const int K = std::min(a.max_order(), b.max_order());
  FTSeries r(a.dim_d(), n, K, detail::merge_bound(a.bound(), b.bound(), true));
  for (int k = 0; k <= K; ++k) {
    std::map<Mode, std::vector<CompensatedSum>> acc;
    for (int k1 = 0; k1 <= k; ++k1) {
      const auto& A = a.order(k1);
      const auto& B = b.order(k - k1);
      if (A.empty() || B.empty()) continue;
      for (const auto& [nu1, c1] : A)
        for (const auto& [nu2, c2] : B) {
          auto& slot = acc[mode_add(nu1, nu2)];
          if (slot.empty()) slot.resize(n);
          for (int i = 0; i < n; ++i) {
            cplx x = c1[a.dim_n() == 1 ? 0 : i];
            cplx y = c2[b.dim_n() == 1 ? 0 : i];
            slot[i].add(x * y);
          }
        }
    }
    for (const auto& [nu, s] : acc) {
      CVec v(n);
      for (int i = 0; i < n; ++i) v[i] = s[i].value();
      r.set(k, nu, std::move(v));
    }
  }
  return r;
}

inline FTSeries ft_scale(const FTSeries& a, cplx s) {
  FTSeries r = a;
  for (int k = 0; k <= a.max_order(); ++k)
    for (const auto& [nu, c] : a.order(k)) {
      CVec v = c;
      for (auto& z : v) z *= s;
      r.set(k, nu, v);
    }
  return r;
}

/// Evaluate at (psi, eps). Coefficients are summed order by order.
inline CVec ft_eval(const FTSeries& u, const std::vector<double>& psi, double eps) {
  if (static_cast<int>(psi.size()) != u.dim_d()) throw InputError("ft_eval: wrong angle dimension");
  const int n = u.dim_n();
  std::vector<CompensatedSum> acc(n);
  double ek = 1.0;
  for (int k = 0; k <= u.max_order(); ++k, ek *= eps) {
    for (const auto& [nu, c] : u.order(k)) {
      double ph = 0;
      for (int j = 0; j < u.dim_d(); ++j) ph += nu[j] * psi[j];
      cplx e = std::polar(1.0, ph) * ek;
      for (int i = 0; i < n; ++i) acc[i].add(c[i] * e);
    }
  }
  CVec out(n);
  for (int i = 0; i < n; ++i) out[i] = acc[i].value();
  return out;
}

/// Per-order l1 norms: norm_k = sum_nu |u_{k,nu}| (Euclidean norm on C^n).
inline std::vector<double> ft_order_norms(const FTSeries& u) {
  std::vector<double> out(u.max_order() + 1, 0.0);
  for (int k = 0; k <= u.max_order(); ++k) {
    CompensatedSum s;
    for (const auto& [nu, c] : u.order(k)) s.add(vec_norm(c));
    out[k] = s.value().real();
  }
  return out;
}

/// One Fourier term of an analytic nonlinearity written as a sum of exponentials:
///   F(w, psi) = sum_m coeff_m e^{i fourier_m . psi} exp(rate_m . w).
struct ExpTerm {
  Mode fourier;
  CVec rate;   // length = components of w
  CVec coeff;  // length = output components
};

/// Compose a sum of exponentials with a series w whose order-0 part vanishes.
/// exp(c.w) is expanded with E_k = (1/k) sum_{j=1..k} j W_j E_{k-j}, W = c.w.
inline FTSeries compose_exp(const std::vector<ExpTerm>& terms, const FTSeries& w, int n_out, int max_order,
                            SupportBound bound = {}) {
  if (max_order > w.max_order()) throw InputError("compose_exp: requested order exceeds available data");
  if (!w.order(0).empty()) {
    for (const auto& [nu, c] : w.order(0))
      if (vec_maxabs(c) != 0) throw InputError("compose_exp: argument must vanish at order 0");
  }
  const int d = w.dim_d();
  const int nw = w.dim_n();
  std::vector<std::map<Mode, std::vector<CompensatedSum>>> acc(max_order + 1);
  for (const auto& t : terms) {
    if (static_cast<int>(t.rate.size()) != nw || static_cast<int>(t.coeff.size()) != n_out)
      throw InputError("compose_exp: term dimensions do not match");
    if (static_cast<int>(t.fourier.size()) != d) throw InputError("compose_exp: term mode dimension");
    // W = rate . w as a scalar series
    std::vector<std::map<Mode, cplx>> W(max_order + 1);
    for (int k = 1; k <= max_order; ++k)
      for (const auto& [nu, c] : w.order(k)) {
        cplx s = 0;
        for (int i = 0; i < nw; ++i) s += t.rate[i] * c[i];
        W[k][nu] += s;
      }
    std::vector<std::map<Mode, cplx>> E(max_order + 1);
    E[0][Mode(d, 0)] = 1.0;
    for (int k = 1; k <= max_order; ++k) {
      std::map<Mode, CompensatedSum> e;
      for (int j = 1; j <= k; ++j)
        for (const auto& [nu1, c1] : W[j])
          for (const auto& [nu2, c2] : E[k - j]) e[mode_add(nu1, nu2)].add(double(j) * c1 * c2);
      for (const auto& [nu, s] : e) E[k][nu] = s.value() / double(k);
    }
    for (int k = 0; k <= max_order; ++k)
      for (const auto& [nu, c] : E[k]) {
        auto& slot = acc[k][mode_add(nu, t.fourier)];
        if (slot.empty()) slot.resize(n_out);
        for (int i = 0; i < n_out; ++i) slot[i].add(t.coeff[i] * c);
      }
  }
  FTSeries r(d, n_out, max_order, bound);
  for (int k = 0; k <= max_order; ++k)
    for (const auto& [nu, s] : acc[k]) {
      CVec v(n_out);
      for (int i = 0; i < n_out; ++i) v[i] = s[i].value();
      r.set(k, nu, std::move(v));
    }
  return r;
}

/// Compose a Taylor expansion F(w, psi) = sum_s T_s(psi) w^s / s! with a scalar series w
/// (order-0 part zero). T_s are order-0 series. Without exact_polynomial, Taylor data must
/// cover every power that contributes up to max_order.
inline FTSeries compose_taylor(const std::vector<FTSeries>& taylor, const FTSeries& w, int max_order,
                               bool exact_polynomial = false, SupportBound bound = {}) {
  if (w.dim_n() != 1) throw InputError("compose_taylor: argument must be scalar");
  if (max_order > w.max_order()) throw InputError("compose_taylor: requested order exceeds available series");
  if (taylor.empty()) throw InputError("compose_taylor: no Taylor data");
  for (const auto& [nu, c] : w.order(0))
    if (vec_maxabs(c) != 0) throw InputError("compose_taylor: argument must vanish at order 0");
  if (!exact_polynomial && static_cast<int>(taylor.size()) <= max_order)
    throw InputError("compose_taylor: order " + std::to_string(max_order) + " needs Taylor coefficients up to " +
                     std::to_string(max_order) + ", got " + std::to_string(taylor.size() - 1));
  const int n_out = taylor[0].dim_n();
  const int d = w.dim_d();
  FTSeries wt = w.truncated(max_order);
  wt.set_bound({});
  FTSeries power(d, 1, max_order);  // w^s / s!
  power.set(0, Mode(d, 0), CVec{1.0});
  std::vector<std::map<Mode, std::vector<CompensatedSum>>> acc(max_order + 1);
  const int smax = std::min<int>(max_order, static_cast<int>(taylor.size()) - 1);
  for (int s = 0; s <= smax; ++s) {
    if (s > 0) power = ft_scale(ft_mul(power, wt), 1.0 / s);
    const FTSeries& T = taylor[s];
    if (T.dim_n() != n_out || T.dim_d() != d) throw InputError("compose_taylor: Taylor data dimensions");
    for (int k = s; k <= max_order; ++k)
      for (const auto& [nu1, p] : power.order(k))
        for (const auto& [nu2, c] : T.order(0)) {
          auto& slot = acc[k][mode_add(nu1, nu2)];
          if (slot.empty()) slot.resize(n_out);
          for (int i = 0; i < n_out; ++i) slot[i].add(c[i] * p[0]);
        }
  }
  FTSeries r(d, n_out, max_order, bound);
  for (int k = 0; k <= max_order; ++k)
    for (const auto& [nu, s] : acc[k]) {
      CVec v(n_out);
      for (int i = 0; i < n_out; ++i) v[i] = s[i].value();
      r.set(k, nu, std::move(v));
    }
  return r;
}

// ---- CSV --------------------------------------------------------------------

inline std::string format_double(double x) {
  if (x == 0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Rows ordered by ascending k, then lexicographic nu.
inline void write_csv(std::ostream& os, const FTSeries& u) {
  os << "k";
  for (int j = 1; j <= u.dim_d(); ++j) os << ",nu_" << j;
  for (int i = 1; i <= u.dim_n(); ++i) os << ",re_" << i;
  for (int i = 1; i <= u.dim_n(); ++i) os << ",im_" << i;
  os << "\n";
  for (int k = 0; k <= u.max_order(); ++k)
    for (const auto& [nu, c] : u.order(k)) {
      os << k;
      for (int v : nu) os << "," << v;
      for (const auto& z : c) os << "," << format_double(z.real());
      for (const auto& z : c) os << "," << format_double(z.imag());
      os << "\n";
    }
}

inline FTSeries read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("csv: empty input");
  int d = 0, n = 0;
  {
    std::stringstream ss(line);
    std::string f;
    int col = 0;
    while (std::getline(ss, f, ',')) {
      if (col == 0 && f != "k") throw InputError("csv: header must start with k");
      if (f.rfind("nu_", 0) == 0) ++d;
      if (f.rfind("re_", 0) == 0) ++n;
      ++col;
    }
    if (n == 0 || col != 1 + d + 2 * n) throw InputError("csv: malformed header");
  }
  struct Row {
    int k;
    Mode nu;
    CVec c;
  };
  std::vector<Row> rows;
  int K = 0, lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fs;
    while (std::getline(ss, f, ',')) fs.push_back(f);
    if (static_cast<int>(fs.size()) != 1 + d + 2 * n)
      throw InputError("csv: line " + std::to_string(lineno) + ": wrong field count");
    Row r;
    try {
      r.k = std::stoi(fs[0]);
      for (int j = 0; j < d; ++j) r.nu.push_back(std::stoi(fs[1 + j]));
      for (int i = 0; i < n; ++i) r.c.emplace_back(std::stod(fs[1 + d + i]), std::stod(fs[1 + d + n + i]));
    } catch (const std::exception&) {
      throw InputError("csv: line " + std::to_string(lineno) + ": bad number");
    }
    K = std::max(K, r.k);
    rows.push_back(std::move(r));
  }
  FTSeries u(d, n, K);
  for (auto& r : rows) u.set(r.k, r.nu, r.c);
  return u;
}

}  // namespace lindstedt
