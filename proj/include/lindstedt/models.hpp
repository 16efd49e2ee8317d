#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lindstedt/diophantine.hpp"
#include "lindstedt/error.hpp"
#include "lindstedt/series.hpp"

namespace lindstedt {

enum class ModelKind { maximal_torus, standard_map, lower_tori, dissipative };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::maximal_torus: return "maximal_torus";
    case ModelKind::standard_map: return "standard_map";
    case ModelKind::lower_tori: return "lower_tori";
    case ModelKind::dissipative: return "dissipative";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "maximal_torus") return ModelKind::maximal_torus;
  if (s == "standard_map") return ModelKind::standard_map;
  if (s == "lower_tori") return ModelKind::lower_tori;
  if (s == "dissipative") return ModelKind::dissipative;
  throw InputError("unknown model '" + s + "'");
}

/// One Fourier mode of a real trigonometric polynomial.
struct ForcingTerm {
  Mode nu;
  cplx coeff;
};

struct Tolerances {
  double stationary = 1e-10;
  double nondeg = 1e-8;
  double compat = 1e-12;  // relative
  double hermitian = 1e-9;
};

/// Hamiltonian variants take the potential f (F = -grad f); the standard map defaults to f = cos x,
/// i.e. F = sin. The dissipative variant takes the forcing f(omega t) and the polynomial g(x) = sum g_j x^j.
struct ModelSpec {
  ModelKind kind = ModelKind::maximal_torus;
  int r = 0, s = 0;  // lower_tori split of T^{r+s}
  std::vector<ForcingTerm> forcing;
  std::vector<double> g_taylor;
  std::vector<double> alpha0, beta0;
  std::optional<double> c0;
  Tolerances tol;
};

struct StationaryReport {
  double gradient_norm = 0;
  Eigen::MatrixXd hessian;
  std::vector<double> hessian_eigenvalues;  // eigenvalues of d^2 f0
  std::vector<double> a;                    // eigenvalues of -d^2 f0, ascending
  double min_singular = 0;
  bool distinct = true;
  std::string classification;
};

/// Gradient and Hessian of f0(beta) = sum_mu c_mu e^{i mu.beta} at beta0.
inline StationaryReport stationary_point_check(const std::vector<ForcingTerm>& f0, const std::vector<double>& beta0,
                                               double tol_stationary = 1e-10) {
  const int s = static_cast<int>(beta0.size());
  StationaryReport rep;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(s);
  rep.hessian = Eigen::MatrixXd::Zero(s, s);
  for (const auto& t : f0) {
    if (static_cast<int>(t.nu.size()) != s) throw InputError("stationary_point_check: mode dimension mismatch");
    double ph = 0;
    for (int j = 0; j < s; ++j) ph += t.nu[j] * beta0[j];
    cplx e = t.coeff * std::polar(1.0, ph);
    for (int j = 0; j < s; ++j) {
      grad[j] += (cplx(0, t.nu[j]) * e).real();
      for (int l = 0; l < s; ++l) rep.hessian(j, l) += (-double(t.nu[j]) * t.nu[l] * e).real();
    }
  }
  rep.gradient_norm = grad.norm();
  if (rep.gradient_norm > tol_stationary)
    throw InputError("beta0 is not a stationary point of f0: |grad f0(beta0)| = " + std::to_string(rep.gradient_norm));
  if (s > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.hessian);
    for (int j = 0; j < s; ++j) rep.hessian_eigenvalues.push_back(es.eigenvalues()[j]);
    for (int j = s - 1; j >= 0; --j) rep.a.push_back(-es.eigenvalues()[j]);
    rep.min_singular = es.eigenvalues().cwiseAbs().minCoeff();
    for (int j = 0; j + 1 < s; ++j)
      if (std::abs(rep.a[j + 1] - rep.a[j]) <= 1e-12 * std::max(1.0, std::abs(rep.a[j]))) rep.distinct = false;
    bool all_pos = std::all_of(rep.hessian_eigenvalues.begin(), rep.hessian_eigenvalues.end(), [](double v) { return v > 0; });
    bool all_neg = std::all_of(rep.hessian_eigenvalues.begin(), rep.hessian_eigenvalues.end(), [](double v) { return v < 0; });
    if (all_neg)
      rep.classification = "maximum: elliptic for eps<0, hyperbolic for eps>0";
    else if (all_pos)
      rep.classification = "minimum: elliptic for eps>0, hyperbolic for eps<0";
    else
      rep.classification = "mixed";
  }
  return rep;
}

/// Polynomial value and derivatives p^{(s)}(x), s = 0..deg.
inline std::vector<double> poly_derivatives(const std::vector<double>& c, double x) {
  const int deg = static_cast<int>(c.size()) - 1;
  std::vector<double> out(std::max(deg + 1, 1), 0.0);
  std::vector<double> cur = c;
  for (int s = 0; s <= deg; ++s) {
    double v = 0;
    for (int j = static_cast<int>(cur.size()) - 1; j >= 0; --j) v = v * x + cur[j];
    out[s] = v;
    std::vector<double> next;
    for (std::size_t j = 1; j < cur.size(); ++j) next.push_back(cur[j] * double(j));
    cur = std::move(next);
  }
  return out;
}

/// Resolved model: mode alphabet, divisor symbols, zero-mode coupling and the right-hand side.
class Model {
 public:
  Model(const ModelSpec& spec, const RotationVector& omega) : spec_(spec), omega_(omega) {
    if (omega.dim() < 1) throw InputError("rotation vector is empty");
    for (double v : omega.values)
      if (!std::isfinite(v)) throw InputError("rotation vector has non-finite components");
    switch (spec.kind) {
      case ModelKind::maximal_torus: init_angles(omega.dim(), 0); break;
      case ModelKind::standard_map: init_standard_map(); break;
      case ModelKind::lower_tori: init_angles(spec.r, spec.s); break;
      case ModelKind::dissipative: init_dissipative(); break;
    }
    if (spec.kind == ModelKind::standard_map) {
      omega_.kind = Dynamics::map;
    } else if (omega_.kind != Dynamics::flow) {
      throw InputError(to_string(spec.kind) + " needs a continuous-time frequency vector");
    }
    if (omega_.nu_max == 0) {
      const int dd = omega_.dim();
      stamp_diophantine(omega_, dd == 1 ? 1.0 : std::max(1.0, dd - 1.0), dd == 1 ? 1000 : (dd == 2 ? 200 : 20));
    } else {
      stamp_diophantine(omega_, omega_.tau, omega_.nu_max);
    }
  }

  const ModelSpec& spec() const { return spec_; }
  const RotationVector& omega() const { return omega_; }
  RotationVector& omega_mut() { return omega_; }
  ModelKind kind() const { return spec_.kind; }
  int n() const { return n_; }
  int d() const { return d_; }
  int hat_begin() const { return hat_; }
  bool has_zero_modes() const { return hat_ < n_; }
  int mode_bound() const { return N_f_; }
  int max_delta_order() const { return spec_.kind == ModelKind::dissipative ? 1 : 0; }

  const std::vector<ExpTerm>& exp_terms() const { return terms_; }
  double c0() const { return c0_; }
  double a() const { return a_; }
  const std::vector<double>& g_derivatives() const { return gder_; }
  const std::map<Mode, cplx>& f_modes() const { return fmodes_; }
  const Eigen::MatrixXcd& zero_coupling() const { return L_; }
  const Eigen::MatrixXcd& zero_propagator() const { return G_; }
  const std::optional<StationaryReport>& stationary() const { return stationary_; }

  /// Node Fourier labels that can carry a nonzero node factor.
  std::vector<Mode> alphabet() const {
    std::vector<Mode> out;
    if (spec_.kind == ModelKind::dissipative) {
      out.push_back(Mode(d_, 0));
      for (const auto& [nu, c] : fmodes_)
        if (!is_zero_mode(nu)) out.push_back(nu);
    } else {
      for (const auto& t : terms_)
        if (std::find(out.begin(), out.end(), t.fourier) == out.end()) out.push_back(t.fourier);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// False when F_{s,nu_v} vanishes identically (or the node would be an end node with nu_v = 0).
  bool node_allowed(const Mode& nu_v, int s) const {
    const bool z = is_zero_mode(nu_v);
    if (z && s == 0) return false;
    if (spec_.kind == ModelKind::dissipative) {
      if (!z) return s == 0 && fmodes_.count(nu_v) > 0;
      return s < static_cast<int>(gder_.size()) && gder_[s] != 0;
    }
    for (const auto& t : terms_)
      if (t.fourier == nu_v) return true;
    return false;
  }

  /// Signed argument x of the divisor symbols for momentum nu.
  double x_of(const Mode& nu) const { return omega_dot(omega_, nu); }

  /// delta_p(x)
  cplx delta(int p, double x) const {
    switch (spec_.kind) {
      case ModelKind::standard_map:
        return p == 0 ? cplx(2.0 * (std::cos(2.0 * std::numbers::pi * x) - 1.0)) : cplx(0);
      case ModelKind::dissipative:
        if (p == 0) return cplx(0, x);
        if (p == 1) return cplx(-x * x);
        return 0;
      default:
        return p == 0 ? cplx(-x * x) : cplx(0);
    }
  }

  /// delta(x, eps) = sum_p eps^p delta_p(x)
  cplx delta_eps(double x, double eps) const {
    cplx s = 0;
    double e = 1;
    for (int p = 0; p <= max_delta_order(); ++p, e *= eps) s += e * delta(p, x);
    return s;
  }

  /// [F(u)] through order `order`; u is the full series (order-0 part is u0).
  FTSeries force(const FTSeries& u, int order, bool majorant = false) const {
    FTSeries w = u.without_order0().truncated(order);
    w.set_bound({});
    if (majorant) w = w.majorant();
    if (spec_.kind == ModelKind::dissipative) {
      std::vector<FTSeries> T = taylor_data(majorant);
      return compose_taylor(T, w, order, true);
    }
    if (!majorant) return compose_exp(terms_, w, n_, order);
    std::vector<ExpTerm> mt = terms_;
    for (auto& t : mt) {
      for (auto& z : t.rate) z = std::abs(z);
      for (auto& z : t.coeff) z = std::abs(z);
    }
    return compose_exp(mt, w, n_, order);
  }

  /// Right-hand side F(u, psi) evaluated pointwise; u_val is the full value of u at psi.
  CVec force_at(const CVec& u_val, const std::vector<double>& psi) const {
    CVec out(n_, 0.0);
    if (spec_.kind == ModelKind::dissipative) {
      cplx f = 0;
      for (const auto& [nu, c] : fmodes_) {
        double ph = 0;
        for (int j = 0; j < d_; ++j) ph += nu[j] * psi[j];
        f += c * std::polar(1.0, ph);
      }
      cplx g = 0;
      for (int j = static_cast<int>(spec_.g_taylor.size()) - 1; j >= 0; --j) g = g * u_val[0] + spec_.g_taylor[j];
      out[0] = f - g;
      return out;
    }
    for (const auto& t : terms_) {
      double ph = 0;
      for (int j = 0; j < d_; ++j) ph += t.fourier[j] * psi[j];
      cplx ex = 0;
      for (int i = 0; i < n_; ++i) ex += t.rate[i] * u_val[i];
      cplx e = std::polar(1.0, ph) * std::exp(ex);
      for (int i = 0; i < n_; ++i) out[i] += t.coeff[i] * e;
    }
    return out;
  }

  /// Node factor F_{s,nu_v}/s! contracted with the s child line values (rho = 1 nodes).
  CVec node_factor(const Mode& nu_v, const std::vector<CVec>& children) const {
    const int s = static_cast<int>(children.size());
    double fact = 1;
    for (int j = 2; j <= s; ++j) fact *= j;
    CVec out(n_, 0.0);
    if (spec_.kind == ModelKind::dissipative) {
      cplx base = 0;
      if (s == 0) {
        auto it = fmodes_.find(nu_v);
        if (it != fmodes_.end()) base = it->second;
        if (is_zero_mode(nu_v)) base -= gder_[0];
      } else if (is_zero_mode(nu_v) && s < static_cast<int>(gder_.size())) {
        base = -gder_[s];
      }
      for (const auto& c : children) base *= c[0];
      out[0] = base / fact;
      return out;
    }
    for (const auto& t : terms_) {
      if (t.fourier != nu_v) continue;
      cplx prod = 1;
      for (const auto& c : children) {
        cplx dot = 0;
        for (int i = 0; i < n_; ++i) dot += t.rate[i] * c[i];
        prod *= dot;
      }
      for (int i = 0; i < n_; ++i) out[i] += t.coeff[i] * prod;
    }
    for (auto& z : out) z /= fact;
    return out;
  }

 private:
  void check_real(const std::vector<ForcingTerm>& f) const {
    std::map<Mode, cplx> m;
    double scale = 0;
    for (const auto& t : f) {
      m[t.nu] += t.coeff;
      scale = std::max(scale, std::abs(t.coeff));
    }
    for (const auto& [nu, c] : m) {
      auto it = m.find(mode_neg(nu));
      cplx partner = it == m.end() ? cplx(0) : it->second;
      if (std::abs(partner - std::conj(c)) > 1e-14 * std::max(1.0, scale))
        throw InputError("forcing is not real: mode " + mode_to_string(nu) + " lacks its conjugate partner");
    }
  }

  void init_angles(int r, int s) {
    const ModelSpec& sp = spec_;
    if (r < 1 || s < 0) throw InputError("invalid torus dimensions");
    if (sp.kind == ModelKind::lower_tori && s < 1) throw InputError("lower_tori needs s >= 1");
    if (sp.kind == ModelKind::lower_tori && omega_.dim() != r)
      throw InputError("lower_tori: rotation vector must have r = " + std::to_string(r) + " components");
    d_ = r;
    n_ = r + s;
    hat_ = r;
    if (sp.forcing.empty()) throw InputError("forcing is empty");
    check_real(sp.forcing);
    std::vector<double> phase(n_, 0.0);
    if (!sp.alpha0.empty()) {
      if (static_cast<int>(sp.alpha0.size()) != r) throw InputError("alpha0 has the wrong length");
      for (int i = 0; i < r; ++i) phase[i] = sp.alpha0[i];
    }
    if (s > 0) {
      if (static_cast<int>(sp.beta0.size()) != s) throw InputError("beta0 must have s = " + std::to_string(s) + " entries");
      for (int i = 0; i < s; ++i) phase[r + i] = sp.beta0[i];
    }
    std::vector<ForcingTerm> f0;
    for (const auto& t : sp.forcing) {
      if (static_cast<int>(t.nu.size()) != n_)
        throw InputError("forcing mode " + mode_to_string(t.nu) + " must have " + std::to_string(n_) + " entries");
      Mode fourier(t.nu.begin(), t.nu.begin() + r);
      double ph = 0;
      for (int i = 0; i < n_; ++i) ph += t.nu[i] * phase[i];
      cplx fm = t.coeff * std::polar(1.0, ph);
      ExpTerm e;
      e.fourier = fourier;
      e.rate.resize(n_);
      e.coeff.resize(n_);
      bool nonzero = false;
      for (int i = 0; i < n_; ++i) {
        e.rate[i] = cplx(0, t.nu[i]);
        e.coeff[i] = cplx(0, -t.nu[i]) * fm;
        nonzero = nonzero || t.nu[i] != 0;
      }
      if (nonzero) terms_.push_back(e);
      N_f_ = std::max(N_f_, l1(fourier));
      if (s > 0 && is_zero_mode(fourier)) f0.push_back({Mode(t.nu.begin() + r, t.nu.end()), t.coeff});
    }
    L_ = Eigen::MatrixXcd::Zero(n_ - hat_, n_ - hat_);
    G_ = Eigen::MatrixXcd::Zero(n_, n_);
    if (s > 0) {
      stationary_ = stationary_point_check(f0, sp.beta0, sp.tol.stationary);
      if (stationary_->min_singular <= sp.tol.nondeg)
        throw InputError("nondegeneracy fails: smallest |eigenvalue| of the beta-Hessian of f0 is " +
                         std::to_string(stationary_->min_singular));
      // [dF_beta/dbeta]_0 = -Hess f0
      L_ = -stationary_->hessian.cast<cplx>();
      G_.block(hat_, hat_, s, s) = -L_.inverse();
    }
    if (N_f_ == 0) N_f_ = 1;
  }

  void init_standard_map() {
    if (omega_.dim() != 1) throw InputError("standard_map needs a single rotation number");
    ModelSpec& sp = spec_;
    if (sp.forcing.empty()) sp.forcing = {{Mode{1}, 0.5}, {Mode{-1}, 0.5}};  // f = cos x, F = sin x
    init_angles(1, 0);
  }

  void init_dissipative() {
    const ModelSpec& sp = spec_;
    d_ = omega_.dim();
    n_ = 1;
    hat_ = 0;
    if (sp.g_taylor.size() < 2) throw InputError("dissipative model needs g_taylor with degree >= 1");
    check_real(sp.forcing);
    for (const auto& t : sp.forcing) {
      if (static_cast<int>(t.nu.size()) != d_)
        throw InputError("forcing mode " + mode_to_string(t.nu) + " must have " + std::to_string(d_) + " entries");
      fmodes_[t.nu] += t.coeff;
      N_f_ = std::max(N_f_, l1(t.nu));
    }
    if (N_f_ == 0) N_f_ = 1;
    double f0 = 0;
    if (auto it = fmodes_.find(Mode(d_, 0)); it != fmodes_.end()) f0 = it->second.real();
    if (sp.c0) {
      c0_ = *sp.c0;
    } else {
      c0_ = solve_c0(f0);
    }
    gder_ = poly_derivatives(sp.g_taylor, c0_);
    double scale = std::max(1.0, std::abs(f0));
    if (std::abs(gder_[0] - f0) > 1e-10 * scale)
      throw InputError("c0 does not satisfy g(c0) = f0: residual " + std::to_string(gder_[0] - f0));
    a_ = gder_.size() > 1 ? gder_[1] : 0.0;
    if (std::abs(a_) <= sp.tol.nondeg) throw InputError("a = g'(c0) vanishes; the zero mode cannot be fixed");
    L_ = Eigen::MatrixXcd::Constant(1, 1, cplx(-a_));
    G_ = Eigen::MatrixXcd::Constant(1, 1, cplx(1.0 / a_));
  }

  /// Real root of g(x) = f0 with g'(x) != 0, preferring g' > 0 and small |x|.
  double solve_c0(double f0) const {
    std::vector<double> c = spec_.g_taylor;
    c[0] -= f0;
    while (c.size() > 1 && c.back() == 0) c.pop_back();
    const int deg = static_cast<int>(c.size()) - 1;
    if (deg < 1) throw InputError("g(x) - f0 has no roots");
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) C(i, i - 1) = 1;
    for (int i = 0; i < deg; ++i) C(i, deg - 1) = -c[i] / c[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> es(C);
    std::optional<double> best;
    double best_key = 0;
    for (int i = 0; i < deg; ++i) {
      auto z = es.eigenvalues()[i];
      if (std::abs(z.imag()) > 1e-7 * std::max(1.0, std::abs(z.real()))) continue;
      double x = z.real();
      for (int it = 0; it < 50; ++it) {
        auto dv = poly_derivatives(c, x);
        if (dv.size() < 2 || dv[1] == 0) break;
        double dx = dv[0] / dv[1];
        x -= dx;
        if (std::abs(dx) < 1e-16 * std::max(1.0, std::abs(x))) break;
      }
      double gp = poly_derivatives(spec_.g_taylor, x)[1];
      if (std::abs(gp) <= spec_.tol.nondeg) continue;
      double key = (gp > 0 ? 0.0 : 1e6) + std::abs(x);
      if (!best || key < best_key) {
        best = x;
        best_key = key;
      }
    }
    if (!best) throw InputError("no admissible real c0 with g(c0) = f0 and g'(c0) != 0");
    return *best;
  }

  std::vector<FTSeries> taylor_data(bool majorant) const {
    const int deg = static_cast<int>(gder_.size()) - 1;
    std::vector<FTSeries> T;
    for (int s = 0; s <= deg; ++s) {
      FTSeries t(d_, 1, 0);
      if (s == 0) {
        for (const auto& [nu, c] : fmodes_) {
          cplx v = c - (is_zero_mode(nu) ? gder_[0] : 0.0);
          if (v != cplx(0)) t.set(0, nu, CVec{majorant ? cplx(std::abs(v)) : v});
        }
      } else if (gder_[s] != 0) {
        t.set(0, Mode(d_, 0), CVec{majorant ? std::abs(gder_[s]) : -gder_[s]});
      }
      T.push_back(std::move(t));
    }
    return T;
  }

  ModelSpec spec_;
  RotationVector omega_;
  int n_ = 1, d_ = 1, hat_ = 1, N_f_ = 0;
  std::vector<ExpTerm> terms_;
  std::map<Mode, cplx> fmodes_;
  double c0_ = 0, a_ = 0;
  std::vector<double> gder_;
  Eigen::MatrixXcd L_, G_;
  std::optional<StationaryReport> stationary_;
};

struct CompatEntry {
  int k = 0;       // the condition [F]^{(k-1)}_0 = 0 needed to solve order k
  CVec value;      // after the zero-mode correction
  double abs = 0;  // max-norm of value
  double scale = 0;  // majorant: sum of |summands|
  double rel = 0;
};

struct SolveReport {
  FTSeries series;
  std::vector<CompatEntry> compat;       // k = 1..K
  std::vector<double> min_divisor;       // index k = 1..K (index 0 unused), min |delta_0|
  std::vector<CVec> zero_mode;           // index k = 0..K, zero-mode corrections u^{(k)}_0
  double max_hermitian_violation = 0;
  double gamma = 0, tau = 0;
  int nu_max = 0;
};

namespace detail {

inline CompatEntry compat_entry(const Model& m, const FTSeries& F, const FTSeries& Fmaj, int k) {
  CompatEntry e;
  e.k = k;
  Mode zero(m.d(), 0);
  e.value = F.coeff(k - 1, zero);
  e.abs = vec_maxabs(e.value);
  e.scale = vec_maxabs(Fmaj.coeff(k - 1, zero));
  e.rel = e.scale > 0 ? e.abs / e.scale : e.abs;
  return e;
}

inline void fix_zero_mode(const Model& m, FTSeries& u, const FTSeries& F, int k, SolveReport& rep) {
  const int h = m.hat_begin(), n = m.n(), s = n - h;
  Mode zero(m.d(), 0);
  CVec phi = F.coeff(k, zero);
  Eigen::VectorXcd Phi(s);
  for (int i = 0; i < s; ++i) Phi[i] = phi[h + i];
  Eigen::VectorXcd z = -m.zero_coupling().partialPivLu().solve(Phi);
  CVec full(n, 0.0);
  for (int i = 0; i < s; ++i) full[h + i] = cplx(z[i].real(), 0.0);  // zero modes of real functions are real
  if (!z.allFinite()) throw ContractViolation("zero-mode solve", "nonfinite correction at order " + std::to_string(k));
  u.set(k, zero, full);
  rep.zero_mode[k] = full;
}

}  // namespace detail

/// Order-by-order Lindstedt recursion: compose [F]^{(k-1)}, then divide by delta_0 for nu != 0.
inline SolveReport solve_lindstedt(const Model& m, int K) {
  if (K < 1) throw InputError("order K must be >= 1");
  SolveReport rep;
  const int d = m.d(), n = m.n();
  const Mode zero(d, 0);
  FTSeries u(d, n, K, {m.mode_bound(), 0});
  if (m.kind() == ModelKind::dissipative) u.set(0, zero, CVec{m.c0()});
  rep.min_divisor.assign(K + 1, 0.0);
  rep.zero_mode.assign(K + 1, CVec(n, 0.0));
  if (m.kind() == ModelKind::dissipative) rep.zero_mode[0] = CVec{m.c0()};
  rep.compat.reserve(K);
  for (int k = 1; k <= K; ++k) {
    FTSeries F = m.force(u, k - 1);
    if (m.has_zero_modes() && k - 1 >= 1) {
      detail::fix_zero_mode(m, u, F, k - 1, rep);
      F = m.force(u, k - 1);
    }
    FTSeries Fmaj = m.force(u, k - 1, true);
    rep.compat.push_back(detail::compat_entry(m, F, Fmaj, k));
    const auto& Fk = F.order(k - 1);
    std::map<Mode, bool> keys;
    for (const auto& [nu, c] : Fk) keys[nu] = true;
    if (m.max_delta_order() >= 1)
      for (const auto& [nu, c] : u.order(k - 1)) keys[nu] = true;
    double mind = std::numeric_limits<double>::infinity();
    for (const auto& [nu, unused] : keys) {
      if (is_zero_mode(nu)) continue;
      double x = m.x_of(nu);
      cplx d0 = m.delta(0, x);
      if (std::abs(d0) == 0)
        throw InputError("vanishing divisor at nu = " + mode_to_string(nu) + " (rotation vector is resonant)");
      mind = std::min(mind, std::abs(d0));
      CVec v = F.coeff(k - 1, nu);
      for (int p = 1; p <= std::min(m.max_delta_order(), k); ++p) {
        cplx dp = m.delta(p, x);
        const CVec* prev = u.find(k - p, nu);
        if (prev)
          for (int i = 0; i < n; ++i) v[i] -= dp * (*prev)[i];
      }
      for (auto& z : v) z /= d0;
      u.set(k, nu, std::move(v));
    }
    rep.min_divisor[k] = std::isfinite(mind) ? mind : 0.0;
    double hv = u.hermitian_violation(k);
    rep.max_hermitian_violation = std::max(rep.max_hermitian_violation, hv);
    double nk = 0;
    for (const auto& [nu, c] : u.order(k)) nk = std::max(nk, vec_maxabs(c));
    if (hv > m.spec().tol.hermitian * std::max(1.0, nk))
      throw ContractViolation("hermitian symmetry", "violation " + std::to_string(hv) + " at order " + std::to_string(k));
    u.symmetrize(k);
  }
  if (m.has_zero_modes()) {
    FTSeries F = m.force(u, K);
    detail::fix_zero_mode(m, u, F, K, rep);
  }
  rep.series = std::move(u);
  rep.gamma = m.omega().gamma;
  rep.tau = m.omega().tau;
  rep.nu_max = m.omega().nu_max;
  return rep;
}

/// [F]^{(k-1)}_0 for k = 1..K re-evaluated from the series (post zero-mode correction).
inline std::vector<CompatEntry> compatibility_report(const Model& m, const FTSeries& u, int K) {
  K = std::min(K, u.max_order());
  FTSeries F = m.force(u, K - 1 >= 0 ? K - 1 : 0);
  FTSeries Fmaj = m.force(u, K - 1 >= 0 ? K - 1 : 0, true);
  std::vector<CompatEntry> out;
  for (int k = 1; k <= K; ++k) out.push_back(detail::compat_entry(m, F, Fmaj, k));
  return out;
}

/// Throws if any expected cancellation fails the relative tolerance.
inline void check_compatibility(const Model& m, const std::vector<CompatEntry>& entries) {
  for (const auto& e : entries) {
    if (e.k == 1 && e.abs != 0 && e.abs > 1e-15)
      throw ContractViolation("compatibility", "order-1 condition is not exactly satisfied: " + std::to_string(e.abs));
    if (e.rel > m.spec().tol.compat)
      throw ContractViolation("compatibility", "relative residual " + std::to_string(e.rel) + " at order " +
                                                   std::to_string(e.k));
  }
}

/// Uniform grid with 64 points per angle for d <= 2; a fixed Kronecker sequence of 4096 points otherwise.
inline std::vector<std::vector<double>> default_grid(int d, int per_axis = 64) {
  std::vector<std::vector<double>> g;
  const double tp = 2.0 * std::numbers::pi;
  if (d == 1) {
    for (int i = 0; i < per_axis; ++i) g.push_back({tp * i / per_axis});
  } else if (d == 2) {
    for (int i = 0; i < per_axis; ++i)
      for (int j = 0; j < per_axis; ++j) g.push_back({tp * i / per_axis, tp * j / per_axis});
  } else {
    static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (int i = 0; i < per_axis * per_axis; ++i) {
      std::vector<double> p(d);
      for (int j = 0; j < d; ++j) {
        double a = std::sqrt(primes[j % 12]) * (i + 1);
        p[j] = tp * (a - std::floor(a));
      }
      g.push_back(p);
    }
  }
  return g;
}

struct ResidualResult {
  double residual = 0;  // sup over the grid of |D_eps u - eps F(u)|
  double scale = 0;     // sup over the grid of |eps F(u)|
};

inline ResidualResult residual_eval(const Model& m, const FTSeries& u, double eps,
                                    const std::vector<std::vector<double>>& grid) {
  ResidualResult res;
  const int n = m.n(), K = u.max_order();
  // multiply by delta(omega.nu, eps) in Fourier space
  FTSeries Du(u.dim_d(), n, K);
  for (int k = 0; k <= K; ++k)
    for (const auto& [nu, c] : u.order(k)) {
      cplx dl = m.delta_eps(m.x_of(nu), eps);
      if (dl == cplx(0)) continue;
      CVec v = c;
      for (auto& z : v) z *= dl;
      Du.set(k, nu, v);
    }
  for (const auto& psi : grid) {
    CVec lhs = ft_eval(Du, psi, eps);
    CVec uv = ft_eval(u, psi, eps);
    CVec rhs = m.force_at(uv, psi);
    for (int i = 0; i < n; ++i) {
      rhs[i] *= eps;
      res.residual = std::max(res.residual, std::abs(lhs[i] - rhs[i]));
      res.scale = std::max(res.scale, std::abs(rhs[i]));
    }
  }
  return res;
}

struct OrderCheck {
  double p = 0;
  ResidualResult r1, r2;
};

inline OrderCheck residual_order_check(const Model& m, const FTSeries& u, double eps1, double eps2,
                                       const std::vector<std::vector<double>>& grid) {
  if (!(eps1 > eps2 && eps2 > 0)) throw InputError("residual_order_check needs eps1 > eps2 > 0");
  OrderCheck oc;
  oc.r1 = residual_eval(m, u, eps1, grid);
  oc.r2 = residual_eval(m, u, eps2, grid);
  const double floor_factor = 1e3 * std::numeric_limits<double>::epsilon();
  for (const auto* r : {&oc.r1, &oc.r2})
    if (r->residual <= floor_factor * std::max(r->scale, 1e-300))
      throw InputError("residuals at the roundoff floor: decrease the order or increase eps");
  oc.p = std::log(oc.r1.residual / oc.r2.residual) / std::log(eps1 / eps2);
  return oc;
}

}  // namespace lindstedt
