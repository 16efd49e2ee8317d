#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lindstedt/diophantine.hpp"
#include "lindstedt/error.hpp"
#include "lindstedt/models.hpp"
#include "lindstedt/parallel.hpp"
#include "lindstedt/series.hpp"

namespace lindstedt {

/// Node of a labeled planar rooted tree. `line` is the momentum of the line exiting the node.
/// In self-energy graphs a `hole` node stands for the entering line and `line` holds momenta
/// relative to it.
struct TreeNode {
  Mode nu;
  int k = 1;
  int rho = 1;
  bool hole = false;
  int parent = -1;
  std::vector<int> children;
  Mode line;
};

struct LabeledTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int order() const {
    int s = 0;
    for (const auto& v : nodes) s += v.hole ? 0 : v.k;
    return s;
  }
  const Mode& momentum() const { return nodes.front().line; }
  int n_nodes() const {
    int c = 0;
    for (const auto& v : nodes) c += v.hole ? 0 : 1;
    return c;
  }
  /// K(theta) = sum_v |nu_v|_1
  int mode_weight() const {
    int s = 0;
    for (const auto& v : nodes) s += v.hole ? 0 : l1(v.nu);
    return s;
  }

  std::string serialize(int v = 0) const {
    const TreeNode& n = nodes[v];
    if (n.hole) return "(*)";
    std::string s = "([";
    for (std::size_t i = 0; i < n.nu.size(); ++i) s += (i ? "," : "") + std::to_string(n.nu[i]);
    s += "] " + std::to_string(n.k) + " " + std::to_string(n.rho);
    for (int c : n.children) s += " " + serialize(c);
    return s + ")";
  }
};

namespace detail {

struct Sub;
using SubPtr = std::shared_ptr<const Sub>;

/// Shared subtree used during enumeration. offset is the exiting line momentum
/// (relative to the entering line for graphs that contain the hole).
struct Sub {
  Mode nu;
  int k = 1;
  int rho = 1;
  bool hole = false;
  bool has_hole = false;
  int order = 0;
  Mode line;
  std::vector<SubPtr> ch;
};

inline void flatten(const SubPtr& s, int parent, LabeledTree& t) {
  int id = static_cast<int>(t.nodes.size());
  TreeNode n;
  n.nu = s->nu;
  n.k = s->k;
  n.rho = s->rho;
  n.hole = s->hole;
  n.parent = parent;
  n.line = s->line;
  t.nodes.push_back(n);
  if (parent >= 0) t.nodes[parent].children.push_back(id);
  for (const auto& c : s->ch) flatten(c, id, t);
}

}  // namespace detail

inline LabeledTree to_tree(const detail::SubPtr& s) {
  LabeledTree t;
  detail::flatten(s, -1, t);
  return t;
}

/// Bottom-up generator of the tree families T_{k,nu} (planar trees; node factors carry 1/s_v!).
///  - lines with nu != 0 exit nodes with k_v = 1 (rho = 1, or rho = 0 with one child of equal momentum);
///  - lines with nu = 0 exit nodes with k_v = 0; such a node has s_v >= 2 when nu_v = 0;
///  - end nodes have nu_v != 0.
class TreeEnumerator {
 public:
  TreeEnumerator(const Model& m, int kmax, std::size_t budget = 4'000'000)
      : m_(m), kmax_(kmax), budget_(budget), alphabet_(m.alphabet()) {
    if (kmax < 1) throw InputError("tree enumeration needs k >= 1");
    regular_.resize(kmax + 1);
    zero_.resize(kmax + 1);
    holes_.resize(kmax + 1);
    for (int k = 1; k <= kmax; ++k) build(k);
  }

  int kmax() const { return kmax_; }
  std::size_t generated() const { return count_; }

  std::vector<LabeledTree> trees(int k, const Mode& nu) const {
    std::vector<LabeledTree> out;
    for (const auto& s : subs(k, nu)) out.push_back(to_tree(s));
    return out;
  }

  const std::vector<detail::SubPtr>& subs(int k, const Mode& nu) const {
    static const std::vector<detail::SubPtr> empty;
    if (k < 1 || k > kmax_) throw InputError("tree order outside the enumerated range");
    if (is_zero_mode(nu)) return zero_[k];
    auto it = regular_[k].find(nu);
    return it == regular_[k].end() ? empty : it->second;
  }

  /// Momenta with a nonempty family at order k.
  std::vector<Mode> momenta(int k) const {
    std::vector<Mode> out;
    for (const auto& [nu, v] : regular_[k]) out.push_back(nu);
    if (!zero_[k].empty()) out.push_back(Mode(m_.d(), 0));
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Trees of order k whose root node has k_v = 1 and whose root line has momentum 0
  /// (the summands of [F]^{(k-1)}_0).
  std::vector<LabeledTree> zero_root_trees(int k) const {
    std::vector<LabeledTree> out;
    const Mode zero(m_.d(), 0);
    for_sequences(k - 1, [&](const std::vector<detail::SubPtr>& seq, const Mode& sum, bool) {
      for (const auto& nv : alphabet_) {
        if (mode_add(nv, sum) != zero) continue;
        if (!m_.node_allowed(nv, static_cast<int>(seq.size()))) continue;
        auto s = std::make_shared<detail::Sub>();
        s->nu = nv;
        s->k = 1;
        s->order = k;
        s->line = zero;
        s->ch = seq;
        out.push_back(to_tree(s));
      }
    }, false);
    return out;
  }

  /// Self-energy graphs of order k: one entering line (the hole) and an exiting line with equal
  /// momentum; on-path lines must have nonzero relative momentum.
  std::vector<LabeledTree> self_energy_graphs(int k) const {
    std::vector<LabeledTree> out;
    if (k < 1 || k > kmax_) throw InputError("self-energy order outside the enumerated range");
    auto it = holes_[k].find(Mode(m_.d(), 0));
    if (it == holes_[k].end()) return out;
    for (const auto& s : it->second) out.push_back(to_tree(s));
    return out;
  }

 private:
  using SubPtr = detail::SubPtr;

  /// Calls fn(sequence, momentum_sum, contains_hole) for all ordered child sequences of total order T.
  /// With allow_hole, sequences contain exactly one hole-type item.
  template <class Fn>
  void for_sequences(int T, Fn&& fn, bool with_hole) const {
    std::vector<SubPtr> seq;
    Mode sum(m_.d(), 0);
    std::function<void(int, bool)> rec = [&](int remaining, bool hole_used) {
      if (remaining == 0 && (!with_hole || hole_used)) fn(seq, sum, hole_used);
      if (with_hole && !hole_used) {
        // the bare hole (order 0)
        seq.push_back(hole_);
        rec(remaining, true);
        seq.pop_back();
        for (int j = 1; j <= remaining; ++j)
          for (const auto& [off, list] : holes_[j]) {
            if (is_zero_mode(off)) continue;  // on-path lines carry nonzero relative momentum
            for (const auto& h : list) {
              seq.push_back(h);
              Mode save = sum;
              sum = mode_add(sum, off);
              rec(remaining - j, true);
              sum = save;
              seq.pop_back();
            }
          }
      }
      for (int j = 1; j <= remaining; ++j) {
        for (const auto& [nu, list] : regular_[j])
          for (const auto& c : list) {
            seq.push_back(c);
            Mode save = sum;
            sum = mode_add(sum, nu);
            rec(remaining - j, hole_used);
            sum = save;
            seq.pop_back();
          }
        for (const auto& c : zero_[j]) {
          seq.push_back(c);
          rec(remaining - j, hole_used);
          seq.pop_back();
        }
      }
    };
    rec(T, false);
  }

  void bump() {
    if (++count_ > budget_)
      throw BudgetExceeded("tree enumeration exceeded the budget of " + std::to_string(budget_) + " subtrees");
  }

  SubPtr make(const Mode& nv, int k, int rho, int order, const Mode& line, const std::vector<SubPtr>& ch,
              bool has_hole) {
    bump();
    auto s = std::make_shared<detail::Sub>();
    s->nu = nv;
    s->k = k;
    s->rho = rho;
    s->order = order;
    s->line = line;
    s->ch = ch;
    s->has_hole = has_hole;
    return s;
  }

  void build(int k) {
    const Mode zero(m_.d(), 0);
    // lines with nonzero momentum: node k_v = 1
    for_sequences(k - 1, [&](const std::vector<SubPtr>& seq, const Mode& sum, bool) {
      const int s = static_cast<int>(seq.size());
      for (const auto& nv : alphabet_) {
        if (!m_.node_allowed(nv, s)) continue;
        Mode line = mode_add(nv, sum);
        if (is_zero_mode(line)) continue;
        regular_[k][line].push_back(make(nv, 1, 1, k, line, seq, false));
      }
    }, false);
    if (m_.max_delta_order() >= 1 && k >= 2)
      for (const auto& [nu, list] : regular_[k - 1])
        for (const auto& c : list) regular_[k][nu].push_back(make(zero, 1, 0, k, nu, {c}, false));
    // zero-momentum lines: node k_v = 0
    if (m_.has_zero_modes()) {
      std::vector<SubPtr> fresh;
      for_sequences(k, [&](const std::vector<SubPtr>& seq, const Mode& sum, bool) {
        const int s = static_cast<int>(seq.size());
        for (const auto& nv : alphabet_) {
          if (mode_add(nv, sum) != zero) continue;
          if (is_zero_mode(nv) && s < 2) continue;
          if (!m_.node_allowed(nv, s)) continue;
          fresh.push_back(make(nv, 0, 1, k, zero, seq, false));
        }
      }, false);
      zero_[k] = std::move(fresh);
    }
    // graphs containing the hole (relative momenta); orders of hole-free parts count normally
    for_sequences(k - 1, [&](const std::vector<SubPtr>& seq, const Mode& sum, bool) {
      const int s = static_cast<int>(seq.size());
      for (const auto& nv : alphabet_) {
        if (!m_.node_allowed(nv, s)) continue;
        Mode off = mode_add(nv, sum);
        holes_[k][off].push_back(make(nv, 1, 1, k, off, seq, true));
      }
    }, true);
    if (m_.max_delta_order() >= 1) {
      holes_[k][zero].push_back(make(zero, 1, 0, k, zero, {hole_}, true));
      if (k >= 2)
        for (const auto& [off, list] : holes_[k - 1]) {
          if (is_zero_mode(off)) continue;
          for (const auto& c : list) holes_[k][off].push_back(make(zero, 1, 0, k, off, {c}, true));
        }
    }
  }

  static SubPtr make_hole(int d) {
    auto h = std::make_shared<detail::Sub>();
    h->hole = true;
    h->has_hole = true;
    h->k = 0;
    h->nu = Mode(d, 0);
    h->line = Mode(d, 0);
    return h;
  }

  const Model& m_;
  int kmax_;
  std::size_t budget_;
  std::size_t count_ = 0;
  std::vector<Mode> alphabet_;
  std::vector<std::map<Mode, std::vector<SubPtr>>> regular_;
  std::vector<std::vector<SubPtr>> zero_;
  std::vector<std::map<Mode, std::vector<SubPtr>>> holes_;
  SubPtr hole_ = make_hole(m_.d());
};

/// Enumerate T_{k,nu}; k_enum_max bounds the combinatorial explosion.
inline std::vector<LabeledTree> enumerate_trees(const Model& m, int k, const Mode& nu, int k_enum_max = 5) {
  if (k > k_enum_max)
    throw BudgetExceeded("tree enumeration at order " + std::to_string(k) + " exceeds k_enum_max = " +
                         std::to_string(k_enum_max));
  TreeEnumerator en(m, k);
  return en.trees(k, nu);
}

namespace detail {

inline CVec apply_propagator(const Model& m, const Mode& line, double x, const CVec& v) {
  const int n = m.n();
  CVec out(n, 0.0);
  if (is_zero_mode(line)) {
    const auto& G = m.zero_propagator();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[i] += G(i, j) * v[j];
    return out;
  }
  cplx d0 = m.delta(0, x);
  if (d0 == cplx(0)) throw ContractViolation("propagator", "zero denominator at nu = " + mode_to_string(line));
  for (int i = 0; i < n; ++i) out[i] = v[i] / d0;
  return out;
}

struct EvalContext {
  const Model* m;
  const LabeledTree* t;
  // self-energy evaluation: the hole carries unit vector e_j; on-path lines use x + omega.offset
  std::optional<int> hole_comp;
  double x = 0;
};

inline bool subtree_has_hole(const LabeledTree& t, int v) {
  if (t.nodes[v].hole) return true;
  for (int c : t.nodes[v].children)
    if (subtree_has_hole(t, c)) return true;
  return false;
}

/// Value of the node v before applying the propagator of its exiting line.
inline CVec node_value(const EvalContext& c, int v);

inline CVec line_value(const EvalContext& c, int v) {
  const TreeNode& n = c.t->nodes[v];
  if (n.hole) {
    CVec e(c.m->n(), 0.0);
    e[*c.hole_comp] = 1.0;
    return e;
  }
  CVec inner = node_value(c, v);
  bool on_path = c.hole_comp.has_value() && subtree_has_hole(*c.t, v);
  if (on_path) {
    double xx = c.x + c.m->x_of(n.line);
    cplx d0 = c.m->delta(0, xx);
    if (d0 == cplx(0)) throw ContractViolation("propagator", "zero denominator on the self-energy path");
    for (auto& z : inner) z /= d0;
    return inner;
  }
  return apply_propagator(*c.m, n.line, c.m->x_of(n.line), inner);
}

inline CVec node_value(const EvalContext& c, int v) {
  const TreeNode& n = c.t->nodes[v];
  std::vector<CVec> ch;
  for (int w : n.children) ch.push_back(line_value(c, w));
  if (n.rho == 0) {
    double xx = c.m->x_of(n.line);
    if (c.hole_comp.has_value() && subtree_has_hole(*c.t, v)) xx = c.x + c.m->x_of(n.line);
    cplx f = -c.m->delta(1, xx);
    CVec out = ch.at(0);
    for (auto& z : out) z *= f;
    return out;
  }
  return c.m->node_factor(n.nu, ch);
}

}  // namespace detail

/// Val(theta): node factors times propagators, indices contracted along lines.
inline CVec tree_value(const LabeledTree& t, const Model& m, bool root_propagator = true) {
  detail::EvalContext c{&m, &t, std::nullopt, 0.0};
  return root_propagator ? detail::line_value(c, 0) : detail::node_value(c, 0);
}

struct TreeSum {
  CVec value;
  std::size_t n_trees = 0;
};

inline TreeSum tree_sum(const TreeEnumerator& en, const Model& m, int k, const Mode& nu) {
  TreeSum r;
  r.value.assign(m.n(), 0.0);
  std::vector<CompensatedSum> acc(m.n());
  for (const auto& s : en.subs(k, nu)) {
    CVec v = tree_value(to_tree(s), m);
    for (int i = 0; i < m.n(); ++i) acc[i].add(v[i]);
    ++r.n_trees;
  }
  for (int i = 0; i < m.n(); ++i) r.value[i] = acc[i].value();
  return r;
}

/// Matrix V_T(x): external entering/exiting indices left open (columns index the entering line).
inline Eigen::MatrixXcd self_energy_value(const LabeledTree& graph, const Model& m, double x) {
  const int n = m.n();
  Eigen::MatrixXcd V(n, n);
  for (int j = 0; j < n; ++j) {
    detail::EvalContext c{&m, &graph, j, x};
    CVec col = detail::node_value(c, 0);
    for (int i = 0; i < n; ++i) V(i, j) = col[i];
  }
  return V;
}

/// Sum of all self-energy graph values of order k at x.
inline Eigen::MatrixXcd self_energy_sum(const TreeEnumerator& en, const Model& m, int k, double x) {
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(m.n(), m.n());
  for (const auto& g : en.self_energy_graphs(k)) M += self_energy_value(g, m, x);
  return M;
}

/// Central difference d/dx of the order-k self-energy sum.
inline Eigen::MatrixXcd self_energy_derivative(const TreeEnumerator& en, const Model& m, int k, double x, double h) {
  return (self_energy_sum(en, m, k, x + h) - self_energy_sum(en, m, k, x - h)) / (2 * h);
}

// ---- multiscale analysis ---------------------------------------------------------

struct SelfEnergyCluster {
  int exiting = 0;   // node whose exiting line leaves the cluster
  int entering = 0;  // node whose exiting line enters the cluster
  std::vector<int> nodes;
  int n_T = 0;       // min of the scales of the external lines
};

struct ClusterReport {
  std::vector<int> scale;                   // per node: scale of its exiting line
  std::map<int, int> N, S, Nstar;           // counts per scale n >= 0
  std::map<int, std::vector<std::vector<int>>> clusters;  // scale -> node sets
  std::vector<SelfEnergyCluster> self_energy;
  int K = 0;
};

namespace detail {

/// Nodes reachable from v through lines with scale <= m, staying below v.
inline std::vector<int> component_below(const LabeledTree& t, const std::vector<int>& scale, int v, int m) {
  std::vector<int> out{v};
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int c : t.nodes[out[i]].children)
      if (scale[c] <= m) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline ClusterReport scale_decomposition(const LabeledTree& t, const RotationVector& w, double gamma) {
  ClusterReport rep;
  const int N = static_cast<int>(t.nodes.size());
  rep.scale.resize(N);
  for (int v = 0; v < N; ++v) rep.scale[v] = scale_of(t.nodes[v].line, w, gamma);
  rep.K = t.mode_weight();
  int max_scale = -1;
  for (int v = 0; v < N; ++v) {
    max_scale = std::max(max_scale, rep.scale[v]);
    if (rep.scale[v] >= 0) rep.N[rep.scale[v]]++;
  }
  // clusters: components of lines with scale <= m containing a line of scale m
  for (int m = 0; m <= max_scale; ++m) {
    std::vector<int> comp(N, -1);
    // union along lines (v, parent) with scale[v] <= m
    std::vector<int> root(N);
    std::iota(root.begin(), root.end(), 0);
    std::function<int(int)> find = [&](int a) { return root[a] == a ? a : root[a] = find(root[a]); };
    std::vector<bool> has_line(N, false), has_top(N, false);
    for (int v = 0; v < N; ++v) {
      int p = t.nodes[v].parent;
      if (p >= 0 && rep.scale[v] <= m) root[find(v)] = find(p);
    }
    for (int v = 0; v < N; ++v) {
      int p = t.nodes[v].parent;
      if (p >= 0 && rep.scale[v] <= m) {
        has_line[find(v)] = true;
        if (rep.scale[v] == m) has_top[find(v)] = true;
      }
    }
    std::map<int, std::vector<int>> groups;
    for (int v = 0; v < N; ++v)
      if (has_line[find(v)] && has_top[find(v)]) groups[find(v)].push_back(v);
    for (auto& [r, nodes] : groups) rep.clusters[m].push_back(nodes);
  }
  // lines exiting self-energy clusters
  for (int v = 0; v < N; ++v) {
    int n = rep.scale[v];
    if (n < 0) continue;
    bool exits_se = false;
    std::vector<int> last;
    for (int m = -1; m < n && !exits_se; ++m) {
      auto C = detail::component_below(t, rep.scale, v, m);
      if (C == last) continue;
      last = C;
      std::vector<int> entering;
      for (int u : C)
        for (int c : t.nodes[u].children)
          if (!std::binary_search(C.begin(), C.end(), c)) entering.push_back(c);
      if (entering.size() == 1 && t.nodes[entering[0]].line == t.nodes[v].line) {
        exits_se = true;
        SelfEnergyCluster se;
        se.exiting = v;
        se.entering = entering[0];
        se.nodes = C;
        se.n_T = std::min(n, rep.scale[entering[0]]);
        rep.self_energy.push_back(se);
      }
    }
    if (exits_se) rep.S[n]++;
  }
  for (const auto& [n, c] : rep.N) rep.Nstar[n] = c - (rep.S.count(n) ? rep.S.at(n) : 0);
  return rep;
}

struct SiegelBryunoResult {
  double c = 0;
  std::map<int, double> margin;       // bound - Nstar_n for each n with Nstar_n > 0
  std::optional<double> worst_margin;
  int violations = 0;
};

/// Nstar_n <= c 2^{-n/tau} K(theta), c = 2^{2+1/tau}.
inline SiegelBryunoResult siegel_bryuno_check(const ClusterReport& cr, double tau) {
  SiegelBryunoResult r;
  r.c = std::pow(2.0, 2.0 + 1.0 / tau);
  for (const auto& [n, ns] : cr.Nstar) {
    if (ns <= 0) continue;
    double bound = r.c * std::pow(2.0, -double(n) / tau) * cr.K;
    double mg = bound - ns;
    r.margin[n] = mg;
    if (!r.worst_margin || mg < *r.worst_margin) r.worst_margin = mg;
    if (mg < 0) ++r.violations;
  }
  return r;
}

inline SiegelBryunoResult siegel_bryuno_check(const LabeledTree& t, const RotationVector& w, double gamma,
                                              double tau) {
  return siegel_bryuno_check(scale_decomposition(t, w, gamma), tau);
}

// ---- factorial accumulation ---------------------------------------------------------

/// Chain of k-1 nodes with rho = 0, s = k_v = 1 above one end node with mode nu (all lines carry nu).
inline LabeledTree factorial_chain_tree(int k, const Mode& nu) {
  if (k < 2) throw InputError("factorial chain needs k >= 2");
  if (is_zero_mode(nu)) throw InputError("factorial chain needs nu != 0");
  LabeledTree t;
  for (int i = 0; i < k; ++i) {
    TreeNode n;
    n.parent = i - 1;
    n.line = nu;
    if (i + 1 < k) {
      n.nu = Mode(nu.size(), 0);
      n.rho = 0;
      n.children = {i + 1};
    } else {
      n.nu = nu;
      n.rho = 1;
    }
    t.nodes.push_back(n);
  }
  return t;
}

struct ChainOptimum {
  int k = 0;
  Mode nu;
  cplx value;
};

/// For each k, the forcing mode maximizing |Val| of the chain tree.
inline std::vector<ChainOptimum> optimize_chains(const Model& m, int k_lo, int k_hi) {
  if (m.kind() != ModelKind::dissipative) throw InputError("factorial chains need the dissipative model");
  std::vector<ChainOptimum> out;
  for (int k = k_lo; k <= k_hi; ++k) {
    ChainOptimum best;
    best.k = k;
    double bv = -1;
    for (const auto& [nu, c] : m.f_modes()) {
      if (is_zero_mode(nu)) continue;
      cplx v = tree_value(factorial_chain_tree(k, nu), m)[0];
      if (std::abs(v) > bv) {
        bv = std::abs(v);
        best.nu = nu;
        best.value = v;
      }
    }
    if (bv < 0) throw InputError("no forcing mode available for the chain tree");
    out.push_back(best);
  }
  return out;
}

// ---- oracle comparison ---------------------------------------------------------------

struct TreeCheck {
  int k = 0;
  Mode nu;
  std::size_t n_trees = 0;
  CVec tree_sum, recursion;
  double rel_error = 0;  // max-norm difference over max-norm of the recursion value (absolute when that is 0)
  std::optional<double> sb_worst_margin;
  int sb_violations = 0;
};

/// Compares tree sums with the recursion for every momentum reached at orders 1..K.
inline std::vector<TreeCheck> verify_trees(const Model& m, int K, double tau) {
  SolveReport sr = solve_lindstedt(m, K);
  TreeEnumerator en(m, K);
  std::vector<std::pair<int, Mode>> keys;
  for (int k = 1; k <= K; ++k) {
    std::set<Mode> nus;
    for (const auto& [nu, c] : sr.series.order(k)) nus.insert(nu);
    for (const auto& nu : en.momenta(k)) nus.insert(nu);
    for (const auto& nu : nus) keys.emplace_back(k, nu);
  }
  std::vector<TreeCheck> out(keys.size());
  parallel_for(keys.size(), [&](std::size_t i) {
    TreeCheck& c = out[i];
    c.k = keys[i].first;
    c.nu = keys[i].second;
    TreeSum ts = tree_sum(en, m, c.k, c.nu);
    c.n_trees = ts.n_trees;
    c.tree_sum = ts.value;
    c.recursion = sr.series.coeff(c.k, c.nu);
    double diff = 0, mag = 0;
    for (int j = 0; j < m.n(); ++j) {
      diff = std::max(diff, std::abs(c.tree_sum[j] - c.recursion[j]));
      mag = std::max(mag, std::abs(c.recursion[j]));
    }
    c.rel_error = mag > 0 ? diff / mag : diff;
    for (const auto& s : en.subs(c.k, c.nu)) {
      SiegelBryunoResult r = siegel_bryuno_check(to_tree(s), m.omega(), m.omega().gamma, tau);
      c.sb_violations += r.violations;
      if (r.worst_margin && (!c.sb_worst_margin || *r.worst_margin < *c.sb_worst_margin))
        c.sb_worst_margin = r.worst_margin;
    }
  });
  return out;
}

}  // namespace lindstedt
