#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "device_model.hpp"
#include "floquet_graph.hpp"
#include "parallel.hpp"
#include "perturbation.hpp"

namespace fcollide::collision_search {

using device_model::DeviceSpec;
using device_model::LatticeSchedule;
using floquet_graph::cplx;
using floquet_graph::Edge;
using floquet_graph::FloquetModel;
using floquet_graph::FloquetState;
using floquet_graph::FloquetSubspace;
using floquet_graph::Interaction;
using floquet_graph::StateHash;

// ---------------------------------------------------------------------------------------------
// Walks

struct WalkStep {
  std::size_t interaction;
  cplx amp;
};

struct Walk {
  std::vector<FloquetState> states;
  std::vector<WalkStep> edges;

  std::size_t length() const { return edges.size(); }
  bool closed() const { return !states.empty() && states.front() == states.back(); }
};

/// Qubits touched by a walk with one hyperedge per traversed interaction.
struct RealSpaceGraph {
  std::vector<std::size_t> nodes;
  std::vector<std::vector<std::size_t>> hyperedges;

  bool connected() const {
    if (nodes.empty()) return true;
    std::map<std::size_t, std::size_t> parent;
    for (auto n : nodes) parent[n] = n;
    std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& e : hyperedges)
      for (std::size_t i = 1; i < e.size(); ++i) parent[root(e[i])] = root(e[0]);
    auto r = root(nodes.front());
    return std::all_of(nodes.begin(), nodes.end(), [&](auto n) { return root(n) == r; });
  }

  bool contains(std::size_t q) const { return std::binary_search(nodes.begin(), nodes.end(), q); }
};

inline RealSpaceGraph real_space_graph(const std::vector<std::size_t>& interactions, const FloquetModel& m) {
  RealSpaceGraph g;
  std::set<std::size_t> nodes;
  for (auto i : interactions) {
    const auto& q = m.H.interactions[i].qubits;
    g.hyperedges.push_back(q);
    nodes.insert(q.begin(), q.end());
  }
  g.nodes.assign(nodes.begin(), nodes.end());
  return g;
}

inline RealSpaceGraph real_space_graph(const Walk& w, const FloquetModel& m) {
  std::vector<std::size_t> ids;
  for (const auto& e : w.edges) ids.push_back(e.interaction);
  return real_space_graph(ids, m);
}

/// A walk is valid when its interactions form one connected real-space component that, if a
/// center is given, contains it.
inline bool is_valid_walk(const Walk& w, const FloquetModel& m, std::optional<std::size_t> center = std::nullopt) {
  auto g = real_space_graph(w, m);
  return g.connected() && (!center || g.contains(*center));
}

/// Memoized per-interaction neighbour lists.
class NeighborCache {
 public:
  NeighborCache(const FloquetModel& m, floquet_graph::ApplyOptions opt) : m_(m), opt_(opt) {}

  const std::vector<Edge>& operator()(const FloquetState& s) {
    auto it = cache_.find(s);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(s, floquet_graph::apply_hamiltonian(s, m_, nullptr, opt_)).first->second;
  }

 private:
  const FloquetModel& m_;
  floquet_graph::ApplyOptions opt_;
  std::unordered_map<FloquetState, std::vector<Edge>, StateHash> cache_;
};

struct WalkOptions {
  bool simple = false;          // forbid revisiting states
  std::size_t cap = 1000000;    // maximum number of walks returned
  const std::unordered_set<FloquetState, StateHash>* restrict_to = nullptr;
};

inline double amplitude_scale(const FloquetModel& m) {
  double s = 0.0;
  for (const auto& t : m.H.terms) s = std::max(s, std::abs(t.amp));
  return s;
}

/// All length-k walks from a to b. Walks may revisit states unless `simple` is set.
inline std::vector<Walk> enumerate_walks(const FloquetModel& m, const FloquetState& a, const FloquetState& b, int k,
                                         const WalkOptions& opt = {}) {
  if (k < 1) throw DomainError("walk length must be >= 1");
  floquet_graph::ApplyOptions ao;
  ao.zero_tol = 1e-12 * std::max(amplitude_scale(m), 1.0);
  NeighborCache nb(m, ao);
  std::vector<Walk> out;
  Walk cur;
  cur.states.push_back(a);
  std::function<void()> dfs = [&] {
    const auto depth = static_cast<int>(cur.edges.size());
    if (depth == k) {
      if (cur.states.back() == b) {
        if (out.size() >= opt.cap) throw ResourceError("walk enumeration exceeded its cap", out.size());
        out.push_back(cur);
      }
      return;
    }
    // Copy: the cache may rehash while we recurse.
    auto edges = nb(cur.states.back());
    for (const auto& e : edges) {
      if (opt.restrict_to && !opt.restrict_to->count(e.to)) continue;
      if (opt.simple && std::find(cur.states.begin(), cur.states.end(), e.to) != cur.states.end() &&
          !(depth + 1 == k && e.to == b && a == b))
        continue;
      cur.states.push_back(e.to);
      cur.edges.push_back({e.interaction, e.amp});
      dfs();
      cur.states.pop_back();
      cur.edges.pop_back();
    }
  };
  dfs();
  return out;
}

inline std::vector<Walk> enumerate_walks(const FloquetSubspace& S, const FloquetState& a, const FloquetState& b, int k,
                                         WalkOptions opt = {}) {
  std::unordered_set<FloquetState, StateHash> members(S.states.begin(), S.states.end());
  if (!members.count(a) || !members.count(b)) throw DomainError("walk endpoints must lie in the subspace");
  opt.restrict_to = &members;
  return enumerate_walks(*S.model, a, b, k, opt);
}

// ---------------------------------------------------------------------------------------------
// Frequency conditions

using Symbolic = std::map<std::string, int>;

/// Bare quasi-energy as an integer combination of w:<id>, a:<id> symbols; each drive frequency
/// is replaced by the bare frequency of the qubit its axis tracks. Dressed labels count as g.
inline Symbolic symbolic_energy(const FloquetState& s, const FloquetModel& m) {
  Symbolic e;
  for (std::size_t q = 0; q < s.labels.size(); ++q) {
    int l = std::max<int>(s.labels[q], 0);
    if (l == 0) continue;
    e["w:" + m.H.ids[q]] += l;
    if (l > 1) e["a:" + m.H.ids[q]] += l * (l - 1) / 2;
  }
  for (std::size_t a = 0; a < s.bz.size(); ++a)
    if (s.bz[a]) e["w:" + m.H.axes[a].symbol] += s.bz[a];
  std::erase_if(e, [](const auto& kv) { return kv.second == 0; });
  return e;
}

struct FrequencyCondition {
  Symbolic coeffs;                // canonical: first nonzero coefficient positive
  std::vector<std::string> flip;  // bare-degenerate pairs: the qubits whose labels differ

  auto operator<=>(const FrequencyCondition&) const = default;
  bool degenerate() const { return coeffs.empty(); }

  std::string to_string() const {
    if (coeffs.empty()) {
      std::string s = "degenerate(";
      for (std::size_t i = 0; i < flip.size(); ++i) s += (i ? "," : "") + flip[i];
      return s + ")";
    }
    std::string s;
    for (const auto& [sym, c] : coeffs) {
      std::string name = (sym[0] == 'w' ? "w[" : "a[") + sym.substr(2) + "]";
      if (s.empty())
        s += c < 0 ? "-" : "";
      else
        s += c < 0 ? " - " : " + ";
      if (std::abs(c) != 1) s += std::to_string(std::abs(c)) + "*";
      s += name;
    }
    return s + " = 0";
  }
};

inline FrequencyCondition make_condition(Symbolic d, std::vector<std::string> flip = {}) {
  std::erase_if(d, [](const auto& kv) { return kv.second == 0; });
  if (!d.empty() && d.begin()->second < 0)
    for (auto& kv : d) kv.second = -kv.second;
  FrequencyCondition c;
  c.coeffs = std::move(d);
  if (c.coeffs.empty()) {
    std::sort(flip.begin(), flip.end());
    c.flip = std::move(flip);
  }
  return c;
}

inline std::vector<std::size_t> differing_qubits(const FloquetState& a, const FloquetState& b) {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < a.labels.size(); ++q)
    if (a.labels[q] != b.labels[q]) out.push_back(q);
  return out;
}

/// Condition under which a and b are bare-degenerate. A zero difference (e.g. |+> vs |->) is keyed
/// by the qubits whose labels differ.
inline FrequencyCondition condition_between(const FloquetState& a, const FloquetState& b, const FloquetModel& m) {
  Symbolic d = symbolic_energy(a, m);
  for (const auto& [k, v] : symbolic_energy(b, m)) d[k] -= v;
  std::vector<std::string> flip;
  for (auto q : differing_qubits(a, b)) flip.push_back(m.H.ids[q]);
  return make_condition(std::move(d), std::move(flip));
}

/// A condition can hold only if the qubit frequencies cancel; a net w count leaves a ~GHz offset.
inline bool feasible(const FrequencyCondition& c) {
  int sum = 0;
  for (const auto& [sym, v] : c.coeffs)
    if (sym[0] == 'w') sum += v;
  return sum == 0;
}

namespace detail {

struct Template {
  int type;
  std::vector<std::pair<const char*, int>> terms;  // role symbol -> coefficient
};

inline const std::vector<Template>& templates() {
  static const std::vector<Template> t = {
      {1, {{"wc", 1}, {"wt", -1}}},
      {2, {{"wc", 2}, {"wt", -2}, {"ac", 1}}},
      {3, {{"wc", 1}, {"wt", -1}, {"ac", 1}}},
      {3, {{"wt", 1}, {"wc", -1}, {"at", 1}}},
      {5, {{"wc", 1}, {"ws", -1}}},
      {6, {{"wc", 1}, {"ws", -1}, {"ac", 1}}},
      {6, {{"ws", 1}, {"wc", -1}, {"as", 1}}},
      {7, {{"wc", 2}, {"wt", -1}, {"ws", -1}, {"ac", 1}}},
      {8, {{"wc", 1}, {"wt", -1}, {"ac", -1}}},
      {9, {{"wc", 1}, {"wt", -1}, {"ac", 1}, {"at", -1}}},
      {10, {{"wc", 1}, {"wt", -1}, {"ac", 2}}},
      {11, {{"wc", 2}, {"wt", -2}, {"ac", 3}}},
      {12, {{"ws", 1}, {"wt", -1}}},
      {13, {{"ws", 1}, {"wt", -1}, {"as", 1}}},
      {13, {{"ws", 1}, {"wt", -1}, {"at", -1}}},
      {14, {{"wc", 2}, {"wt", -1}, {"ws", -1}, {"ac", 3}}},
      {15, {{"wc", 1}, {"ws", -1}, {"ac", 2}}},
  };
  return t;
}

}  // namespace detail

/// Collision type of a condition for the given role assignment, 0 when unclassified.
/// Several types coincide for equal anharmonicities only at the numeric level; matching here is
/// symbolic, so each condition maps to at most one template per role assignment.
inline int classify_condition(const FrequencyCondition& c, const std::string& control, const std::string& target,
                              const std::string& spectator = {}) {
  if (c.degenerate()) return 0;
  for (const auto& t : detail::templates()) {
    Symbolic s;
    bool ok = true;
    for (const auto& [role, v] : t.terms) {
      const std::string& who = role[1] == 'c' ? control : role[1] == 't' ? target : spectator;
      if (who.empty()) {
        ok = false;
        break;
      }
      s[std::string(role[0] == 'w' ? "w:" : "a:") + who] += v;
    }
    if (ok && make_condition(s).coeffs == c.coeffs) return t.type;
  }
  return 0;
}

/// Tries every CR pair of the schedule as (control, target) and every other qubit as spectator.
inline int classify_condition(const FrequencyCondition& c, const DeviceSpec& dev, const LatticeSchedule& sched) {
  for (const auto& [ctl, tgt] : sched.cr_pairs) {
    if (int t = classify_condition(c, ctl, tgt)) return t;
    for (const auto& q : dev.qubits)
      if (q.id != ctl && q.id != tgt)
        if (int t = classify_condition(c, ctl, tgt, q.id)) return t;
  }
  return 0;
}

// ---------------------------------------------------------------------------------------------
// Collision search (general, sparse, non-local)

struct CollisionRecord {
  FloquetState a, b;
  std::string label_a, label_b;
  std::vector<std::string> qubits;  // ids matching label positions
  std::vector<std::string> support;  // qubit ids the collision involves
  int order = 0;
  double delta = 0.0;  // rad/s, H_eff[aa] - H_eff[bb]
  cplx g;              // rad/s
  double theta = 0.0;
  bool in_cluster = false;
  int type = 0;
  FrequencyCondition condition;
};

/// Qubits whose operation-basis state changes between a and b. A pure zone translation is
/// attributed to the qubits whose tracked axes moved.
inline std::vector<std::string> pair_support(const FloquetState& a, const FloquetState& b, const FloquetModel& m) {
  std::vector<std::string> out;
  for (auto q : differing_qubits(a, b)) out.push_back(m.H.ids[q]);
  if (out.empty())
    for (std::size_t ax = 0; ax < a.bz.size(); ++ax)
      if (a.bz[ax] != b.bz[ax]) out.push_back(m.H.axes[ax].symbol);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Qubit subset sharing an entangling operation basis. `basis` columns give the operation states
/// over the 2^x bare computational configurations (first qubit most significant); empty keeps
/// the bare basis.
struct CollectiveNode {
  std::vector<std::string> qubits;
  Eigen::MatrixXcd basis;
};

struct SearchOptions {
  double deg_tol = perturbation::kDefaultDegTol;
  std::size_t cap = 0;
  std::optional<int> radius;                              // defaults to floor(3k/2)
  std::optional<std::vector<FloquetState>> seeds;         // defaults to the computational states
  std::vector<CollectiveNode> collective;                 // non-local bases
  unsigned jobs = 1;
  double merge_tol_hz = 1.0;
};

/// Device with schedule drives attached when it carries none of its own.
inline DeviceSpec driven_device(const DeviceSpec& dev, const LatticeSchedule& sched) {
  return dev.drives.empty() ? device_model::apply_schedule(dev, sched) : dev;
}

namespace detail {

inline std::string collective_label(const FloquetState& s, const FloquetModel& m,
                                    const std::vector<CollectiveNode>& groups) {
  std::vector<std::string> parts(s.labels.size());
  for (std::size_t q = 0; q < s.labels.size(); ++q) parts[q] = floquet_graph::label_name(s.labels[q]);
  for (const auto& g : groups) {
    if (g.basis.size() == 0) continue;
    int code = 0;
    bool comp = true;
    std::vector<std::size_t> idx;
    for (const auto& id : g.qubits) {
      auto q = static_cast<std::size_t>(std::find(m.H.ids.begin(), m.H.ids.end(), id) - m.H.ids.begin());
      if (q >= m.H.ids.size()) {
        comp = false;
        break;
      }
      idx.push_back(q);
      int l = s.labels[q];
      if (l > 1 || l < 0) comp = false;
      code = 2 * code + std::max(l, 0);
    }
    if (!comp) continue;
    parts[idx[0]] = "(psi" + std::to_string(code);
    for (std::size_t i = 1; i < idx.size(); ++i) parts[idx[i]] = "";
    parts[idx.back()] += ")";
  }
  std::string out = "|";
  for (auto& p : parts) out += p;
  out += ";";
  for (std::size_t i = 0; i < s.bz.size(); ++i) out += (i ? "," : "") + std::to_string(s.bz[i]);
  return out + ">";
}

/// Rotates each complete class of states (identical outside a group, group levels in {0,1}) into
/// the group's operation basis: H -> W^dag H W.
inline void apply_collective_basis(Eigen::MatrixXcd& H, const FloquetSubspace& S,
                                   const std::vector<CollectiveNode>& groups) {
  const auto& m = *S.model;
  std::unordered_map<FloquetState, std::size_t, StateHash> index;
  for (std::size_t i = 0; i < S.states.size(); ++i) index.emplace(S.states[i], i);
  for (const auto& g : groups) {
    if (g.basis.size() == 0) continue;
    std::vector<std::size_t> qs;
    for (const auto& id : g.qubits) {
      auto it = std::find(m.H.ids.begin(), m.H.ids.end(), id);
      if (it == m.H.ids.end()) throw DomainError("collective node qubit '" + id + "' is not in the sublattice");
      qs.push_back(static_cast<std::size_t>(it - m.H.ids.begin()));
    }
    const auto dim = static_cast<Eigen::Index>(1) << qs.size();
    if (g.basis.rows() != dim || g.basis.cols() != dim)
      throw DomainError("collective basis must be 2^x by 2^x");
    if (!(g.basis.adjoint() * g.basis).isIdentity(1e-10)) throw DomainError("collective basis is not unitary");
    std::set<std::size_t> done;
    Eigen::MatrixXcd W = Eigen::MatrixXcd::Identity(H.rows(), H.cols());
    for (std::size_t i = 0; i < S.states.size(); ++i) {
      if (done.count(i)) continue;
      const auto& s = S.states[i];
      bool comp = std::all_of(qs.begin(), qs.end(), [&](auto q) { return s.labels[q] == 0 || s.labels[q] == 1; });
      if (!comp) continue;
      std::vector<std::size_t> members;
      for (Eigen::Index c = 0; c < dim; ++c) {
        auto t = s;
        for (std::size_t b = 0; b < qs.size(); ++b)
          t.labels[qs[b]] = static_cast<std::int8_t>((c >> (qs.size() - 1 - b)) & 1);
        auto it = index.find(t);
        if (it == index.end()) break;
        members.push_back(it->second);
      }
      if (members.size() != static_cast<std::size_t>(dim)) continue;
      for (auto x : members) done.insert(x);
      for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c)
          W(static_cast<Eigen::Index>(members[r]), static_cast<Eigen::Index>(members[c])) = g.basis(r, c);
    }
    Eigen::MatrixXcd rotated = W.adjoint() * H * W;
    H = rotated;
  }
}

/// Representative of {a, b} modulo zone translation; `swapped` reports whether b leads.
inline std::pair<FloquetState, FloquetState> canonical_pair(const FloquetState& a, const FloquetState& b,
                                                            const FloquetModel& m, bool* swapped = nullptr) {
  auto shift = [](FloquetState s, const std::vector<int>& r) {
    for (std::size_t i = 0; i < s.bz.size(); ++i) s.bz[i] -= r[i];
    return s;
  };
  std::pair<FloquetState, FloquetState> best{shift(a, a.bz), shift(b, a.bz)};
  if (floquet_graph::is_computational(b, m)) {
    std::pair<FloquetState, FloquetState> alt{shift(b, b.bz), shift(a, b.bz)};
    if (alt < best) {
      best = alt;
      if (swapped) *swapped = true;
      return best;
    }
  }
  if (swapped) *swapped = false;
  return best;
}

/// Order-k search over one subspace of an already-driven device.
inline std::vector<CollisionRecord> analyze(const DeviceSpec& dev, const LatticeSchedule& sched, int k,
                                            double threshold, const SearchOptions& opt) {
  if (k < 1) throw DomainError("order must be >= 1");
  // Targets sharing a collective node take its basis instead of the +- basis.
  std::set<std::string> grouped;
  for (const auto& g : opt.collective)
    if (g.basis.size()) grouped.insert(g.qubits.begin(), g.qubits.end());
  LatticeSchedule basis_sched{sched.name, {}};
  for (const auto& p : sched.cr_pairs)
    if (dev.find(p.second) && !grouped.count(p.second)) basis_sched.cr_pairs.push_back(p);
  auto model = std::make_shared<const FloquetModel>(floquet_graph::make_model(dev, basis_sched, opt.merge_tol_hz));
  const auto& m = *model;
  auto seeds = opt.seeds ? *opt.seeds : floquet_graph::computational_states(m);
  int radius = opt.radius ? *opt.radius : (3 * k) / 2;
  auto S = floquet_graph::build_subspace(model, seeds, radius, opt.cap);
  Eigen::MatrixXcd H = S.matrix;
  apply_collective_basis(H, S, opt.collective);
  auto eff = perturbation::diagonalize_perturbative(H, k, opt.deg_tol);

  double noise = 1e-12 * std::max(amplitude_scale(m), 1.0);
  std::map<std::pair<FloquetState, FloquetState>, CollisionRecord> found;
  for (auto i : S.seeds) {
    for (std::size_t j = 0; j < S.states.size(); ++j) {
      if (j == i) continue;
      cplx g = eff.H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (std::abs(g) <= noise) continue;
      double delta = eff.detuning(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      bool cl = eff.in_cluster(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      double theta = perturbation::collision_angle(delta, g);
      if (theta < threshold && !cl) continue;
      bool flipped = false;
      auto key = canonical_pair(S.states[i], S.states[j], m, &flipped);
      if (found.count(key)) continue;
      CollisionRecord r;
      r.a = key.first;
      r.b = key.second;
      r.qubits = m.H.ids;
      r.label_a = collective_label(r.a, m, opt.collective);
      r.label_b = collective_label(r.b, m, opt.collective);
      r.order = k;
      r.delta = flipped ? -delta : delta;
      r.g = flipped ? std::conj(g) : g;
      r.theta = theta;
      r.in_cluster = cl;
      r.condition = condition_between(r.a, r.b, m);
      r.type = classify_condition(r.condition, dev, sched);
      r.support = pair_support(r.a, r.b, m);
      found.emplace(std::move(key), std::move(r));
    }
  }
  std::vector<CollisionRecord> out;
  for (auto& [k2, r] : found) out.push_back(std::move(r));
  return out;
}

/// Induced sub-device on a qubit set; keeps schedule pairs with either end inside.
inline DeviceSpec induced(const DeviceSpec& dev, const std::set<std::string>& keep) {
  DeviceSpec out;
  for (const auto& q : dev.qubits)
    if (keep.count(q.id)) out.qubits.push_back(q);
  for (const auto& c : dev.couplings)
    if (keep.count(c.qubit_a) && keep.count(c.qubit_b)) out.couplings.push_back(c);
  for (const auto& d : dev.drives)
    if (keep.count(d.qubit)) out.drives.push_back(d);
  for (const auto& [id, role] : dev.roles)
    if (keep.count(id)) out.roles[id] = role;
  return out;
}

inline LatticeSchedule restrict(const LatticeSchedule& s, const std::set<std::string>& keep) {
  LatticeSchedule out{s.name, {}};
  for (const auto& p : s.cr_pairs)
    if (keep.count(p.first) || keep.count(p.second)) out.cr_pairs.push_back(p);
  return out;
}

/// The sparse and non-local searches share this loop; without collective nodes every node is one qubit.
inline std::vector<CollisionRecord> sparse_core(const DeviceSpec& device, const LatticeSchedule& sched, int k,
                                                double threshold, const SearchOptions& opt) {
  auto dev = driven_device(device, sched);
  // Collective nodes over the reduced graph.
  std::vector<std::vector<std::string>> nodes;
  std::map<std::string, std::size_t> node_of;
  for (const auto& g : opt.collective) {
    for (const auto& id : g.qubits) {
      dev.index_of(id);
      if (node_of.count(id)) throw DomainError("qubit '" + id + "' belongs to two collective nodes");
      node_of[id] = nodes.size();
    }
    nodes.push_back(g.qubits);
  }
  for (const auto& q : dev.qubits)
    if (!node_of.count(q.id)) {
      node_of[q.id] = nodes.size();
      nodes.push_back({q.id});
    }
  std::vector<std::set<std::size_t>> adj(nodes.size());
  for (const auto& c : dev.couplings) {
    auto a = node_of[c.qubit_a], b = node_of[c.qubit_b];
    if (a != b) {
      adj[a].insert(b);
      adj[b].insert(a);
    }
  }
  // Node order follows the first member's position in the device.
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto x, auto y) { return dev.index_of(nodes[x][0]) < dev.index_of(nodes[y][0]); });
  const int radius = (3 * k) / 2;
  auto per_center = parallel_map(order.size(), opt.jobs, [&](std::size_t oi) {
    auto center = order[oi];
    std::vector<int> dist(nodes.size(), -1);
    std::vector<std::size_t> queue{center};
    dist[center] = 0;
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (auto v : adj[queue[h]])
        if (dist[v] < 0) {
          dist[v] = dist[queue[h]] + 1;
          queue.push_back(v);
        }
    std::set<std::string> keep;
    for (std::size_t n = 0; n < nodes.size(); ++n)
      if (dist[n] >= 0 && dist[n] <= radius) keep.insert(nodes[n].begin(), nodes[n].end());
    auto sub = induced(dev, keep);
    SearchOptions so = opt;
    so.collective.clear();
    for (const auto& g : opt.collective)
      if (std::all_of(g.qubits.begin(), g.qubits.end(), [&](auto& id) { return keep.count(id); }))
        so.collective.push_back(g);
    so.seeds.reset();
    auto recs = analyze(sub, restrict(sched, keep), k, threshold, so);
    std::set<std::string> mine(nodes[center].begin(), nodes[center].end());
    std::vector<CollisionRecord> out;
    for (auto& r : recs)
      if (std::any_of(r.support.begin(), r.support.end(), [&](auto& id) { return mine.count(id); }))
        out.push_back(std::move(r));
    return out;
  });
  // Center removal: a record already owned by an earlier center is not reported again.
  std::set<std::string> removed;
  std::vector<CollisionRecord> out;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    for (auto& r : per_center[oi])
      if (std::none_of(r.support.begin(), r.support.end(), [&](auto& id) { return removed.count(id); }))
        out.push_back(std::move(r));
    removed.insert(nodes[order[oi]].begin(), nodes[order[oi]].end());
  }
  return out;
}

}  // namespace detail

/// General search on the whole device: every computational state of the 0th zone against every
/// state within floor(3k/2) hops, after (k-1)th-order diagonalization.
inline std::vector<CollisionRecord> find_collisions_general(const DeviceSpec& device, const LatticeSchedule& sched,
                                                            int k, double threshold, const SearchOptions& opt = {}) {
  auto dev = driven_device(device, sched);
  std::size_t limit = floquet_graph::subspace_cap();
  if ((std::size_t{1} << std::min<std::size_t>(dev.qubits.size(), 62)) > limit)
    throw ResourceError("computational basis of " + std::to_string(dev.qubits.size()) +
                            " qubits exceeds the subspace cap; use the sparse search",
                        0);
  return detail::analyze(dev, sched, k, threshold, opt);
}

/// Sparse search: one radius-floor(3k/2) sublattice per center qubit.
inline std::vector<CollisionRecord> find_collisions_sparse(const DeviceSpec& device, const LatticeSchedule& sched,
                                                           int k, double threshold, const SearchOptions& opt = {}) {
  SearchOptions o = opt;
  o.collective.clear();
  return detail::sparse_core(device, sched, k, threshold, o);
}

/// Non-local search: qubits sharing a non-local basis form one collective node of the reduced graph.
inline std::vector<CollisionRecord> find_collisions_nonlocal(const DeviceSpec& device, const LatticeSchedule& sched,
                                                             const std::vector<CollectiveNode>& nodes, int k,
                                                             double threshold, SearchOptions opt = {}) {
  opt.collective = nodes;
  return detail::sparse_core(device, sched, k, threshold, opt);
}

// ---------------------------------------------------------------------------------------------
// Potential-collision census

struct CollisionCensus {
  std::string center;
  std::string schedule;
  int max_order = 0;
  std::vector<std::size_t> nF;  // index k-1
  std::vector<std::size_t> nf;
  std::vector<std::set<std::pair<FloquetState, FloquetState>>> pairs;
  std::vector<std::set<FrequencyCondition>> conditions;
};

struct CensusOptions {
  bool simple_walks = false;
};

/// Counts potential k-th order collisions around `center` on the radius-k sublattice.
/// A pair counts at order k when a length-k walk links a computational state of the 0th zone to
/// another state through interactions whose real-space graph is connected and holds the center,
/// and the bare energies can meet (the qubit frequencies cancel). Pairs are deduplicated modulo
/// zone translation; at order >= 2 a pure zone translate of the start state is not a new pair.
/// n_f counts distinct feasible conditions between any two states along the counted walks.
inline CollisionCensus census_potential(const DeviceSpec& device, const LatticeSchedule& sched,
                                        const std::string& center, int max_order, const CensusOptions& copt = {}) {
  CollisionCensus out;
  out.center = center;
  out.schedule = sched.name;
  out.max_order = std::max(max_order, 0);
  if (max_order <= 0) return out;
  device.index_of(center);
  auto driven = device_model::apply_schedule(device, sched);
  auto sub = device_model::extract_sublattice(driven, center, max_order);
  std::set<std::string> keep;
  for (const auto& q : sub.qubits) keep.insert(q.id);
  auto model = floquet_graph::make_model(sub, detail::restrict(sched, keep), 1.0, true);
  const auto& m = model;
  const std::size_t c = sub.index_of(center);

  floquet_graph::ApplyOptions ao;
  ao.include_detuning = false;
  ao.zero_tol = 1e-10 * std::max(amplitude_scale(m), 1.0);
  NeighborCache nb(m, ao);

  out.nF.assign(static_cast<std::size_t>(max_order), 0);
  out.nf.assign(static_cast<std::size_t>(max_order), 0);
  out.pairs.resize(static_cast<std::size_t>(max_order));
  out.conditions.resize(static_cast<std::size_t>(max_order));

  for (const auto& a : floquet_graph::computational_states(m)) {
    std::vector<FloquetState> path{a};
    std::vector<std::size_t> inter;
    std::function<void()> dfs = [&] {
      const int len = static_cast<int>(inter.size());
      if (len >= 1) {
        const auto& b = path.back();
        auto g = real_space_graph(inter, m);
        // A pure zone translate made by repeating one interaction only restates a lower order resonance.
        const bool repeated_translate = len >= 2 && b.labels == a.labels &&
                                        std::all_of(inter.begin(), inter.end(), [&](auto i) { return i == inter.front(); });
        bool ok = g.contains(c) && g.connected() && !(b == a) && !repeated_translate;
        if (ok) {
          auto cond = condition_between(a, b, m);
          if (feasible(cond)) {
            auto ord = static_cast<std::size_t>(len - 1);
            out.pairs[ord].insert(detail::canonical_pair(a, b, m));
            for (std::size_t x = 0; x < path.size(); ++x)
              for (std::size_t y = x + 1; y < path.size(); ++y) {
                if (path[x].labels == path[y].labels) continue;
                auto cc = condition_between(path[x], path[y], m);
                if (feasible(cc)) out.conditions[ord].insert(std::move(cc));
              }
          }
        }
      }
      if (len == max_order) return;
      auto edges = nb(path.back());
      for (const auto& e : edges) {
        if (copt.simple_walks && std::find(path.begin(), path.end(), e.to) != path.end()) continue;
        path.push_back(e.to);
        inter.push_back(e.interaction);
        dfs();
        path.pop_back();
        inter.pop_back();
      }
    };
    dfs();
  }
  for (int k = 0; k < max_order; ++k) {
    out.nF[static_cast<std::size_t>(k)] = out.pairs[static_cast<std::size_t>(k)].size();
    out.nf[static_cast<std::size_t>(k)] = out.conditions[static_cast<std::size_t>(k)].size();
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// CR-specific metrics

struct CrCoefficients {
  double omega_zx = 0.0, omega_ix = 0.0, delta_g = 0.0, delta_e = 0.0;  // rad/s
};

/// Reads Delta_{g+-} and Delta_{e+-} off H_eff for the computational states of the 0th zone
/// (every other qubit in its ground label) and inverts
///   Delta_g = W_t + W_IX + W_ZX,  Delta_e = W_t + W_IX - W_ZX.
inline CrCoefficients effective_cr_coefficients(const FloquetSubspace& S, const Eigen::MatrixXcd& H_eff,
                                                const std::string& control, const std::string& target,
                                                double rotary_amplitude = 0.0) {
  const auto& m = *S.model;
  auto find = [&](const std::string& id) {
    auto it = std::find(m.H.ids.begin(), m.H.ids.end(), id);
    if (it == m.H.ids.end()) throw DomainError("unknown qubit '" + id + "'");
    return static_cast<std::size_t>(it - m.H.ids.begin());
  };
  auto c = find(control), t = find(target);
  if (!floquet_graph::is_dressed(m, t)) throw DomainError("target '" + target + "' is not in the +- basis");
  if (floquet_graph::is_dressed(m, c)) throw DomainError("control '" + control + "' must be bare");
  FloquetState base{std::vector<std::int8_t>(m.n_qubits(), 0), std::vector<int>(m.n_axes(), 0)};
  for (std::size_t q = 0; q < m.n_qubits(); ++q)
    if (floquet_graph::is_dressed(m, q)) base.labels[q] = floquet_graph::kPlus;
  auto energy = [&](int cl, std::int8_t tl) {
    auto s = base;
    s.labels[c] = static_cast<std::int8_t>(cl);
    s.labels[t] = tl;
    auto i = S.index(s);
    if (!i) throw DomainError("state " + floquet_graph::to_string(s) + " missing from the subspace");
    return H_eff(static_cast<Eigen::Index>(*i), static_cast<Eigen::Index>(*i)).real();
  };
  CrCoefficients r;
  r.delta_g = energy(0, floquet_graph::kPlus) - energy(0, floquet_graph::kMinus);
  r.delta_e = energy(1, floquet_graph::kPlus) - energy(1, floquet_graph::kMinus);
  r.omega_zx = 0.5 * (r.delta_g - r.delta_e);
  r.omega_ix = 0.5 * (r.delta_g + r.delta_e) - rotary_amplitude;
  return r;
}

/// theta^(k) of a pair at search distance d, and |theta(d) - theta(d_ref)|.
inline double pair_angle(const DeviceSpec& dev, const FloquetState& a, const FloquetState& b, int k, int d,
                         double deg_tol = perturbation::kDefaultDegTol) {
  auto model = std::make_shared<const FloquetModel>(floquet_graph::make_model(dev));
  auto S = floquet_graph::build_subspace(model, floquet_graph::computational_states(*model), d);
  auto eff = perturbation::diagonalize_perturbative(S.matrix, k, deg_tol);
  auto ia = S.index(a), ib = S.index(b);
  if (!ia || !ib) return 0.0;
  auto i = static_cast<Eigen::Index>(*ia), j = static_cast<Eigen::Index>(*ib);
  cplx g = eff.H(i, j);
  double delta = eff.detuning(i, j);
  if (std::abs(g) == 0.0) return 0.0;
  return perturbation::collision_angle(delta, g);
}

inline double convergence_error(const DeviceSpec& dev, const FloquetState& a, const FloquetState& b, int k, int d,
                                int d_ref = 7, double deg_tol = perturbation::kDefaultDegTol) {
  if (d > d_ref) throw DomainError("search distance exceeds the reference distance");
  if (d == d_ref) return 0.0;
  return std::abs(pair_angle(dev, a, b, k, d, deg_tol) - pair_angle(dev, a, b, k, d_ref, deg_tol));
}

}  // namespace fcollide::collision_search
