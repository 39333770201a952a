#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "device_model.hpp"

namespace fcollide::floquet_graph {

using cplx = std::complex<double>;
using device_model::DeviceSpec;
using device_model::LatticeSchedule;

// Dressed labels of a CR target; levels >= 2 keep their bare index.
inline constexpr std::int8_t kPlus = -1;
inline constexpr std::int8_t kMinus = -2;

struct FloquetState {
  std::vector<std::int8_t> labels;
  std::vector<int> bz;

  bool operator==(const FloquetState&) const = default;
  auto operator<=>(const FloquetState&) const = default;
};

struct StateHash {
  std::size_t operator()(const FloquetState& s) const noexcept {
    std::size_t h = 1469598103934665603ull;
    auto mix = [&h](std::size_t v) { h = (h ^ v) * 1099511628211ull; };
    for (auto l : s.labels) mix(static_cast<std::size_t>(l + 7));
    mix(0xabcdef);
    for (auto n : s.bz) mix(static_cast<std::size_t>(n + 1000003));
    return h;
  }
};

/// One Brillouin-zone axis. `symbol` names the qubit whose bare frequency replaces the
/// drive frequency in symbolic frequency conditions.
struct Axis {
  double omega = 0.0;  // rad/s
  std::string symbol;
};

/// A physical interaction: one exchange coupling, one drive, or the static detuning of a
/// dressed pair (the part of the bare energy that mixes |+> and |->).
struct Interaction {
  enum class Kind { exchange, drive, detuning };
  Kind kind;
  std::vector<std::size_t> qubits;
};

/// Term of one Fourier component: exchange J (a+a^)(b+b^) at harmonic 0, or
/// (Omega/2) e^{+-i phi} (a+a^) at harmonic +-1 of its axis.
struct FourierTerm {
  std::size_t interaction;
  int qa = -1, qb = -1;
  cplx amp;
  int axis = -1;
  int harmonic = 0;
};

struct FourierHamiltonian {
  std::vector<std::string> ids;
  std::vector<double> omega;  // rad/s per qubit
  std::vector<double> alpha;  // rad/s per qubit
  std::vector<int> levels;
  std::vector<Axis> axes;
  std::vector<Interaction> interactions;
  std::vector<FourierTerm> terms;

  /// Harmonic vector -> indices into `terms`. The zero vector always exists (static part).
  std::map<std::vector<int>, std::vector<std::size_t>> components() const {
    std::map<std::vector<int>, std::vector<std::size_t>> out;
    out[std::vector<int>(axes.size(), 0)];
    for (std::size_t i = 0; i < terms.size(); ++i) {
      std::vector<int> n(axes.size(), 0);
      if (terms[i].axis >= 0) n[terms[i].axis] = terms[i].harmonic;
      out[n].push_back(i);
    }
    return out;
  }

  double level_energy(std::size_t q, int l) const { return omega[q] * l + alpha[q] * 0.5 * l * (l - 1); }
};

/// Decomposes H(t) into Fourier components. Drives within `merge_tol_hz` of each other share an
/// axis; with `merge_by_symbol` axes are keyed by tracked target instead (used for censuses,
/// where frequencies are symbolic).
inline FourierHamiltonian fourier_expand(const DeviceSpec& dev, double merge_tol_hz = 1.0,
                                         bool merge_by_symbol = false) {
  FourierHamiltonian H;
  for (const auto& q : dev.qubits) {
    H.ids.push_back(q.id);
    H.omega.push_back(angular(q.frequency));
    H.alpha.push_back(angular(q.anharmonicity));
    H.levels.push_back(q.levels);
  }
  for (const auto& c : dev.couplings) {
    std::size_t a = dev.index_of(c.qubit_a), b = dev.index_of(c.qubit_b);
    H.interactions.push_back({Interaction::Kind::exchange, {a, b}});
    FourierTerm t;
    t.interaction = H.interactions.size() - 1;
    t.qa = static_cast<int>(a);
    t.qb = static_cast<int>(b);
    t.amp = angular(c.strength);
    H.terms.push_back(t);
  }
  for (const auto& d : dev.drives) {
    std::string symbol = d.cr_target.empty() ? d.qubit : d.cr_target;
    int axis = -1;
    for (std::size_t m = 0; m < H.axes.size(); ++m) {
      bool same = merge_by_symbol ? H.axes[m].symbol == symbol
                                  : std::abs(ordinary(H.axes[m].omega) - d.frequency) <= merge_tol_hz;
      if (same) axis = static_cast<int>(m);
    }
    if (axis < 0) {
      H.axes.push_back({angular(d.frequency), symbol});
      axis = static_cast<int>(H.axes.size()) - 1;
    }
    std::size_t q = dev.index_of(d.qubit);
    H.interactions.push_back({Interaction::Kind::drive, {q}});
    for (int s : {+1, -1}) {
      FourierTerm t;
      t.interaction = H.interactions.size() - 1;
      t.qa = static_cast<int>(q);
      t.amp = 0.5 * angular(d.amplitude) * std::polar(1.0, s * d.phase);
      t.axis = axis;
      t.harmonic = s;
      H.terms.push_back(t);
    }
  }
  return H;
}

/// Operation basis: CR targets carry |+-;n> = (|g;n> +- |e;n-1>)/sqrt2 along their drive's axis.
struct OperationBasis {
  std::vector<int> dressed_axis;  // per qubit, -1 when bare
  std::vector<std::size_t> dressed_qubits;
};

/// Bundles the expansion and basis; axes for targets whose control lies outside the device are
/// appended to the Fourier axes so every dressed qubit has a Brillouin-zone direction.
struct FloquetModel {
  FourierHamiltonian H;
  OperationBasis basis;
  std::vector<std::string> symbols;  // w:<id> and a:<id> per qubit, then external axis symbols

  std::size_t n_qubits() const { return H.ids.size(); }
  std::size_t n_axes() const { return H.axes.size(); }
};

inline OperationBasis operation_basis(FourierHamiltonian& H, const DeviceSpec& dev, const LatticeSchedule& sched) {
  device_model::check_schedule(sched);
  OperationBasis b;
  b.dressed_axis.assign(dev.qubits.size(), -1);
  for (const auto& [c, t] : sched.cr_pairs) {
    auto ti = dev.find(t);
    if (!ti) continue;
    int axis = -1;
    for (std::size_t m = 0; m < H.axes.size(); ++m)
      if (H.axes[m].symbol == t) axis = static_cast<int>(m);
    if (axis < 0) {
      double f = dev.qubits[*ti].frequency;
      auto ci = dev.find(c);
      if (ci && dev.coupling(c, t)) f = device_model::dressed_frequency(dev, c, t);
      H.axes.push_back({angular(f), t});
      axis = static_cast<int>(H.axes.size()) - 1;
    }
    b.dressed_axis[*ti] = axis;
    b.dressed_qubits.push_back(*ti);
  }
  std::sort(b.dressed_qubits.begin(), b.dressed_qubits.end());
  for (auto q : b.dressed_qubits) {
    H.interactions.push_back({Interaction::Kind::detuning, {q}});
  }
  return b;
}

inline FloquetModel make_model(const DeviceSpec& dev, const LatticeSchedule& sched, double merge_tol_hz = 1.0,
                               bool merge_by_symbol = false) {
  FloquetModel m;
  m.H = fourier_expand(dev, merge_tol_hz, merge_by_symbol);
  m.basis = operation_basis(m.H, dev, sched);
  for (const auto& id : m.H.ids) {
    m.symbols.push_back("w:" + id);
    m.symbols.push_back("a:" + id);
  }
  for (const auto& ax : m.H.axes)
    if (std::find(m.H.ids.begin(), m.H.ids.end(), ax.symbol) == m.H.ids.end() &&
        std::find(m.symbols.begin(), m.symbols.end(), "w:" + ax.symbol) == m.symbols.end())
      m.symbols.push_back("w:" + ax.symbol);
  return m;
}

/// Model for the device's own drives; the basis follows its cr_control tones.
inline FloquetModel make_model(const DeviceSpec& dev, double merge_tol_hz = 1.0) {
  return make_model(dev, device_model::schedule_from_drives(dev), merge_tol_hz, false);
}

inline bool is_dressed(const FloquetModel& m, std::size_t q) { return m.basis.dressed_axis[q] >= 0; }

inline std::string label_name(std::int8_t l) {
  static const char* names = "gefhijklmnop";
  if (l == kPlus) return "+";
  if (l == kMinus) return "-";
  if (l >= 0 && l < 12) return std::string(1, names[l]);
  return std::to_string(l);
}

inline std::string to_string(const FloquetState& s) {
  std::string out = "|";
  for (auto l : s.labels) out += label_name(l);
  out += ";";
  for (std::size_t i = 0; i < s.bz.size(); ++i) out += (i ? "," : "") + std::to_string(s.bz[i]);
  return out + ">";
}

inline void check_state(const FloquetState& s, const FloquetModel& m) {
  if (s.labels.size() != m.n_qubits() || s.bz.size() != m.n_axes())
    throw DomainError("state shape does not match the model: " + to_string(s));
  for (std::size_t q = 0; q < s.labels.size(); ++q) {
    int l = s.labels[q];
    bool dressed = is_dressed(m, q);
    if (l >= m.H.levels[q] || (l < 0 && !dressed) || (dressed && (l == 0 || l == 1)) || l < kMinus)
      throw DomainError("invalid label '" + label_name(s.labels[q]) + "' on qubit " + m.H.ids[q]);
  }
}

/// Bare-product component: levels + harmonic vector with amplitude.
struct BareComponent {
  cplx coef;
  std::vector<std::int8_t> levels;
  std::vector<int> bz;
};

/// Expands a basis state over bare product states.
inline std::vector<BareComponent> expand(const FloquetState& s, const FloquetModel& m) {
  std::vector<BareComponent> out{{1.0, s.labels, s.bz}};
  const double r = std::sqrt(0.5);
  for (auto q : m.basis.dressed_qubits) {
    int l = s.labels[q];
    if (l != kPlus && l != kMinus) continue;
    int ax = m.basis.dressed_axis[q];
    double sign = l == kPlus ? 1.0 : -1.0;
    std::vector<BareComponent> next;
    next.reserve(out.size() * 2);
    for (auto& c : out) {
      BareComponent g = c, e = c;
      g.levels[q] = 0;
      g.coef *= r;
      e.levels[q] = 1;
      e.bz[ax] -= 1;
      e.coef *= sign * r;
      next.push_back(std::move(g));
      next.push_back(std::move(e));
    }
    out.swap(next);
  }
  return out;
}

/// Projects a bare product state onto the operation basis (inverse of expand).
template <class Sink>
inline void project(const BareComponent& b, const FloquetModel& m, Sink&& sink) {
  const double r = std::sqrt(0.5);
  std::vector<BareComponent> out{b};
  for (auto q : m.basis.dressed_qubits) {
    int l = b.levels[q];
    if (l > 1) continue;
    int ax = m.basis.dressed_axis[q];
    std::vector<BareComponent> next;
    next.reserve(out.size() * 2);
    for (auto& c : out) {
      BareComponent p = c, n = c;
      p.levels[q] = kPlus;
      n.levels[q] = kMinus;
      if (l == 0) {
        p.coef *= r;
        n.coef *= r;
      } else {
        p.bz[ax] += 1;
        n.bz[ax] += 1;
        p.coef *= r;
        n.coef *= -r;
      }
      next.push_back(std::move(p));
      next.push_back(std::move(n));
    }
    out.swap(next);
  }
  for (auto& c : out) sink(FloquetState{std::move(c.levels), std::move(c.bz)}, c.coef);
}

/// Bare quasi-energy n.w + sum of Duffing energies. A dressed pair is evaluated as the average of
/// its two bare branches, so the basis change keeps the static trace; this equals the |g;n>
/// branch value exactly when the tone sits on the bare target frequency.
inline double bare_quasi_energy(const FloquetState& s, const FloquetModel& m) {
  double e = 0.0;
  for (std::size_t q = 0; q < s.labels.size(); ++q) {
    int l = s.labels[q];
    if (l >= 0) {
      e += m.H.level_energy(q, l);
    } else {
      int ax = m.basis.dressed_axis[q];
      e += 0.5 * (m.H.level_energy(q, 1) - m.H.axes[ax].omega);
    }
  }
  for (std::size_t a = 0; a < s.bz.size(); ++a) e += s.bz[a] * m.H.axes[a].omega;
  return e;
}

inline double bare_energy(const BareComponent& b, const FloquetModel& m) {
  double e = 0.0;
  for (std::size_t q = 0; q < b.levels.size(); ++q) e += m.H.level_energy(q, b.levels[q]);
  for (std::size_t a = 0; a < b.bz.size(); ++a) e += b.bz[a] * m.H.axes[a].omega;
  return e;
}

/// Applies one Fourier term to a bare component; bosonic sqrt factors, no rotating-wave cut.
template <class Sink>
inline void apply_term(const FourierTerm& t, const BareComponent& b, const FloquetModel& m, Sink&& sink) {
  auto ladder = [&](int q, int dl, BareComponent& x) -> double {
    int l = x.levels[q], nl = l + dl;
    if (nl < 0 || nl >= m.H.levels[q]) return 0.0;
    x.levels[q] = static_cast<std::int8_t>(nl);
    return std::sqrt(static_cast<double>(std::max(l, nl)));
  };
  if (t.axis < 0) {
    for (int da : {+1, -1})
      for (int db : {+1, -1}) {
        BareComponent x = b;
        double fa = ladder(t.qa, da, x);
        if (fa == 0.0) continue;
        double fb = ladder(t.qb, db, x);
        if (fb == 0.0) continue;
        x.coef = b.coef * t.amp * fa * fb;
        sink(std::move(x));
      }
  } else {
    for (int da : {+1, -1}) {
      BareComponent x = b;
      double fa = ladder(t.qa, da, x);
      if (fa == 0.0) continue;
      // <n_a| H^{(n_a - n_b)} |n_b>: a harmonic-h term raises the zone index by h.
      x.bz[t.axis] += t.harmonic;
      x.coef = b.coef * t.amp * fa;
      sink(std::move(x));
    }
  }
}

/// Column of H for basis state `s`, split per interaction: entries (state', interaction, amp)
/// with amp = <state'|H|s>. The diagonal is returned under `diag`.
struct Edge {
  FloquetState to;
  std::size_t interaction;
  cplx amp;
};

struct ApplyOptions {
  bool include_detuning = true;  // static mixing of |+> and |-> (zero when tones sit on bare frequencies)
  double zero_tol = 0.0;         // absolute cut for structural zeros
  const std::vector<char>* interaction_mask = nullptr;
};

inline std::vector<Edge> apply_hamiltonian(const FloquetState& s, const FloquetModel& m, cplx* diag = nullptr,
                                           const ApplyOptions& opt = {}) {
  struct Acc {
    std::unordered_map<FloquetState, cplx, StateHash> amps;
  };
  std::vector<Acc> per(m.H.interactions.size());
  cplx self = 0.0;
  auto comps = expand(s, m);
  auto want = [&](std::size_t i) { return !opt.interaction_mask || (*opt.interaction_mask)[i]; };
  for (const auto& t : m.H.terms) {
    if (!want(t.interaction)) continue;
    auto& acc = per[t.interaction];
    for (const auto& c : comps)
      apply_term(t, c, m, [&](BareComponent&& x) {
        project(x, m, [&](FloquetState&& st, cplx a) { acc.amps[std::move(st)] += a; });
      });
  }
  // Static diagonal energy in the dressed basis: self energy plus +/- mixing on each dressed qubit.
  std::unordered_map<FloquetState, cplx, StateHash> stat;
  for (const auto& c : comps) {
    BareComponent x = c;
    x.coef = c.coef * bare_energy(c, m);
    project(x, m, [&](FloquetState&& st, cplx a) { stat[std::move(st)] += a; });
  }
  std::size_t first_detuning = m.H.interactions.size() - m.basis.dressed_qubits.size();
  for (auto& [st, a] : stat) {
    if (st == s) {
      self += a;
      continue;
    }
    if (!opt.include_detuning) continue;
    std::size_t which = 0, diffs = 0;
    for (std::size_t k = 0; k < m.basis.dressed_qubits.size(); ++k)
      if (st.labels[m.basis.dressed_qubits[k]] != s.labels[m.basis.dressed_qubits[k]]) {
        which = k;
        ++diffs;
      }
    if (diffs != 1 || !want(first_detuning + which)) continue;
    per[first_detuning + which].amps[st] += a;
  }
  std::vector<Edge> out;
  for (std::size_t i = 0; i < per.size(); ++i)
    for (auto& [st, a] : per[i].amps) {
      if (st == s) {
        self += a;
        continue;
      }
      if (std::abs(a) > opt.zero_tol) out.push_back({st, i, a});
    }
  if (diag) *diag = self;
  std::sort(out.begin(), out.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.to, x.interaction) < std::tie(y.to, y.interaction);
  });
  return out;
}

/// <a|H|b> in the operation basis (a != b). Zero when no Fourier component links them.
inline cplx coupling_element(const FloquetState& a, const FloquetState& b, const FloquetModel& m) {
  cplx sum = 0.0;
  for (const auto& e : apply_hamiltonian(b, m))
    if (e.to == a) sum += e.amp;
  return sum;
}

/// Computational states of the operation basis in zone `bz`: {+,-} on dressed qubits, {g,e} elsewhere.
inline std::vector<FloquetState> computational_states(const FloquetModel& m, std::vector<int> bz = {}) {
  if (bz.empty()) bz.assign(m.n_axes(), 0);
  std::vector<FloquetState> out{{std::vector<std::int8_t>(m.n_qubits(), 0), bz}};
  for (std::size_t q = 0; q < m.n_qubits(); ++q) {
    std::vector<FloquetState> next;
    for (auto& s : out)
      for (int k = 0; k < 2; ++k) {
        auto t = s;
        t.labels[q] = is_dressed(m, q) ? (k ? kMinus : kPlus) : static_cast<std::int8_t>(k);
        next.push_back(std::move(t));
      }
    out.swap(next);
  }
  return out;
}

inline bool is_computational(const FloquetState& s, const FloquetModel& m) {
  for (std::size_t q = 0; q < s.labels.size(); ++q) {
    int l = s.labels[q];
    if (is_dressed(m, q) ? l >= 0 : l > 1) return false;
  }
  return true;
}

inline std::size_t subspace_cap(std::size_t fallback = 6000) {
  if (const char* env = std::getenv("FCOLLIDE_MAX_SUBSPACE")) {
    char* end = nullptr;
    auto v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return fallback;
}

struct FloquetSubspace {
  std::shared_ptr<const FloquetModel> model;
  std::vector<FloquetState> states;
  std::vector<int> distance;  // hops from the nearest seed
  Eigen::MatrixXcd matrix;    // rad/s
  std::vector<std::size_t> seeds;
  int radius = 0;

  std::optional<std::size_t> index(const FloquetState& s) const {
    auto it = std::find(states.begin(), states.end(), s);
    if (it == states.end()) return std::nullopt;
    return static_cast<std::size_t>(it - states.begin());
  }
};

/// Breadth-first expansion from `seeds` along nonzero couplings, at most `radius` hops.
/// Entries below 1e-15 of the largest static scale count as structural zeros.
inline FloquetSubspace build_subspace(std::shared_ptr<const FloquetModel> model, const std::vector<FloquetState>& seeds,
                                      int radius, std::size_t cap = 0) {
  if (radius < 0) throw DomainError("radius must be >= 0");
  if (cap == 0) cap = subspace_cap();
  const auto& m = *model;
  double scale = 0.0;
  for (std::size_t q = 0; q < m.n_qubits(); ++q) scale = std::max({scale, std::abs(m.H.omega[q]), std::abs(m.H.alpha[q])});
  for (const auto& a : m.H.axes) scale = std::max(scale, std::abs(a.omega));
  ApplyOptions opt;
  opt.zero_tol = 1e-15 * std::max(scale, 1.0);

  FloquetSubspace S;
  S.model = model;
  S.radius = radius;
  std::unordered_map<FloquetState, std::size_t, StateHash> index;
  std::vector<std::vector<Edge>> columns;
  std::vector<cplx> diag;
  auto add = [&](const FloquetState& s, int d) {
    if (index.count(s)) return;
    if (S.states.size() >= cap)
      throw ResourceError("subspace exceeds cap of " + std::to_string(cap) + " states (FCOLLIDE_MAX_SUBSPACE)",
                          S.states.size());
    index.emplace(s, S.states.size());
    S.states.push_back(s);
    S.distance.push_back(d);
  };
  for (const auto& s : seeds) {
    check_state(s, m);
    if (!index.count(s)) S.seeds.push_back(S.states.size());
    add(s, 0);
  }
  for (std::size_t i = 0; i < S.states.size(); ++i) {
    cplx d;
    auto col = apply_hamiltonian(S.states[i], m, &d, opt);
    diag.push_back(d);
    if (S.distance[i] < radius)
      for (const auto& e : col) add(e.to, S.distance[i] + 1);
    columns.push_back(std::move(col));
  }
  const auto n = S.states.size();
  S.matrix = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    S.matrix(j, j) = diag[j].real();
    for (const auto& e : columns[j]) {
      auto it = index.find(e.to);
      if (it != index.end()) S.matrix(it->second, j) += e.amp;
    }
  }
  // Symmetrize away rounding so downstream Hermitian algebra is exact.
  Eigen::MatrixXcd h = 0.5 * (S.matrix + S.matrix.adjoint());
  S.matrix = h;
  return S;
}

inline FloquetSubspace build_subspace(const FloquetModel& model, const std::vector<FloquetState>& seeds, int radius,
                                      std::size_t cap = 0) {
  return build_subspace(std::make_shared<const FloquetModel>(model), seeds, radius, cap);
}

/// Structured-text dump: states with labels and zone vectors, then COO entries (rad/s).
inline void dump_subspace(std::ostream& os, const FloquetSubspace& S) {
  os << "{\"states\": [";
  for (std::size_t i = 0; i < S.states.size(); ++i) {
    os << (i ? ", " : "") << "{\"labels\": \"";
    for (auto l : S.states[i].labels) os << label_name(l);
    os << "\", \"bz\": [";
    for (std::size_t a = 0; a < S.states[i].bz.size(); ++a) os << (a ? ", " : "") << S.states[i].bz[a];
    os << "]}";
  }
  os << "],\n \"coo\": [";
  bool first = true;
  char buf[128];
  for (Eigen::Index j = 0; j < S.matrix.cols(); ++j)
    for (Eigen::Index i = 0; i < S.matrix.rows(); ++i) {
      auto v = S.matrix(i, j);
      if (v == cplx(0.0)) continue;
      std::snprintf(buf, sizeof buf, "[%ld, %ld, %.17g, %.17g]", static_cast<long>(i), static_cast<long>(j), v.real(),
                    v.imag());
      os << (first ? "" : ", ") << buf;
      first = false;
    }
  os << "]}\n";
}

}  // namespace fcollide::floquet_graph
