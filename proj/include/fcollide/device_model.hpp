#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace fcollide::device_model {

struct QubitSpec {
  std::string id;
  double frequency = 0.0;      // Hz
  double anharmonicity = 0.0;  // Hz
  int levels = 5;
};

struct CouplingSpec {
  std::string qubit_a;
  std::string qubit_b;
  double strength = 0.0;  // Hz
};

enum class DriveRole { cr_control, rotary, generic };

/// A CW tone Omega cos(w_d t + phi) (a + a^dag) on `qubit`.
/// For cr_control drives `cr_target` names the qubit whose dressed frequency the tone tracks.
struct DriveSpec {
  std::string qubit;
  double amplitude = 0.0;  // Hz, may be negative
  double frequency = 0.0;  // Hz, resolved value
  double phase = 0.0;      // rad
  DriveRole role = DriveRole::generic;
  std::string cr_target;
  // When true the frequency is recomputed from dressed_frequency whenever the device changes.
  bool tracks_dressed = false;
};

struct LatticeSchedule {
  std::string name;
  std::vector<std::pair<std::string, std::string>> cr_pairs;  // (control, target)
};

struct DeviceSpec {
  std::vector<QubitSpec> qubits;
  std::vector<CouplingSpec> couplings;
  std::vector<DriveSpec> drives;
  std::map<std::string, std::string> roles;
  std::vector<LatticeSchedule> schedules;
  std::map<std::string, std::string> centers;  // named sublattice -> center qubit id

  std::optional<std::size_t> find(const std::string& id) const {
    for (std::size_t i = 0; i < qubits.size(); ++i)
      if (qubits[i].id == id) return i;
    return std::nullopt;
  }

  std::size_t index_of(const std::string& id) const {
    auto i = find(id);
    if (!i) throw DomainError("unknown qubit id '" + id + "'");
    return *i;
  }

  const QubitSpec& qubit(const std::string& id) const { return qubits[index_of(id)]; }

  const LatticeSchedule& schedule(const std::string& name) const {
    for (const auto& s : schedules)
      if (s.name == name) return s;
    throw DomainError("unknown schedule '" + name + "'");
  }

  const CouplingSpec* coupling(const std::string& a, const std::string& b) const {
    for (const auto& c : couplings)
      if ((c.qubit_a == a && c.qubit_b == b) || (c.qubit_a == b && c.qubit_b == a)) return &c;
    return nullptr;
  }
};

/// Adjacency over qubit indices built from the couplings.
inline std::vector<std::vector<std::size_t>> coupling_graph(const DeviceSpec& dev) {
  std::vector<std::vector<std::size_t>> adj(dev.qubits.size());
  for (const auto& c : dev.couplings) {
    auto a = dev.index_of(c.qubit_a), b = dev.index_of(c.qubit_b);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

/// Graph distances from `center`; unreachable qubits get -1.
inline std::vector<int> graph_distances(const DeviceSpec& dev, std::size_t center) {
  auto adj = coupling_graph(dev);
  std::vector<int> dist(dev.qubits.size(), -1);
  std::queue<std::size_t> q;
  dist[center] = 0;
  q.push(center);
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (auto v : adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

/// Checks structural invariants; throws DomainError on the first violation.
/// Non-negative anharmonicities are reported through `warnings` rather than rejected.
inline void validate(const DeviceSpec& dev, std::vector<std::string>* warnings = nullptr) {
  std::set<std::string> ids;
  for (const auto& q : dev.qubits) {
    if (!ids.insert(q.id).second) throw DomainError("duplicate qubit id '" + q.id + "'");
    if (q.levels < 2) throw DomainError("qubit '" + q.id + "': levels must be >= 2");
    if (!(q.frequency > 0)) throw DomainError("qubit '" + q.id + "': frequency must be > 0");
    if (q.anharmonicity >= 0 && warnings)
      warnings->push_back("qubit '" + q.id + "' has non-negative anharmonicity");
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& c : dev.couplings) {
    dev.index_of(c.qubit_a);
    dev.index_of(c.qubit_b);
    if (c.qubit_a == c.qubit_b) throw DomainError("self coupling on '" + c.qubit_a + "'");
    auto key = std::minmax(c.qubit_a, c.qubit_b);
    if (!seen.insert({key.first, key.second}).second)
      throw DomainError("duplicate coupling " + c.qubit_a + "-" + c.qubit_b);
  }
  for (const auto& d : dev.drives) {
    dev.index_of(d.qubit);
    if (!d.cr_target.empty()) dev.index_of(d.cr_target);
    if (!(d.frequency > 0) && !d.tracks_dressed)
      throw DomainError("drive on '" + d.qubit + "': frequency must be > 0");
  }
  for (const auto& [id, role] : dev.roles) dev.index_of(id);
}

/// Duffing ladder energy 2pi (f l + alpha l(l-1)/2), rad/s.
inline double duffing_level_energy(const QubitSpec& q, int l) {
  if (l < 0 || l >= q.levels)
    throw DomainError("level " + std::to_string(l) + " out of range for qubit '" + q.id + "'");
  return two_pi * (q.frequency * l + q.anharmonicity * 0.5 * l * (l - 1));
}

/// Perturbative dressed target frequency (Hz) used to tune a CR drive,
/// accurate to O(J^4): w_t - J^2/D + (a_c + a_t) J^2 / ((D + a_c)(D - a_t)), D = w_c - w_t.
inline double dressed_frequency(const DeviceSpec& dev, const std::string& control,
                                const std::string& target) {
  const auto& c = dev.qubit(control);
  const auto& t = dev.qubit(target);
  const auto* cp = dev.coupling(control, target);
  if (!cp) throw DomainError("no coupling between '" + control + "' and '" + target + "'");
  const double J = cp->strength;
  if (J == 0.0) return t.frequency;
  const double d = c.frequency - t.frequency;
  // Poles sit on frequency-collision lines; report which one.
  const double eps = 1e-9 * std::max({std::abs(c.frequency), std::abs(t.frequency), 1.0});
  if (std::abs(d) < eps) throw DomainError("dressed frequency pole: control-target detuning is zero (type 1)");
  if (std::abs(d + c.anharmonicity) < eps)
    throw DomainError("dressed frequency pole: detuning + control anharmonicity is zero (type 3)");
  if (std::abs(d - t.anharmonicity) < eps)
    throw DomainError("dressed frequency pole: detuning - target anharmonicity is zero (type 3)");
  return t.frequency - J * J / d +
         (c.anharmonicity + t.anharmonicity) * J * J / ((d + c.anharmonicity) * (d - t.anharmonicity));
}

/// Re-evaluates every drive that tracks a dressed target frequency.
/// Rotary and generic tracking tones copy the frequency of the CR tone on the same target,
/// so they fold onto its Brillouin-zone axis.
inline void resolve_drive_frequencies(DeviceSpec& dev) {
  for (auto& d : dev.drives)
    if (d.tracks_dressed && d.role == DriveRole::cr_control) {
      if (d.cr_target.empty()) throw DomainError("drive on '" + d.qubit + "' tracks no target");
      d.frequency = dressed_frequency(dev, d.qubit, d.cr_target);
    }
  for (auto& d : dev.drives)
    if (d.tracks_dressed && d.role != DriveRole::cr_control) {
      if (d.cr_target.empty()) throw DomainError("drive on '" + d.qubit + "' tracks no target");
      d.frequency = dev.qubit(d.cr_target).frequency;
      for (const auto& o : dev.drives)
        if (o.role == DriveRole::cr_control && o.cr_target == d.cr_target) d.frequency = o.frequency;
    }
}

/// CR pairs implied by the device's cr_control drives, in drive order.
inline LatticeSchedule schedule_from_drives(const DeviceSpec& dev) {
  LatticeSchedule s{"drives", {}};
  for (const auto& d : dev.drives)
    if (d.role == DriveRole::cr_control && !d.cr_target.empty()) s.cr_pairs.emplace_back(d.qubit, d.cr_target);
  return s;
}

inline void check_schedule(const LatticeSchedule& s) {
  std::set<std::string> used;
  for (const auto& [c, t] : s.cr_pairs) {
    if (!used.insert(c).second || !used.insert(t).second)
      throw DomainError("schedule " + s.name + ": qubit reused across CR pairs (" + c + "->" + t + ")");
  }
}

/// Returns a copy of `dev` whose drives are exactly the CR tones of `sched`.
/// Frequencies follow each target's dressed frequency when the pair is coupled, else its bare frequency.
inline DeviceSpec apply_schedule(DeviceSpec dev, const LatticeSchedule& sched, double amplitude_hz = 1.0e7) {
  check_schedule(sched);
  dev.drives.clear();
  for (const auto& [c, t] : sched.cr_pairs) {
    DriveSpec d;
    d.qubit = c;
    d.cr_target = t;
    d.amplitude = amplitude_hz;
    d.role = DriveRole::cr_control;
    d.tracks_dressed = true;
    dev.drives.push_back(d);
  }
  for (auto& d : dev.drives) {
    const auto* cp = dev.coupling(d.qubit, d.cr_target);
    d.frequency = cp ? dressed_frequency(dev, d.qubit, d.cr_target) : dev.qubit(d.cr_target).frequency;
  }
  return dev;
}

/// Induced sub-device on qubits within `radius` hops of `center`.
/// Drives survive when the driven qubit survives; schedule pairs survive when either end does,
/// since an outside control still leaves the inside target in its dressed basis.
inline DeviceSpec extract_sublattice(const DeviceSpec& dev, const std::string& center, int radius) {
  if (radius < 0) throw DomainError("radius must be >= 0");
  auto dist = graph_distances(dev, dev.index_of(center));
  std::set<std::string> keep;
  DeviceSpec out;
  for (std::size_t i = 0; i < dev.qubits.size(); ++i)
    if (dist[i] >= 0 && dist[i] <= radius) {
      out.qubits.push_back(dev.qubits[i]);
      keep.insert(dev.qubits[i].id);
    }
  for (const auto& c : dev.couplings)
    if (keep.count(c.qubit_a) && keep.count(c.qubit_b)) out.couplings.push_back(c);
  for (const auto& d : dev.drives)
    if (keep.count(d.qubit)) out.drives.push_back(d);
  for (const auto& [id, role] : dev.roles)
    if (keep.count(id)) out.roles[id] = role;
  for (const auto& s : dev.schedules) {
    LatticeSchedule ls{s.name, {}};
    for (const auto& p : s.cr_pairs)
      if (keep.count(p.first) || keep.count(p.second)) ls.cr_pairs.push_back(p);
    out.schedules.push_back(ls);
  }
  for (const auto& [name, id] : dev.centers)
    if (keep.count(id)) out.centers[name] = id;
  return out;
}

}  // namespace fcollide::device_model
