#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "collision_search.hpp"
#include "device_io.hpp"
#include "parallel.hpp"

namespace fcollide::cli {

using collision_search::CollisionRecord;
using device_model::DeviceSpec;
using device_model::LatticeSchedule;
using floquet_graph::FloquetState;
using cplx = std::complex<double>;

// ---------------------------------------------------------------------------------------------
// Parameter paths

/// Splits "qubit.c.frequency" on dots.
inline std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : path) {
    if (ch == '.') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::size_t drive_index(const DeviceSpec& dev, const std::string& s, const std::string& path) {
  std::size_t pos = 0;
  unsigned long i = 0;
  try {
    i = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || i >= dev.drives.size()) throw DomainError("parameter '" + path + "': no drive '" + s + "'");
  return i;
}

/// Writes one swept value (Hz, or rad for phases). Accepted paths:
///   qubit.<id>.frequency | qubit.<id>.anharmonicity
///   coupling.<a>.<b>
///   drive.<n>.amplitude | drive.<n>.frequency | drive.<n>.phase
///   detuning.<a>.<b>      (moves qubit a so that w_a - w_b equals the value)
/// Derived drive frequencies are re-resolved afterwards.
inline void set_parameter(DeviceSpec& dev, const std::string& path, double value) {
  auto p = split_path(path);
  auto bad = [&] { return DomainError("unknown parameter path '" + path + "'"); };
  if (p.size() != 3) throw bad();
  if (p[0] == "qubit") {
    auto i = dev.find(p[1]);
    if (!i) throw DomainError("parameter '" + path + "': unknown qubit '" + p[1] + "'");
    if (p[2] == "frequency")
      dev.qubits[*i].frequency = value;
    else if (p[2] == "anharmonicity")
      dev.qubits[*i].anharmonicity = value;
    else
      throw bad();
  } else if (p[0] == "coupling") {
    bool hit = false;
    for (auto& c : dev.couplings)
      if ((c.qubit_a == p[1] && c.qubit_b == p[2]) || (c.qubit_a == p[2] && c.qubit_b == p[1])) {
        c.strength = value;
        hit = true;
      }
    if (!hit) throw DomainError("parameter '" + path + "': no such coupling");
  } else if (p[0] == "drive") {
    auto& d = dev.drives[drive_index(dev, p[1], path)];
    if (p[2] == "amplitude") {
      d.amplitude = value;
    } else if (p[2] == "frequency") {
      d.frequency = value;
      d.tracks_dressed = false;
    } else if (p[2] == "phase") {
      d.phase = value;
    } else {
      throw bad();
    }
  } else if (p[0] == "detuning") {
    auto a = dev.find(p[1]), b = dev.find(p[2]);
    if (!a || !b) throw DomainError("parameter '" + path + "': unknown qubit");
    dev.qubits[*a].frequency = dev.qubits[*b].frequency + value;
  } else {
    throw bad();
  }
  device_model::resolve_drive_frequencies(dev);
}

/// Validates a path against the device without changing it.
inline void check_parameter(const DeviceSpec& dev, const std::string& path) {
  auto copy = dev;
  auto p = split_path(path);
  double probe = 0.0;
  if (p.size() == 3 && p[0] == "qubit" && copy.find(p[1])) probe = copy.qubit(p[1]).frequency;
  try {
    set_parameter(copy, path, p[0] == "detuning" ? 1.0e9 : probe);
  } catch (const DomainError& e) {
    // Pole errors from the dressed-frequency rule are point errors, not path errors.
    if (std::string(e.what()).find("pole") == std::string::npos) throw;
  }
}

// ---------------------------------------------------------------------------------------------
// Single-point analysis

struct PointOptions {
  double threshold = 0.0;
  double deg_tol = perturbation::kDefaultDegTol;
  unsigned jobs = 1;
};

/// True when the general search fits under the subspace cap.
inline bool fits_general(const DeviceSpec& dev) {
  return (std::size_t{1} << std::min<std::size_t>(dev.qubits.size(), 62)) <= floquet_graph::subspace_cap();
}

/// Order-k records, picking the general or sparse search by system size.
inline std::vector<CollisionRecord> search(const DeviceSpec& dev, const LatticeSchedule& sched, int k,
                                           const PointOptions& o) {
  collision_search::SearchOptions so;
  so.deg_tol = o.deg_tol;
  so.jobs = o.jobs;
  if (fits_general(dev)) return collision_search::find_collisions_general(dev, sched, k, o.threshold, so);
  return collision_search::find_collisions_sparse(dev, sched, k, o.threshold, so);
}

/// +- partners of the same dressed qubits share a diagonal by construction of the basis. Until a
/// perturbative splitting appears they carry no angle; a small but real splitting, or any other
/// degenerate pair, is a collision.
inline bool resolved(const CollisionRecord& r, double deg_tol) {
  if (!r.in_cluster || std::abs(r.delta) > 1e-6 * deg_tol || r.a.bz != r.b.bz) return true;
  auto pm = [](std::int8_t l) { return l == floquet_graph::kPlus || l == floquet_graph::kMinus; };
  for (std::size_t q = 0; q < r.a.labels.size(); ++q)
    if (r.a.labels[q] != r.b.labels[q] && !(pm(r.a.labels[q]) && pm(r.b.labels[q]))) return true;
  return false;
}

inline std::optional<CollisionRecord> strongest(const std::vector<CollisionRecord>& recs, double deg_tol) {
  std::optional<CollisionRecord> best;
  for (const auto& r : recs)
    if (resolved(r, deg_tol) && (!best || r.theta > best->theta)) best = r;
  return best;
}

// ---------------------------------------------------------------------------------------------
// Sweeps

struct SweepAxis {
  std::string path;
  double start = 0.0, stop = 0.0;
  int count = 0;

  double value(int i) const { return count == 1 ? start : start + (stop - start) * i / (count - 1); }
};

struct SweepSpec {
  SweepAxis axis1;
  std::optional<SweepAxis> axis2;
  int order = 1;  // rows for orders 1..order
  PointOptions point;
};

struct SweepRow {
  double axis1 = 0.0;
  std::optional<double> axis2;
  int order = 0;
  std::optional<CollisionRecord> best;  // empty when nothing couples
  std::string error;
};

inline void check_sweep(const DeviceSpec& dev, const SweepSpec& s) {
  if (s.order < 1) throw DomainError("order must be >= 1");
  for (const auto* a : {&s.axis1, s.axis2 ? &*s.axis2 : nullptr}) {
    if (!a) continue;
    if (a->count < 2) throw DomainError("sweep axis '" + a->path + "' needs at least 2 points");
    check_parameter(dev, a->path);
  }
}

/// Grid is row-major with axis 1 outer, endpoints inclusive. A failing grid point leaves an
/// error row for every order and the sweep carries on.
inline std::vector<SweepRow> run_sweep(const DeviceSpec& dev, const LatticeSchedule& sched, const SweepSpec& s) {
  check_sweep(dev, s);
  const int n1 = s.axis1.count, n2 = s.axis2 ? s.axis2->count : 1;
  PointOptions inner = s.point;
  inner.jobs = 1;
  auto points = parallel_map(static_cast<std::size_t>(n1 * n2), s.point.jobs, [&](std::size_t idx) {
    const int i = static_cast<int>(idx) / n2, j = static_cast<int>(idx) % n2;
    std::vector<SweepRow> rows;
    SweepRow base;
    base.axis1 = s.axis1.value(i);
    if (s.axis2) base.axis2 = s.axis2->value(j);
    try {
      auto d = dev;
      set_parameter(d, s.axis1.path, base.axis1);
      if (s.axis2) set_parameter(d, s.axis2->path, *base.axis2);
      for (int k = 1; k <= s.order; ++k) {
        auto row = base;
        row.order = k;
        row.best = strongest(search(d, sched, k, inner), s.point.deg_tol);
        rows.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      rows.clear();
      for (int k = 1; k <= s.order; ++k) {
        auto row = base;
        row.order = k;
        row.error = e.what();
        rows.push_back(std::move(row));
      }
    }
    return rows;
  });
  std::vector<SweepRow> out;
  for (auto& p : points)
    for (auto& r : p) out.push_back(std::move(r));
  return out;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline constexpr const char* kCsvHeader = "axis1,axis2,order,theta_max,state_a,state_b,delta_hz,g_abs_hz,condition_type";

/// One line per (grid point, order). Error rows keep the numeric columns empty and carry the
/// message in the last column.
inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << format_double(r.axis1) << ',' << (r.axis2 ? format_double(*r.axis2) : "") << ',' << r.order << ',';
    if (!r.error.empty()) {
      os << ",,,,," << csv_quote("error: " + r.error) << '\n';
    } else if (!r.best) {
      os << "0,,,,,0\n";
    } else {
      const auto& b = *r.best;
      os << format_double(b.theta) << ',' << csv_quote(b.label_a) << ',' << csv_quote(b.label_b) << ','
         << format_double(ordinary(b.delta)) << ',' << format_double(ordinary(std::abs(b.g))) << ',' << b.type
         << '\n';
    }
  }
}

// ---------------------------------------------------------------------------------------------
// Reports

/// FNV-1a over the canonical device JSON; stable across runs and platforms.
inline std::string device_hash(const DeviceSpec& dev) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : device_model::device_to_json(dev).dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json record_json(const CollisionRecord& r) {
  return {{"state_a", r.label_a},
          {"state_b", r.label_b},
          {"order", r.order},
          {"theta", r.theta},
          {"delta_hz", ordinary(r.delta)},
          {"g_abs_hz", ordinary(std::abs(r.g))},
          {"in_cluster", r.in_cluster},
          {"type", r.type},
          {"condition", r.condition.to_string()},
          {"support", r.support}};
}

struct Analysis {
  nlohmann::json report;
  bool collisions = false;
};

/// Records for orders 1..k. A record counts as a collision when its angle reaches the threshold
/// and the pair is resolved at that order.
inline Analysis analyze_device(const DeviceSpec& device, const LatticeSchedule& sched, int k,
                               const PointOptions& o) {
  if (k < 1) throw DomainError("order must be >= 1");
  auto t0 = std::chrono::steady_clock::now();
  auto dev = collision_search::driven_device(device, sched);
  Analysis a;
  nlohmann::json meta{{"device_hash", device_hash(dev)},
                      {"order", k},
                      {"threshold", o.threshold},
                      {"deg_tol_hz", ordinary(o.deg_tol)},
                      {"search", fits_general(dev) ? "general" : "sparse"}};
  nlohmann::json basis = nlohmann::json::array();
  for (const auto& [c, t] : sched.cr_pairs) basis.push_back(t);
  meta["dressed_targets"] = basis;
  nlohmann::json recs = nlohmann::json::array();
  for (int ord = 1; ord <= k; ++ord)
    for (const auto& r : search(dev, sched, ord, o)) {
      if (!resolved(r, o.deg_tol)) continue;
      bool hit = r.theta >= o.threshold;
      if (!hit) continue;
      a.collisions = true;
      recs.push_back(record_json(r));
    }
  a.report = {{"metadata", meta}, {"records", recs}};
  a.report["timings"] = {
      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return a;
}

inline nlohmann::json census_json(const collision_search::CollisionCensus& c) {
  return {{"center", c.center}, {"schedule", c.schedule}, {"max_order", c.max_order}, {"nF", c.nF}, {"nf", c.nf}};
}

struct CensusCell {
  std::string sublattice;
  collision_search::CollisionCensus census;
};

/// Every (named center x schedule) cell, centers in name order, schedules in file order.
inline std::vector<CensusCell> census_table(const DeviceSpec& dev, int max_order, unsigned jobs) {
  if (dev.centers.empty()) throw DomainError("lattice file names no centers");
  if (dev.schedules.empty()) throw DomainError("lattice file has no schedules");
  std::vector<std::pair<std::string, const LatticeSchedule*>> cells;
  for (const auto& [name, id] : dev.centers)
    for (const auto& s : dev.schedules) cells.emplace_back(name, &s);
  auto res = parallel_map(cells.size(), jobs, [&](std::size_t i) {
    return CensusCell{cells[i].first,
                      collision_search::census_potential(dev, *cells[i].second, dev.centers.at(cells[i].first), max_order)};
  });
  return res;
}

/// Rows "<sublattice> n_F^(k)" / "n_f^(k)" with one column per schedule.
inline void print_census_table(std::ostream& os, const DeviceSpec& dev, const std::vector<CensusCell>& cells) {
  os << "sublattice,count";
  for (const auto& s : dev.schedules) os << ',' << s.name;
  os << '\n';
  for (const auto& [name, id] : dev.centers) {
    std::vector<const collision_search::CollisionCensus*> row;
    for (const auto& c : cells)
      if (c.sublattice == name) row.push_back(&c.census);
    if (row.empty()) continue;
    const int K = row.front()->max_order;
    for (int which = 0; which < 2; ++which)
      for (int k = 0; k < K; ++k) {
        os << name << ',' << (which == 0 ? "nF" : "nf") << k + 1;
        for (const auto* c : row) os << ',' << (which == 0 ? c->nF : c->nf)[static_cast<std::size_t>(k)];
        os << '\n';
      }
  }
}

// ---------------------------------------------------------------------------------------------
// Fidelity

/// "g+;0" or "|g+;0>": one label character per qubit in device order, then zone indices.
inline FloquetState parse_state(const std::string& text, const floquet_graph::FloquetModel& m) {
  std::string s = text;
  if (!s.empty() && s.front() == '|') s.erase(0, 1);
  if (!s.empty() && s.back() == '>') s.pop_back();
  auto semi = s.find(';');
  std::string labels = s.substr(0, semi);
  FloquetState st;
  static const std::string names = "gefhijklmnop";
  for (char c : labels) {
    if (c == '+')
      st.labels.push_back(floquet_graph::kPlus);
    else if (c == '-')
      st.labels.push_back(floquet_graph::kMinus);
    else if (auto p = names.find(c); p != std::string::npos)
      st.labels.push_back(static_cast<std::int8_t>(p));
    else
      throw DomainError("state '" + text + "': unknown label '" + std::string(1, c) + "'");
  }
  if (semi != std::string::npos) {
    std::stringstream zs(s.substr(semi + 1));
    std::string item;
    while (std::getline(zs, item, ',')) {
      try {
        st.bz.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw DomainError("state '" + text + "': bad zone index '" + item + "'");
      }
    }
  }
  if (st.bz.empty()) st.bz.assign(m.n_axes(), 0);
  floquet_graph::check_state(st, m);
  return st;
}

struct FidelityReport {
  perturbation::FidelityEstimate estimate;
  double delta = 0.0;  // rad/s
  cplx g;
  bool in_cluster = false;
  std::optional<perturbation::GershgorinBound> gershgorin;
  std::optional<double> exact_shift;  // rad/s, exact detuning change within the cluster
};

/// Pair report at order k: angle, splitting, f_AB bound and F for gate time T (s) and
/// dimension D, plus the Gershgorin worst case when the pair shares a cluster.
inline FidelityReport pair_report(const DeviceSpec& device, const LatticeSchedule& sched, const std::string& a_text,
                                  const std::string& b_text, int k, double T, int D,
                                  double deg_tol = perturbation::kDefaultDegTol) {
  auto dev = collision_search::driven_device(device, sched);
  auto model = std::make_shared<const floquet_graph::FloquetModel>(floquet_graph::make_model(dev, sched));
  auto a = parse_state(a_text, *model), b = parse_state(b_text, *model);
  auto S = floquet_graph::build_subspace(model, {a, b}, (3 * k) / 2);
  auto eff = perturbation::diagonalize_perturbative(S.matrix, k, deg_tol);
  auto i = static_cast<Eigen::Index>(*S.index(a)), j = static_cast<Eigen::Index>(*S.index(b));
  FidelityReport r;
  r.delta = eff.detuning(i, j);
  r.g = eff.H(i, j);
  r.in_cluster = eff.in_cluster(i, j);
  // Zone phase of b relative to a folds all axes into one effective m * w_d.
  double phase_rate = 0.0;
  for (std::size_t ax = 0; ax < a.bz.size(); ++ax) phase_rate += (b.bz[ax] - a.bz[ax]) * model->H.axes[ax].omega;
  if (r.delta == 0.0 && std::abs(r.g) == 0.0)
    r.estimate = perturbation::collision_fidelity(0.0, 0.0, 1, phase_rate, T, D);
  else
    r.estimate = perturbation::pair_fidelity(r.delta, r.g, 1, phase_rate, T, D);
  if (r.in_cluster) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index x = 0; x < eff.H.rows(); ++x)
      if (eff.in_cluster(i, x)) members.push_back(x);
    r.gershgorin = perturbation::gershgorin_bounds(eff.H, members, i, j);
    if (members.size() <= 16) {
      auto ex = perturbation::exact_cluster_energies(eff.H, members);
      auto pos = [&](Eigen::Index x) {
        return static_cast<Eigen::Index>(std::find(members.begin(), members.end(), x) - members.begin());
      };
      r.exact_shift = std::abs((ex[pos(i)] - ex[pos(j)]) - r.delta);
    }
  }
  return r;
}

inline nlohmann::json fidelity_json(const FidelityReport& r) {
  nlohmann::json j{{"theta", r.estimate.theta},
                   {"r_hz", ordinary(r.estimate.r)},
                   {"dr_hz", ordinary(r.estimate.dr)},
                   {"delta_hz", ordinary(r.delta)},
                   {"g_abs_hz", ordinary(std::abs(r.g))},
                   {"f_ab", r.estimate.f_ab},
                   {"f", r.estimate.f},
                   {"F", r.estimate.F},
                   {"in_cluster", r.in_cluster}};
  if (r.gershgorin) {
    j["gershgorin"] = {{"dr_max_hz", ordinary(r.gershgorin->dr_max)}, {"theta_max", r.gershgorin->theta_max}};
    if (r.exact_shift) j["gershgorin"]["exact_shift_hz"] = ordinary(*r.exact_shift);
  }
  return j;
}

}  // namespace fcollide::cli
