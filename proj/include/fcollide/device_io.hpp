#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "device_model.hpp"

namespace fcollide::device_model {

namespace detail {

inline double number_at(const nlohmann::json& j, const char* key, const std::string& where,
                        std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw DomainError(where + "." + key + ": missing field");
  }
  if (!j.at(key).is_number()) throw DomainError(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

inline std::string string_at(const nlohmann::json& j, const char* key, const std::string& where,
                             std::optional<std::string> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw DomainError(where + "." + key + ": missing field");
  }
  if (!j.at(key).is_string()) throw DomainError(where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline DriveRole parse_role(const std::string& s, const std::string& where) {
  if (s == "cr_control" || s == "cr") return DriveRole::cr_control;
  if (s == "rotary") return DriveRole::rotary;
  if (s == "generic") return DriveRole::generic;
  throw DomainError(where + ".role: unknown drive role '" + s + "'");
}

inline const char* role_name(DriveRole r) {
  switch (r) {
    case DriveRole::cr_control: return "cr_control";
    case DriveRole::rotary: return "rotary";
    default: return "generic";
  }
}

}  // namespace detail

/// Builds a device from its JSON form. Drive frequencies that are absent are derived:
/// CR tones track the dressed target frequency, rotary tones follow the CR tone on their target.
inline DeviceSpec device_from_json(const nlohmann::json& j, std::optional<int> levels_override = std::nullopt) {
  using detail::number_at;
  using detail::string_at;
  if (!j.is_object()) throw DomainError("device: top level must be an object");
  DeviceSpec dev;
  if (!j.contains("qubits") || !j["qubits"].is_array()) throw DomainError("device.qubits: missing array");
  for (std::size_t i = 0; i < j["qubits"].size(); ++i) {
    const auto& q = j["qubits"][i];
    std::string where = "qubits[" + std::to_string(i) + "]";
    QubitSpec s;
    s.id = string_at(q, "id", where);
    s.frequency = number_at(q, "frequency", where);
    s.anharmonicity = number_at(q, "anharmonicity", where, 0.0);
    s.levels = static_cast<int>(number_at(q, "levels", where, 5.0));
    if (levels_override) s.levels = *levels_override;
    dev.qubits.push_back(s);
  }
  if (j.contains("couplings"))
    for (std::size_t i = 0; i < j["couplings"].size(); ++i) {
      const auto& c = j["couplings"][i];
      std::string where = "couplings[" + std::to_string(i) + "]";
      dev.couplings.push_back({string_at(c, "a", where), string_at(c, "b", where), number_at(c, "strength", where)});
    }
  if (j.contains("drives"))
    for (std::size_t i = 0; i < j["drives"].size(); ++i) {
      const auto& d = j["drives"][i];
      std::string where = "drives[" + std::to_string(i) + "]";
      DriveSpec s;
      s.qubit = string_at(d, "qubit", where);
      s.amplitude = number_at(d, "amplitude", where);
      s.phase = number_at(d, "phase", where, 0.0);
      s.role = detail::parse_role(string_at(d, "role", where, std::string("generic")), where);
      s.cr_target = string_at(d, "cr_target", where, std::string());
      if (d.contains("frequency")) {
        s.frequency = number_at(d, "frequency", where);
      } else {
        if (s.cr_target.empty()) throw DomainError(where + ".frequency: required when no cr_target is given");
        s.tracks_dressed = true;
      }
      dev.drives.push_back(s);
    }
  if (j.contains("roles"))
    for (auto it = j["roles"].begin(); it != j["roles"].end(); ++it) dev.roles[it.key()] = it.value().get<std::string>();
  if (j.contains("schedules"))
    for (std::size_t i = 0; i < j["schedules"].size(); ++i) {
      const auto& s = j["schedules"][i];
      std::string where = "schedules[" + std::to_string(i) + "]";
      LatticeSchedule ls{string_at(s, "name", where), {}};
      for (const auto& p : s.at("cr_pairs")) ls.cr_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      dev.schedules.push_back(ls);
    }
  if (j.contains("centers"))
    for (auto it = j["centers"].begin(); it != j["centers"].end(); ++it) dev.centers[it.key()] = it.value().get<std::string>();
  validate(dev);
  resolve_drive_frequencies(dev);
  for (const auto& s : dev.schedules) check_schedule(s);
  return dev;
}

inline nlohmann::json device_to_json(const DeviceSpec& dev) {
  nlohmann::json j;
  j["qubits"] = nlohmann::json::array();
  for (const auto& q : dev.qubits)
    j["qubits"].push_back({{"id", q.id}, {"frequency", q.frequency}, {"anharmonicity", q.anharmonicity}, {"levels", q.levels}});
  j["couplings"] = nlohmann::json::array();
  for (const auto& c : dev.couplings) j["couplings"].push_back({{"a", c.qubit_a}, {"b", c.qubit_b}, {"strength", c.strength}});
  j["drives"] = nlohmann::json::array();
  for (const auto& d : dev.drives) {
    nlohmann::json e{{"qubit", d.qubit}, {"amplitude", d.amplitude}, {"phase", d.phase}, {"role", detail::role_name(d.role)}};
    if (!d.cr_target.empty()) e["cr_target"] = d.cr_target;
    if (!d.tracks_dressed) e["frequency"] = d.frequency;
    j["drives"].push_back(e);
  }
  j["roles"] = dev.roles;
  j["schedules"] = nlohmann::json::array();
  for (const auto& s : dev.schedules) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [c, t] : s.cr_pairs) pairs.push_back({c, t});
    j["schedules"].push_back({{"name", s.name}, {"cr_pairs", pairs}});
  }
  if (!dev.centers.empty()) j["centers"] = dev.centers;
  return j;
}

/// Reads a device file; JSON syntax errors are reported with their line number.
inline DeviceSpec load_device(const std::string& path, std::optional<int> levels_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open device file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto upto = std::min<std::size_t>(e.byte, text.size());
    auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw DomainError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  try {
    return device_from_json(j, levels_override);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(path + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(path + ": " + e.what());
  }
}

#ifndef FCOLLIDE_DATA_DIR
#define FCOLLIDE_DATA_DIR "data"
#endif

/// Heavy-hexagon lattice plus the named schedule. Only distance 3 ships, as a data fixture.
inline std::pair<DeviceSpec, LatticeSchedule> build_heavy_hexagon(int distance, const std::string& schedule,
                                                                  const std::string& data_dir = FCOLLIDE_DATA_DIR) {
  if (distance != 3) throw DomainError("heavy-hexagon distance " + std::to_string(distance) + " is not bundled");
  auto dev = load_device(data_dir + "/hhex_d3.json");
  return {dev, dev.schedule(schedule)};
}

}  // namespace fcollide::device_model
