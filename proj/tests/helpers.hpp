#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include <fcollide/device_model.hpp>

namespace testing_helpers {

using fcollide::device_model::DeviceSpec;
using fcollide::device_model::DriveRole;
using fcollide::device_model::DriveSpec;

/// Two transmons, control c at w_t + detuning, target t, CR tone on c tracking t.
inline DeviceSpec cr_pair(double detuning_hz, double J_hz = 3.8e6, double omega_hz = 30e6, int levels = 5,
                          double alpha_hz = -330e6) {
  DeviceSpec d;
  d.qubits = {{"c", 5e9 + detuning_hz, alpha_hz, levels}, {"t", 5e9, alpha_hz, levels}};
  d.couplings = {{"c", "t", J_hz}};
  DriveSpec dr;
  dr.qubit = "c";
  dr.amplitude = omega_hz;
  dr.role = DriveRole::cr_control;
  dr.cr_target = "t";
  dr.tracks_dressed = true;
  d.drives = {dr};
  fcollide::device_model::resolve_drive_frequencies(d);
  return d;
}

/// Static Hamiltonian (rad/s) of the undriven device on the full product space, qubit 0 most significant.
inline Eigen::MatrixXd static_hamiltonian(const DeviceSpec& dev) {
  const auto n = dev.qubits.size();
  std::vector<int> dims;
  int total = 1;
  for (const auto& q : dev.qubits) {
    dims.push_back(q.levels);
    total *= q.levels;
  }
  auto digits = [&](int idx) {
    std::vector<int> l(n);
    for (int q = static_cast<int>(n) - 1; q >= 0; --q) {
      l[q] = idx % dims[q];
      idx /= dims[q];
    }
    return l;
  };
  auto index = [&](const std::vector<int>& l) {
    int idx = 0;
    for (std::size_t q = 0; q < n; ++q) idx = idx * dims[q] + l[q];
    return idx;
  };
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(total, total);
  for (int s = 0; s < total; ++s) {
    auto l = digits(s);
    for (std::size_t q = 0; q < n; ++q) H(s, s) += fcollide::device_model::duffing_level_energy(dev.qubits[q], l[q]);
    for (const auto& c : dev.couplings) {
      auto a = dev.index_of(c.qubit_a), b = dev.index_of(c.qubit_b);
      for (int da : {-1, 1})
        for (int db : {-1, 1}) {
          auto m = l;
          m[a] += da;
          m[b] += db;
          if (m[a] < 0 || m[b] < 0 || m[a] >= dims[a] || m[b] >= dims[b]) continue;
          H(index(m), s) += fcollide::two_pi * c.strength * std::sqrt(std::max(l[a], m[a])) *
                            std::sqrt(std::max(l[b], m[b]));
        }
    }
  }
  return H;
}

/// Eigenvalue whose eigenvector overlaps most with the bare product state `levels`.
inline double dressed_level(const DeviceSpec& dev, const std::vector<int>& levels) {
  auto H = static_hamiltonian(dev);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  int idx = 0;
  for (std::size_t q = 0; q < levels.size(); ++q) idx = idx * dev.qubits[q].levels + levels[q];
  Eigen::Index best;
  es.eigenvectors().row(idx).cwiseAbs().maxCoeff(&best);
  return es.eigenvalues()[best];
}

}  // namespace testing_helpers
