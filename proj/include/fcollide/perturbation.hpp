#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "common.hpp"

namespace fcollide::perturbation {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Matrix2 = Eigen::Matrix2cd;

inline constexpr double kDefaultDegTol = 2.0 * 3.14159265358979323846 * 1.0e4;  // rad/s

/// H = K + V with K = diag(H); indices grouped into quasi-degenerate clusters of K.
struct SpectralSplit {
  Eigen::VectorXd kappa;
  Matrix V;
  std::vector<int> cluster;  // cluster id per index
  int n_clusters = 0;
  double tol = kDefaultDegTol;
};

/// Single-linkage clustering of the diagonal: neighbours closer than `tol` share a cluster.
inline SpectralSplit split(const Matrix& H, double tol = kDefaultDegTol) {
  const auto n = H.rows();
  SpectralSplit s;
  s.tol = tol;
  s.kappa = H.diagonal().real();
  s.V = H;
  s.V.diagonal().setZero();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s.kappa[a] < s.kappa[b]; });
  s.cluster.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || s.kappa[order[i]] - s.kappa[order[i - 1]] > tol) ++s.n_clusters;
    s.cluster[static_cast<std::size_t>(order[i])] = s.n_clusters - 1;
  }
  return s;
}

inline bool same_cluster(const SpectralSplit& s, Eigen::Index i, Eigen::Index j) {
  return s.cluster[static_cast<std::size_t>(i)] == s.cluster[static_cast<std::size_t>(j)];
}

/// P(X): removes every block internal to a cluster.
inline Matrix superop_P(const SpectralSplit& s, const Matrix& X) {
  Matrix out = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (same_cluster(s, i, j)) out(i, j) = 0.0;
  return out;
}

/// D(X): X_nm / (k_n - k_m) between clusters. Support inside a cluster violates the contract.
inline Matrix superop_D(const SpectralSplit& s, const Matrix& X) {
  Matrix out = Matrix::Zero(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (X(i, j) == cplx(0.0)) continue;
      if (same_cluster(s, i, j))
        throw DomainError("superop_D: nonzero element inside a quasi-degenerate cluster at (" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
      out(i, j) = X(i, j) / (s.kappa[i] - s.kappa[j]);
    }
  return out;
}

struct EffectiveHamiltonian {
  int order = 0;
  Matrix H;                    // sum of H^(0..k)
  std::vector<Matrix> G;       // G_1 .. G_{k-1}
  std::vector<Matrix> terms;   // H^(0) .. H^(k)
  std::vector<int> cluster;    // pairs sharing a cluster were never divided by D

  double detuning(Eigen::Index i, Eigen::Index j) const { return (H(i, i) - H(j, j)).real(); }
  cplx coupling(Eigen::Index i, Eigen::Index j) const { return H(i, j); }
  bool in_cluster(Eigen::Index i, Eigen::Index j) const {
    return cluster[static_cast<std::size_t>(i)] == cluster[static_cast<std::size_t>(j)];
  }
};

/// Order-k generalized perturbative diagonalization. Computes G_1..G_{k-1} sequentially and
/// returns sum_{i<=k} H^(i); the last term keeps its off-diagonal part, which carries the
/// order-k residual couplings. Diagonal entries are accurate to O(V^{k+1}).
///
/// Recursion, with Y in {K, V} and A_Y[0][0] = Y, A_Y[j][s] = sum_n [G_n, A_Y[j-1][s-n]]:
///   H^(i) = sum_{j=1..i} A_K[j][i]/j! + sum_{j=0..i-1} A_V[j][i-1]/j!.
inline EffectiveHamiltonian diagonalize_perturbative(const Matrix& H, int k, double tol = kDefaultDegTol) {
  if (k < 1) throw DomainError("perturbation order must be >= 1");
  const auto n = H.rows();
  auto s = split(H, tol);
  Matrix K = Matrix::Zero(n, n);
  K.diagonal() = s.kappa.cast<cplx>();
  const Matrix Zero = Matrix::Zero(n, n);

  std::vector<Matrix> G(static_cast<std::size_t>(k + 1), Zero);  // G[i], index 0 unused
  // A[j][s]; sized (k+1) x (k+1).
  auto table = [&](const Matrix& Y) {
    std::vector<std::vector<Matrix>> A(static_cast<std::size_t>(k + 1),
                                       std::vector<Matrix>(static_cast<std::size_t>(k + 1), Zero));
    A[0][0] = Y;
    return A;
  };
  auto AK = table(K);
  auto AV = table(s.V);
  auto fill = [&](std::vector<std::vector<Matrix>>& A, int j, int sidx) {
    Matrix acc = Zero;
    for (int m = 1; m <= sidx; ++m) {
      const Matrix& inner = A[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(sidx - m)];
      const Matrix& g = G[static_cast<std::size_t>(m)];
      if (g.isZero(0.0) || inner.isZero(0.0)) continue;
      acc += g * inner - inner * g;
    }
    A[static_cast<std::size_t>(j)][static_cast<std::size_t>(sidx)] = acc;
  };

  EffectiveHamiltonian out;
  out.order = k;
  out.cluster = s.cluster;
  out.terms.push_back(K);
  double fact = 1.0;
  std::vector<double> inv_fact(static_cast<std::size_t>(k + 1), 1.0);
  for (int j = 1; j <= k; ++j) {
    fact /= j;
    inv_fact[static_cast<std::size_t>(j)] = fact;
  }

  for (int i = 1; i <= k; ++i) {
    // G_i is still zero here, so this evaluates X_i.
    for (int j = 1; j <= i; ++j) fill(AK, j, i);
    for (int j = 1; j <= i - 1; ++j) fill(AV, j, i - 1);
    Matrix Xi = Zero;
    for (int j = 1; j <= i; ++j) Xi += inv_fact[static_cast<std::size_t>(j)] * AK[j][i];
    for (int j = 0; j <= i - 1; ++j) Xi += inv_fact[static_cast<std::size_t>(j)] * AV[j][i - 1];
    if (i < k) {
      Matrix Gi = superop_D(s, superop_P(s, Xi));
      G[static_cast<std::size_t>(i)] = Gi;
      Matrix comm = Gi * K - K * Gi;
      AK[1][i] += comm;
      Xi += comm;
      out.G.push_back(Gi);
    }
    out.terms.push_back(Xi);
  }
  out.H = Zero;
  for (const auto& t : out.terms) out.H += t;
  Matrix herm = 0.5 * (out.H + out.H.adjoint());
  out.H = herm;
  return out;
}

/// theta = arctan|2g/Delta| in [0, pi/2].
inline double collision_angle(double delta, cplx g) {
  if (delta == 0.0 && std::abs(g) == 0.0)
    throw DomainError("collision angle undefined: states exactly degenerate and uncoupled");
  if (delta == 0.0) return 0.5 * 3.14159265358979323846;
  return std::atan(2.0 * std::abs(g) / std::abs(delta));
}

struct GershgorinBound {
  double dr_max = 0.0;
  double theta_max = 0.0;
};

/// Gershgorin bound on the detuning shift of (i, j) within cluster S of H_eff.
inline GershgorinBound gershgorin_bounds(const Matrix& H, const std::vector<Eigen::Index>& S, Eigen::Index i,
                                         Eigen::Index j) {
  GershgorinBound b;
  for (auto k : S) {
    if (k != i) b.dr_max += std::abs(H(i, k));
    if (k != j) b.dr_max += std::abs(H(j, k));
  }
  double delta = (H(i, i) - H(j, j)).real();
  b.theta_max = delta == 0.0 ? 0.5 * 3.14159265358979323846 : std::atan(std::abs(b.dr_max / delta));
  return b;
}

/// Exact eigenvalues of a small cluster, each assigned to the basis state it overlaps most
/// (maximum-weight matching). Clusters above 16 states are rejected.
inline Eigen::VectorXd exact_cluster_energies(const Matrix& H, const std::vector<Eigen::Index>& S) {
  const auto n = static_cast<Eigen::Index>(S.size());
  if (n > 16) throw ResourceError("exact cluster diagonalization is limited to 16 states", S.size());
  Matrix sub(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = H(S[a], S[b]);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sub);
  Eigen::MatrixXd w = es.eigenvectors().cwiseAbs2();  // w(state, eigen)
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  if (n <= 8) {
    double best_w = -1.0;
    do {
      double t = 0.0;
      for (Eigen::Index a = 0; a < n; ++a) t += w(a, perm[static_cast<std::size_t>(a)]);
      if (t > best_w + 1e-15) {
        best_w = t;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    // Greedy on the largest remaining overlap.
    std::vector<char> ru(static_cast<std::size_t>(n), 0), cu(static_cast<std::size_t>(n), 0);
    for (Eigen::Index step = 0; step < n; ++step) {
      double bw = -1.0;
      Eigen::Index ba = 0, bb = 0;
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
          if (!ru[a] && !cu[b] && w(a, b) > bw) {
            bw = w(a, b);
            ba = a;
            bb = b;
          }
      ru[ba] = cu[bb] = 1;
      best[static_cast<std::size_t>(ba)] = static_cast<int>(bb);
    }
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index a = 0; a < n; ++a) out[a] = es.eigenvalues()[best[static_cast<std::size_t>(a)]];
  return out;
}

inline Matrix2 rz(double phi) {
  Matrix2 m = Matrix2::Zero();
  m(0, 0) = std::polar(1.0, -0.5 * phi);
  m(1, 1) = std::polar(1.0, 0.5 * phi);
  return m;
}

inline Matrix2 ry(double theta) {
  Matrix2 m;
  double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  m << c, -s, s, c;
  return m;
}

/// U_AB(T;0) = R_Z(rT) R_Y(theta) R_Z(m w_d T) R_Y(-theta).
inline Matrix2 subspace_propagator(double theta, double r, int m, double omega_d, double T) {
  if (T < 0) throw DomainError("gate time must be >= 0");
  return rz(r * T) * ry(theta) * rz(m * omega_d * T) * ry(-theta);
}

struct IdealPropagator {
  Matrix2 V;
  bool valid = true;  // false outside the linear regime |2g/Delta| < 1
};

/// V_AB(T;0) = R_Z(v0) [[v1, v3], [v3, v2]], linearized in 2g/Delta.
inline IdealPropagator ideal_propagator(double delta, cplx g, int m, double omega_d, double T) {
  if (delta == 0.0) throw DomainError("ideal propagator undefined at zero detuning");
  double x = 2.0 * std::abs(g) / delta;
  cplx ph = std::polar(1.0, m * omega_d * T);
  double v0 = delta * T * (1.0 + 0.5 * x * x);
  Matrix2 core;
  core << 1.0 + ph * x * x, (1.0 - ph) * x, (1.0 - ph) * x, ph + x * x;
  return {rz(v0) * core, std::abs(x) < 1.0};
}

struct FidelityEstimate {
  double theta = 0.0, r = 0.0, dr = 0.0;
  int m = 0;
  double omega_d = 0.0, T = 0.0;
  int D = 2;
  double f_ab = 1.0;  // lower bound on the subspace overlap
  double f = 1.0;
  double F = 1.0;
};

/// f_AB >= cos^2(theta/2) cos(dr T/2) + sin^2(theta/2) cos((dr/2 + m w_d) T),
/// f = (D-2)/D + 2 f_AB / D, F = |f|^2.
inline FidelityEstimate collision_fidelity(double theta, double dr, int m, double omega_d, double T, int D) {
  if (D < 2) throw DomainError("dimension must be >= 2");
  if (!(T > 0)) throw DomainError("gate time must be > 0");
  FidelityEstimate e;
  e.theta = theta;
  e.dr = dr;
  e.m = m;
  e.omega_d = omega_d;
  e.T = T;
  e.D = D;
  double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  e.f_ab = c * c * std::cos(0.5 * dr * T) + s * s * std::cos((0.5 * dr + m * omega_d) * T);
  e.f = (D - 2.0) / D + 2.0 * e.f_ab / D;
  e.F = std::clamp(e.f * e.f, 0.0, 1.0);
  return e;
}

/// Fidelity estimate from a pair's detuning and coupling: r = sqrt(D^2 + 4|g|^2), dr = r - |Delta|.
inline FidelityEstimate pair_fidelity(double delta, cplx g, int m, double omega_d, double T, int D) {
  double theta = collision_angle(delta, g);
  double r = std::sqrt(delta * delta + 4.0 * std::norm(g));
  auto e = collision_fidelity(theta, r - std::abs(delta), m, omega_d, T, D);
  e.r = r;
  return e;
}

}  // namespace fcollide::perturbation
