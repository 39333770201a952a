#include <gtest/gtest.h>

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include <fcollide/perturbation.hpp>

using namespace fcollide;
using namespace fcollide::perturbation;

namespace {

Matrix random_hermitian(std::mt19937& rng, int n, double diag_spread, double v) {
  std::normal_distribution<double> nd;
  Matrix H = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) H(i, i) = diag_spread * (i + 0.3 * nd(rng));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      H(i, j) = v * cplx(nd(rng), nd(rng));
      H(j, i) = std::conj(H(i, j));
    }
  return H;
}

// Exact eigenvalue that continues diagonal entry i: largest eigenvector weight on i.
Eigen::VectorXd continued_eigenvalues(const Matrix& H) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  Eigen::VectorXd out(H.rows());
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    Eigen::Index best;
    es.eigenvectors().row(i).cwiseAbs().maxCoeff(&best);
    out[i] = es.eigenvalues()[best];
  }
  return out;
}

const Matrix2 sx = (Matrix2() << 0, 1, 1, 0).finished();
const Matrix2 sz = (Matrix2() << 1, 0, 0, -1).finished();

}  // namespace

TEST(Perturbation, SplitClustersByTolerance) {
  Matrix H = Matrix::Zero(4, 4);
  H.diagonal() << 0.0, 5.0, 5.0 + 1e-3, 20.0;
  auto s = split(H, 1e-2);
  EXPECT_EQ(s.n_clusters, 3);
  EXPECT_TRUE(same_cluster(s, 1, 2));
  EXPECT_FALSE(same_cluster(s, 0, 1));
}

TEST(Perturbation, SuperopDRejectsInClusterSupport) {
  Matrix H = Matrix::Zero(2, 2);
  auto s = split(H, 1e-3);
  Matrix X = Matrix::Zero(2, 2);
  X(0, 1) = 1.0;
  EXPECT_THROW(superop_D(s, X), DomainError);
  EXPECT_NO_THROW(superop_D(s, superop_P(s, X)));
}

// Two levels: the order-k diagonal approaches the exact eigenvalue with error O(g^{k+1}).
TEST(Perturbation, TwoLevelExact) {
  const double Delta = 1.0;
  for (double g : {0.05, 0.02}) {
    Matrix H(2, 2);
    H << 0.0, g, g, Delta;
    double exact_low = 0.5 * Delta - std::sqrt(0.25 * Delta * Delta + g * g);
    double prev = 1.0;
    for (int k = 1; k <= 6; ++k) {
      auto eff = diagonalize_perturbative(H, k, 1e-6);
      double err = std::abs(eff.H(0, 0).real() - exact_low);
      EXPECT_LE(err, 4.0 * std::pow(g, k + 1) + 1e-15) << "k=" << k << " g=" << g;
      EXPECT_LE(err, prev + 1e-15);
      prev = err;
    }
  }
}

TEST(Perturbation, SecondOrderShiftIsTextbook) {
  std::mt19937 rng(7);
  Matrix H = random_hermitian(rng, 6, 1.0, 0.01);
  auto eff = diagonalize_perturbative(H, 2, 1e-6);
  for (int i = 0; i < 6; ++i) {
    double want = H(i, i).real();
    for (int m = 0; m < 6; ++m)
      if (m != i) want += std::norm(H(i, m)) / (H(i, i).real() - H(m, m).real());
    EXPECT_NEAR(eff.H(i, i).real(), want, 1e-12);
  }
}

// Degenerate block at second order: P V P + 1/2 sum_m V_im V_mj (1/(E_i - E_m) + 1/(E_j - E_m)).
TEST(Perturbation, DegenerateBlockMatchesSecondOrderFormula) {
  std::mt19937 rng(11);
  Matrix H = random_hermitian(rng, 7, 1.0, 0.01);
  H(4, 4) = H(3, 3) + 1e-9;
  auto eff = diagonalize_perturbative(H, 2, 1e-6);
  ASSERT_TRUE(eff.in_cluster(3, 4));
  for (int i : {3, 4})
    for (int j : {3, 4}) {
      cplx want = i == j ? H(i, i) : H(i, j);
      for (int m = 0; m < 7; ++m) {
        if (m == 3 || m == 4) continue;
        double ei = H(i, i).real(), ej = H(j, j).real(), em = H(m, m).real();
        want += 0.5 * H(i, m) * H(m, j) * (1.0 / (ei - em) + 1.0 / (ej - em));
      }
      EXPECT_NEAR(std::abs(eff.H(i, j) - want), 0.0, 1e-12) << i << "," << j;
    }
}

// Halving V must shrink the order-k eigenvalue error by 2^(k+1) and the leftover coupling by 2^k.
TEST(Perturbation, ErrorScalingAgainstDenseEigensolver) {
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  const int n = 10;
  Matrix K = Matrix::Zero(n, n), V = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) K(i, i) = i + 0.3 * nd(rng);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      V(i, j) = cplx(nd(rng), nd(rng));
      V(j, i) = std::conj(V(i, j));
    }
  for (int k = 1; k <= 4; ++k) {
    double err[2], off[2];
    for (int s = 0; s < 2; ++s) {
      Matrix H = K + (s ? 0.002 : 0.004) * V;
      auto exact = continued_eigenvalues(H);
      auto eff = diagonalize_perturbative(H, k, 1e-6);
      err[s] = (eff.H.diagonal().real() - exact).cwiseAbs().maxCoeff();
      Matrix o = eff.H;
      o.diagonal().setZero();
      off[s] = o.cwiseAbs().maxCoeff();
      EXPECT_LT((eff.H - eff.H.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_NEAR(std::log2(err[0] / err[1]), k + 1, 0.3) << "k=" << k;
    EXPECT_NEAR(std::log2(off[0] / off[1]), k, 0.05) << "k=" << k;
  }
}

TEST(Perturbation, OrderOneIsTheInputMatrix) {
  std::mt19937 rng(1);
  Matrix H = random_hermitian(rng, 5, 1.0, 0.05);
  auto eff = diagonalize_perturbative(H, 1, 1e-6);
  EXPECT_LT((eff.H - H).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(diagonalize_perturbative(H, 0), DomainError);
}

TEST(Perturbation, CollisionAngle) {
  EXPECT_NEAR(collision_angle(2.0, 1.0), std::atan(1.0), 1e-15);
  EXPECT_NEAR(collision_angle(-2.0, cplx(0, 1.0)), std::atan(1.0), 1e-15);
  EXPECT_NEAR(collision_angle(0.0, 1.0), 0.5 * std::numbers::pi, 1e-15);
  EXPECT_THROW(collision_angle(0.0, 0.0), DomainError);
}

TEST(Perturbation, GershgorinContainsExactShift) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    Matrix H = Matrix::Zero(5, 5);
    for (int i = 0; i < 5; ++i) H(i, i) = 3.0 * u(rng);
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) {
        H(i, j) = 0.3 * cplx(u(rng), u(rng));
        H(j, i) = std::conj(H(i, j));
      }
    std::vector<Eigen::Index> S{0, 1, 2, 3, 4};
    auto ex = exact_cluster_energies(H, S);
    auto b = gershgorin_bounds(H, S, 0, 1);
    double shift = std::abs((ex[0] - ex[1]) - (H(0, 0) - H(1, 1)).real());
    EXPECT_LE(shift, b.dr_max * (1 + 1e-12)) << "trial " << trial;
  }
}

TEST(Perturbation, ExactClusterEnergiesAreTheSpectrum) {
  std::mt19937 rng(23);
  Matrix H = random_hermitian(rng, 6, 1.0, 0.1);
  std::vector<Eigen::Index> S{0, 1, 2, 3, 4, 5};
  auto ex = exact_cluster_energies(H, S);
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  std::vector<double> a(ex.data(), ex.data() + 6), b(es.eigenvalues().data(), es.eigenvalues().data() + 6);
  std::sort(a.begin(), a.end());
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  EXPECT_THROW(exact_cluster_energies(Matrix::Identity(17, 17), std::vector<Eigen::Index>(17, 0)), ResourceError);
}

// R_Y(theta) R_Z(phi) R_Y(-theta) is a rotation by phi about (sin theta, 0, cos theta).
TEST(Perturbation, SubspacePropagatorMatchesMatrixExponential) {
  const cplx I(0, 1);
  for (double theta : {0.0, 0.3, 1.2})
    for (int m : {-1, 2}) {
      double r = 2.1e7, wd = 3.0e10, T = 1.7e-7;
      Matrix2 want = (Matrix2(-I * 0.5 * r * T * sz)).exp() *
                     (Matrix2(-I * (0.5 * m * wd * T * (std::cos(theta) * sz + std::sin(theta) * sx)))).exp();
      Matrix2 got = subspace_propagator(theta, r, m, wd, T);
      EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_TRUE((got.adjoint() * got).isIdentity(1e-12));
    }
}

TEST(Perturbation, IdealPropagatorValidity) {
  auto small = ideal_propagator(1.0e8, 1.0e6, 1, 3e10, 1e-7);
  EXPECT_TRUE(small.valid);
  auto big = ideal_propagator(1.0e6, 1.0e6, 1, 3e10, 1e-7);
  EXPECT_FALSE(big.valid);
  EXPECT_THROW(ideal_propagator(0.0, 1.0, 1, 3e10, 1e-7), DomainError);
}

TEST(Perturbation, FidelityLimits) {
  // Uncoupled: perfect.
  auto e = collision_fidelity(0.0, 0.0, 1, 3e10, 2e-7, 4);
  EXPECT_DOUBLE_EQ(e.f_ab, 1.0);
  EXPECT_DOUBLE_EQ(e.F, 1.0);
  // Exact degeneracy, T = pi/(2g): theta = pi/2 and dr = 2g leave cos((g + m w_d) T).
  double g = 2.0e6, wd = 3.0e10, T = std::numbers::pi / (2 * g);
  auto d = pair_fidelity(0.0, g, 1, wd, T, 2);
  EXPECT_NEAR(d.theta, 0.5 * std::numbers::pi, 1e-15);
  EXPECT_NEAR(d.f_ab, std::cos((g + wd) * T), 1e-9);
  EXPECT_NEAR(d.f, d.f_ab, 1e-15);
  EXPECT_THROW(collision_fidelity(0.1, 0.0, 1, wd, 0.0, 4), DomainError);
  EXPECT_THROW(collision_fidelity(0.1, 0.0, 1, wd, 1e-7, 1), DomainError);
}
