#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "core/dynamics.hpp"
#include "core/model.hpp"
#include "core/rng.hpp"

using namespace paramprune;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

VectorXd rand_vec(SplitMix& rng, int n, double lo, double hi) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

// Potential energy from forward kinematics only; written independently of the
// dynamics implementation so the gravity torques have an outside reference.
double potential_oracle(const MultibodyModel& m, const VectorXd& q) {
  Eigen::Matrix3d Rw = Eigen::Matrix3d::Identity();
  Vector3d pw = Vector3d::Zero();
  double V = 0.0;
  for (size_t i = 0; i < m.joints.size(); ++i) {
    Transform t = mdh_transform(m.joints[i], q(m.joints[i].coordinate_index));
    pw = pw + Rw * t.p;
    Rw = Rw * t.R;
    const InertialParams& b = m.bodies[i];
    Vector3d d(b.d[0], b.d[1], b.d[2]);
    V -= m.gravity.dot(b.m * pw + Rw * d);
  }
  return V;
}

}  // namespace

TEST_CASE("serial idm is zero at rest without gravity") {
  MultibodyModel m = build_puma560();
  m.gravity.setZero();
  VectorXd z = VectorXd::Zero(6);
  VectorXd tau = idm(m, z, z, z, m.phi_full());
  CHECK(tau.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("idm is linear in the parameters") {
  MultibodyModel m = build_puma560();
  SplitMix rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd z = rand_vec(rng, 6, -M_PI, M_PI);
    VectorXd dz = rand_vec(rng, 6, -3, 3);
    VectorXd ddz = rand_vec(rng, 6, -3, 3);
    VectorXd p1 = rand_vec(rng, m.n_params(), -2, 2);
    VectorXd p2 = rand_vec(rng, m.n_params(), -2, 2);
    double a = rng.uniform(-3, 3);
    VectorXd lhs = idm(m, z, dz, ddz, a * p1 + p2);
    VectorXd rhs = a * idm(m, z, dz, ddz, p1) + idm(m, z, dz, ddz, p2);
    double scale = rhs.norm() + 1.0;
    CHECK((lhs - rhs).norm() / scale < 1e-11);
  }
}

TEST_CASE("idm scales with the parameter vector") {
  MultibodyModel m = build_puma560();
  SplitMix rng(12);
  VectorXd z = rand_vec(rng, 6, -M_PI, M_PI);
  VectorXd dz = rand_vec(rng, 6, -2, 2);
  VectorXd ddz = rand_vec(rng, 6, -2, 2);
  VectorXd t1 = idm(m, z, dz, ddz, m.phi_full());
  VectorXd t2 = idm(m, z, dz, ddz, 2.0 * m.phi_full());
  CHECK((t2 - 2.0 * t1).norm() < 1e-10 * t1.norm());
}

TEST_CASE("gravity torques match the finite-difference potential oracle") {
  MultibodyModel m = build_puma560();
  SplitMix rng(13);
  VectorXd zero = VectorXd::Zero(6);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd z = trial == 0 ? zero : rand_vec(rng, 6, -M_PI, M_PI);
    VectorXd tau = idm(m, z, zero, zero, m.phi_full());
    const double h = 1e-6;
    for (int j = 0; j < 6; ++j) {
      VectorXd zp = z, zm = z;
      zp(j) += h;
      zm(j) -= h;
      double fd = (potential_oracle(m, zp) - potential_oracle(m, zm)) / (2 * h);
      CHECK(std::abs(tau(j) - fd) < 1e-8 * (tau.norm() + 1.0));
    }
  }
}

TEST_CASE("regressor reproduces idm by linearity") {
  MultibodyModel m = build_puma560();
  SplitMix rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd z = rand_vec(rng, 6, -M_PI, M_PI);
    VectorXd dz = rand_vec(rng, 6, -3, 3);
    VectorXd ddz = rand_vec(rng, 6, -3, 3);
    MatrixXd K = regressor(m, z, dz, ddz);
    CHECK(K.rows() == 6);
    CHECK(K.cols() == 49);
    VectorXd tau = idm(m, z, dz, ddz, m.phi_full());
    CHECK((K * m.phi_full() - tau).norm() < 1e-12 * (tau.norm() + 1.0));
  }
}

TEST_CASE("filtered slots have identically zero columns") {
  MultibodyModel m = build_puma560();
  std::vector<bool> kept(m.n_slots(), false);
  for (int s : m.param_slots) kept[s] = true;
  SplitMix rng(15);
  double wmax = 0.0, dropped_max = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd z = rand_vec(rng, 6, -M_PI, M_PI);
    VectorXd dz = rand_vec(rng, 6, -3, 3);
    VectorXd ddz = rand_vec(rng, 6, -3, 3);
    VectorXd raw = VectorXd::Zero(m.n_slots());
    VectorXd tau(6);
    for (int s = 0; s < m.n_slots(); ++s) {
      raw(s) = 1.0;
      open_chain_idm_kernel(m, z.data(), dz.data(), ddz.data(), raw.data(), tau.data());
      raw(s) = 0.0;
      double c = tau.lpNorm<Eigen::Infinity>();
      wmax = std::max(wmax, c);
      if (!kept[s]) dropped_max = std::max(dropped_max, c);
    }
  }
  CHECK(dropped_max < 1e-12 * wmax);
}

TEST_CASE("mass matrix is symmetric positive definite and reconstructs idm") {
  MultibodyModel m = build_puma560();
  SplitMix rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd z = rand_vec(rng, 6, -M_PI, M_PI);
    VectorXd dz = rand_vec(rng, 6, -2, 2);
    VectorXd ddz = rand_vec(rng, 6, -2, 2);
    MatrixXd M;
    VectorXd delta;
    mass_and_bias(m, z, dz, m.phi_full(), M, delta);
    double scale = M.norm();
    CHECK((M - M.transpose()).norm() < 1e-10 * scale);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    VectorXd tau = idm(m, z, dz, ddz, m.phi_full());
    CHECK((M * ddz + delta - tau).norm() < 1e-10 * (tau.norm() + 1.0));
  }
}

TEST_CASE("forward dynamics handles a truncated parameter vector") {
  // Zeroing the wrist body's rotational inertias while keeping its first
  // moment violates physical consistency, so the mass matrix goes indefinite
  // in some poses. Inversion must still work while the matrix is well
  // conditioned.
  MultibodyModel m = build_puma560();
  VectorXd phi = m.phi_full();
  for (int j = 0; j < m.n_params(); ++j)
    if (m.param_labels[j].size() > 2 && m.param_labels[j].back() == '6' &&
        m.param_labels[j][0] == 'I')
      phi(j) = 0.0;
  SplitMix rng(17);
  int indefinite = 0;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd z = rand_vec(rng, 6, -M_PI, M_PI);
    VectorXd dz = rand_vec(rng, 6, -2, 2);
    VectorXd ddz = rand_vec(rng, 6, -2, 2);
    MatrixXd M;
    VectorXd delta;
    mass_and_bias(m, z, dz, phi, M, delta);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0) ++indefinite;
    VectorXd tau = idm(m, z, dz, ddz, phi);
    double cond = 0.0;
    VectorXd acc = forward_dynamics(m, z, dz, tau, phi, &cond);
    if (cond < 1e8) CHECK((acc - ddz).norm() < 1e-8 * (ddz.norm() + 1.0));
  }
  CHECK(indefinite > 0);
}

TEST_CASE("forward dynamics inverts idm") {
  MultibodyModel m = build_puma560();
  SplitMix rng(18);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd z = rand_vec(rng, 6, -M_PI, M_PI);
    VectorXd dz = rand_vec(rng, 6, -2, 2);
    VectorXd ddz = rand_vec(rng, 6, -2, 2);
    VectorXd tau = idm(m, z, dz, ddz, m.phi_full());
    double cond = 0.0;
    VectorXd acc = forward_dynamics(m, z, dz, tau, m.phi_full(), &cond);
    CHECK(cond < 1e8);
    CHECK((acc - ddz).norm() < 1e-8 * (ddz.norm() + 1.0));
    VectorXd back = idm(m, z, dz, acc, m.phi_full());
    CHECK((back - tau).norm() < 1e-8 * (tau.norm() + 1.0));
  }
}

TEST_CASE("unforced motion conserves energy under rk4") {
  MultibodyModel m = build_puma560();
  VectorXd z(6), dz(6);
  z << 0.3, -0.8, 0.5, 0.2, -0.4, 0.1;
  dz << 0.5, -0.3, 0.4, 0.6, -0.2, 0.3;
  VectorXd tau = VectorXd::Zero(6);
  double e0 = total_energy(m, z, dz, m.phi_full());
  const double h = 1e-3;
  for (int step = 0; step < 1000; ++step) rk4_step(m, m.phi_full(), tau, h, z, dz);
  double e1 = total_energy(m, z, dz, m.phi_full());
  CHECK(std::abs(e1 - e0) < 1e-6 * std::max(std::abs(e0), 1.0));
}

TEST_CASE("state validation rejects malformed input") {
  MultibodyModel m = build_puma560();
  VectorXd z = VectorXd::Zero(6), bad = VectorXd::Zero(5);
  CHECK_THROWS_AS(idm(m, bad, z, z, m.phi_full()), ConfigError);
  VectorXd nanz = z;
  nanz(2) = std::nan("");
  CHECK_THROWS_AS(idm(m, nanz, z, z, m.phi_full()), ConfigError);
  CHECK_THROWS_AS(idm(m, z, z, z, VectorXd::Zero(48)), ConfigError);
}
