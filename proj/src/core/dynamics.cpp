#include "core/dynamics.hpp"

#include <cmath>

#include "core/constrained.hpp"
#include "core/rng.hpp"

namespace paramprune {

namespace {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

void check_state(const MultibodyModel& m, const VectorXd& z, const VectorXd& dz,
                 const VectorXd& ddz) {
  if (z.size() != m.n_dof || dz.size() != m.n_dof || ddz.size() != m.n_dof)
    throw ConfigError("state size mismatch");
  if (!z.allFinite() || !dz.allFinite() || !ddz.allFinite())
    throw ConfigError("state is not finite");
}

VectorXd open_chain_tau(const MultibodyModel& m, const VectorXd& q, const VectorXd& dq,
                        const VectorXd& ddq, const VectorXd& raw) {
  VectorXd tau(m.n_dof);
  open_chain_idm_kernel(m, q.data(), dq.data(), ddq.data(), raw.data(), tau.data());
  return tau;
}

}  // namespace

Eigen::VectorXd idm(const MultibodyModel& m, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& dz, const Eigen::VectorXd& ddz,
                    const Eigen::VectorXd& phi) {
  check_state(m, z, dz, ddz);
  if (phi.size() != m.n_params()) throw ConfigError("phi length mismatch");
  VectorXd raw = m.expand_phi(phi);
  if (m.topology == Topology::OpenChain) return open_chain_tau(m, z, dz, ddz, raw);
  ConstrainedState st = solve_dependent(m, z, dz);
  VectorXd qdd = st.Rmat * ddz + st.corr;
  VectorXd d_q(24);
  hexaglide_dq_kernel(m, st.q.data(), st.dq.data(), qdd.data(), raw.data(), d_q.data());
  return st.Rmat.transpose() * d_q;
}

Eigen::MatrixXd regressor(const MultibodyModel& m, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& dz, const Eigen::VectorXd& ddz) {
  check_state(m, z, dz, ddz);
  if (m.topology == Topology::OpenChain) {
    MatrixXd K(m.n_dof, m.n_params());
    VectorXd raw = VectorXd::Zero(m.n_slots());
    for (int j = 0; j < m.n_params(); ++j) {
      raw(m.param_slots[j]) = 1.0;
      K.col(j) = open_chain_tau(m, z, dz, ddz, raw);
      raw(m.param_slots[j]) = 0.0;
    }
    return K;
  }
  ConstrainedState st = solve_dependent(m, z, dz);
  return projected_regressor(m, st, ddz);
}

void mass_and_bias(const MultibodyModel& m, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& dz, const Eigen::VectorXd& phi,
                   Eigen::MatrixXd& M, Eigen::VectorXd& delta) {
  VectorXd zero = VectorXd::Zero(m.n_dof);
  delta = idm(m, z, dz, zero, phi);
  VectorXd grav = idm(m, z, zero, zero, phi);
  M.resize(m.n_dof, m.n_dof);
  VectorXd unit = zero;
  for (int i = 0; i < m.n_dof; ++i) {
    unit(i) = 1.0;
    M.col(i) = idm(m, z, zero, unit, phi) - grav;
    unit(i) = 0.0;
  }
}

Eigen::VectorXd forward_dynamics(const MultibodyModel& m, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& dz, const Eigen::VectorXd& tau,
                                 const Eigen::VectorXd& phi, double* cond_out) {
  MatrixXd M;
  VectorXd delta;
  mass_and_bias(m, z, dz, phi, M, delta);
  MatrixXd Ms = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Ms);
  VectorXd lam = es.eigenvalues();
  double lmax = lam.cwiseAbs().maxCoeff();
  double lmin = lam.cwiseAbs().minCoeff();
  double cond = lmin > 0 ? lmax / lmin : 1.0 / 0.0;
  if (cond_out) *cond_out = cond;
  if (!std::isfinite(cond) || cond > 1e12 || lmax == 0.0) throw MassSingular(cond);
  VectorXd rhs = es.eigenvectors().transpose() * (tau - delta);
  return es.eigenvectors() * (rhs.array() / lam.array()).matrix();
}

std::vector<int> active_param_slots(const MultibodyModel& m) {
  const int n_slots = 10 * (int)m.bodies.size();
  SplitMix rng(0x5eedc01dull);
  MatrixXd colmax = MatrixXd::Zero(1, n_slots);
  double overall = 0.0;
  const int n_probe = 100;
  VectorXd warm;
  for (int s = 0; s < n_probe; ++s) {
    MatrixXd W;
    if (m.topology == Topology::OpenChain) {
      VectorXd q(m.n_dof), dq(m.n_dof), ddq(m.n_dof);
      for (int i = 0; i < m.n_dof; ++i) {
        q(i) = rng.uniform(-M_PI, M_PI);
        dq(i) = rng.uniform(-3, 3);
        ddq(i) = rng.uniform(-3, 3);
      }
      W.resize(m.n_dof, n_slots);
      VectorXd raw = VectorXd::Zero(n_slots);
      for (int j = 0; j < n_slots; ++j) {
        raw(j) = 1.0;
        W.col(j) = open_chain_tau(m, q, dq, ddq, raw);
        raw(j) = 0.0;
      }
    } else {
      // carriage heights are strongly coupled: differential motion within an
      // azimuth pair is stiff, so sample common + pair + small intra-pair
      // offsets and skip draws outside the workspace
      VectorXd z(6), dz(6), ddz(6);
      double base = rng.uniform(1.35, 1.65);
      double pair[3] = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                        rng.uniform(-0.05, 0.05)};
      for (int i = 0; i < 6; ++i) {
        z(i) = base + pair[i / 2] + rng.uniform(-0.02, 0.02);
        dz(i) = rng.uniform(-1, 1);
        ddz(i) = rng.uniform(-1, 1);
      }
      try {
        ConstrainedState st = solve_dependent(m, z, dz, warm.size() ? &warm : nullptr);
        warm = st.q;
        VectorXd qdd = st.Rmat * ddz + st.corr;
        MatrixXd A = hexaglide_regressor_raw(m, st.q, st.dq, qdd);
        W = st.Rmat.transpose() * A;
      } catch (const OutsideWorkspace&) {
        continue;
      }
    }
    overall = std::max(overall, W.cwiseAbs().maxCoeff());
    for (int j = 0; j < n_slots; ++j)
      colmax(0, j) = std::max(colmax(0, j), W.col(j).cwiseAbs().maxCoeff());
  }
  std::vector<int> keep;
  for (int j = 0; j < n_slots; ++j)
    if (colmax(0, j) >= 1e-12 * overall) keep.push_back(j);
  return keep;
}

double total_energy(const MultibodyModel& m, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& dz, const Eigen::VectorXd& phi) {
  VectorXd raw = m.expand_phi(phi);
  if (m.topology == Topology::HexaglidePUS) {
    ConstrainedState st = solve_dependent(m, z, dz);
    return hexaglide_energy(m, st, phi);
  }
  Eigen::Matrix3d Rw = Eigen::Matrix3d::Identity();
  Vector3d pw = Vector3d::Zero();
  Vector3d w_prev = Vector3d::Zero(), v_prev = Vector3d::Zero();
  double E = 0.0;
  for (size_t i = 0; i < m.joints.size(); ++i) {
    const MdhJoint& jt = m.joints[i];
    Transform tr = mdh_transform(jt, z(jt.coordinate_index));
    Vector3d w = tr.R.transpose() * w_prev + Vector3d(0, 0, dz(jt.coordinate_index));
    Vector3d v = tr.R.transpose() * (v_prev + w_prev.cross(tr.p));
    pw = pw + Rw * tr.p;
    Rw = Rw * tr.R;
    const double* p = raw.data() + 10 * i;
    Vector3d d(p[1], p[2], p[3]);
    Eigen::Matrix3d I;
    I << p[4], p[5], p[6], p[5], p[7], p[8], p[6], p[8], p[9];
    E += 0.5 * p[0] * v.squaredNorm() + v.dot(w.cross(d)) + 0.5 * w.dot(I * w);
    E -= m.gravity.dot(p[0] * pw + Rw * d);
    w_prev = w;
    v_prev = v;
  }
  return E;
}

void rk4_step(const MultibodyModel& m, const Eigen::VectorXd& phi,
              const Eigen::VectorXd& tau, double h, Eigen::VectorXd& z,
              Eigen::VectorXd& dz) {
  auto acc = [&](const VectorXd& zz, const VectorXd& vv) {
    return forward_dynamics(m, zz, vv, tau, phi);
  };
  VectorXd k1v = dz, k1a = acc(z, dz);
  VectorXd k2v = dz + 0.5 * h * k1a, k2a = acc(z + 0.5 * h * k1v, k2v);
  VectorXd k3v = dz + 0.5 * h * k2a, k3a = acc(z + 0.5 * h * k2v, k3v);
  VectorXd k4v = dz + h * k3a, k4a = acc(z + h * k3v, k4v);
  z += (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v);
  dz += (h / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a);
}

}  // namespace paramprune
