#include "core/constrained.hpp"

#include <algorithm>
#include <cmath>

#include "core/dynamics.hpp"

namespace paramprune {

namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

Matrix3d rotx(double c, double s) {
  Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}
Matrix3d drotx(double c, double s) {
  Matrix3d r;
  r << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return r;
}
Matrix3d ddrotx(double c, double s) {
  Matrix3d r;
  r << 0, 0, 0, 0, -c, s, 0, -s, -c;
  return r;
}
Matrix3d roty(double c, double s) {
  Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}
Matrix3d droty(double c, double s) {
  Matrix3d r;
  r << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return r;
}
Matrix3d ddroty(double c, double s) {
  Matrix3d r;
  r << -c, 0, -s, 0, 0, 0, s, 0, -c;
  return r;
}
Matrix3d rotz(double c, double s) {
  Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}
Matrix3d drotz(double c, double s) {
  Matrix3d r;
  r << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return r;
}
Matrix3d ddrotz(double c, double s) {
  Matrix3d r;
  r << -c, s, 0, -s, -c, 0, 0, 0, 0;
  return r;
}

struct BarFrame {
  Matrix3d C;        // azimuth rotation
  Vector3d u_xy;     // carriage anchor at z_i = 0
  Vector3d s_head;   // socket point in head frame
};

BarFrame bar_frame(const MultibodyModel& m, int bar) {
  double c, s;
  snapped_trig(m.geom.symmetry_angle * (bar / 2), c, s);
  double sign = (bar % 2 == 0) ? 0.5 : -0.5;
  BarFrame f;
  f.C = rotz(c, s);
  f.u_xy = f.C * Vector3d(m.geom.frame_radius, sign * m.geom.joint_separation, 0);
  f.s_head = f.C * Vector3d(m.geom.head_radius, sign * m.geom.joint_separation, 0);
  return f;
}

Matrix3d head_rot(const VectorXd& q) {
  return rotx(std::cos(q(15)), std::sin(q(15))) *
         roty(std::cos(q(16)), std::sin(q(16))) *
         rotz(std::cos(q(17)), std::sin(q(17)));
}

}  // namespace

Eigen::VectorXd constraint_residual(const MultibodyModel& m, const Eigen::VectorXd& q) {
  VectorXd res(18);
  const double L = m.geom.bar_length;
  Vector3d p_h = q.segment<3>(12);
  Matrix3d Rh = head_rot(q);
  for (int i = 0; i < 6; ++i) {
    BarFrame f = bar_frame(m, i);
    Matrix3d Rb = f.C * rotx(std::cos(q(2 * i)), std::sin(q(2 * i))) *
                  roty(std::cos(q(2 * i + 1)), std::sin(q(2 * i + 1)));
    Vector3d u = f.u_xy + Vector3d(0, 0, q(18 + i));
    res.segment<3>(3 * i) = u + Rb * Vector3d(0, 0, -L) - p_h - Rh * f.s_head;
  }
  return res;
}

Eigen::MatrixXd constraint_jacobian(const MultibodyModel& m, const Eigen::VectorXd& q) {
  MatrixXd J = MatrixXd::Zero(18, 24);
  const Vector3d bL(0, 0, -m.geom.bar_length);
  double c1 = std::cos(q(15)), s1 = std::sin(q(15));
  double c2 = std::cos(q(16)), s2 = std::sin(q(16));
  double c3 = std::cos(q(17)), s3 = std::sin(q(17));
  Matrix3d Rx = rotx(c1, s1), Ry = roty(c2, s2), Rz = rotz(c3, s3);
  Matrix3d dR1 = drotx(c1, s1) * Ry * Rz;
  Matrix3d dR2 = Rx * droty(c2, s2) * Rz;
  Matrix3d dR3 = Rx * Ry * drotz(c3, s3);
  for (int i = 0; i < 6; ++i) {
    BarFrame f = bar_frame(m, i);
    double ca = std::cos(q(2 * i)), sa = std::sin(q(2 * i));
    double cb = std::cos(q(2 * i + 1)), sb = std::sin(q(2 * i + 1));
    J.block<3, 1>(3 * i, 2 * i) = f.C * drotx(ca, sa) * roty(cb, sb) * bL;
    J.block<3, 1>(3 * i, 2 * i + 1) = f.C * rotx(ca, sa) * droty(cb, sb) * bL;
    J.block<3, 3>(3 * i, 12) = -Matrix3d::Identity();
    J.block<3, 1>(3 * i, 15) = -dR1 * f.s_head;
    J.block<3, 1>(3 * i, 16) = -dR2 * f.s_head;
    J.block<3, 1>(3 * i, 17) = -dR3 * f.s_head;
    J(3 * i + 2, 18 + i) = 1.0;
  }
  return J;
}

Eigen::VectorXd gamma_rhs(const MultibodyModel& m, const Eigen::VectorXd& q,
                          const Eigen::VectorXd& dq) {
  VectorXd g(18);
  const Vector3d bL(0, 0, -m.geom.bar_length);
  double c1 = std::cos(q(15)), s1 = std::sin(q(15));
  double c2 = std::cos(q(16)), s2 = std::sin(q(16));
  double c3 = std::cos(q(17)), s3 = std::sin(q(17));
  Matrix3d Rx = rotx(c1, s1), Ry = roty(c2, s2), Rz = rotz(c3, s3);
  double w1 = dq(15), w2 = dq(16), w3 = dq(17);
  // second time derivative of the head rotation with angle accelerations zero
  Matrix3d ddRh = ddrotx(c1, s1) * Ry * Rz * (w1 * w1) +
                  Rx * ddroty(c2, s2) * Rz * (w2 * w2) +
                  Rx * Ry * ddrotz(c3, s3) * (w3 * w3) +
                  2.0 * (drotx(c1, s1) * droty(c2, s2) * Rz * (w1 * w2) +
                         drotx(c1, s1) * Ry * drotz(c3, s3) * (w1 * w3) +
                         Rx * droty(c2, s2) * drotz(c3, s3) * (w2 * w3));
  for (int i = 0; i < 6; ++i) {
    BarFrame f = bar_frame(m, i);
    double ca = std::cos(q(2 * i)), sa = std::sin(q(2 * i));
    double cb = std::cos(q(2 * i + 1)), sb = std::sin(q(2 * i + 1));
    double v1 = dq(2 * i), v2 = dq(2 * i + 1);
    Matrix3d ddRb = ddrotx(ca, sa) * roty(cb, sb) * (v1 * v1) +
                    2.0 * drotx(ca, sa) * droty(cb, sb) * (v1 * v2) +
                    rotx(ca, sa) * ddroty(cb, sb) * (v2 * v2);
    g.segment<3>(3 * i) = -(f.C * ddRb * bL - ddRh * f.s_head);
  }
  return g;
}

ConstrainedState solve_dependent(const MultibodyModel& m, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& dz,
                                 const Eigen::VectorXd* warm_q) {
  if (m.topology != Topology::HexaglidePUS)
    throw ConfigError("solve_dependent requires the closed-loop model");
  if (z.size() != 6 || dz.size() != 6) throw ConfigError("state size mismatch");
  VectorXd q(24);
  if (warm_q && warm_q->size() == 24) {
    q = *warm_q;
    q.tail<6>() = z;
  } else {
    // per-bar inverse kinematics against a level, centered head estimate
    double span = m.geom.frame_radius - m.geom.head_radius;
    double drop = std::sqrt(m.geom.bar_length * m.geom.bar_length - span * span);
    q.setZero();
    q(14) = z.mean() - drop;
    q.tail<6>() = z;
    Vector3d head(0, 0, q(14));
    for (int i = 0; i < 6; ++i) {
      BarFrame f = bar_frame(m, i);
      Vector3d u = f.u_xy + Vector3d(0, 0, z(i));
      Vector3d v = f.C.transpose() * (head + f.s_head - u);
      double len = std::max(v.norm(), 1e-9);
      double s2 = std::clamp(-v.x() / len, -1.0, 1.0);
      q(2 * i + 1) = std::asin(s2);
      q(2 * i) = std::atan2(v.y(), -v.z());
    }
  }

  // Newton with adaptive Levenberg damping; undamped steps overshoot badly
  // from cold starts because the head-yaw direction is only weakly
  // constrained by the nearly coincident socket points.
  auto lm_solve = [&m](VectorXd& qq) -> bool {
    VectorXd res = constraint_residual(m, qq);
    double f = res.squaredNorm();
    double lambda = 0.0;
    for (int it = 0; it < 50; ++it) {
      if (res.lpNorm<Eigen::Infinity>() <= 1e-10) return true;
      MatrixXd J = constraint_jacobian(m, qq).leftCols<18>();
      bool accepted = false;
      for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
        VectorXd step;
        if (lambda == 0.0) {
          step = J.partialPivLu().solve(res);
        } else {
          MatrixXd H = J.transpose() * J + lambda * MatrixXd::Identity(18, 18);
          step = H.ldlt().solve(J.transpose() * res);
        }
        if (step.allFinite()) {
          VectorXd q_try = qq;
          q_try.head<18>() -= step;
          VectorXd res_try = constraint_residual(m, q_try);
          if (res_try.squaredNorm() < f) {
            qq = q_try;
            res = res_try;
            f = res.squaredNorm();
            lambda = (lambda < 1e-8) ? 0.0 : lambda * 0.25;
            accepted = true;
          }
        }
        if (!accepted) lambda = std::max(lambda * 4.0, 1e-6);
      }
      if (!accepted) return false;
    }
    return false;
  };

  bool converged = lm_solve(q);
  if (!converged) {
    // continuation from the level configuration at the mean height; keeps the
    // iterate on the branch connected to the home pose
    VectorXd zbar = VectorXd::Constant(6, z.mean());
    VectorXd qc(24);
    qc.setZero();
    double span = m.geom.frame_radius - m.geom.head_radius;
    qc(14) = z.mean() - std::sqrt(m.geom.bar_length * m.geom.bar_length - span * span);
    for (int i = 0; i < 6; ++i) qc(2 * i + 1) = std::asin(span / m.geom.bar_length);
    qc.tail<6>() = zbar;
    converged = lm_solve(qc);
    const int steps = 16;
    for (int s = 1; s <= steps && converged; ++s) {
      qc.tail<6>() = zbar + (double(s) / steps) * (z - zbar);
      converged = lm_solve(qc);
    }
    if (converged) q = qc;
  }
  if (!converged) throw OutsideWorkspace("dependent-coordinate solve did not converge");

  ConstrainedState st;
  st.q = q;
  st.phi_q = constraint_jacobian(m, q);
  MatrixXd phid = st.phi_q.leftCols<18>();
  Eigen::JacobiSVD<MatrixXd> svd(phid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double smin = svd.singularValues()(17);
  st.cond_phid = smin > 0 ? svd.singularValues()(0) / smin : 1.0 / 0.0;
  if (smin <= 1e-12 * svd.singularValues()(0)) throw ConfigurationSingular(st.cond_phid);
  Eigen::PartialPivLU<MatrixXd> lu(phid);
  MatrixXd phiz = st.phi_q.rightCols<6>();
  st.Rmat.resize(24, 6);
  st.Rmat.topRows<18>() = -lu.solve(phiz);
  st.Rmat.bottomRows<6>() = MatrixXd::Identity(6, 6);
  st.dq.resize(24);
  st.dq.head<18>() = st.Rmat.topRows<18>() * dz;
  st.dq.tail<6>() = dz;
  st.gamma_term = gamma_rhs(m, q, st.dq);
  st.corr = VectorXd::Zero(24);
  st.corr.head<18>() = lu.solve(st.gamma_term);
  return st;
}

Eigen::MatrixXd ortho_complement(const ConstrainedState& st) {
  MatrixXd phid = st.phi_q.leftCols<18>();
  MatrixXd R(24, 6);
  R.topRows<18>() = -phid.partialPivLu().solve(st.phi_q.rightCols<6>());
  R.bottomRows<6>() = MatrixXd::Identity(6, 6);
  return R;
}

Eigen::MatrixXd hexaglide_regressor_raw(const MultibodyModel& m, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& dq,
                                        const Eigen::VectorXd& ddq) {
  MatrixXd A(24, 70);
  VectorXd unit = VectorXd::Zero(70);
  VectorXd col(24);
  for (int j = 0; j < 70; ++j) {
    unit(j) = 1.0;
    hexaglide_dq_kernel(m, q.data(), dq.data(), ddq.data(), unit.data(), col.data());
    A.col(j) = col;
    unit(j) = 0.0;
  }
  return A;
}

Eigen::MatrixXd projected_regressor(const MultibodyModel& m, const ConstrainedState& st,
                                    const Eigen::VectorXd& ddz) {
  VectorXd qdd = st.Rmat * ddz + st.corr;
  MatrixXd A = hexaglide_regressor_raw(m, st.q, st.dq, qdd);
  MatrixXd K(6, m.n_params());
  for (int j = 0; j < m.n_params(); ++j)
    K.col(j) = st.Rmat.transpose() * A.col(m.param_slots[j]);
  return K;
}

ProjectedDynamics project_to_independent(const MultibodyModel& m,
                                         const ConstrainedState& st,
                                         const Eigen::VectorXd& ddz,
                                         const Eigen::VectorXd& phi) {
  if (phi.size() != m.n_params()) throw ConfigError("phi length mismatch");
  VectorXd raw = m.expand_phi(phi);
  VectorXd qdd = st.Rmat * ddz + st.corr;
  VectorXd zero24 = VectorXd::Zero(24);

  ProjectedDynamics out;
  VectorXd d_q(24);
  hexaglide_dq_kernel(m, st.q.data(), st.dq.data(), qdd.data(), raw.data(), d_q.data());
  out.d_z = st.Rmat.transpose() * d_q;
  out.tau_z = out.d_z;

  MatrixXd Mqq(24, 24);
  VectorXd base(24), col(24), unit = zero24;
  hexaglide_dq_kernel(m, st.q.data(), zero24.data(), zero24.data(), raw.data(), base.data());
  for (int j = 0; j < 24; ++j) {
    unit(j) = 1.0;
    hexaglide_dq_kernel(m, st.q.data(), zero24.data(), unit.data(), raw.data(), col.data());
    Mqq.col(j) = col - base;
    unit(j) = 0.0;
  }
  out.M_zz = st.Rmat.transpose() * Mqq * st.Rmat;

  VectorXd delta_q(24);
  hexaglide_dq_kernel(m, st.q.data(), st.dq.data(), zero24.data(), raw.data(), delta_q.data());
  out.delta_z = st.Rmat.transpose() * (delta_q + Mqq * st.corr);

  out.K_zphi = projected_regressor(m, st, ddz);
  return out;
}

double hexaglide_energy(const MultibodyModel& m, const ConstrainedState& st,
                        const Eigen::VectorXd& phi) {
  VectorXd raw = m.expand_phi(phi);
  const VectorXd& q = st.q;
  const VectorXd& dq = st.dq;
  double E = 0.0;
  Vector3d g = m.gravity;
  auto body_energy = [&](const double* p, const Matrix3d& R, const Vector3d& pos,
                         const Vector3d& w, const Vector3d& v) {
    Vector3d d(p[1], p[2], p[3]);
    Matrix3d I;
    I << p[4], p[5], p[6], p[5], p[7], p[8], p[6], p[8], p[9];
    double ke = 0.5 * p[0] * v.squaredNorm() + v.dot(w.cross(d)) + 0.5 * w.dot(I * w);
    double pe = -g.dot(p[0] * pos + R * d);
    return ke + pe;
  };
  for (int i = 0; i < 6; ++i) {
    BarFrame f = bar_frame(m, i);
    double ca = std::cos(q(2 * i)), sa = std::sin(q(2 * i));
    double cb = std::cos(q(2 * i + 1)), sb = std::sin(q(2 * i + 1));
    Matrix3d R = f.C * rotx(ca, sa) * roty(cb, sb);
    Vector3d pos = f.u_xy + Vector3d(0, 0, q(18 + i));
    Vector3d w(dq(2 * i) * cb, dq(2 * i + 1), dq(2 * i) * sb);
    Vector3d v = R.transpose() * Vector3d(0, 0, dq(18 + i));
    E += body_energy(raw.data() + 10 * i, R, pos, w, v);
  }
  Matrix3d Rh = head_rot(q);
  double c2 = std::cos(q(16)), s2 = std::sin(q(16));
  double c3 = std::cos(q(17)), s3 = std::sin(q(17));
  Vector3d wA(dq(15), 0, 0);
  Vector3d wB = roty(c2, s2).transpose() * wA + Vector3d(0, dq(16), 0);
  Vector3d w = rotz(c3, s3).transpose() * wB + Vector3d(0, 0, dq(17));
  Vector3d v = Rh.transpose() * dq.segment<3>(12);
  E += body_energy(raw.data() + 60, Rh, q.segment<3>(12), w, v);
  return E;
}

}  // namespace paramprune
