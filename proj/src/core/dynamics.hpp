#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "core/model.hpp"

namespace paramprune {

struct ExtendedStateSample {
  Eigen::VectorXd z, dz, ddz, tau;
};

struct Dataset {
  std::vector<double> t;
  std::vector<ExtendedStateSample> samples;
  int n_dof() const { return samples.empty() ? 0 : (int)samples[0].z.size(); }
};

// ---------------------------------------------------------------------------
// Scalar-generic 3d algebra. T is double for numerics and Sym for tracing;
// Sym picks up sin/cos through ADL, double through the using-declarations in
// the kernels.

template <typename T>
struct Vec3T {
  T x{}, y{}, z{};
};

template <typename T>
Vec3T<T> vadd(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

template <typename T>
Vec3T<T> vsub(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

template <typename T>
Vec3T<T> vscale(const Vec3T<T>& a, const T& s) {
  return {a.x * s, a.y * s, a.z * s};
}

template <typename T>
T vdot(const Vec3T<T>& a, const Vec3T<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
Vec3T<T> vcross(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
struct Mat3T {
  Vec3T<T> r[3];  // rows
};

template <typename T>
Vec3T<T> mvec(const Mat3T<T>& m, const Vec3T<T>& v) {
  return {vdot(m.r[0], v), vdot(m.r[1], v), vdot(m.r[2], v)};
}

// mᵀ v
template <typename T>
Vec3T<T> tmvec(const Mat3T<T>& m, const Vec3T<T>& v) {
  return vadd(vadd(vscale(m.r[0], v.x), vscale(m.r[1], v.y)), vscale(m.r[2], v.z));
}

template <typename T>
Mat3T<T> mmul(const Mat3T<T>& a, const Mat3T<T>& b) {
  Mat3T<T> c;
  for (int i = 0; i < 3; ++i)
    c.r[i] = vadd(vadd(vscale(b.r[0], a.r[i].x), vscale(b.r[1], a.r[i].y)),
                  vscale(b.r[2], a.r[i].z));
  return c;
}

template <typename T>
Mat3T<T> rot_x_cs(const T& c, const T& s) {
  return {{{T(1.0), T(0.0), T(0.0)}, {T(0.0), c, T(0.0) - s}, {T(0.0), s, c}}};
}

template <typename T>
Mat3T<T> rot_y_cs(const T& c, const T& s) {
  return {{{c, T(0.0), s}, {T(0.0), T(1.0), T(0.0)}, {T(0.0) - s, T(0.0), c}}};
}

template <typename T>
Mat3T<T> rot_z_cs(const T& c, const T& s) {
  return {{{c, T(0.0) - s, T(0.0)}, {s, c, T(0.0)}, {T(0.0), T(0.0), T(1.0)}}};
}

// Exact values for right-angle multiples so structural zeros stay zero in the
// regressor and in traced expressions.
inline void snapped_trig(double angle, double& c, double& s) {
  const double half_pi = 1.5707963267948966;
  double k = std::round(angle / half_pi);
  if (std::abs(angle - k * half_pi) < 1e-12) {
    int m = ((int)std::llround(k)) & 3;
    c = (m == 0) ? 1.0 : (m == 2) ? -1.0 : 0.0;
    s = (m == 1) ? 1.0 : (m == 3) ? -1.0 : 0.0;
  } else {
    c = std::cos(angle);
    s = std::sin(angle);
  }
}

// Inertial wrench about the body-frame origin from one body's 10 raw
// parameters (m, d, I): F = m a + α×d + ω×(ω×d), N = I α + ω×(I ω) + d×a.
template <typename T>
void body_wrench(const T* p, const Vec3T<T>& w, const Vec3T<T>& al,
                 const Vec3T<T>& a, Vec3T<T>& F, Vec3T<T>& N) {
  Vec3T<T> d{p[1], p[2], p[3]};
  auto imul = [&](const Vec3T<T>& v) -> Vec3T<T> {
    return {p[4] * v.x + p[5] * v.y + p[6] * v.z,
            p[5] * v.x + p[7] * v.y + p[8] * v.z,
            p[6] * v.x + p[8] * v.y + p[9] * v.z};
  };
  F = vadd(vscale(a, p[0]), vadd(vcross(al, d), vcross(w, vcross(w, d))));
  N = vadd(vadd(imul(al), vcross(w, imul(w))), vcross(d, a));
}

// ---------------------------------------------------------------------------
// Recursive Newton-Euler for the serial chain, body frames, gravity seeded
// into the base acceleration. phi_raw holds all 10*n_bodies slots.
template <typename T>
void open_chain_idm_kernel(const MultibodyModel& m, const T* q, const T* dq,
                           const T* ddq, const T* phi_raw, T* tau) {
  using std::cos;
  using std::sin;
  const int nb = (int)m.bodies.size();
  std::vector<Mat3T<T>> R(nb);
  std::vector<Vec3T<T>> p(nb), w(nb), al(nb), a(nb), F(nb), N(nb);
  Vec3T<T> w_prev{}, al_prev{};
  Vec3T<T> a_prev{T(-m.gravity(0)), T(-m.gravity(1)), T(-m.gravity(2))};
  for (int i = 0; i < nb; ++i) {
    const MdhJoint& jt = m.joints[i];
    int ci = jt.coordinate_index;
    T th = q[ci] + jt.theta_offset;
    T ct = cos(th), st = sin(th);
    double ca, sa;
    snapped_trig(jt.alpha, ca, sa);
    R[i] = {{{ct, T(0.0) - st, T(0.0)},
             {st * ca, ct * ca, T(-sa)},
             {st * sa, ct * sa, T(ca)}}};
    p[i] = {T(jt.a), T(-sa * jt.d), T(ca * jt.d)};
    Vec3T<T> wp = tmvec(R[i], w_prev);
    w[i] = {wp.x, wp.y, wp.z + dq[ci]};
    Vec3T<T> ap = tmvec(R[i], al_prev);
    al[i] = {ap.x + wp.y * dq[ci], ap.y - wp.x * dq[ci], ap.z + ddq[ci]};
    Vec3T<T> acc =
        vadd(a_prev, vadd(vcross(al_prev, p[i]), vcross(w_prev, vcross(w_prev, p[i]))));
    a[i] = tmvec(R[i], acc);
    body_wrench(phi_raw + 10 * i, w[i], al[i], a[i], F[i], N[i]);
    w_prev = w[i];
    al_prev = al[i];
    a_prev = a[i];
  }
  Vec3T<T> f{}, n{};
  for (int i = nb - 1; i >= 0; --i) {
    if (i < nb - 1) {
      Vec3T<T> fc = mvec(R[i + 1], f);
      Vec3T<T> nc = vadd(mvec(R[i + 1], n), vcross(p[i + 1], fc));
      f = vadd(F[i], fc);
      n = vadd(N[i], nc);
    } else {
      f = F[i];
      n = N[i];
    }
    tau[m.joints[i].coordinate_index] = n.z;
  }
}

// ---------------------------------------------------------------------------
// Full-coordinate generalized forces of the 6-PUS machine (Kane projection of
// the per-body inertial+gravity wrenches). Coordinates, in order: universal
// joint angles (th_i1, th_i2) for bars 1..6, head pose (x, y, z, e1, e2, e3),
// carriage heights z_1..z_6. phi_raw holds 70 slots (6 bars, then head).
template <typename T>
void hexaglide_dq_kernel(const MultibodyModel& m, const T* q, const T* dq,
                         const T* ddq, const T* phi_raw, T* out) {
  using std::cos;
  using std::sin;
  for (int i = 0; i < 24; ++i) out[i] = T(0.0);
  const double gx = m.gravity(0), gy = m.gravity(1), gz = m.gravity(2);
  for (int bar = 0; bar < 6; ++bar) {
    double az = m.geom.symmetry_angle * (bar / 2);
    double cz, sz;
    snapped_trig(az, cz, sz);
    Mat3T<T> C = rot_z_cs(T(cz), T(sz));
    T th1 = q[2 * bar], th2 = q[2 * bar + 1];
    T w1 = dq[2 * bar], w2 = dq[2 * bar + 1];
    T dw1 = ddq[2 * bar], dw2 = ddq[2 * bar + 1];
    T c1 = cos(th1), s1 = sin(th1), c2 = cos(th2), s2 = sin(th2);
    Mat3T<T> Rb = mmul(C, mmul(rot_x_cs(c1, s1), rot_y_cs(c2, s2)));
    Vec3T<T> w{w1 * c2, w2, w1 * s2};
    Vec3T<T> al{dw1 * c2 - w1 * w2 * s2, dw2, dw1 * s2 + w1 * w2 * c2};
    Vec3T<T> a_w{T(-gx), T(-gy), ddq[18 + bar] - gz};
    Vec3T<T> a = tmvec(Rb, a_w);
    Vec3T<T> F, N;
    body_wrench(phi_raw + 10 * bar, w, al, a, F, N);
    out[2 * bar] = c2 * N.x + s2 * N.z;
    out[2 * bar + 1] = N.y;
    out[18 + bar] = Rb.r[2].x * F.x + Rb.r[2].y * F.y + Rb.r[2].z * F.z;
  }
  // head
  T e1 = q[15], e2 = q[16], e3 = q[17];
  T de1 = dq[15], de2 = dq[16], de3 = dq[17];
  T c1 = cos(e1), s1 = sin(e1), c2 = cos(e2), s2 = sin(e2), c3 = cos(e3), s3 = sin(e3);
  Mat3T<T> Ry = rot_y_cs(c2, s2), Rz = rot_z_cs(c3, s3);
  Mat3T<T> Rh = mmul(rot_x_cs(c1, s1), mmul(Ry, Rz));
  Vec3T<T> wA{de1, T(0.0), T(0.0)};
  Vec3T<T> alA{ddq[15], T(0.0), T(0.0)};
  Vec3T<T> wAy = tmvec(Ry, wA);
  Vec3T<T> wB{wAy.x, wAy.y + de2, wAy.z};
  Vec3T<T> alB = vadd(vadd(tmvec(Ry, alA), Vec3T<T>{T(0.0), ddq[16], T(0.0)}),
                      vcross(wAy, Vec3T<T>{T(0.0), de2, T(0.0)}));
  Vec3T<T> wBz = tmvec(Rz, wB);
  Vec3T<T> w{wBz.x, wBz.y, wBz.z + de3};
  Vec3T<T> al = vadd(vadd(tmvec(Rz, alB), Vec3T<T>{T(0.0), T(0.0), ddq[17]}),
                     vcross(wBz, Vec3T<T>{T(0.0), T(0.0), de3}));
  Vec3T<T> a_w{ddq[12] - gx, ddq[13] - gy, ddq[14] - gz};
  Vec3T<T> a = tmvec(Rh, a_w);
  Vec3T<T> F, N;
  body_wrench(phi_raw + 60, w, al, a, F, N);
  Vec3T<T> f_w = mvec(Rh, F);
  out[12] = f_w.x;
  out[13] = f_w.y;
  out[14] = f_w.z;
  Vec3T<T> px = tmvec(Rz, tmvec(Ry, Vec3T<T>{T(1.0), T(0.0), T(0.0)}));
  Vec3T<T> py = tmvec(Rz, Vec3T<T>{T(0.0), T(1.0), T(0.0)});
  out[15] = vdot(px, N);
  out[16] = vdot(py, N);
  out[17] = N.z;
}

// ---------------------------------------------------------------------------
// Numeric layer. phi arguments are in the filtered parameter basis of the
// model (length model.n_params()).

std::vector<int> active_param_slots(const MultibodyModel& m);

Eigen::VectorXd idm(const MultibodyModel& m, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& dz, const Eigen::VectorXd& ddz,
                    const Eigen::VectorXd& phi);
Eigen::MatrixXd regressor(const MultibodyModel& m, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& dz, const Eigen::VectorXd& ddz);
void mass_and_bias(const MultibodyModel& m, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& dz, const Eigen::VectorXd& phi,
                   Eigen::MatrixXd& M, Eigen::VectorXd& delta);
Eigen::VectorXd forward_dynamics(const MultibodyModel& m, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& dz, const Eigen::VectorXd& tau,
                                 const Eigen::VectorXd& phi, double* cond_out = nullptr);

// Kinetic plus potential energy; oracle support for the energy-balance tests.
double total_energy(const MultibodyModel& m, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& dz, const Eigen::VectorXd& phi);

// One fixed-step RK4 step of (z, dz) under constant applied force tau.
void rk4_step(const MultibodyModel& m, const Eigen::VectorXd& phi,
              const Eigen::VectorXd& tau, double h, Eigen::VectorXd& z,
              Eigen::VectorXd& dz);

}  // namespace paramprune
