#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/dynamics.hpp"
#include "core/excitation.hpp"
#include "core/model.hpp"
#include "core/reduction.hpp"
#include "core/rng.hpp"
#include "core/selection.hpp"
#include "core/tracing.hpp"

using namespace paramprune;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using Bindings = std::unordered_map<std::string, double>;

Bindings state_bindings(const std::string& pos, const std::string& vel,
                        const std::string& acc, const VectorXd& q,
                        const VectorXd& dq, const VectorXd& ddq) {
  Bindings in;
  for (int i = 0; i < q.size(); ++i) {
    in[pos + "[" + std::to_string(i) + "]"] = q(i);
    in[vel + "[" + std::to_string(i) + "]"] = dq(i);
    in[acc + "[" + std::to_string(i) + "]"] = ddq(i);
  }
  return in;
}

Bindings param_bindings(const MultibodyModel& m, const VectorXd& phi) {
  Bindings par;
  for (int i = 0; i < m.n_params(); ++i) par[m.param_labels[i]] = phi(i);
  return par;
}

std::unordered_map<std::string, int> output_index(const ExprDag& dag) {
  std::unordered_map<std::string, int> pos;
  for (size_t i = 0; i < dag.outputs().size(); ++i)
    pos[dag.outputs()[i].first] = (int)i;
  return pos;
}

VectorXd rand_vec(SplitMix& rng, int n, double lo, double hi) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

double rel_gap(const VectorXd& a, const VectorXd& b) {
  return (a - b).norm() / (1.0 + b.norm());
}

// Horizontal pendulum: one revolute joint whose alpha tilts the axis so
// gravity acts in the plane of motion. Torque has the textbook closed form
// I_zz*ddz + g*(d_x*cos z - d_y*sin z), which the trace must reproduce.
const char* kPendulumJson = R"({
  "topology": {"type": "open_chain", "joints": [
    {"a": 0.0, "alpha": 1.5707963267948966, "d": 0.0,
     "theta_offset": 0.0, "coordinate_index": 0}
  ]},
  "bodies": [{"m": 1.3, "d": [0.91, 0.05, 0.0],
              "I": [0.02, 0.0, 0.0, 0.64, 0.0, 0.68]}],
  "gravity": [0.0, 0.0, -9.81],
  "nominal_force": [3.0]
})";

Dataset puma_dataset(uint64_t seed) {
  MultibodyModel m = build_puma560();
  ExcitationConfig cfg = default_excitation(m);
  cfg.n_trajectories = 2;
  std::vector<FourierTrajectory> trajs;
  for (int i = 0; i < 2; ++i)
    trajs.push_back(random_feasible_trajectory(m, cfg, mix_seed(seed, i)));
  return sample_dataset(m, trajs, cfg);
}

}  // namespace

TEST_CASE("traced pendulum torque matches the closed form and the numeric layer") {
  MultibodyModel m = model_from_json(kPendulumJson);
  REQUIRE(m.n_q == 1);
  // Only d_x, d_y and I_zz can act on the torque; the slot filter must agree.
  std::vector<std::string> expect = {"d_x^1", "d_y^1", "I_zz^1"};
  CHECK(m.param_labels == expect);

  ExprDag dag = trace_idm(m);
  CHECK(dag.outputs().size() == 1);
  CHECK(dag.outputs()[0].first == "tau[0]");

  VectorXd phi = m.phi_full();
  Bindings par = param_bindings(m, phi);
  SplitMix rng(0x7e0d01);
  for (int t = 0; t < 100; ++t) {
    VectorXd z = rand_vec(rng, 1, -3.0, 3.0);
    VectorXd dz = rand_vec(rng, 1, -2.0, 2.0);
    VectorXd ddz = rand_vec(rng, 1, -5.0, 5.0);
    double traced = dag.eval(state_bindings("z", "dz", "ddz", z, dz, ddz), par)[0];
    double numeric = idm(m, z, dz, ddz, phi)(0);
    double closed = 0.68 * ddz(0) +
                    9.81 * (0.91 * std::cos(z(0)) - 0.05 * std::sin(z(0)));
    CHECK(std::abs(traced - numeric) <= 1e-12 * (1.0 + std::abs(numeric)));
    CHECK(traced == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("traced serial-arm torques match the numeric layer at random states") {
  MultibodyModel m = build_puma560();
  ExprDag dag = trace_idm(m);
  REQUIRE((int)dag.outputs().size() == m.n_q);
  for (int i = 0; i < m.n_q; ++i)
    CHECK(dag.outputs()[i].first == "tau[" + std::to_string(i) + "]");

  VectorXd phi = m.phi_full();
  Bindings par = param_bindings(m, phi);
  SplitMix rng(0x7e0d02);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    VectorXd z = rand_vec(rng, 6, -2.5, 2.5);
    VectorXd dz = rand_vec(rng, 6, -2.0, 2.0);
    VectorXd ddz = rand_vec(rng, 6, -6.0, 6.0);
    std::vector<double> out =
        dag.eval(state_bindings("z", "dz", "ddz", z, dz, ddz), par);
    VectorXd traced = Eigen::Map<VectorXd>(out.data(), (int)out.size());
    worst = std::max(worst, rel_gap(traced, idm(m, z, dz, ddz, phi)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("traced closed-loop force vector matches the raw kernel") {
  MultibodyModel h = build_hexaglide();
  ExprDag dag = trace_idm(h);
  REQUIRE((int)dag.outputs().size() == h.n_q);
  CHECK(dag.outputs()[0].first == "d_q[0]");
  CHECK(dag.outputs().back().first == "d_q[23]");

  VectorXd phi = h.phi_full();
  VectorXd raw = h.expand_phi(phi);
  Bindings par = param_bindings(h, phi);
  SplitMix rng(0x7e0d03);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    VectorXd q = rand_vec(rng, 24, -1.0, 1.0);
    VectorXd dq = rand_vec(rng, 24, -1.5, 1.5);
    VectorXd ddq = rand_vec(rng, 24, -4.0, 4.0);
    std::vector<double> out =
        dag.eval(state_bindings("q", "dq", "ddq", q, dq, ddq), par);
    VectorXd traced = Eigen::Map<VectorXd>(out.data(), (int)out.size());
    VectorXd direct(24);
    hexaglide_dq_kernel<double>(h, q.data(), dq.data(), ddq.data(), raw.data(),
                                direct.data());
    worst = std::max(worst, rel_gap(traced, direct));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("mass and bias trace agrees with the numeric assembly") {
  MultibodyModel m = build_puma560();
  ExprDag dag = trace_mass_bias(m);
  auto pos = output_index(dag);
  REQUIRE(dag.outputs().size() == 42);

  VectorXd phi = m.phi_full();
  Bindings par = param_bindings(m, phi);
  SplitMix rng(0x7e0d04);
  for (int t = 0; t < 20; ++t) {
    VectorXd z = rand_vec(rng, 6, -2.5, 2.5);
    VectorXd dz = rand_vec(rng, 6, -2.0, 2.0);
    Bindings in = state_bindings("z", "dz", "ddz", z, dz, VectorXd::Zero(6));
    // ddz inputs are absent from the [M|delta] trace; binding them is
    // harmless but the graph must not depend on them.
    std::vector<double> out = dag.eval(in, par);

    MatrixXd M(6, 6);
    VectorXd delta(6);
    for (int i = 0; i < 6; ++i) {
      delta(i) = out[pos.at("delta[" + std::to_string(i) + "]")];
      for (int j = 0; j < 6; ++j)
        M(i, j) = out[pos.at("M[" + std::to_string(i) + "][" +
                             std::to_string(j) + "]")];
    }
    MatrixXd Mn;
    VectorXd dn;
    mass_and_bias(m, z, dz, phi, Mn, dn);
    CHECK((M - Mn).norm() <= 1e-10 * (1.0 + Mn.norm()));
    CHECK((delta - dn).norm() <= 1e-10 * (1.0 + dn.norm()));
    CHECK((M - M.transpose()).norm() <= 1e-12 * (1.0 + M.norm()));
  }
}

TEST_CASE("closed-loop mass and bias trace agrees with the raw kernel") {
  MultibodyModel h = build_hexaglide();
  MultibodyModel h0 = h;
  h0.gravity.setZero();
  ExprDag dag = trace_mass_bias(h);
  auto pos = output_index(dag);
  REQUIRE(dag.outputs().size() == 24u * 24u + 24u);

  VectorXd phi = h.phi_full();
  VectorXd raw = h.expand_phi(phi);
  Bindings par = param_bindings(h, phi);
  SplitMix rng(0x7e0d05);
  for (int t = 0; t < 5; ++t) {
    VectorXd q = rand_vec(rng, 24, -1.0, 1.0);
    VectorXd dq = rand_vec(rng, 24, -1.5, 1.5);
    Bindings in;
    for (int i = 0; i < 24; ++i) {
      in["q[" + std::to_string(i) + "]"] = q(i);
      in["dq[" + std::to_string(i) + "]"] = dq(i);
    }
    std::vector<double> out = dag.eval(in, par);

    VectorXd zero = VectorXd::Zero(24), col(24), delta(24);
    hexaglide_dq_kernel<double>(h, q.data(), dq.data(), zero.data(), raw.data(),
                                delta.data());
    MatrixXd M(24, 24);
    for (int j = 0; j < 24; ++j) {
      VectorXd ej = VectorXd::Zero(24);
      ej(j) = 1.0;
      hexaglide_dq_kernel<double>(h0, q.data(), zero.data(), ej.data(),
                                  raw.data(), col.data());
      for (int i = 0; i < 24; ++i) M(i, j) = col(i);
    }
    double worst = 0.0;
    for (int j = 0; j < 24; ++j)
      for (int i = 0; i < 24; ++i)
        worst = std::max(worst,
                         std::abs(out[pos.at("M[" + std::to_string(i) + "][" +
                                             std::to_string(j) + "]")] -
                                  M(i, j)));
    for (int i = 0; i < 24; ++i)
      worst = std::max(worst, std::abs(out[pos.at("delta[" + std::to_string(i) +
                                                  "]")] -
                                       delta(i)));
    CHECK(worst <= 1e-12 * (1.0 + M.norm()));
    CHECK((M - M.transpose()).norm() <= 1e-12 * (1.0 + M.norm()));
  }
}

TEST_CASE("binding every parameter to its value leaves evaluation unchanged") {
  MultibodyModel m = build_puma560();
  ExprDag dag = trace_idm(m);
  VectorXd phi = m.phi_full();
  std::map<std::string, double> all;
  for (int i = 0; i < m.n_params(); ++i) all[m.param_labels[i]] = phi(i);
  ExprDag bound = dag.substitute_params(all);

  CHECK(bound.count_ops().total() <= dag.count_ops().total());
  Bindings par = param_bindings(m, phi);
  SplitMix rng(0x7e0d06);
  for (int t = 0; t < 20; ++t) {
    VectorXd z = rand_vec(rng, 6, -2.5, 2.5);
    VectorXd dz = rand_vec(rng, 6, -2.0, 2.0);
    VectorXd ddz = rand_vec(rng, 6, -6.0, 6.0);
    Bindings in = state_bindings("z", "dz", "ddz", z, dz, ddz);
    std::vector<double> a = dag.eval(in, par);
    std::vector<double> b = bound.eval(in, {});
    for (size_t i = 0; i < a.size(); ++i)
      CHECK(std::abs(a[i] - b[i]) <= 1e-12 * (1.0 + std::abs(a[i])));
  }
}

TEST_CASE("zeroing removed parameters never increases the op count") {
  MultibodyModel m = build_puma560();
  ExprDag dag = trace_idm(m);
  const long full = dag.simplified().count_ops().total();
  SplitMix rng(0x7e0d07);
  for (int t = 0; t < 25; ++t) {
    std::vector<int> keep;
    for (int i = 0; i < m.n_params(); ++i)
      if (rng.uniform() < 0.5) keep.push_back(i);
    CHECK(reduced_op_count(dag, m, keep).total() <= full);
  }
  std::vector<int> none;
  CHECK(reduced_op_count(dag, m, none).total() == 0);
}

TEST_CASE("operation counts shrink along the selection order") {
  MultibodyModel m = build_puma560();
  RegressionProblem p = assemble(m, puma_dataset(501));
  SelectionTrace fs = forward_selection(p, 1e-2);
  ExprDag idm_dag = trace_idm(m);
  ExprDag mb_dag = trace_mass_bias(m);

  std::vector<int> all(m.n_params());
  std::iota(all.begin(), all.end(), 0);
  const long full_idm = idm_dag.simplified().count_ops().total();
  const long full_mb = mb_dag.simplified().count_ops().total();
  CHECK(reduced_op_count(idm_dag, m, all).total() == full_idm);
  // Serial 6R torque evaluation sits in the few-hundred-operation range once
  // shared subexpressions are counted once.
  CHECK(full_idm >= 539);
  CHECK(full_idm <= 899);

  long prev_idm = -1, prev_mb = -1;
  for (int k = 1; k <= m.n_params(); ++k) {
    long ci = reduced_op_count(idm_dag, m, fs.sets[k - 1]).total();
    long cm = reduced_op_count(mb_dag, m, fs.sets[k - 1]).total();
    CHECK(ci >= prev_idm);
    CHECK(cm >= prev_mb);
    prev_idm = ci;
    prev_mb = cm;
  }

  const long r18_idm = reduced_op_count(idm_dag, m, fs.sets[17]).total();
  const long r18_mb = reduced_op_count(mb_dag, m, fs.sets[17]).total();
  CHECK(r18_idm < full_idm);
  CHECK(1.0 - (double)r18_idm / (double)full_idm >= 0.25);
  CHECK(1.0 - (double)r18_mb / (double)full_mb >= 0.25);
}

TEST_CASE("reduced op count validates the selected indices") {
  MultibodyModel m = build_puma560();
  ExprDag dag = trace_idm(m);
  CHECK_THROWS_AS(reduced_op_count(dag, m, {0, 49}), ConfigError);
  CHECK_THROWS_AS(reduced_op_count(dag, m, {-1}), ConfigError);
}
