#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "core/excitation.hpp"
#include "core/model.hpp"
#include "core/reduction.hpp"
#include "core/rng.hpp"

using namespace paramprune;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd rand_mat(SplitMix& rng, int r, int c) {
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-1, 1);
  return m;
}

Dataset puma_dataset(uint64_t seed, int n_traj = 2) {
  MultibodyModel m = build_puma560();
  ExcitationConfig cfg = default_excitation(m);
  cfg.n_trajectories = n_traj;
  std::vector<FourierTrajectory> trajs;
  for (int i = 0; i < n_traj; ++i)
    trajs.push_back(random_feasible_trajectory(m, cfg, mix_seed(seed, i)));
  return sample_dataset(m, trajs, cfg);
}

}  // namespace

TEST_CASE("beta matches column-by-column normal equations") {
  SplitMix rng(301);
  MatrixXd W = rand_mat(rng, 20, 6);
  VectorXd phi = rand_mat(rng, 6, 1);
  RegressionProblem p = make_problem(W, W * phi, VectorXd::Ones(1));
  std::vector<int> sel = {0, 2, 5};
  MatrixXd beta = beta_coeffs(p, sel);
  REQUIRE(beta.rows() == 3);
  REQUIRE(beta.cols() == 3);
  MatrixXd A(20, 3);
  for (int j = 0; j < 3; ++j) A.col(j) = W.col(sel[j]);
  std::vector<int> exc = {1, 3, 4};
  for (int j = 0; j < 3; ++j) {
    VectorXd oracle = (A.transpose() * A).ldlt().solve(A.transpose() * W.col(exc[j]));
    CHECK((beta.col(j) - oracle).norm() < 1e-10);
  }
}

TEST_CASE("orthogonal excluded columns give zero beta") {
  SplitMix rng(302);
  Eigen::HouseholderQR<MatrixXd> qr(rand_mat(rng, 30, 8));
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(30, 8);
  VectorXd chi = Q * VectorXd::Ones(8);
  RegressionProblem p = make_problem(Q, chi, VectorXd::Ones(1));
  MatrixXd beta = beta_coeffs(p, {0, 1, 2, 3});
  CHECK(beta.norm() < 1e-12);

  std::vector<int> all = {0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(beta_coeffs(p, all).cols() == 0);
}

TEST_CASE("generalized base agrees with brute-force least squares") {
  SplitMix rng(303);
  MatrixXd W = rand_mat(rng, 24, 6);
  VectorXd phi = rand_mat(rng, 6, 1);
  VectorXd nom(2);
  nom << 2.0, 5.0;
  RegressionProblem p = make_problem(W, W * phi, nom);

  std::vector<int> sel = {1, 3, 4};
  VectorXd fit = generalized_base(p, sel, phi);
  MatrixXd Aw(24, 3);
  VectorXd cw(24);
  for (int r = 0; r < 24; ++r) {
    for (int j = 0; j < 3; ++j) Aw(r, j) = W(r, sel[j]) / nom(r % 2);
    cw(r) = (W * phi)(r) / nom(r % 2);
  }
  VectorXd oracle = Aw.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(cw);
  CHECK((fit - oracle).norm() < 1e-10 * (1.0 + oracle.norm()));

  std::vector<int> all = {0, 1, 2, 3, 4, 5};
  VectorXd full = generalized_base(p, all, phi);
  CHECK((full - phi).norm() < 1e-10);
}

TEST_CASE("duplicated selected columns are flagged rank deficient") {
  SplitMix rng(304);
  MatrixXd W = rand_mat(rng, 15, 5);
  W.col(4) = W.col(1);
  RegressionProblem p = make_problem(W, W * VectorXd::Ones(5), VectorXd::Ones(1));
  bool deficient = false;
  MatrixXd beta = beta_coeffs(p, {1, 4}, &deficient);
  CHECK(deficient);
  CHECK(beta.allFinite());
}

TEST_CASE("numeric rank counts singular values above the relative cut") {
  SplitMix rng(305);
  Eigen::HouseholderQR<MatrixXd> qu(rand_mat(rng, 12, 4));
  MatrixXd U = qu.householderQ() * MatrixXd::Identity(12, 4);
  Eigen::HouseholderQR<MatrixXd> qv(rand_mat(rng, 4, 4));
  MatrixXd V = qv.householderQ() * MatrixXd::Identity(4, 4);
  VectorXd sig(4);
  sig << 1.0, 0.5, 2e-8, 1e-10;
  MatrixXd W = U * sig.asDiagonal() * V.transpose();
  RegressionProblem p = make_problem(W, W.col(0), VectorXd::Ones(1));
  CHECK(numeric_rank(p) == 3);
  CHECK(numeric_rank(p, 1e-7) == 2);

  MatrixXd W2(12, 5);
  W2 << W, W.col(2);
  RegressionProblem p2 = make_problem(W2, W.col(0), VectorXd::Ones(1));
  CHECK(numeric_rank(p2) == numeric_rank(p));
}

TEST_CASE("idm error conventions, monotonicity and scale invariance") {
  MultibodyModel m = build_puma560();
  Dataset ds = puma_dataset(401);
  RegressionProblem p = assemble(m, ds);
  CHECK(p.W.rows() == 6 * (long)ds.samples.size());
  CHECK((p.W * m.phi_full() - p.chi).norm() < 1e-10 * p.chi.norm());

  std::vector<int> all(p.n_phi());
  for (int j = 0; j < p.n_phi(); ++j) all[j] = j;
  CHECK(idm_error(p, all) < 1e-10);
  CHECK(idm_error(p, {}) == 1.0);

  SplitMix rng(406);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> sel;
    for (int j = 0; j < p.n_phi(); ++j)
      if (rng.uniform() < 0.3) sel.push_back(j);
    if (sel.empty()) sel.push_back((int)(rng.next() % p.n_phi()));
    int extra = (int)(rng.next() % p.n_phi());
    bool dup = false;
    for (int j : sel) dup |= (j == extra);
    if (dup) continue;
    double before = idm_error(p, sel);
    std::vector<int> grown = sel;
    grown.push_back(extra);
    CHECK(idm_error(p, grown) <= before + 1e-12);
  }

  const double c = 3.7;
  RegressionProblem scaled = make_problem(c * p.W, c * p.chi, c * p.nom, p.labels);
  std::vector<int> sel = {0, 5, 11, 17, 30};
  CHECK(std::abs(idm_error(p, sel) - idm_error(scaled, sel)) < 1e-12);
}

TEST_CASE("exact base parameters sit at numerical noise") {
  MultibodyModel m = build_puma560();
  RegressionProblem p = assemble(m, puma_dataset(402));
  ReducedModel rm = exact_base_parameters(p);
  CHECK((int)rm.selected.size() == numeric_rank(p));
  CHECK(rm.eps_tau_est < 1e-8);
  CHECK(idm_error(p, rm.selected) == doctest::Approx(rm.eps_tau_est).epsilon(1e-9));
  CHECK((int)(rm.selected.size() + rm.excluded.size()) == p.n_phi());

  // excluded columns reconstruct from the selected ones (weighted space)
  MatrixXd Ts(p.T.rows(), (Eigen::Index)rm.selected.size());
  MatrixXd Te(p.T.rows(), (Eigen::Index)rm.excluded.size());
  for (size_t j = 0; j < rm.selected.size(); ++j) Ts.col((Eigen::Index)j) = p.T.col(rm.selected[j]);
  for (size_t j = 0; j < rm.excluded.size(); ++j) Te.col((Eigen::Index)j) = p.T.col(rm.excluded[j]);
  CHECK((Te - Ts * rm.beta).norm() < 1e-7 * Te.norm());

  VectorXd fit = generalized_base(p, rm.selected, m.phi_full());
  CHECK((fit - rm.phi_R_prime).norm() < 1e-9 * (1.0 + fit.norm()));
}

TEST_CASE("beta is a property of the geometry, not the excitation") {
  MultibodyModel m = build_puma560();
  RegressionProblem p1 = assemble(m, puma_dataset(403));
  RegressionProblem p2 = assemble(m, puma_dataset(404));
  ReducedModel rm = exact_base_parameters(p1);
  MatrixXd b2 = beta_coeffs(p2, rm.selected);
  CHECK((rm.beta - b2).norm() < 1e-6 * (1.0 + rm.beta.norm()));
}

TEST_CASE("ddm error conventions on the serial machine") {
  MultibodyModel m = build_puma560();
  Dataset ds = puma_dataset(405, 1);
  RegressionProblem p = assemble(m, ds);
  VectorXd nom = nominal_ddz(ds);

  std::vector<int> all(p.n_phi());
  for (int j = 0; j < p.n_phi(); ++j) all[j] = j;
  CHECK(ddm_error(m, all, m.phi_full(), ds, nom) < 1e-10);

  ReducedModel rm = exact_base_parameters(p);
  int sing = -2;
  double direct = ddm_error(m, rm.selected, rm.phi_R_prime, ds, nom, &sing);
  CHECK(sing == -1);
  CHECK(direct < 1e-7);

  MassBiasCache cache = build_mass_bias_cache(m, ds);
  double cached = ddm_error_cached(cache, rm.selected, rm.phi_R_prime, nom, &sing);
  CHECK(cached == doctest::Approx(direct).epsilon(1e-12));

  // a single selected parameter cannot produce an invertible mass matrix
  VectorXd one = VectorXd::Ones(1);
  double bad = ddm_error(m, {0}, one, ds, nom, &sing);
  CHECK(std::isinf(bad));
  CHECK(sing == 0);
  CHECK(std::isinf(ddm_error_cached(cache, {0}, one, nom, &sing)));
}

TEST_CASE("ddm error cache matches the direct path on the closed loop") {
  MultibodyModel m = build_hexaglide();
  ExcitationConfig cfg = default_excitation(m);
  cfg.samples_per_traj = 30;
  FourierTrajectory tr = random_feasible_trajectory(m, cfg, 77);
  Dataset ds = sample_dataset(m, {tr}, cfg);
  RegressionProblem p = assemble(m, ds);
  CHECK((p.W * m.phi_full() - p.chi).norm() < 1e-10 * p.chi.norm());

  VectorXd nom = nominal_ddz(ds);
  ReducedModel rm = exact_base_parameters(p);
  MassBiasCache cache = build_mass_bias_cache(m, ds);
  // At the exact base both paths sit at their solver noise floors: the cache
  // reuses the warm-started solves of the assembly, the direct path re-solves
  // cold per call, so they only agree to ~1e-8 absolute there.
  double direct = ddm_error(m, rm.selected, rm.phi_R_prime, ds, nom);
  double cached = ddm_error_cached(cache, rm.selected, rm.phi_R_prime, nom);
  CHECK(direct < 1e-6);
  CHECK(cached < 1e-9);
  CHECK(std::abs(cached - direct) < 1e-7);

  // Equivalence where the value is informative: a genuinely reduced model.
  std::vector<int> sel17(rm.selected.begin(), rm.selected.begin() + 17);
  VectorXd fit17 = generalized_base(p, sel17, m.phi_full());
  double d17 = ddm_error(m, sel17, fit17, ds, nom);
  double c17 = ddm_error_cached(cache, sel17, fit17, nom);
  CHECK(d17 > 1e-4);
  CHECK(c17 == doctest::Approx(d17).epsilon(1e-6));

  MassBiasCache strided = build_mass_bias_cache(m, ds, 3);
  CHECK((int)strided.G.size() == 10);
}

TEST_CASE("nominal ddz is the per-coordinate rms") {
  Dataset ds;
  ExtendedStateSample a, b;
  a.z = b.z = VectorXd::Zero(2);
  a.dz = b.dz = VectorXd::Zero(2);
  a.tau = b.tau = VectorXd::Zero(2);
  a.ddz = VectorXd(2);
  a.ddz << 3.0, 1.0;
  b.ddz = VectorXd(2);
  b.ddz << -1.0, 2.0;
  ds.samples = {a, b};
  ds.t = {0.0, 0.1};
  VectorXd nom = nominal_ddz(ds);
  CHECK(nom(0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(nom(1) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-15));

  ds.samples[0].ddz(1) = 0.0;
  ds.samples[1].ddz(1) = 0.0;
  CHECK_THROWS_AS(nominal_ddz(ds), NumericalError);
}

TEST_CASE("problem files round trip exactly") {
  MultibodyModel m = build_puma560();
  RegressionProblem p = assemble(m, puma_dataset(407, 1));
  const std::string path = "/tmp/pp_test_problem.bin";
  save_problem(p, path);
  RegressionProblem q = load_problem(path);
  CHECK(q.model_fingerprint == p.model_fingerprint);
  CHECK(q.n_dof == p.n_dof);
  CHECK(q.n_samples == p.n_samples);
  CHECK(q.labels == p.labels);
  CHECK((q.W - p.W).norm() == 0.0);
  CHECK((q.chi - p.chi).norm() == 0.0);
  CHECK((q.nom - p.nom).norm() == 0.0);
  CHECK(numeric_rank(q) == numeric_rank(p));

  std::ofstream bad(path, std::ios::binary);
  bad << "notaproblem";
  bad.close();
  CHECK_THROWS_AS(load_problem(path), ConfigError);
  std::remove(path.c_str());
}
