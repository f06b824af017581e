#include "core/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "core/constrained.hpp"

namespace paramprune {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void compress(RegressionProblem& p) {
  const int n = p.n_phi();
  MatrixXd A(p.W.rows(), n + 1);
  A.leftCols(n) = p.W;
  A.col(n) = p.chi;
  for (Eigen::Index r = 0; r < A.rows(); ++r) A.row(r) /= p.nom(r % p.n_dof);
  Eigen::HouseholderQR<MatrixXd> qr(A);
  const Eigen::Index rr = std::min<Eigen::Index>(A.rows(), n + 1);
  MatrixXd R = qr.matrixQR().topRows(rr).triangularView<Eigen::Upper>();
  p.T = MatrixXd::Zero(n + 1, n + 1);
  p.T.topRows(rr) = R;
}

MatrixXd select_cols(const MatrixXd& T, const std::vector<int>& idx) {
  MatrixXd out(T.rows(), (Eigen::Index)idx.size());
  for (size_t j = 0; j < idx.size(); ++j) out.col((Eigen::Index)j) = T.col(idx[j]);
  return out;
}

void check_selected(const RegressionProblem& p, const std::vector<int>& selected) {
  std::vector<char> seen(p.n_phi(), 0);
  for (int j : selected) {
    if (j < 0 || j >= p.n_phi()) throw ConfigError("reduction: column index out of range");
    if (seen[j]++) throw ConfigError("reduction: duplicate column index");
  }
}

// Spec'd solver: column-pivoted QR, SVD minimum-norm fallback on rank
// deficiency.
MatrixXd weighted_lstsq(const MatrixXd& A, const MatrixXd& B, bool* rank_deficient) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
  if (qr.rank() < A.cols()) {
    if (rank_deficient) *rank_deficient = true;
    Eigen::BDCSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.solve(B);
  }
  if (rank_deficient) *rank_deficient = false;
  return qr.solve(B);
}

}  // namespace

RegressionProblem assemble(const MultibodyModel& m, const Dataset& ds) {
  if (ds.samples.empty()) throw ConfigError("assemble: empty dataset");
  if (ds.n_dof() != m.n_dof) throw ConfigError("assemble: dataset/model dof mismatch");
  const int nd = m.n_dof;
  const long ns = (long)ds.samples.size();
  RegressionProblem p;
  p.n_dof = nd;
  p.n_samples = ns;
  p.labels = m.param_labels;
  p.model_fingerprint = m.fingerprint();
  p.nom = m.nominal_force;
  if (p.nom.size() != nd || p.nom.minCoeff() <= 0.0)
    throw ConfigError("assemble: nominal forces must be positive per coordinate");
  p.W.resize(ns * nd, m.n_params());
  p.chi.resize(ns * nd);

  if (m.topology == Topology::OpenChain) {
    for (long i = 0; i < ns; ++i) {
      const auto& s = ds.samples[i];
      if (s.z.size() != nd || s.tau.size() != nd)
        throw ConfigError("assemble: inconsistent sample dimensions");
      p.W.middleRows(i * nd, nd) = regressor(m, s.z, s.dz, s.ddz);
      p.chi.segment(i * nd, nd) = s.tau;
    }
  } else {
    // Replay the sampler's warm-start chain (cold at each trajectory
    // restart) so the constraint solve lands on the same assembly branch
    // that generated tau.
    VectorXd warm;
    bool have_warm = false;
    for (long i = 0; i < ns; ++i) {
      const auto& s = ds.samples[i];
      if (s.z.size() != nd || s.tau.size() != nd)
        throw ConfigError("assemble: inconsistent sample dimensions");
      if (i > 0 && i < (long)ds.t.size() && ds.t[i] <= ds.t[i - 1]) have_warm = false;
      ConstrainedState st = solve_dependent(m, s.z, s.dz, have_warm ? &warm : nullptr);
      warm = st.q;
      have_warm = true;
      p.W.middleRows(i * nd, nd) = projected_regressor(m, st, s.ddz);
      p.chi.segment(i * nd, nd) = s.tau;
    }
  }
  compress(p);
  return p;
}

RegressionProblem make_problem(const Eigen::MatrixXd& W, const Eigen::VectorXd& chi,
                               const Eigen::VectorXd& nom, std::vector<std::string> labels) {
  RegressionProblem p;
  p.n_dof = (int)nom.size();
  if (p.n_dof < 1 || W.rows() % p.n_dof != 0 || W.rows() != chi.size())
    throw ConfigError("make_problem: inconsistent dimensions");
  if (nom.minCoeff() <= 0.0) throw ConfigError("make_problem: nominal forces must be positive");
  p.n_samples = W.rows() / p.n_dof;
  p.W = W;
  p.chi = chi;
  p.nom = nom;
  if (labels.empty())
    for (int j = 0; j < W.cols(); ++j) labels.push_back("c" + std::to_string(j));
  if ((Eigen::Index)labels.size() != W.cols())
    throw ConfigError("make_problem: label count mismatch");
  p.labels = std::move(labels);
  p.model_fingerprint = "synthetic";
  compress(p);
  return p;
}

int numeric_rank(const RegressionProblem& p, double rel_tol) {
  Eigen::BDCSVD<MatrixXd> svd(p.T.leftCols(p.n_phi()));
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++r;
  return r;
}

MatrixXd beta_coeffs(const RegressionProblem& p, const std::vector<int>& selected,
                     bool* rank_deficient) {
  if (selected.empty()) throw ConfigError("beta_coeffs: empty selection");
  check_selected(p, selected);
  std::vector<char> in_sel(p.n_phi(), 0);
  for (int j : selected) in_sel[j] = 1;
  std::vector<int> excluded;
  for (int j = 0; j < p.n_phi(); ++j)
    if (!in_sel[j]) excluded.push_back(j);
  if (excluded.empty()) {
    if (rank_deficient) *rank_deficient = false;
    return MatrixXd((Eigen::Index)selected.size(), 0);
  }
  return weighted_lstsq(select_cols(p.T, selected), select_cols(p.T, excluded), rank_deficient);
}

VectorXd generalized_base(const RegressionProblem& p, const std::vector<int>& selected,
                          const VectorXd& phi_full) {
  if (selected.empty()) throw ConfigError("generalized_base: empty selection");
  check_selected(p, selected);
  if (phi_full.size() != p.n_phi())
    throw ConfigError("generalized_base: phi length mismatch");
  bool deficient = false;
  VectorXd fit = weighted_lstsq(select_cols(p.T, selected), p.T.col(p.n_phi()), &deficient);

  std::vector<char> in_sel(p.n_phi(), 0);
  for (int j : selected) in_sel[j] = 1;
  std::vector<int> excluded;
  for (int j = 0; j < p.n_phi(); ++j)
    if (!in_sel[j]) excluded.push_back(j);
  MatrixXd beta = beta_coeffs(p, selected);
  VectorXd phi_R((Eigen::Index)selected.size()), phi_E((Eigen::Index)excluded.size());
  for (size_t i = 0; i < selected.size(); ++i) phi_R((Eigen::Index)i) = phi_full(selected[i]);
  for (size_t i = 0; i < excluded.size(); ++i) phi_E((Eigen::Index)i) = phi_full(excluded[i]);
  VectorXd regrouped = phi_R + beta * phi_E;
  const double scale = std::max(fit.norm(), 1e-30);
  if (!deficient && (fit - regrouped).norm() > 1e-6 * scale)
    throw NumericalError("generalized base identity violated: |fit - regrouped| = " +
                         std::to_string((fit - regrouped).norm() / scale) + " relative");
  return fit;
}

double idm_error(const RegressionProblem& p, const std::vector<int>& selected) {
  const VectorXd tchi = p.T.col(p.n_phi());
  const double den = tchi.norm();
  if (den <= 0.0) throw NumericalError("idm_error: zero force vector");
  if (selected.empty()) return 1.0;
  check_selected(p, selected);
  MatrixXd Ts = select_cols(p.T, selected);
  VectorXd fit = weighted_lstsq(Ts, tchi, nullptr);
  return (tchi - Ts * fit).norm() / den;
}

ReducedModel exact_base_parameters(const RegressionProblem& p) {
  const int n = p.n_phi();
  const int r = numeric_rank(p);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(p.T.leftCols(n));
  ReducedModel rm;
  rm.heuristic = "exact-base";
  const auto& perm = qr.colsPermutation().indices();
  rm.selected.assign(perm.data(), perm.data() + r);
  std::vector<char> in_sel(n, 0);
  for (int j : rm.selected) in_sel[j] = 1;
  for (int j = 0; j < n; ++j)
    if (!in_sel[j]) rm.excluded.push_back(j);
  rm.beta = beta_coeffs(p, rm.selected);
  VectorXd tchi = p.T.col(n);
  rm.phi_R_prime = weighted_lstsq(select_cols(p.T, rm.selected), tchi, nullptr);
  rm.eps_tau_est = (tchi - select_cols(p.T, rm.selected) * rm.phi_R_prime).norm() / tchi.norm();
  return rm;
}

VectorXd nominal_ddz(const Dataset& ds) {
  if (ds.samples.empty()) throw ConfigError("nominal_ddz: empty dataset");
  const int nd = ds.n_dof();
  VectorXd acc = VectorXd::Zero(nd);
  for (const auto& s : ds.samples) acc += s.ddz.cwiseAbs2();
  VectorXd rms = (acc / (double)ds.samples.size()).cwiseSqrt();
  if (rms.minCoeff() <= 0.0)
    throw NumericalError("nominal_ddz: a coordinate has zero acceleration RMS");
  return rms;
}

namespace {

// Shared forward-dynamics residual accumulation; returns false on a singular
// mass matrix.
bool accumulate_ddm(const MatrixXd& M, const VectorXd& delta, const VectorXd& tau,
                    const VectorXd& ddz, const VectorXd& inv_nom, double& num, double& den) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
  const VectorXd& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff(), emin = ev.cwiseAbs().minCoeff();
  if (!std::isfinite(emax) || emax <= 0.0 || emax / emin > 1e12) return false;
  VectorXd pred = es.eigenvectors() *
                  (es.eigenvectors().transpose() * (tau - delta)).cwiseQuotient(ev);
  num += (inv_nom.asDiagonal() * (pred - ddz)).squaredNorm();
  den += (inv_nom.asDiagonal() * ddz).squaredNorm();
  return true;
}

}  // namespace

double ddm_error(const MultibodyModel& m, const std::vector<int>& selected,
                 const VectorXd& phi_R_prime, const Dataset& ds, const VectorXd& nom_ddz,
                 int* singular_index) {
  if ((Eigen::Index)selected.size() != phi_R_prime.size())
    throw ConfigError("ddm_error: selected/phi size mismatch");
  if (nom_ddz.size() != ds.n_dof() || nom_ddz.minCoeff() <= 0.0)
    throw ConfigError("ddm_error: bad acceleration normalization");
  if (singular_index) *singular_index = -1;
  VectorXd phi = VectorXd::Zero(m.n_params());
  for (size_t i = 0; i < selected.size(); ++i) phi(selected[i]) = phi_R_prime((Eigen::Index)i);
  const VectorXd inv_nom = nom_ddz.cwiseInverse();
  double num = 0.0, den = 0.0;
  MatrixXd M;
  VectorXd delta;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    mass_and_bias(m, s.z, s.dz, phi, M, delta);
    if (!accumulate_ddm(M, delta, s.tau, s.ddz, inv_nom, num, den)) {
      if (singular_index) *singular_index = (int)i;
      return std::numeric_limits<double>::infinity();
    }
  }
  if (den <= 0.0) throw NumericalError("ddm_error: zero acceleration norm");
  return std::sqrt(num / den);
}

MassBiasCache build_mass_bias_cache(const MultibodyModel& m, const Dataset& ds, int stride) {
  if (stride < 1) throw ConfigError("build_mass_bias_cache: stride must be >= 1");
  MassBiasCache c;
  const int nd = m.n_dof;
  const int np = m.n_params();
  c.n_dof = nd;
  c.n_phi = np;

  if (m.topology == Topology::OpenChain) {
    for (size_t i = 0; i < ds.samples.size(); i += stride) {
      const auto& s = ds.samples[i];
      MatrixXd G(nd * (nd + 1), np);
      const VectorXd zero = VectorXd::Zero(nd);
      MatrixXd K0 = regressor(m, s.z, zero, zero);
      for (int j = 0; j < nd; ++j) {
        MatrixXd Kj = regressor(m, s.z, zero, VectorXd::Unit(nd, j));
        G.middleRows(j * nd, nd) = Kj - K0;
      }
      G.middleRows(nd * nd, nd) = regressor(m, s.z, s.dz, zero);
      c.G.push_back(std::move(G));
      c.ddz.push_back(s.ddz);
      c.tau.push_back(s.tau);
    }
    return c;
  }

  VectorXd warm;
  bool have_warm = false;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (i > 0 && i < ds.t.size() && ds.t[i] <= ds.t[i - 1]) have_warm = false;
    ConstrainedState st = solve_dependent(m, s.z, s.dz, have_warm ? &warm : nullptr);
    warm = st.q;
    have_warm = true;
    if (i % (size_t)stride) continue;
    // One constraint solve per sample; the mass columns need zero-velocity
    // kinematics, which share q (and hence phi_q, Rmat) with the solved state.
    MatrixXd G(nd * (nd + 1), np);
    const VectorXd zero24 = VectorXd::Zero(24);
    MatrixXd A0 = hexaglide_regressor_raw(m, st.q, zero24, zero24);
    for (int j = 0; j < nd; ++j) {
      MatrixXd Aj = hexaglide_regressor_raw(m, st.q, zero24, st.Rmat.col(j));
      G.middleRows(j * nd, nd) = st.Rmat.transpose() * (Aj - A0);
    }
    VectorXd qdd_bias = st.corr;  // ddz = 0
    MatrixXd Ad = hexaglide_regressor_raw(m, st.q, st.dq, qdd_bias);
    G.middleRows(nd * nd, nd) = st.Rmat.transpose() * Ad;
    c.G.push_back(std::move(G));
    c.ddz.push_back(s.ddz);
    c.tau.push_back(s.tau);
  }
  return c;
}

double ddm_error_cached(const MassBiasCache& cache, const std::vector<int>& selected,
                        const VectorXd& phi_R_prime, const VectorXd& nom_ddz,
                        int* singular_index) {
  if ((Eigen::Index)selected.size() != phi_R_prime.size())
    throw ConfigError("ddm_error_cached: selected/phi size mismatch");
  if (nom_ddz.size() != cache.n_dof || nom_ddz.minCoeff() <= 0.0)
    throw ConfigError("ddm_error_cached: bad acceleration normalization");
  if (singular_index) *singular_index = -1;
  const int nd = cache.n_dof;
  VectorXd phi = VectorXd::Zero(cache.n_phi);
  for (size_t i = 0; i < selected.size(); ++i) phi(selected[i]) = phi_R_prime((Eigen::Index)i);
  const VectorXd inv_nom = nom_ddz.cwiseInverse();
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < cache.G.size(); ++i) {
    VectorXd mb = cache.G[i] * phi;
    MatrixXd M = Eigen::Map<const MatrixXd>(mb.data(), nd, nd);
    VectorXd delta = mb.tail(nd);
    if (!accumulate_ddm(M, delta, cache.tau[i], cache.ddz[i], inv_nom, num, den)) {
      if (singular_index) *singular_index = (int)i;
      return std::numeric_limits<double>::infinity();
    }
  }
  if (den <= 0.0) throw NumericalError("ddm_error_cached: zero acceleration norm");
  return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Binary problem file: little-endian, raw doubles. The compressed factor is
// rebuilt on load.

namespace {

constexpr uint32_t kProblemMagic = 0x42525050;  // "PPRB"
constexpr uint32_t kProblemVersion = 1;

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw ConfigError("problem file: truncated");
  return v;
}

void put_string(std::ofstream& f, const std::string& s) {
  put<uint32_t>(f, (uint32_t)s.size());
  f.write(s.data(), (std::streamsize)s.size());
}

std::string get_string(std::ifstream& f) {
  uint32_t n = get<uint32_t>(f);
  if (n > (1u << 20)) throw ConfigError("problem file: corrupt string length");
  std::string s(n, '\0');
  f.read(s.data(), n);
  if (!f) throw ConfigError("problem file: truncated");
  return s;
}

}  // namespace

void save_problem(const RegressionProblem& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  put(f, kProblemMagic);
  put(f, kProblemVersion);
  put_string(f, p.model_fingerprint);
  put<uint32_t>(f, (uint32_t)p.n_dof);
  put<uint64_t>(f, (uint64_t)p.n_samples);
  put<uint32_t>(f, (uint32_t)p.n_phi());
  for (const auto& l : p.labels) put_string(f, l);
  f.write(reinterpret_cast<const char*>(p.nom.data()),
          (std::streamsize)(sizeof(double) * p.nom.size()));
  f.write(reinterpret_cast<const char*>(p.chi.data()),
          (std::streamsize)(sizeof(double) * p.chi.size()));
  f.write(reinterpret_cast<const char*>(p.W.data()),
          (std::streamsize)(sizeof(double) * p.W.size()));
  if (!f) throw ConfigError("write failed: " + path);
}

RegressionProblem load_problem(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path);
  if (get<uint32_t>(f) != kProblemMagic) throw ConfigError("problem file: bad magic");
  if (get<uint32_t>(f) != kProblemVersion) throw ConfigError("problem file: bad version");
  RegressionProblem p;
  p.model_fingerprint = get_string(f);
  p.n_dof = (int)get<uint32_t>(f);
  p.n_samples = (long)get<uint64_t>(f);
  const int np = (int)get<uint32_t>(f);
  if (p.n_dof <= 0 || p.n_samples <= 0 || np <= 0 || p.n_dof > 1000 || np > 100000)
    throw ConfigError("problem file: implausible dimensions");
  p.labels.resize(np);
  for (auto& l : p.labels) l = get_string(f);
  p.nom.resize(p.n_dof);
  f.read(reinterpret_cast<char*>(p.nom.data()), (std::streamsize)(sizeof(double) * p.n_dof));
  const long rows = p.n_samples * p.n_dof;
  p.chi.resize(rows);
  f.read(reinterpret_cast<char*>(p.chi.data()), (std::streamsize)(sizeof(double) * rows));
  p.W.resize(rows, np);
  f.read(reinterpret_cast<char*>(p.W.data()),
         (std::streamsize)(sizeof(double) * p.W.size()));
  if (!f) throw ConfigError("problem file: truncated");
  compress(p);
  return p;
}

}  // namespace paramprune
