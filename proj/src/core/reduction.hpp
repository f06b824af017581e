#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "core/dynamics.hpp"
#include "core/model.hpp"

namespace paramprune {

// Weighted linear regression problem tau = W phi stacked over a dataset.
// sigma^{1/2} is block diagonal with one diag(nom) block per sample; all
// fitting happens on sigma^{-1/2}-scaled quantities.
struct RegressionProblem {
  Eigen::MatrixXd W;    // (n_samples*n_dof) x n_phi, unweighted
  Eigen::VectorXd chi;  // stacked forces
  Eigen::VectorXd nom;  // per-coordinate nominal force (sigma^{1/2} diagonal block)
  std::vector<std::string> labels;
  std::string model_fingerprint;
  int n_dof = 0;
  long n_samples = 0;

  // Upper-triangular QR factor of [sigma^{-1/2} W, sigma^{-1/2} chi],
  // (n_phi+1) x (n_phi+1). Column subset least squares, residual norms and
  // singular values are all computed in this compressed space.
  Eigen::MatrixXd T;

  int n_phi() const { return (int)W.cols(); }
};

struct ReducedModel {
  std::vector<int> selected;  // ordered column indices
  std::vector<int> excluded;
  Eigen::MatrixXd beta;          // |selected| x |excluded|
  Eigen::VectorXd phi_R_prime;   // aligned with selected
  double eps_tau_est = 0.0, eps_tau_val = 0.0;
  double eps_ddz_est = 0.0, eps_ddz_val = 0.0;
  std::string heuristic;
  long n_ops_idm = -1, n_ops_ddm = -1;
};

RegressionProblem assemble(const MultibodyModel& m, const Dataset& ds);

// Problem from explicit matrices (synthetic/test use). Labels default to
// c0..c{n-1}; nom length fixes n_dof and must divide the row count.
RegressionProblem make_problem(const Eigen::MatrixXd& W, const Eigen::VectorXd& chi,
                               const Eigen::VectorXd& nom,
                               std::vector<std::string> labels = {});

// Count of singular values of sigma^{-1/2}W above rel_tol * sigma_1.
int numeric_rank(const RegressionProblem& p, double rel_tol = 1e-8);

// Least-squares projection coefficients of the excluded columns onto the
// selected ones (weighted). Column-pivoted QR; minimum-norm SVD solve with
// *rank_deficient set when the selected block is rank deficient.
Eigen::MatrixXd beta_coeffs(const RegressionProblem& p, const std::vector<int>& selected,
                            bool* rank_deficient = nullptr);

// Weighted least-squares fit of chi on the selected columns; verified against
// phi_R + beta*phi_E (throws NumericalError beyond 1e-6 relative).
Eigen::VectorXd generalized_base(const RegressionProblem& p, const std::vector<int>& selected,
                                 const Eigen::VectorXd& phi_full);

// Normalized force prediction error with the selected-column refit on p.
// Empty selection returns exactly 1.
double idm_error(const RegressionProblem& p, const std::vector<int>& selected);

// Base parameter set from pivoted QR at the numeric rank.
ReducedModel exact_base_parameters(const RegressionProblem& p);

// Per-coordinate RMS of the accelerations over a dataset.
Eigen::VectorXd nominal_ddz(const Dataset& ds);

// Normalized acceleration prediction error of the reduced forward dynamics
// (excluded parameters zeroed). A singular mass matrix at any sample yields
// +inf and reports the sample index.
double ddm_error(const MultibodyModel& m, const std::vector<int>& selected,
                 const Eigen::VectorXd& phi_R_prime, const Dataset& ds,
                 const Eigen::VectorXd& nom_ddz, int* singular_index = nullptr);

// Per-sample linear maps phi -> [M columns, delta]; lets ddm_error run over
// many candidate sets without re-solving the dynamics.
struct MassBiasCache {
  int n_dof = 0, n_phi = 0;
  std::vector<Eigen::MatrixXd> G;  // (n_dof*(n_dof+1)) x n_phi per sample
  std::vector<Eigen::VectorXd> ddz, tau;
};

MassBiasCache build_mass_bias_cache(const MultibodyModel& m, const Dataset& ds, int stride = 1);
double ddm_error_cached(const MassBiasCache& cache, const std::vector<int>& selected,
                        const Eigen::VectorXd& phi_R_prime, const Eigen::VectorXd& nom_ddz,
                        int* singular_index = nullptr);

void save_problem(const RegressionProblem& p, const std::string& path);
RegressionProblem load_problem(const std::string& path);

}  // namespace paramprune
