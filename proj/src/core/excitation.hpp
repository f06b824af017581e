#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core/dynamics.hpp"
#include "core/model.hpp"

namespace paramprune {

// Finite Fourier series per coordinate:
//   z_i(t) = q0_i + sum_k a_ik sin(k w t) + b_ik cos(k w t),  k = 1..H.
struct FourierTrajectory {
  double omega = 0.0;
  int harmonics = 0;
  Eigen::VectorXd q0;  // n_dof
  Eigen::MatrixXd a;   // n_dof x H
  Eigen::MatrixXd b;   // n_dof x H
  double kappa = 0.0;  // condition number on the sampling grid, filled by the optimizer

  int n_dof() const { return (int)q0.size(); }
  int n_traj_params() const { return n_dof() * (2 * harmonics + 1); }
};

struct ExcitationConfig {
  double period = 0.0;
  int harmonics = 0;
  int samples_per_traj = 0;
  int n_trajectories = 0;
  Eigen::VectorXd z_min, z_max;    // per coordinate
  Eigen::VectorXd dz_min, dz_max;  // per coordinate
  bool check_workspace = false;

  // Optimizer settings.
  int n_starts = 8;
  int max_iterations = 250;
  int objective_samples = 20;  // time grid used inside the objective
  int max_start_retries = 40;
  int target_rank = 0;  // 0: probe with random trajectories
  double penalty_weight = 1e5;

  double omega() const { return 2.0 * M_PI / period; }
};

// Paper-style defaults for the two reference machines.
ExcitationConfig default_excitation(const MultibodyModel& m);

void eval_trajectory(const FourierTrajectory& traj, double t, Eigen::VectorXd& z,
                     Eigen::VectorXd& dz, Eigen::VectorXd& ddz);

// kappa = sigma_1 / sigma_r with r the numeric rank at rel_tol.
double condition_number(const Eigen::MatrixXd& W, double rel_tol = 1e-8);

// Bound-respecting random trajectory; retries with shrinking amplitudes until
// the workspace check passes (when enabled).
FourierTrajectory random_feasible_trajectory(const MultibodyModel& m,
                                             const ExcitationConfig& cfg, uint64_t seed);

// Multi-start penalty Nelder-Mead minimization of the observation-matrix
// condition number. Deterministic for fixed (model, cfg, seed).
FourierTrajectory optimize_trajectory(const MultibodyModel& m, const ExcitationConfig& cfg,
                                      uint64_t seed);

// cfg.n_trajectories independent runs with per-index derived seeds.
std::vector<FourierTrajectory> optimize_trajectory_set(const MultibodyModel& m,
                                                       const ExcitationConfig& cfg,
                                                       uint64_t seed);

// Evenly spaced samples over one period per trajectory; tau from the
// full-parameter inverse dynamics (noise free).
Dataset sample_dataset(const MultibodyModel& m, const std::vector<FourierTrajectory>& trajs,
                       const ExcitationConfig& cfg);

std::string trajectories_to_json(const std::vector<FourierTrajectory>& trajs);
std::vector<FourierTrajectory> trajectories_from_json(const std::string& text);
void save_trajectories(const std::vector<FourierTrajectory>& trajs, const std::string& path);
std::vector<FourierTrajectory> load_trajectories(const std::string& path);

std::string excitation_config_to_json(const ExcitationConfig& cfg);
// Missing keys fall back to default_excitation(m).
ExcitationConfig excitation_config_from_json(const MultibodyModel& m, const std::string& text);

}  // namespace paramprune
