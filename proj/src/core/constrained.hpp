#pragma once

#include <Eigen/Dense>

#include "core/model.hpp"

namespace paramprune {

// Solved configuration of the 6-PUS machine. q = [d; z] with the 18
// dependent coordinates first (12 universal-joint angles, 6 head pose) and
// the 6 carriage heights last.
struct ConstrainedState {
  Eigen::VectorXd q;           // 24
  Eigen::VectorXd dq;          // 24
  Eigen::MatrixXd phi_q;       // 18 x 24, [phi_d | phi_z]
  Eigen::MatrixXd Rmat;        // 24 x 6, orthogonal complement
  Eigen::VectorXd gamma_term;  // 18, acceleration-level constraint rhs
  Eigen::VectorXd corr;        // 24 = [phi_d^-1 gamma; 0]
  double cond_phid = 0.0;
};

struct ProjectedDynamics {
  Eigen::VectorXd d_z;      // 6
  Eigen::MatrixXd M_zz;     // 6 x 6
  Eigen::VectorXd delta_z;  // 6
  Eigen::MatrixXd K_zphi;   // 6 x n_phi
  Eigen::VectorXd tau_z;    // 6
};

Eigen::VectorXd constraint_residual(const MultibodyModel& m, const Eigen::VectorXd& q);
Eigen::MatrixXd constraint_jacobian(const MultibodyModel& m, const Eigen::VectorXd& q);
Eigen::VectorXd gamma_rhs(const MultibodyModel& m, const Eigen::VectorXd& q,
                          const Eigen::VectorXd& dq);

ConstrainedState solve_dependent(const MultibodyModel& m, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& dz,
                                 const Eigen::VectorXd* warm_q = nullptr);

Eigen::MatrixXd ortho_complement(const ConstrainedState& st);

ProjectedDynamics project_to_independent(const MultibodyModel& m,
                                         const ConstrainedState& st,
                                         const Eigen::VectorXd& ddz,
                                         const Eigen::VectorXd& phi);

// Raw 24 x 70 slot regressor of the full-coordinate forces at a given full
// state (no constraint handling).
Eigen::MatrixXd hexaglide_regressor_raw(const MultibodyModel& m, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& dq,
                                        const Eigen::VectorXd& ddq);

// Projected regressor K_z (6 x n_phi) at a solved state, with qdd built from ddz.
Eigen::MatrixXd projected_regressor(const MultibodyModel& m, const ConstrainedState& st,
                                    const Eigen::VectorXd& ddz);

double hexaglide_energy(const MultibodyModel& m, const ConstrainedState& st,
                        const Eigen::VectorXd& phi);

}  // namespace paramprune
