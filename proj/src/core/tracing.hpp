#pragma once

#include <Eigen/Dense>
#include <vector>

#include "core/exprdag.hpp"
#include "core/model.hpp"

namespace paramprune {

// Symbolic trace of the inverse dynamics. Open chain: inputs z[i], dz[i],
// ddz[i], outputs tau[i]. Closed loop: the full-coordinate generalized force
// vector with inputs q[i], dq[i], ddq[i] and outputs d_q[i]; the projection
// onto the independent coordinates stays numeric.
ExprDag trace_idm(const MultibodyModel& m);

// Symbolic trace of the mass matrix and velocity/gravity bias, outputs
// M[i][j] and delta[i] over inputs z[i], dz[i] (q[i], dq[i] on the closed
// loop). Mass columns are traced with gravity removed so no differencing
// residue is left in the graph.
ExprDag trace_mass_bias(const MultibodyModel& m);

// Operation count of the dag once the removed parameters are substituted
// with zero. Retained parameters stay symbolic, so the count reflects the
// structural shrinkage of the reduced model rather than incidental folding
// of particular parameter values.
OpCount reduced_op_count(const ExprDag& dag, const MultibodyModel& m,
                         const std::vector<int>& selected);

}  // namespace paramprune
