#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/reduction.hpp"

namespace paramprune {

// Output of one selection heuristic run. Heuristics always run to completion
// (all n_phi parameters ordered) so the full error-vs-k curve is available;
// the stop markers are derived from the curve and the tolerance afterwards.
//
// For qr/fs/be the k-parameter model is the prefix of `ordering` of length k
// and `sets` is redundant with it. The two-pass variant revises earlier picks,
// so its per-k working sets are not nested and `sets` is authoritative there;
// `ordering` then lists parameters by the step of their final insertion.
struct SelectionTrace {
  std::string heuristic;               // "qr" | "fs" | "be" | "fs2"
  std::vector<int> ordering;           // permutation of column indices
  std::vector<std::vector<int>> sets;  // sets[k-1] = k-parameter model, ascending
  Eigen::VectorXd eps_est;             // eps_est(k-1) = idm error of sets[k-1]
  Eigen::VectorXd eps_val;             // NaN until evaluate_validation fills it
  double tol = 0.0;
  int stop_k = -1;      // smallest k meeting the stop rule, -1 if never met
  int overshoot_k = -1; // be only: set size at which its removal loop exits
};

// Column ordering of a pivoted QR on the weighted observation matrix; error
// curve by refitting each pivot prefix.
SelectionTrace qr_heuristic(const RegressionProblem& p, double tol);

// Iteratively removes the parameter whose removal increases the estimation
// error least. Ties go to the lowest column index. `ordering` is the reverse
// of the removal sequence so prefixes are the surviving sets.
SelectionTrace backward_elimination(const RegressionProblem& p, double tol);

// Iteratively adds the parameter that decreases the estimation error most.
// Candidates are scored through an incrementally updated orthogonal basis;
// from_scratch forces an independent least-squares solve per candidate
// instead (the two must agree, see tests).
SelectionTrace forward_selection(const RegressionProblem& p, double tol,
                                 bool from_scratch = false);

// Forward selection with a revision pass: each iteration adds the best
// candidate, drops the parameter added in the previous iteration, then adds
// the best candidate again. max_iterations <= 0 means n_phi + 4.
SelectionTrace forward_selection_two_pass(const RegressionProblem& p, double tol,
                                          int max_iterations = 0);

// id is one of qr | fs | be | fs2.
SelectionTrace run_heuristic(const RegressionProblem& p, const std::string& id,
                             double tol);

// True minimizer of the estimation error over all k-subsets. Guarded to
// n_phi <= 20; cost grows as C(n_phi, k).
std::pair<std::vector<int>, double> exhaustive_best_subset(const RegressionProblem& p,
                                                           int k);

// Fills eps_val by refitting every recorded set on the validation problem.
void evaluate_validation(SelectionTrace& tr, const RegressionProblem& val);

std::string trace_to_json(const SelectionTrace& tr,
                          const std::vector<std::string>& labels);
SelectionTrace trace_from_json(const std::string& text,
                               const std::vector<std::string>& labels);

}  // namespace paramprune
