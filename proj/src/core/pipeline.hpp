#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/excitation.hpp"
#include "core/model.hpp"
#include "core/reduction.hpp"
#include "core/selection.hpp"
#include "core/tracing.hpp"

namespace paramprune {

struct PipelineConfig {
  std::string model;  // "puma560", "hexaglide", or a model json path
  std::string excitation_json = "{}";      // overrides on default_excitation
  std::string excitation_val_json = "";    // validation overrides; "" inherits excitation_json
  std::vector<std::string> heuristics{"qr", "fs", "be", "fs2"};
  double tol = 1e-2;
  double rank_tol = 1e-8;
  uint64_t seed_est = 1, seed_val = 2;
  int selected_k = 0;  // 0: half the numeric rank
  bool optimize_excitation = false;
  int ddm_stride = 1;  // sample stride for the acceleration-error curves
  std::string out_dir = "out";
  std::string cache_dir;  // defaults to out_dir + "/cache"
};

PipelineConfig pipeline_config_from_json(const std::string& text);

struct HeuristicSummary {
  std::string heuristic;
  int n_phi = 0, rank = 0, k = 0;
  int stop_k = -1, overshoot_k = -1;
  double eps_tau_est = 0, eps_tau_val = 0;
  double eps_ddz_est = 0, eps_ddz_val = 0;
  long n_op_idm_full = 0, n_op_idm = 0;
  long n_op_ddm_full = 0, n_op_ddm = 0;
};

struct PipelineResult {
  std::string out_dir;
  std::string model_fingerprint;
  int n_phi = 0, rank = 0;
  std::vector<HeuristicSummary> summary;
  std::vector<std::string> artifacts;  // paths relative to out_dir
};

// Everything needed to turn a selection trace into report numbers without
// re-running excitation: problems, acceleration caches and traced dags.
struct ReportContext {
  MultibodyModel model;
  RegressionProblem est, val;
  MassBiasCache ddm_est, ddm_val;
  Eigen::VectorXd nom_ddz_est, nom_ddz_val;
  ExprDag idm_dag, mb_dag;
  long n_op_idm_full = 0, n_op_ddm_full = 0;
  int rank = 0;
  double rank_tol = 1e-8;
};

ReportContext make_report_context(const MultibodyModel& m, const Dataset& est,
                                  const Dataset& val, double rank_tol,
                                  int ddm_stride);

inline const char* kPlotHeader =
    "heuristic,k,eps_tau_est,eps_tau_val,eps_ddz_est,eps_ddz_val,n_op_idm,n_op_ddm\n";

// Long-format curve rows over k = 1..n_phi for one trace (no header). The
// trace must carry validation errors already.
std::string plot_data(const ReportContext& ctx, const SelectionTrace& tr);

// Reduction report for one trace: ordering, per-k errors and op counts, and
// the selected-k model (phi_R_prime fitted on estimation data, beta block).
std::string report_json(const ReportContext& ctx, const SelectionTrace& tr, int k);

// Normalized torque overlay on the validation problem for the k-model:
// t,coord,tau_ref,tau_red with forces scaled by the nominal force.
std::string overlay_csv(const ReportContext& ctx, const Dataset& val,
                        const SelectionTrace& tr, int k);

HeuristicSummary summarize(const ReportContext& ctx, const SelectionTrace& tr, int k);

// Full run: model, excitation, datasets (content-addressed cache), problems,
// every configured heuristic, plot/report/summary/overlay artifacts.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// Rebuilds all report artifacts from saved intermediates (model file or id,
// dataset CSVs, trace JSONs); no excitation or selection is re-run.
PipelineResult report_from_artifacts(const std::string& model_ref,
                                     const std::vector<std::string>& trace_paths,
                                     const std::string& data_est_csv,
                                     const std::string& data_val_csv,
                                     double rank_tol, int selected_k,
                                     int ddm_stride, const std::string& out_dir);

// Resolves "puma560"/"hexaglide" to the built-in models, else loads the path.
MultibodyModel resolve_model(const std::string& ref);

}  // namespace paramprune
