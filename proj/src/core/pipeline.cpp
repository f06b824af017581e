#include "core/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <utility>

#include "core/io_util.hpp"
#include "core/rng.hpp"

namespace fs = std::filesystem;

namespace paramprune {
namespace {

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(name + ": " + e.what());
  }
}

std::string num(double v) {
  char buf[32];
  snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Per-k curve data shared by the plot CSV and the report JSON. Acceleration
// errors are refit on the problem they are evaluated on, like idm_error.
struct CurveData {
  Eigen::VectorXd ddz_est, ddz_val;
  std::vector<long> op_idm, op_ddm;
};

CurveData curve_data(const ReportContext& ctx, const SelectionTrace& tr) {
  const int n = ctx.est.n_phi();
  const Eigen::VectorXd phi_full = ctx.model.phi_full();
  CurveData c;
  c.ddz_est.resize(n);
  c.ddz_val.resize(n);
  c.op_idm.resize(n);
  c.op_ddm.resize(n);
  for (int k = 1; k <= n; ++k) {
    const std::vector<int>& set = tr.sets[k - 1];
    Eigen::VectorXd fe = generalized_base(ctx.est, set, phi_full);
    Eigen::VectorXd fv = generalized_base(ctx.val, set, phi_full);
    c.ddz_est(k - 1) = ddm_error_cached(ctx.ddm_est, set, fe, ctx.nom_ddz_est);
    c.ddz_val(k - 1) = ddm_error_cached(ctx.ddm_val, set, fv, ctx.nom_ddz_val);
    c.op_idm[k - 1] = reduced_op_count(ctx.idm_dag, ctx.model, set).total();
    c.op_ddm[k - 1] = reduced_op_count(ctx.mb_dag, ctx.model, set).total();
  }
  return c;
}

std::string plot_rows(const ReportContext& ctx, const SelectionTrace& tr,
                      const CurveData& c) {
  std::string out;
  for (int k = 1; k <= ctx.est.n_phi(); ++k) {
    out += tr.heuristic + "," + std::to_string(k) + "," +
           num(tr.eps_est(k - 1)) + "," + num(tr.eps_val(k - 1)) + "," +
           num(c.ddz_est(k - 1)) + "," + num(c.ddz_val(k - 1)) + "," +
           std::to_string(c.op_idm[k - 1]) + "," +
           std::to_string(c.op_ddm[k - 1]) + "\n";
  }
  return out;
}

nlohmann::json report_object(const ReportContext& ctx, const SelectionTrace& tr,
                             const CurveData& c, int k) {
  const std::vector<std::string>& labels = ctx.est.labels;
  nlohmann::json j;
  j["heuristic"] = tr.heuristic;
  j["tol"] = tr.tol;
  j["k"] = k;
  j["rank"] = ctx.rank;
  j["stop_k"] = tr.stop_k;
  j["overshoot_k"] = tr.overshoot_k;
  j["n_ops_idm_full"] = ctx.n_op_idm_full;
  j["n_ops_ddm_full"] = ctx.n_op_ddm_full;
  nlohmann::json ord = nlohmann::json::array();
  for (int idx : tr.ordering) ord.push_back(labels[idx]);
  j["ordering"] = ord;

  nlohmann::json per_k = nlohmann::json::array();
  for (int kk = 1; kk <= ctx.est.n_phi(); ++kk) {
    nlohmann::json row;
    row["k"] = kk;
    nlohmann::json sel = nlohmann::json::array();
    for (int idx : tr.sets[kk - 1]) sel.push_back(labels[idx]);
    row["selected_labels"] = sel;
    row["eps_tau_est"] = tr.eps_est(kk - 1);
    row["eps_tau_val"] = tr.eps_val(kk - 1);
    row["eps_ddz_est"] = c.ddz_est(kk - 1);
    row["eps_ddz_val"] = c.ddz_val(kk - 1);
    row["n_ops_idm"] = c.op_idm[kk - 1];
    row["n_ops_ddm"] = c.op_ddm[kk - 1];
    per_k.push_back(row);
  }
  j["per_k"] = per_k;

  const std::vector<int>& set = tr.sets[k - 1];
  Eigen::VectorXd phi = generalized_base(ctx.est, set, ctx.model.phi_full());
  nlohmann::json pv = nlohmann::json::array();
  for (int i = 0; i < phi.size(); ++i) pv.push_back(phi(i));
  j["phi_R_prime"] = pv;
  Eigen::MatrixXd beta = beta_coeffs(ctx.est, set);
  nlohmann::json bm = nlohmann::json::array();
  for (int r = 0; r < beta.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int cidx = 0; cidx < beta.cols(); ++cidx) row.push_back(beta(r, cidx));
    bm.push_back(row);
  }
  j["beta"] = bm;
  return j;
}

HeuristicSummary summary_from(const ReportContext& ctx, const SelectionTrace& tr,
                              const CurveData& c, int k) {
  HeuristicSummary s;
  s.heuristic = tr.heuristic;
  s.n_phi = ctx.est.n_phi();
  s.rank = ctx.rank;
  s.k = k;
  s.stop_k = tr.stop_k;
  s.overshoot_k = tr.overshoot_k;
  s.eps_tau_est = tr.eps_est(k - 1);
  s.eps_tau_val = tr.eps_val(k - 1);
  s.eps_ddz_est = c.ddz_est(k - 1);
  s.eps_ddz_val = c.ddz_val(k - 1);
  s.n_op_idm_full = ctx.n_op_idm_full;
  s.n_op_idm = c.op_idm[k - 1];
  s.n_op_ddm_full = ctx.n_op_ddm_full;
  s.n_op_ddm = c.op_ddm[k - 1];
  return s;
}

std::string summary_csv(const std::vector<HeuristicSummary>& rows) {
  std::string s =
      "heuristic,n_phi,rank,k,stop_k,overshoot_k,eps_tau_est,eps_tau_val,"
      "eps_ddz_est,eps_ddz_val,n_op_idm_full,n_op_idm,idm_op_ratio,"
      "n_op_ddm_full,n_op_ddm,ddm_op_ratio\n";
  for (const HeuristicSummary& r : rows) {
    s += r.heuristic + "," + std::to_string(r.n_phi) + "," +
         std::to_string(r.rank) + "," + std::to_string(r.k) + "," +
         std::to_string(r.stop_k) + "," + std::to_string(r.overshoot_k) + "," +
         num(r.eps_tau_est) + "," + num(r.eps_tau_val) + "," +
         num(r.eps_ddz_est) + "," + num(r.eps_ddz_val) + "," +
         std::to_string(r.n_op_idm_full) + "," + std::to_string(r.n_op_idm) +
         "," + num(1.0 - (double)r.n_op_idm / (double)r.n_op_idm_full) + "," +
         std::to_string(r.n_op_ddm_full) + "," + std::to_string(r.n_op_ddm) +
         "," + num(1.0 - (double)r.n_op_ddm / (double)r.n_op_ddm_full) + "\n";
  }
  return s;
}

// Emits all per-trace artifacts and the shared plot/summary/manifest files.
void emit_reports(const ReportContext& ctx, const Dataset& ds_val,
                  const std::vector<SelectionTrace>& traces, int k_sel,
                  nlohmann::json manifest, PipelineResult& res) {
  std::string plots = kPlotHeader;
  for (const SelectionTrace& tr : traces) {
    CurveData c = stage("report(" + tr.heuristic + ")",
                        [&] { return curve_data(ctx, tr); });
    plots += plot_rows(ctx, tr, c);
    std::string rj =
        report_object(ctx, tr, c, k_sel).dump(2) + "\n";
    write_file(res.out_dir + "/report_" + tr.heuristic + ".json", rj);
    res.artifacts.push_back("report_" + tr.heuristic + ".json");
    write_file(res.out_dir + "/tau_overlay_" + tr.heuristic + ".csv",
               overlay_csv(ctx, ds_val, tr, k_sel));
    res.artifacts.push_back("tau_overlay_" + tr.heuristic + ".csv");
    res.summary.push_back(summary_from(ctx, tr, c, k_sel));
  }
  write_file(res.out_dir + "/plot_data.csv", plots);
  res.artifacts.push_back("plot_data.csv");
  write_file(res.out_dir + "/summary.csv", summary_csv(res.summary));
  res.artifacts.push_back("summary.csv");

  manifest["fingerprint"] = res.model_fingerprint;
  manifest["n_phi"] = res.n_phi;
  manifest["rank"] = res.rank;
  manifest["selected_k"] = k_sel;
  nlohmann::json sm = nlohmann::json::array();
  for (const HeuristicSummary& r : res.summary) {
    nlohmann::json row;
    row["heuristic"] = r.heuristic;
    row["n_phi"] = r.n_phi;
    row["rank"] = r.rank;
    row["k"] = r.k;
    row["stop_k"] = r.stop_k;
    row["overshoot_k"] = r.overshoot_k;
    row["eps_tau_est"] = r.eps_tau_est;
    row["eps_tau_val"] = r.eps_tau_val;
    row["eps_ddz_est"] = r.eps_ddz_est;
    row["eps_ddz_val"] = r.eps_ddz_val;
    row["n_op_idm_full"] = r.n_op_idm_full;
    row["n_op_idm"] = r.n_op_idm;
    row["n_op_ddm_full"] = r.n_op_ddm_full;
    row["n_op_ddm"] = r.n_op_ddm;
    sm.push_back(row);
  }
  manifest["summary"] = sm;
  nlohmann::json arts = nlohmann::json::array();
  for (const std::string& a : res.artifacts) arts.push_back(a);
  manifest["artifacts"] = arts;
  write_file(res.out_dir + "/report.json", manifest.dump(2) + "\n");
  res.artifacts.push_back("report.json");
}

}  // namespace

MultibodyModel resolve_model(const std::string& ref) {
  if (ref == "puma560") return build_puma560();
  if (ref == "hexaglide") return build_hexaglide();
  if (!fs::exists(ref)) throw ConfigError("model '" + ref + "' is neither a built-in id nor an existing file");
  return load_model(ref);
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  PipelineConfig cfg;
  const std::set<std::string> known = {
      "model",      "excitation",          "excitation_val", "heuristics",
      "tol",        "rank_tol",            "seed_est",       "seed_val",
      "selected_k", "optimize_excitation", "ddm_stride",     "out_dir",
      "cache_dir"};
  try {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key()))
        throw ConfigError("pipeline config: unknown key '" + it.key() + "'");
    cfg.model = j.at("model");
    if (j.contains("excitation")) cfg.excitation_json = j["excitation"].dump();
    if (j.contains("excitation_val"))
      cfg.excitation_val_json = j["excitation_val"].dump();
    if (j.contains("heuristics")) {
      cfg.heuristics.clear();
      for (const auto& h : j["heuristics"]) cfg.heuristics.push_back(h);
    }
    if (j.contains("tol")) cfg.tol = j["tol"];
    if (j.contains("rank_tol")) cfg.rank_tol = j["rank_tol"];
    if (j.contains("seed_est")) cfg.seed_est = j["seed_est"];
    if (j.contains("seed_val")) cfg.seed_val = j["seed_val"];
    if (j.contains("selected_k")) cfg.selected_k = j["selected_k"];
    if (j.contains("optimize_excitation"))
      cfg.optimize_excitation = j["optimize_excitation"];
    if (j.contains("ddm_stride")) cfg.ddm_stride = j["ddm_stride"];
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"];
    if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  if (!(cfg.tol > 0.0 && cfg.tol < 1.0))
    throw ConfigError("pipeline config: tol must lie in (0, 1)");
  if (!(cfg.rank_tol > 0.0 && cfg.rank_tol < 1.0))
    throw ConfigError("pipeline config: rank_tol must lie in (0, 1)");
  if (cfg.heuristics.empty())
    throw ConfigError("pipeline config: heuristics must not be empty");
  std::set<std::string> seen;
  for (const std::string& h : cfg.heuristics) {
    if (h != "qr" && h != "fs" && h != "be" && h != "fs2")
      throw ConfigError("pipeline config: unknown heuristic '" + h + "'");
    if (!seen.insert(h).second)
      throw ConfigError("pipeline config: heuristic '" + h + "' listed twice");
  }
  if (cfg.selected_k < 0)
    throw ConfigError("pipeline config: selected_k must be >= 0");
  if (cfg.ddm_stride < 1)
    throw ConfigError("pipeline config: ddm_stride must be >= 1");
  if (cfg.seed_est == cfg.seed_val)
    throw ConfigError("pipeline config: estimation and validation seeds must differ");
  return cfg;
}

ReportContext make_report_context(const MultibodyModel& m, const Dataset& est,
                                  const Dataset& val, double rank_tol,
                                  int ddm_stride) {
  ReportContext ctx;
  ctx.model = m;
  ctx.rank_tol = rank_tol;
  ctx.est = assemble(m, est);
  ctx.val = assemble(m, val);
  ctx.rank = numeric_rank(ctx.est, rank_tol);
  ctx.ddm_est = build_mass_bias_cache(m, est, ddm_stride);
  ctx.ddm_val = build_mass_bias_cache(m, val, ddm_stride);
  ctx.nom_ddz_est = nominal_ddz(est);
  ctx.nom_ddz_val = nominal_ddz(val);
  ctx.idm_dag = trace_idm(m);
  ctx.mb_dag = trace_mass_bias(m);
  ctx.n_op_idm_full = ctx.idm_dag.simplified().count_ops().total();
  ctx.n_op_ddm_full = ctx.mb_dag.simplified().count_ops().total();
  return ctx;
}

std::string plot_data(const ReportContext& ctx, const SelectionTrace& tr) {
  return plot_rows(ctx, tr, curve_data(ctx, tr));
}

std::string report_json(const ReportContext& ctx, const SelectionTrace& tr, int k) {
  return report_object(ctx, tr, curve_data(ctx, tr), k).dump(2) + "\n";
}

std::string overlay_csv(const ReportContext& ctx, const Dataset& val,
                        const SelectionTrace& tr, int k) {
  // The overlay shows the shipped model: fitted on estimation data, applied
  // to the validation trajectory.
  const std::vector<int>& set = tr.sets[k - 1];
  Eigen::VectorXd fit = generalized_base(ctx.est, set, ctx.model.phi_full());
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(ctx.est.n_phi());
  for (size_t i = 0; i < set.size(); ++i) padded(set[i]) = fit((Eigen::Index)i);
  Eigen::VectorXd pred = ctx.val.W * padded;

  const int nd = ctx.val.n_dof;
  std::string out = "t,coord,tau_ref,tau_red\n";
  for (long s = 0; s < ctx.val.n_samples; ++s)
    for (int c = 0; c < nd; ++c) {
      double scale = ctx.val.nom(c);
      out += num(val.t[(size_t)s]) + "," + std::to_string(c + 1) + "," +
             num(ctx.val.chi(s * nd + c) / scale) + "," +
             num(pred(s * nd + c) / scale) + "\n";
    }
  return out;
}

HeuristicSummary summarize(const ReportContext& ctx, const SelectionTrace& tr,
                           int k) {
  return summary_from(ctx, tr, curve_data(ctx, tr), k);
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult res;
  res.out_dir = cfg.out_dir;
  fs::create_directories(cfg.out_dir);
  const std::string cache =
      cfg.cache_dir.empty() ? cfg.out_dir + "/cache" : cfg.cache_dir;
  fs::create_directories(cache);

  MultibodyModel m = stage("model", [&] { return resolve_model(cfg.model); });
  ExcitationConfig exc_est = stage("excitation-config", [&] {
    return excitation_config_from_json(m, cfg.excitation_json);
  });
  ExcitationConfig exc_val = stage("excitation-config(val)", [&] {
    return excitation_config_from_json(m, cfg.excitation_val_json.empty()
                                              ? cfg.excitation_json
                                              : cfg.excitation_val_json);
  });
  save_model(m, cfg.out_dir + "/model.json");
  res.artifacts.push_back("model.json");

  auto dataset_for = [&](const ExcitationConfig& exc, uint64_t seed,
                         const char* role) {
    const std::string key = hash_hex(content_hash(
        m.fingerprint() + "|" + excitation_config_to_json(exc) + "|" +
        std::to_string(seed) + "|" + (cfg.optimize_excitation ? "opt" : "rand")));
    const std::string tname = "traj_" + key + ".json";
    const std::string dname = "data_" + key + ".csv";
    res.artifacts.push_back("cache/" + tname);
    res.artifacts.push_back("cache/" + dname);
    if (fs::exists(cache + "/" + dname))
      return load_dataset(cache + "/" + dname);
    std::vector<FourierTrajectory> trajs;
    if (fs::exists(cache + "/" + tname)) {
      trajs = load_trajectories(cache + "/" + tname);
    } else {
      trajs = stage(std::string("excitation(") + role + ")", [&] {
        if (cfg.optimize_excitation) return optimize_trajectory_set(m, exc, seed);
        std::vector<FourierTrajectory> ts;
        for (int i = 0; i < exc.n_trajectories; ++i)
          ts.push_back(random_feasible_trajectory(m, exc, mix_seed(seed, (uint64_t)i)));
        return ts;
      });
      save_trajectories(trajs, cache + "/" + tname);
    }
    Dataset ds = stage(std::string("dataset(") + role + ")",
                       [&] { return sample_dataset(m, trajs, exc); });
    save_dataset(ds, cache + "/" + dname);
    return ds;
  };
  Dataset ds_est = dataset_for(exc_est, cfg.seed_est, "est");
  Dataset ds_val = dataset_for(exc_val, cfg.seed_val, "val");

  ReportContext ctx = stage("assemble", [&] {
    return make_report_context(m, ds_est, ds_val, cfg.rank_tol, cfg.ddm_stride);
  });
  res.model_fingerprint = m.fingerprint();
  res.n_phi = ctx.est.n_phi();
  res.rank = ctx.rank;
  const int k_sel =
      cfg.selected_k > 0 ? cfg.selected_k : std::max(1, ctx.rank / 2);
  if (k_sel > ctx.est.n_phi())
    throw ConfigError("pipeline: selected_k exceeds the parameter count");

  std::vector<SelectionTrace> traces;
  for (const std::string& h : cfg.heuristics) {
    SelectionTrace tr = stage("reduce(" + h + ")",
                              [&] { return run_heuristic(ctx.est, h, cfg.tol); });
    stage("validate(" + h + ")", [&] {
      evaluate_validation(tr, ctx.val);
      return 0;
    });
    write_file(cfg.out_dir + "/trace_" + h + ".json",
               trace_to_json(tr, ctx.est.labels));
    res.artifacts.push_back("trace_" + h + ".json");
    traces.push_back(std::move(tr));
  }

  nlohmann::json manifest;
  manifest["model"] = cfg.model;
  manifest["tol"] = cfg.tol;
  manifest["rank_tol"] = cfg.rank_tol;
  manifest["seed_est"] = cfg.seed_est;
  manifest["seed_val"] = cfg.seed_val;
  manifest["optimize_excitation"] = cfg.optimize_excitation;
  manifest["ddm_stride"] = cfg.ddm_stride;
  manifest["heuristics"] = cfg.heuristics;
  emit_reports(ctx, ds_val, traces, k_sel, std::move(manifest), res);
  return res;
}

PipelineResult report_from_artifacts(const std::string& model_ref,
                                     const std::vector<std::string>& trace_paths,
                                     const std::string& data_est_csv,
                                     const std::string& data_val_csv,
                                     double rank_tol, int selected_k,
                                     int ddm_stride, const std::string& out_dir) {
  PipelineResult res;
  res.out_dir = out_dir;
  fs::create_directories(out_dir);
  MultibodyModel m = stage("model", [&] { return resolve_model(model_ref); });
  Dataset ds_est = stage("dataset(est)", [&] { return load_dataset(data_est_csv); });
  Dataset ds_val = stage("dataset(val)", [&] { return load_dataset(data_val_csv); });
  ReportContext ctx = stage("assemble", [&] {
    return make_report_context(m, ds_est, ds_val, rank_tol, ddm_stride);
  });
  res.model_fingerprint = m.fingerprint();
  res.n_phi = ctx.est.n_phi();
  res.rank = ctx.rank;
  const int k_sel = selected_k > 0 ? selected_k : std::max(1, ctx.rank / 2);
  if (k_sel > ctx.est.n_phi())
    throw ConfigError("report: selected_k exceeds the parameter count");

  std::vector<SelectionTrace> traces;
  for (const std::string& path : trace_paths) {
    SelectionTrace tr = stage("trace(" + path + ")", [&] {
      return trace_from_json(read_file(path), ctx.est.labels);
    });
    evaluate_validation(tr, ctx.val);
    traces.push_back(std::move(tr));
  }

  nlohmann::json manifest;
  manifest["model"] = model_ref;
  manifest["rank_tol"] = rank_tol;
  manifest["ddm_stride"] = ddm_stride;
  manifest["data_est"] = data_est_csv;
  manifest["data_val"] = data_val_csv;
  emit_reports(ctx, ds_val, traces, k_sel, std::move(manifest), res);
  return res;
}

}  // namespace paramprune
