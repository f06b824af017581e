// Command-line front end for the parameter-reduction toolkit.
// Links only the public C API; exit codes mirror pp_status.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "paramprune/paramprune.h"

namespace {

int fail(pp_status st) {
  std::cerr << "error: " << pp_last_error() << "\n";
  return static_cast<int>(st);
}

bool read_text(const std::string& path, std::string& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::ostringstream ss;
  ss << f.rdbuf();
  out = ss.str();
  return true;
}

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << text;
  return bool(f);
}

// Reads an excitation config file when given, otherwise falls back to the
// model's defaults ("{}").
int load_config(const std::string& path, std::string& out) {
  out = "{}";
  if (!path.empty() && !read_text(path, out)) {
    std::cerr << "error: cannot read config file: " << path << "\n";
    return static_cast<int>(PP_ERROR_CONFIG);
  }
  return 0;
}

int cmd_model_build(const std::string& system, const std::string& out_path) {
  pp_model* m = nullptr;
  if (pp_status st = pp_model_build(system.c_str(), &m); st != PP_OK)
    return fail(st);
  if (pp_status st = pp_model_save(m, out_path.c_str()); st != PP_OK)
    return fail(st);
  std::cout << out_path << ": dof=" << pp_model_dof(m)
            << " n_phi=" << pp_model_param_count(m) << "\n";
  pp_model_free(m);
  return 0;
}

int cmd_traj(const std::string& model, const std::string& config,
             unsigned long long seed, bool random, const std::string& out_path) {
  std::string cfg;
  if (int rc = load_config(config, cfg)) return rc;
  pp_model* m = nullptr;
  if (pp_status st = pp_model_build(model.c_str(), &m); st != PP_OK)
    return fail(st);
  pp_trajectories* t = nullptr;
  pp_status st = random ? pp_trajectories_random(m, cfg.c_str(), seed, &t)
                        : pp_trajectories_optimize(m, cfg.c_str(), seed, &t);
  if (st != PP_OK) return fail(st);
  if (pp_status s2 = pp_trajectories_save(t, out_path.c_str()); s2 != PP_OK)
    return fail(s2);
  std::cout << out_path << ": " << pp_trajectories_count(t) << " trajectories\n";
  pp_trajectories_free(t);
  pp_model_free(m);
  return 0;
}

int cmd_dataset(const std::string& model, const std::string& traj,
                const std::string& config, const std::string& out_path) {
  std::string cfg;
  if (int rc = load_config(config, cfg)) return rc;
  pp_model* m = nullptr;
  if (pp_status st = pp_model_build(model.c_str(), &m); st != PP_OK)
    return fail(st);
  pp_trajectories* t = nullptr;
  if (pp_status st = pp_trajectories_load(traj.c_str(), &t); st != PP_OK)
    return fail(st);
  pp_dataset* d = nullptr;
  if (pp_status st = pp_dataset_sample(m, t, cfg.c_str(), &d); st != PP_OK)
    return fail(st);
  if (pp_status st = pp_dataset_save(d, out_path.c_str()); st != PP_OK)
    return fail(st);
  std::cout << out_path << ": " << pp_dataset_samples(d) << " samples\n";
  pp_dataset_free(d);
  pp_trajectories_free(t);
  pp_model_free(m);
  return 0;
}

int cmd_reduce(const std::string& model, const std::string& data,
               const std::string& val, const std::string& heuristic, double tol,
               const std::string& out_path) {
  pp_model* m = nullptr;
  if (pp_status st = pp_model_build(model.c_str(), &m); st != PP_OK)
    return fail(st);
  pp_dataset* d = nullptr;
  if (pp_status st = pp_dataset_load(data.c_str(), &d); st != PP_OK)
    return fail(st);
  pp_problem* p = nullptr;
  if (pp_status st = pp_problem_assemble(m, d, &p); st != PP_OK)
    return fail(st);
  pp_trace* tr = nullptr;
  if (pp_status st = pp_reduce(p, heuristic.c_str(), tol, &tr); st != PP_OK)
    return fail(st);
  if (!val.empty()) {
    pp_dataset* vd = nullptr;
    if (pp_status st = pp_dataset_load(val.c_str(), &vd); st != PP_OK)
      return fail(st);
    pp_problem* vp = nullptr;
    if (pp_status st = pp_problem_assemble(m, vd, &vp); st != PP_OK)
      return fail(st);
    if (pp_status st = pp_trace_validate(tr, vp); st != PP_OK) return fail(st);
    pp_problem_free(vp);
    pp_dataset_free(vd);
  }
  char* json = nullptr;
  if (pp_status st = pp_trace_to_json(tr, p, &json); st != PP_OK)
    return fail(st);
  if (!write_text(out_path, json)) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return static_cast<int>(PP_ERROR_CONFIG);
  }
  std::cout << out_path << ": heuristic=" << heuristic
            << " n_phi=" << pp_problem_n_phi(p)
            << " stop_k=" << pp_trace_stop_k(tr) << "\n";
  pp_string_free(json);
  pp_trace_free(tr);
  pp_problem_free(p);
  pp_dataset_free(d);
  pp_model_free(m);
  return 0;
}

int cmd_opcount(const std::string& model, const std::string& selected, int k,
                bool emit_source, const std::string& out_path) {
  std::string trace_json;
  if (!read_text(selected, trace_json)) {
    std::cerr << "error: cannot read trace file: " << selected << "\n";
    return static_cast<int>(PP_ERROR_CONFIG);
  }
  pp_model* m = nullptr;
  if (pp_status st = pp_model_build(model.c_str(), &m); st != PP_OK)
    return fail(st);
  pp_trace* tr = nullptr;
  if (pp_status st = pp_trace_parse(trace_json.c_str(), m, &tr); st != PP_OK)
    return fail(st);
  char* json = nullptr;
  if (pp_status st = pp_opcount_json(m, tr, k, emit_source ? 1 : 0, &json);
      st != PP_OK)
    return fail(st);
  if (out_path.empty()) {
    std::cout << json << "\n";
  } else if (!write_text(out_path, json)) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return static_cast<int>(PP_ERROR_CONFIG);
  }
  pp_string_free(json);
  pp_trace_free(tr);
  pp_model_free(m);
  return 0;
}

int cmd_report(const std::string& model, const std::vector<std::string>& traces,
               const std::string& est, const std::string& val, double rank_tol,
               int k, int ddm_stride, const std::string& out_dir) {
  std::vector<const char*> ptrs;
  ptrs.reserve(traces.size());
  for (const auto& t : traces) ptrs.push_back(t.c_str());
  char* manifest = nullptr;
  pp_status st = pp_report_from_artifacts(
      model.c_str(), ptrs.data(), static_cast<int>(ptrs.size()), est.c_str(),
      val.c_str(), rank_tol, k, ddm_stride, out_dir.c_str(), &manifest);
  if (st != PP_OK) return fail(st);
  std::cout << manifest << "\n";
  pp_string_free(manifest);
  return 0;
}

int cmd_pipeline(const std::string& config) {
  std::string cfg;
  if (!read_text(config, cfg)) {
    std::cerr << "error: cannot read config file: " << config << "\n";
    return static_cast<int>(PP_ERROR_CONFIG);
  }
  char* manifest = nullptr;
  if (pp_status st = pp_pipeline_run(cfg.c_str(), &manifest); st != PP_OK)
    return fail(st);
  std::cout << manifest << "\n";
  pp_string_free(manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-parameter reduction for rigid multibody models"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = automatic)");

  // Callbacks only record the action; it runs after parsing so global
  // options like --threads take effect first.
  std::function<int()> action;

  auto* model = app.add_subcommand("model", "Model definitions");
  model->require_subcommand(1);
  {
    auto* build = model->add_subcommand("build", "Write a model description");
    auto system = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    build->add_option("--system", *system, "Built-in id (puma560, hexaglide) or model JSON path")
        ->required();
    build->add_option("--out", *out, "Output model JSON")->required();
    build->callback([=, &action] { action = [=] { return cmd_model_build(*system, *out); }; });
  }

  auto* traj = app.add_subcommand("traj", "Excitation trajectories");
  traj->require_subcommand(1);
  {
    auto* opt = traj->add_subcommand("optimize", "Generate excitation trajectories");
    auto mdl = std::make_shared<std::string>();
    auto cfg = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<unsigned long long>(1);
    auto random = std::make_shared<bool>(false);
    opt->add_option("--model", *mdl, "Model id or JSON path")->required();
    opt->add_option("--config", *cfg, "Excitation config JSON file");
    opt->add_option("--seed", *seed, "RNG seed");
    opt->add_flag("--random", *random, "Skip conditioning search, keep the first feasible draw");
    opt->add_option("--out", *out, "Output trajectory JSON")->required();
    opt->callback([=, &action] { action = [=] { return cmd_traj(*mdl, *cfg, *seed, *random, *out); }; });
  }

  auto* dataset = app.add_subcommand("dataset", "Sampled dynamics datasets");
  dataset->require_subcommand(1);
  {
    auto* sample = dataset->add_subcommand("sample", "Sample a trajectory set into a dataset CSV");
    auto mdl = std::make_shared<std::string>();
    auto trj = std::make_shared<std::string>();
    auto cfg = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sample->add_option("--model", *mdl, "Model id or JSON path")->required();
    sample->add_option("--traj", *trj, "Trajectory JSON")->required();
    sample->add_option("--config", *cfg, "Excitation config JSON file");
    sample->add_option("--out", *out, "Output dataset CSV")->required();
    sample->callback([=, &action] { action = [=] { return cmd_dataset(*mdl, *trj, *cfg, *out); }; });
  }

  {
    auto* reduce = app.add_subcommand("reduce", "Run a parameter-selection heuristic");
    auto mdl = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto val = std::make_shared<std::string>();
    auto heuristic = std::make_shared<std::string>("fs");
    auto tol = std::make_shared<double>(1e-2);
    auto out = std::make_shared<std::string>();
    reduce->add_option("--model", *mdl, "Model id or JSON path")->required();
    reduce->add_option("--data", *data, "Estimation dataset CSV")->required();
    reduce->add_option("--val", *val, "Validation dataset CSV (fills eps_tau_val)");
    reduce->add_option("--heuristic", *heuristic, "qr | fs | be | fs2");
    reduce->add_option("--tol", *tol, "Relative error tolerance for stop_k");
    reduce->add_option("--out", *out, "Output trace JSON")->required();
    reduce->callback(
        [=, &action] { action = [=] { return cmd_reduce(*mdl, *data, *val, *heuristic, *tol, *out); }; });
  }

  {
    auto* opcount = app.add_subcommand("opcount", "Operation counts for a selected model");
    auto mdl = std::make_shared<std::string>();
    auto selected = std::make_shared<std::string>();
    auto k = std::make_shared<int>(0);
    auto emit = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    opcount->add_option("--model", *mdl, "Model id or JSON path")->required();
    opcount->add_option("--selected", *selected, "Trace JSON from reduce")->required();
    opcount->add_option("--k", *k, "Model size along the trace")->required();
    opcount->add_flag("--emit-source", *emit, "Include straight-line listings");
    opcount->add_option("--out", *out, "Output JSON (stdout when omitted)");
    opcount->callback([=, &action] { action = [=] { return cmd_opcount(*mdl, *selected, *k, *emit, *out); }; });
  }

  {
    auto* report = app.add_subcommand("report", "Rebuild report files from saved artifacts");
    auto mdl = std::make_shared<std::string>();
    auto traces = std::make_shared<std::vector<std::string>>();
    auto est = std::make_shared<std::string>();
    auto val = std::make_shared<std::string>();
    auto rank_tol = std::make_shared<double>(1e-8);
    auto k = std::make_shared<int>(0);
    auto stride = std::make_shared<int>(1);
    auto out_dir = std::make_shared<std::string>();
    report->add_option("--model", *mdl, "Model id or JSON path")->required();
    report->add_option("--trace", *traces, "Trace JSON (repeatable)")->required();
    report->add_option("--est", *est, "Estimation dataset CSV")->required();
    report->add_option("--val", *val, "Validation dataset CSV")->required();
    report->add_option("--rank-tol", *rank_tol, "Relative rank tolerance");
    report->add_option("--k", *k, "Selected model size (0 = rank/2)");
    report->add_option("--ddm-stride", *stride, "Evaluate eps_ddz every n-th k");
    report->add_option("--out-dir", *out_dir, "Output directory")->required();
    report->callback([=, &action] {
      action = [=] {
        return cmd_report(*mdl, *traces, *est, *val, *rank_tol, *k, *stride, *out_dir);
      };
    });
  }

  auto* pipeline = app.add_subcommand("pipeline", "End-to-end runs");
  pipeline->require_subcommand(1);
  {
    auto* run = pipeline->add_subcommand("run", "Run the full pipeline from a config file");
    auto cfg = std::make_shared<std::string>();
    run->add_option("--config", *cfg, "Pipeline config JSON")->required();
    run->callback([=, &action] { action = [=] { return cmd_pipeline(*cfg); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(PP_ERROR_CONFIG);
  }
  if (threads > 0) pp_set_threads(threads);
  return action ? action() : 0;
}
