#include "paramprune/paramprune.h"

#include <json.hpp>

#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "core/excitation.hpp"
#include "core/io_util.hpp"
#include "core/model.hpp"
#include "core/pipeline.hpp"
#include "core/reduction.hpp"
#include "core/rng.hpp"
#include "core/selection.hpp"
#include "core/tracing.hpp"

using namespace paramprune;

struct pp_model {
  MultibodyModel m;
};
struct pp_trajectories {
  std::vector<FourierTrajectory> trajs;
};
struct pp_dataset {
  Dataset ds;
};
struct pp_problem {
  RegressionProblem p;
};
struct pp_trace {
  SelectionTrace tr;
};

namespace {

thread_local std::string t_err;

template <typename F>
pp_status guard(F&& f) {
  try {
    t_err.clear();
    f();
    return PP_OK;
  } catch (const ConfigError& e) {
    t_err = e.what();
    return PP_ERROR_CONFIG;
  } catch (const NumericalError& e) {
    t_err = e.what();
    return PP_ERROR_NUMERICAL;
  } catch (const std::exception& e) {
    t_err = e.what();
    return PP_ERROR_NUMERICAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ConfigError(std::string("null ") + what + " handle");
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ExcitationConfig exc_from(const MultibodyModel& m, const char* config_json) {
  std::string text = config_json && *config_json ? config_json : "{}";
  return excitation_config_from_json(m, text);
}

nlohmann::json opcount_block(const ExprDag& dag, const MultibodyModel& m,
                             const std::vector<int>& selected, bool emit_source) {
  OpCount full = dag.simplified().count_ops();
  OpCount red = reduced_op_count(dag, m, selected);
  auto counts = [](const OpCount& c) {
    nlohmann::json j;
    j["adds"] = c.adds;
    j["muls"] = c.muls;
    j["funcs"] = c.funcs;
    j["divs"] = c.divs;
    j["total"] = c.total();
    return j;
  };
  nlohmann::json j;
  j["full"] = counts(full);
  j["reduced"] = counts(red);
  j["ratio"] = full.total() == 0
                   ? 0.0
                   : 1.0 - (double)red.total() / (double)full.total();
  if (emit_source) {
    std::map<std::string, double> zeros;
    std::vector<char> keep(m.n_params(), 0);
    for (int i : selected) keep[i] = 1;
    for (int i = 0; i < m.n_params(); ++i)
      if (!keep[i]) zeros[m.param_labels[i]] = 0.0;
    j["listing"] = dag.substitute_params(zeros).emit_listing();
  }
  return j;
}

}  // namespace

extern "C" {

const char* pp_last_error(void) { return t_err.c_str(); }

void pp_set_threads(int n) { set_worker_override(n); }

void pp_string_free(char* s) { delete[] s; }

pp_status pp_model_build(const char* id_or_path, pp_model** out) {
  return guard([&] {
    require(id_or_path, "id");
    require(out, "output");
    *out = new pp_model{resolve_model(id_or_path)};
  });
}

pp_status pp_model_save(const pp_model* m, const char* path) {
  return guard([&] {
    require(m, "model");
    require(path, "path");
    save_model(m->m, path);
  });
}

int pp_model_dof(const pp_model* m) { return m ? m->m.n_dof : -1; }

int pp_model_param_count(const pp_model* m) { return m ? m->m.n_params() : -1; }

const char* pp_model_param_label(const pp_model* m, int i) {
  if (!m || i < 0 || i >= m->m.n_params()) return nullptr;
  return m->m.param_labels[(size_t)i].c_str();
}

void pp_model_free(pp_model* m) { delete m; }

pp_status pp_trajectories_optimize(const pp_model* m, const char* config_json,
                                   uint64_t seed, pp_trajectories** out) {
  return guard([&] {
    require(m, "model");
    require(out, "output");
    *out = new pp_trajectories{
        optimize_trajectory_set(m->m, exc_from(m->m, config_json), seed)};
  });
}

pp_status pp_trajectories_random(const pp_model* m, const char* config_json,
                                 uint64_t seed, pp_trajectories** out) {
  return guard([&] {
    require(m, "model");
    require(out, "output");
    ExcitationConfig cfg = exc_from(m->m, config_json);
    std::vector<FourierTrajectory> ts;
    for (int i = 0; i < cfg.n_trajectories; ++i)
      ts.push_back(random_feasible_trajectory(m->m, cfg, mix_seed(seed, (uint64_t)i)));
    *out = new pp_trajectories{std::move(ts)};
  });
}

pp_status pp_trajectories_save(const pp_trajectories* t, const char* path) {
  return guard([&] {
    require(t, "trajectories");
    require(path, "path");
    save_trajectories(t->trajs, path);
  });
}

pp_status pp_trajectories_load(const char* path, pp_trajectories** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output");
    *out = new pp_trajectories{load_trajectories(path)};
  });
}

int pp_trajectories_count(const pp_trajectories* t) {
  return t ? (int)t->trajs.size() : -1;
}

void pp_trajectories_free(pp_trajectories* t) { delete t; }

pp_status pp_dataset_sample(const pp_model* m, const pp_trajectories* t,
                            const char* config_json, pp_dataset** out) {
  return guard([&] {
    require(m, "model");
    require(t, "trajectories");
    require(out, "output");
    *out = new pp_dataset{sample_dataset(m->m, t->trajs, exc_from(m->m, config_json))};
  });
}

pp_status pp_dataset_save(const pp_dataset* d, const char* path) {
  return guard([&] {
    require(d, "dataset");
    require(path, "path");
    save_dataset(d->ds, path);
  });
}

pp_status pp_dataset_load(const char* path, pp_dataset** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output");
    *out = new pp_dataset{load_dataset(path)};
  });
}

long pp_dataset_samples(const pp_dataset* d) {
  return d ? (long)d->ds.samples.size() : -1;
}

void pp_dataset_free(pp_dataset* d) { delete d; }

pp_status pp_problem_assemble(const pp_model* m, const pp_dataset* d,
                              pp_problem** out) {
  return guard([&] {
    require(m, "model");
    require(d, "dataset");
    require(out, "output");
    *out = new pp_problem{assemble(m->m, d->ds)};
  });
}

pp_status pp_problem_save(const pp_problem* p, const char* path) {
  return guard([&] {
    require(p, "problem");
    require(path, "path");
    save_problem(p->p, path);
  });
}

pp_status pp_problem_load(const char* path, pp_problem** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output");
    *out = new pp_problem{load_problem(path)};
  });
}

int pp_problem_n_phi(const pp_problem* p) { return p ? p->p.n_phi() : -1; }

int pp_problem_rank(const pp_problem* p, double rel_tol) {
  if (!p) return -1;
  try {
    return numeric_rank(p->p, rel_tol);
  } catch (const std::exception& e) {
    t_err = e.what();
    return -1;
  }
}

void pp_problem_free(pp_problem* p) { delete p; }

pp_status pp_reduce(const pp_problem* p, const char* heuristic, double tol,
                    pp_trace** out) {
  return guard([&] {
    require(p, "problem");
    require(heuristic, "heuristic");
    require(out, "output");
    *out = new pp_trace{run_heuristic(p->p, heuristic, tol)};
  });
}

pp_status pp_trace_validate(pp_trace* t, const pp_problem* val) {
  return guard([&] {
    require(t, "trace");
    require(val, "problem");
    evaluate_validation(t->tr, val->p);
  });
}

pp_status pp_trace_to_json(const pp_trace* t, const pp_problem* p, char** out_json) {
  return guard([&] {
    require(t, "trace");
    require(p, "problem");
    require(out_json, "output");
    *out_json = dup_string(trace_to_json(t->tr, p->p.labels));
  });
}

pp_status pp_trace_from_json(const char* json, const pp_problem* p, pp_trace** out) {
  return guard([&] {
    require(json, "json");
    require(p, "problem");
    require(out, "output");
    *out = new pp_trace{trace_from_json(json, p->p.labels)};
  });
}

pp_status pp_trace_parse(const char* json, const pp_model* m, pp_trace** out) {
  return guard([&] {
    require(json, "json");
    require(m, "model");
    require(out, "output");
    *out = new pp_trace{trace_from_json(json, m->m.param_labels)};
  });
}

int pp_trace_stop_k(const pp_trace* t) { return t ? t->tr.stop_k : -1; }

int pp_trace_overshoot_k(const pp_trace* t) { return t ? t->tr.overshoot_k : -1; }

double pp_trace_eps_est(const pp_trace* t, int k) {
  if (!t || k < 1 || k > (int)t->tr.sets.size()) return -1.0;
  return t->tr.eps_est(k - 1);
}

double pp_trace_eps_val(const pp_trace* t, int k) {
  if (!t || k < 1 || k > (int)t->tr.sets.size()) return -1.0;
  return t->tr.eps_val(k - 1);
}

void pp_trace_free(pp_trace* t) { delete t; }

pp_status pp_opcount_json(const pp_model* m, const pp_trace* t, int k,
                          int emit_source, char** out_json) {
  return guard([&] {
    require(m, "model");
    require(t, "trace");
    require(out_json, "output");
    if (k < 1 || k > (int)t->tr.sets.size())
      throw ConfigError("k must lie in [1, " + std::to_string(t->tr.sets.size()) + "]");
    const std::vector<int>& selected = t->tr.sets[(size_t)k - 1];
    nlohmann::json j;
    j["heuristic"] = t->tr.heuristic;
    j["k"] = k;
    nlohmann::json labels = nlohmann::json::array();
    for (int i : selected) labels.push_back(m->m.param_labels[(size_t)i]);
    j["selected_labels"] = labels;
    j["idm"] = opcount_block(trace_idm(m->m), m->m, selected, emit_source != 0);
    j["mass_bias"] =
        opcount_block(trace_mass_bias(m->m), m->m, selected, emit_source != 0);
    *out_json = dup_string(j.dump(2) + "\n");
  });
}

pp_status pp_pipeline_run(const char* config_json, char** out_report_json) {
  return guard([&] {
    require(config_json, "config");
    require(out_report_json, "output");
    PipelineResult res = run_pipeline(pipeline_config_from_json(config_json));
    *out_report_json = dup_string(read_file(res.out_dir + "/report.json"));
  });
}

pp_status pp_report_from_artifacts(const char* model_ref,
                                   const char* const* trace_paths, int n_traces,
                                   const char* data_est_csv, const char* data_val_csv,
                                   double rank_tol, int selected_k, int ddm_stride,
                                   const char* out_dir, char** out_report_json) {
  return guard([&] {
    require(model_ref, "model");
    require(trace_paths, "traces");
    require(data_est_csv, "estimation csv");
    require(data_val_csv, "validation csv");
    require(out_dir, "output dir");
    require(out_report_json, "output");
    if (n_traces < 1) throw ConfigError("need at least one trace");
    std::vector<std::string> paths;
    for (int i = 0; i < n_traces; ++i) {
      require(trace_paths[i], "trace path");
      paths.push_back(trace_paths[i]);
    }
    PipelineResult res =
        report_from_artifacts(model_ref, paths, data_est_csv, data_val_csv,
                              rank_tol, selected_k, ddm_stride, out_dir);
    *out_report_json = dup_string(read_file(res.out_dir + "/report.json"));
  });
}

}  // extern "C"
