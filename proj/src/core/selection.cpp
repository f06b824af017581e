#include "core/selection.hpp"

#include "core/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace paramprune {
namespace {

constexpr double kDropTol = 1e-13;

// Orthogonal-greedy candidate scorer. Keeps an orthonormal basis Q of the
// selected columns of T and the residual r of the force column against it, so
// the post-addition error of every candidate comes from two projections
// instead of a fresh least-squares solve. Twice-applied Gram-Schmidt keeps Q
// orthonormal to machine precision.
struct GreedyScorer {
  const Eigen::MatrixXd& T;
  int n;
  int k = 0;
  Eigen::MatrixXd Q;
  Eigen::VectorXd r;
  double cnorm;

  explicit GreedyScorer(const RegressionProblem& p)
      : T(p.T), n(p.n_phi()), Q(p.T.rows(), p.n_phi()), r(p.T.col(p.n_phi())),
        cnorm(r.norm()) {
    if (!(cnorm > 0.0))
      throw NumericalError("force vector is identically zero, error undefined");
  }

  Eigen::VectorXd orth(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v = x;
    if (k > 0) {
      v.noalias() -= Q.leftCols(k) * (Q.leftCols(k).transpose() * v);
      v.noalias() -= Q.leftCols(k) * (Q.leftCols(k).transpose() * v);
    }
    return v;
  }

  double eps() const { return r.norm() / cnorm; }

  double eps_after(int j) const {
    double nj = T.col(j).norm();
    Eigen::VectorXd w = orth(T.col(j));
    double nw = w.norm();
    if (nj == 0.0 || nw <= kDropTol * nj) return eps();
    double g = w.dot(r) / nw;
    return std::sqrt(std::max(r.squaredNorm() - g * g, 0.0)) / cnorm;
  }

  void push(int j) {
    double nj = T.col(j).norm();
    Eigen::VectorXd w = orth(T.col(j));
    double nw = w.norm();
    if (nj == 0.0 || nw <= kDropTol * nj) return;  // dependent column, fit unchanged
    Q.col(k++) = w / nw;
    r = orth(r);
  }
};

void require_problem(const RegressionProblem& p) {
  if (p.n_phi() < 1 || p.T.rows() != p.n_phi() + 1)
    throw ConfigError("regression problem is not assembled");
}

std::vector<int> sorted_copy(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

SelectionTrace blank_trace(const std::string& id, int n, double tol) {
  SelectionTrace tr;
  tr.heuristic = id;
  tr.tol = tol;
  tr.eps_est = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  tr.eps_val = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  tr.ordering.reserve(n);
  tr.sets.reserve(n);
  return tr;
}

// The stop markers are read off the recorded curve. Forward-type rules stop
// as soon as the error drops below tol; backward elimination keeps removing
// while the error stays at or below tol, so its loop exits one set smaller
// than the last admissible one.
void derive_stop(SelectionTrace& tr) {
  int n = (int)tr.eps_est.size();
  tr.stop_k = -1;
  if (tr.heuristic == "be") {
    for (int k = 1; k <= n; ++k)
      if (tr.eps_est(k - 1) <= tr.tol) {
        tr.stop_k = k;
        break;
      }
    tr.overshoot_k = tr.stop_k == -1 ? n - 1 : tr.stop_k - 1;
  } else {
    for (int k = 1; k <= n; ++k)
      if (tr.eps_est(k - 1) < tr.tol) {
        tr.stop_k = k;
        break;
      }
  }
}

}  // namespace

SelectionTrace qr_heuristic(const RegressionProblem& p, double tol) {
  require_problem(p);
  int n = p.n_phi();
  SelectionTrace tr = blank_trace("qr", n, tol);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p.T.leftCols(n));
  const auto& idx = qr.colsPermutation().indices();
  std::vector<int> prefix;
  for (int k = 0; k < n; ++k) {
    tr.ordering.push_back(idx(k));
    prefix.push_back(idx(k));
    tr.sets.push_back(sorted_copy(prefix));
    tr.eps_est(k) = idm_error(p, tr.sets.back());
  }
  derive_stop(tr);
  return tr;
}

SelectionTrace backward_elimination(const RegressionProblem& p, double tol) {
  require_problem(p);
  int n = p.n_phi();
  SelectionTrace tr = blank_trace("be", n, tol);
  std::vector<int> cur(n);
  std::iota(cur.begin(), cur.end(), 0);
  tr.eps_est(n - 1) = idm_error(p, cur);

  std::vector<int> removal;
  removal.reserve(n);
  while (cur.size() > 1) {
    // score every single removal, then commit the lowest-index argmin
    std::vector<double> eps(cur.size());
    parallel_for((long)cur.size(), [&](long i) {
      std::vector<int> trial;
      trial.reserve(cur.size() - 1);
      for (size_t j = 0; j < cur.size(); ++j)
        if (j != (size_t)i) trial.push_back(cur[j]);
      eps[(size_t)i] = idm_error(p, trial);
    });
    int best_pos = -1;
    double best_eps = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < cur.size(); ++i) {
      double e = eps[i];
      if (e < best_eps) {
        best_eps = e;
        best_pos = (int)i;
      }
    }
    removal.push_back(cur[best_pos]);
    cur.erase(cur.begin() + best_pos);
    tr.eps_est((int)cur.size() - 1) = best_eps;
  }
  removal.push_back(cur[0]);

  for (int i = n - 1; i >= 0; --i) tr.ordering.push_back(removal[i]);
  std::vector<int> prefix;
  for (int k = 0; k < n; ++k) {
    prefix.push_back(tr.ordering[k]);
    tr.sets.push_back(sorted_copy(prefix));
  }
  derive_stop(tr);
  return tr;
}

SelectionTrace forward_selection(const RegressionProblem& p, double tol,
                                 bool from_scratch) {
  require_problem(p);
  int n = p.n_phi();
  SelectionTrace tr = blank_trace("fs", n, tol);
  GreedyScorer scorer(p);
  std::vector<char> in(n, 0);
  std::vector<int> cur;
  cur.reserve(n);
  for (int step = 0; step < n; ++step) {
    std::vector<double> eps;
    if (from_scratch) {
      eps.assign(n, std::numeric_limits<double>::infinity());
      parallel_for(n, [&](long j) {
        if (in[j]) return;
        std::vector<int> trial = cur;
        trial.push_back((int)j);
        eps[(size_t)j] = idm_error(p, trial);
      });
    }
    int best = -1;
    double best_eps = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (in[j]) continue;
      double e = from_scratch ? eps[(size_t)j] : scorer.eps_after(j);
      if (e < best_eps) {
        best_eps = e;
        best = j;
      }
    }
    in[best] = 1;
    cur.push_back(best);
    if (!from_scratch) scorer.push(best);
    tr.ordering.push_back(best);
    tr.sets.push_back(sorted_copy(cur));
    tr.eps_est(step) = best_eps;
  }
  derive_stop(tr);
  return tr;
}

SelectionTrace forward_selection_two_pass(const RegressionProblem& p, double tol,
                                          int max_iterations) {
  require_problem(p);
  int n = p.n_phi();
  if (max_iterations <= 0) max_iterations = n + 4;
  SelectionTrace tr = blank_trace("fs2", n, tol);

  std::vector<char> in(n, 0);
  std::vector<int> cur;
  std::vector<long> last_entry(n, -1);
  long seq = 0;
  auto best_candidate = [&](double* eps_out) {
    int best = -1;
    double best_eps = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (in[j]) continue;
      cur.push_back(j);
      double e = idm_error(p, cur);
      cur.pop_back();
      if (e < best_eps) {
        best_eps = e;
        best = j;
      }
    }
    *eps_out = best_eps;
    return best;
  };
  auto add = [&](int j) {
    in[j] = 1;
    cur.push_back(j);
    last_entry[j] = seq++;
  };
  auto record = [&](double eps) {
    int k = (int)cur.size();
    if (tr.sets.size() < (size_t)k || std::isnan(tr.eps_est(k - 1))) {
      if (tr.sets.size() < (size_t)k) tr.sets.resize(k);
      tr.sets[k - 1] = sorted_copy(cur);
      tr.eps_est(k - 1) = eps;
    }
  };

  int last_added = -1;
  int iter = 0;
  while ((int)cur.size() < n) {
    if (++iter > max_iterations)
      throw ConfigError("two-pass forward selection exceeded its iteration cap");
    double e = 0.0;
    add(best_candidate(&e));
    if ((int)cur.size() == 1) record(e);
    long dropped_entry = -1;
    int dropped = last_added;
    if (last_added >= 0) {
      dropped_entry = last_entry[last_added];
      in[last_added] = 0;
      cur.erase(std::find(cur.begin(), cur.end(), last_added));
    }
    if ((int)cur.size() < n) {
      int s = best_candidate(&e);
      add(s);
      // re-adding what was just dropped is a no-op revision; keep its
      // original entry step so the ordering matches plain forward selection
      if (s == dropped) last_entry[s] = dropped_entry;
      last_added = s;
    } else {
      last_added = -1;
      e = idm_error(p, cur);
    }
    record(e);
  }

  tr.ordering.resize(n);
  std::iota(tr.ordering.begin(), tr.ordering.end(), 0);
  std::sort(tr.ordering.begin(), tr.ordering.end(),
            [&](int a, int b) { return last_entry[a] < last_entry[b]; });
  derive_stop(tr);
  return tr;
}

SelectionTrace run_heuristic(const RegressionProblem& p, const std::string& id,
                             double tol) {
  if (id == "qr") return qr_heuristic(p, tol);
  if (id == "fs") return forward_selection(p, tol);
  if (id == "be") return backward_elimination(p, tol);
  if (id == "fs2") return forward_selection_two_pass(p, tol);
  throw ConfigError("unknown heuristic '" + id + "', expected qr|fs|be|fs2");
}

std::pair<std::vector<int>, double> exhaustive_best_subset(const RegressionProblem& p,
                                                           int k) {
  require_problem(p);
  int n = p.n_phi();
  if (n > 20)
    throw ConfigError("exhaustive subset search is limited to 20 parameters");
  if (k < 0 || k > n) throw ConfigError("subset size out of range");
  if (k == 0) return {{}, 1.0};

  std::vector<int> comb(k);
  std::iota(comb.begin(), comb.end(), 0);
  std::vector<int> best = comb;
  double best_eps = idm_error(p, comb);
  while (true) {
    // next combination in lexicographic order
    int i = k - 1;
    while (i >= 0 && comb[i] == n - k + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    double e = idm_error(p, comb);
    if (e < best_eps) {
      best_eps = e;
      best = comb;
    }
  }
  return {best, best_eps};
}

void evaluate_validation(SelectionTrace& tr, const RegressionProblem& val) {
  require_problem(val);
  int n = (int)tr.sets.size();
  if (val.n_phi() != n)
    throw ConfigError("validation problem has a different parameter count");
  tr.eps_val = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (int k = 1; k <= n; ++k) tr.eps_val(k - 1) = idm_error(val, tr.sets[k - 1]);
}

std::string trace_to_json(const SelectionTrace& tr,
                          const std::vector<std::string>& labels) {
  int n = (int)tr.ordering.size();
  if ((int)labels.size() != n)
    throw ConfigError("label count does not match the trace");
  nlohmann::json j;
  j["heuristic"] = tr.heuristic;
  j["tol"] = tr.tol;
  j["stop_k"] = tr.stop_k;
  j["overshoot_k"] = tr.overshoot_k;
  auto& ord = j["ordering"] = nlohmann::json::array();
  for (int c : tr.ordering) ord.push_back(labels[c]);
  auto& per_k = j["per_k"] = nlohmann::json::array();
  for (int k = 1; k <= n; ++k) {
    nlohmann::json row;
    row["k"] = k;
    auto& sel = row["selected"] = nlohmann::json::array();
    for (int c : tr.sets[k - 1]) sel.push_back(labels[c]);
    row["eps_tau_est"] = tr.eps_est(k - 1);
    if (std::isnan(tr.eps_val(k - 1)))
      row["eps_tau_val"] = nullptr;
    else
      row["eps_tau_val"] = tr.eps_val(k - 1);
    per_k.push_back(row);
  }
  return j.dump(2) + "\n";
}

SelectionTrace trace_from_json(const std::string& text,
                               const std::vector<std::string>& labels) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad trace json: ") + e.what());
  }
  std::unordered_map<std::string, int> index;
  for (size_t i = 0; i < labels.size(); ++i) index[labels[i]] = (int)i;
  auto to_col = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end())
      throw ConfigError("trace refers to unknown parameter '" + label + "'");
    return it->second;
  };
  try {
    SelectionTrace tr;
    tr.heuristic = j.at("heuristic").get<std::string>();
    tr.tol = j.at("tol").get<double>();
    tr.stop_k = j.at("stop_k").get<int>();
    tr.overshoot_k = j.at("overshoot_k").get<int>();
    for (const auto& label : j.at("ordering"))
      tr.ordering.push_back(to_col(label.get<std::string>()));
    int n = (int)tr.ordering.size();
    if ((int)labels.size() != n)
      throw ConfigError("trace ordering does not cover the parameter set");
    std::vector<char> seen(n, 0);
    for (int c : tr.ordering) {
      if (seen[c]) throw ConfigError("trace ordering repeats a parameter");
      seen[c] = 1;
    }
    tr.eps_est = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    tr.eps_val = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    tr.sets.resize(n);
    for (const auto& row : j.at("per_k")) {
      int k = row.at("k").get<int>();
      if (k < 1 || k > n) throw ConfigError("trace per_k entry out of range");
      for (const auto& label : row.at("selected"))
        tr.sets[k - 1].push_back(to_col(label.get<std::string>()));
      std::sort(tr.sets[k - 1].begin(), tr.sets[k - 1].end());
      tr.eps_est(k - 1) = row.at("eps_tau_est").get<double>();
      if (row.contains("eps_tau_val") && !row.at("eps_tau_val").is_null())
        tr.eps_val(k - 1) = row.at("eps_tau_val").get<double>();
    }
    return tr;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad trace json: ") + e.what());
  }
}

}  // namespace paramprune
