#include "core/tracing.hpp"

#include <map>
#include <string>

#include "core/dynamics.hpp"

namespace paramprune {
namespace {

std::vector<Sym> sym_inputs(ExprDag& dag, const std::string& stem, int n) {
  std::vector<Sym> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = Sym(&dag, dag.input(stem + "[" + std::to_string(i) + "]"));
  return v;
}

// Raw parameter slots: active ones become Param leaves, filtered ones fold
// away as zero constants exactly like the numeric scatter.
std::vector<Sym> sym_params(ExprDag& dag, const MultibodyModel& m) {
  std::vector<Sym> phi(m.n_slots(), Sym(0.0));
  for (int i = 0; i < m.n_params(); ++i)
    phi[m.param_slots[i]] = Sym(&dag, dag.param(m.param_labels[i]));
  return phi;
}

void run_kernel(const MultibodyModel& m, const std::vector<Sym>& q,
                const std::vector<Sym>& dq, const std::vector<Sym>& ddq,
                const std::vector<Sym>& phi, std::vector<Sym>& out) {
  if (m.topology == Topology::OpenChain)
    open_chain_idm_kernel<Sym>(m, q.data(), dq.data(), ddq.data(), phi.data(),
                               out.data());
  else
    hexaglide_dq_kernel<Sym>(m, q.data(), dq.data(), ddq.data(), phi.data(),
                             out.data());
}

}  // namespace

ExprDag trace_idm(const MultibodyModel& m) {
  const bool open = m.topology == Topology::OpenChain;
  const int nq = m.n_q;
  ExprDag dag;
  std::vector<Sym> q = sym_inputs(dag, open ? "z" : "q", nq);
  std::vector<Sym> dq = sym_inputs(dag, open ? "dz" : "dq", nq);
  std::vector<Sym> ddq = sym_inputs(dag, open ? "ddz" : "ddq", nq);
  std::vector<Sym> phi = sym_params(dag, m);
  std::vector<Sym> out(nq, Sym(0.0));
  run_kernel(m, q, dq, ddq, phi, out);
  const std::string stem = open ? "tau" : "d_q";
  for (int i = 0; i < nq; ++i)
    dag.add_output(stem + "[" + std::to_string(i) + "]", out[i].materialize(&dag));
  return dag;
}

ExprDag trace_mass_bias(const MultibodyModel& m) {
  const bool open = m.topology == Topology::OpenChain;
  const int nq = m.n_q;
  ExprDag dag;
  std::vector<Sym> q = sym_inputs(dag, open ? "z" : "q", nq);
  std::vector<Sym> dq = sym_inputs(dag, open ? "dz" : "dq", nq);
  std::vector<Sym> phi = sym_params(dag, m);
  std::vector<Sym> zero(nq, Sym(0.0));

  MultibodyModel no_grav = m;
  no_grav.gravity.setZero();
  std::vector<Sym> col(nq, Sym(0.0));
  for (int j = 0; j < nq; ++j) {
    std::vector<Sym> ej(nq, Sym(0.0));
    ej[j] = Sym(1.0);
    run_kernel(no_grav, q, zero, ej, phi, col);
    for (int i = 0; i < nq; ++i)
      dag.add_output("M[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                     col[i].materialize(&dag));
  }

  std::vector<Sym> del(nq, Sym(0.0));
  run_kernel(m, q, dq, zero, phi, del);
  for (int i = 0; i < nq; ++i)
    dag.add_output("delta[" + std::to_string(i) + "]", del[i].materialize(&dag));
  return dag;
}

OpCount reduced_op_count(const ExprDag& dag, const MultibodyModel& m,
                         const std::vector<int>& selected) {
  std::vector<char> keep(m.n_params(), 0);
  for (int j : selected) {
    if (j < 0 || j >= m.n_params())
      throw ConfigError("selected parameter index out of range");
    keep[j] = 1;
  }
  std::map<std::string, double> zeros;
  for (int i = 0; i < m.n_params(); ++i)
    if (!keep[i]) zeros[m.param_labels[i]] = 0.0;
  return dag.substitute_params(zeros).count_ops();
}

}  // namespace paramprune
