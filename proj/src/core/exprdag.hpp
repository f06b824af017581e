#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace paramprune {

// Hash-consed expression DAG for dynamics functions. Nodes are immutable and
// deduplicated structurally; ids are topologically ordered (children precede
// parents), so a single forward sweep evaluates the whole graph.

enum class NodeKind : uint8_t { Constant, Input, Param, Add, Mul, Neg, Div, Sin, Cos };

struct DagNode {
  NodeKind kind;
  uint32_t a = 0, b = 0;  // child ids (a only for unary)
  double value = 0.0;     // Constant payload
  uint32_t name = 0;      // Input/Param: index into the name table
};

struct OpCount {
  long adds = 0, muls = 0, funcs = 0, divs = 0;
  long total() const { return adds + muls + funcs + divs; }
};

class ExprDag {
 public:
  ExprDag();

  // Node constructors fold constants and apply local identities
  // (0+x, 0*x, 1*x, x-x, neg(neg x), sign absorption); they never reassociate.
  uint32_t constant(double v);
  uint32_t input(std::string_view name);
  uint32_t param(std::string_view label);
  uint32_t add(uint32_t l, uint32_t r);
  uint32_t sub(uint32_t l, uint32_t r);
  uint32_t mul(uint32_t l, uint32_t r);
  uint32_t neg(uint32_t x);
  uint32_t div(uint32_t l, uint32_t r);
  uint32_t sin_(uint32_t x);
  uint32_t cos_(uint32_t x);

  void add_output(const std::string& name, uint32_t id);

  size_t node_count() const { return nodes_.size(); }
  const DagNode& node(uint32_t id) const { return nodes_[id]; }
  const std::string& name_of(const DagNode& n) const { return names_[n.name]; }
  const std::vector<std::pair<std::string, uint32_t>>& outputs() const { return outputs_; }

  bool is_const(uint32_t id, double v) const;

  // Fixed-point simplification: rebuilds bottom-up through the folding
  // constructors until the structure stops changing.
  ExprDag simplified() const;

  // Replaces the given parameter leaves by constants, then simplifies.
  // Labels absent from the dag's parameter set raise std::invalid_argument.
  ExprDag substitute_params(const std::map<std::string, double>& values) const;

  // Operation count over nodes reachable from the outputs. Neg is free
  // (sign flips are absorbed into adds), constants/leaves are free.
  OpCount count_ops() const;

  // Evaluates all outputs at the given bindings; missing binding -> throw.
  std::vector<double> eval(const std::unordered_map<std::string, double>& inputs,
                           const std::unordered_map<std::string, double>& params) const;

  // Structural equality of the output forests (names + shapes).
  static bool equal(const ExprDag& x, const ExprDag& y);

  std::string to_json() const;              // topologically ordered node list
  std::string emit_listing() const;         // straight-line assignments
  std::vector<std::string> param_labels() const;

 private:
  uint32_t intern(DagNode n);
  uint32_t name_id(std::string_view s);
  std::vector<DagNode> nodes_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, uint32_t> name_ids_;
  std::unordered_map<uint64_t, std::vector<uint32_t>> cons_;  // structural hash -> ids
  std::vector<std::pair<std::string, uint32_t>> outputs_;
};

// Scalar for tracing the numeric algorithms symbolically. Mixed arithmetic
// with double stays in double until a bound symbol participates, so geometry
// constants fold away at trace time.
struct Sym {
  ExprDag* dag = nullptr;
  uint32_t id = 0;
  double lit = 0.0;

  Sym() = default;
  Sym(double v) : lit(v) {}
  Sym(ExprDag* d, uint32_t i) : dag(d), id(i) {}
  bool bound() const { return dag != nullptr; }
  uint32_t materialize(ExprDag* d) const { return bound() ? id : d->constant(lit); }
};

Sym operator+(const Sym& l, const Sym& r);
Sym operator-(const Sym& l, const Sym& r);
Sym operator*(const Sym& l, const Sym& r);
Sym operator/(const Sym& l, const Sym& r);
Sym operator-(const Sym& x);
inline Sym& operator+=(Sym& l, const Sym& r) { return l = l + r; }
inline Sym& operator-=(Sym& l, const Sym& r) { return l = l - r; }
inline Sym& operator*=(Sym& l, const Sym& r) { return l = l * r; }
Sym sin(const Sym& x);
Sym cos(const Sym& x);

}  // namespace paramprune
