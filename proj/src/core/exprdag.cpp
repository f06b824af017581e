#include "core/exprdag.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace paramprune {

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

uint64_t node_hash(const DagNode& n) {
  uint64_t h = 1469598103934665603ull;
  h = mix(h, (uint64_t)n.kind);
  h = mix(h, n.a);
  h = mix(h, n.b);
  h = mix(h, std::bit_cast<uint64_t>(n.value));
  h = mix(h, n.name);
  return h;
}

bool node_eq(const DagNode& x, const DagNode& y) {
  return x.kind == y.kind && x.a == y.a && x.b == y.b && x.name == y.name &&
         std::bit_cast<uint64_t>(x.value) == std::bit_cast<uint64_t>(y.value);
}

}  // namespace

ExprDag::ExprDag() = default;

uint32_t ExprDag::intern(DagNode n) {
  uint64_t h = node_hash(n);
  auto& bucket = cons_[h];
  for (uint32_t id : bucket)
    if (node_eq(nodes_[id], n)) return id;
  uint32_t id = (uint32_t)nodes_.size();
  nodes_.push_back(n);
  bucket.push_back(id);
  return id;
}

uint32_t ExprDag::name_id(std::string_view s) {
  auto it = name_ids_.find(std::string(s));
  if (it != name_ids_.end()) return it->second;
  uint32_t id = (uint32_t)names_.size();
  names_.emplace_back(s);
  name_ids_.emplace(names_.back(), id);
  return id;
}

uint32_t ExprDag::constant(double v) {
  if (v == 0.0) v = 0.0;  // collapse -0.0
  DagNode n;
  n.kind = NodeKind::Constant;
  n.value = v;
  return intern(n);
}

bool ExprDag::is_const(uint32_t id, double v) const {
  return nodes_[id].kind == NodeKind::Constant && nodes_[id].value == v;
}

uint32_t ExprDag::input(std::string_view name) {
  DagNode n;
  n.kind = NodeKind::Input;
  n.name = name_id(name);
  return intern(n);
}

uint32_t ExprDag::param(std::string_view label) {
  DagNode n;
  n.kind = NodeKind::Param;
  n.name = name_id(label);
  return intern(n);
}

uint32_t ExprDag::add(uint32_t l, uint32_t r) {
  const DagNode &nl = nodes_[l], &nr = nodes_[r];
  if (nl.kind == NodeKind::Constant && nr.kind == NodeKind::Constant)
    return constant(nl.value + nr.value);
  if (nl.kind == NodeKind::Constant && nl.value == 0.0) return r;
  if (nr.kind == NodeKind::Constant && nr.value == 0.0) return l;
  if (nl.kind == NodeKind::Neg && nl.a == r) return constant(0.0);
  if (nr.kind == NodeKind::Neg && nr.a == l) return constant(0.0);
  DagNode n;
  n.kind = NodeKind::Add;
  n.a = std::min(l, r);
  n.b = std::max(l, r);
  return intern(n);
}

uint32_t ExprDag::sub(uint32_t l, uint32_t r) { return add(l, neg(r)); }

uint32_t ExprDag::neg(uint32_t x) {
  const DagNode& nx = nodes_[x];
  if (nx.kind == NodeKind::Constant) return constant(-nx.value);
  if (nx.kind == NodeKind::Neg) return nx.a;
  DagNode n;
  n.kind = NodeKind::Neg;
  n.a = x;
  return intern(n);
}

uint32_t ExprDag::mul(uint32_t l, uint32_t r) {
  const DagNode &nl = nodes_[l], &nr = nodes_[r];
  if (nl.kind == NodeKind::Constant && nr.kind == NodeKind::Constant)
    return constant(nl.value * nr.value);
  if ((nl.kind == NodeKind::Constant && nl.value == 0.0) ||
      (nr.kind == NodeKind::Constant && nr.value == 0.0))
    return constant(0.0);
  if (nl.kind == NodeKind::Constant && nl.value == 1.0) return r;
  if (nr.kind == NodeKind::Constant && nr.value == 1.0) return l;
  if (nl.kind == NodeKind::Constant && nl.value == -1.0) return neg(r);
  if (nr.kind == NodeKind::Constant && nr.value == -1.0) return neg(l);
  if (nl.kind == NodeKind::Neg && nr.kind == NodeKind::Neg) return mul(nl.a, nr.a);
  if (nl.kind == NodeKind::Neg) return neg(mul(nl.a, r));
  if (nr.kind == NodeKind::Neg) return neg(mul(l, nr.a));
  if (nl.kind == NodeKind::Constant && nr.kind == NodeKind::Neg)
    return mul(constant(-nl.value), nr.a);
  DagNode n;
  n.kind = NodeKind::Mul;
  n.a = std::min(l, r);
  n.b = std::max(l, r);
  return intern(n);
}

uint32_t ExprDag::div(uint32_t l, uint32_t r) {
  const DagNode &nl = nodes_[l], &nr = nodes_[r];
  if (nl.kind == NodeKind::Constant && nr.kind == NodeKind::Constant && nr.value != 0.0)
    return constant(nl.value / nr.value);
  if (nr.kind == NodeKind::Constant && nr.value == 1.0) return l;
  if (nr.kind == NodeKind::Constant && nr.value == -1.0) return neg(l);
  DagNode n;
  n.kind = NodeKind::Div;
  n.a = l;
  n.b = r;
  return intern(n);
}

uint32_t ExprDag::sin_(uint32_t x) {
  const DagNode& nx = nodes_[x];
  if (nx.kind == NodeKind::Constant) return constant(std::sin(nx.value));
  DagNode n;
  n.kind = NodeKind::Sin;
  n.a = x;
  return intern(n);
}

uint32_t ExprDag::cos_(uint32_t x) {
  const DagNode& nx = nodes_[x];
  if (nx.kind == NodeKind::Constant) return constant(std::cos(nx.value));
  if (nx.kind == NodeKind::Neg) return cos_(nx.a);  // cos(-x) = cos(x)
  DagNode n;
  n.kind = NodeKind::Cos;
  n.a = x;
  return intern(n);
}

void ExprDag::add_output(const std::string& name, uint32_t id) {
  outputs_.emplace_back(name, id);
}

namespace {

// Rebuild src into dst through the folding constructors, optionally replacing
// parameters by constants. Returns old-id -> new-id mapping.
std::vector<uint32_t> rebuild(const ExprDag& src, ExprDag& dst,
                              const std::map<std::string, double>* subst) {
  std::vector<uint32_t> remap(src.node_count());
  for (uint32_t i = 0; i < src.node_count(); ++i) {
    const DagNode& n = src.node(i);
    switch (n.kind) {
      case NodeKind::Constant: remap[i] = dst.constant(n.value); break;
      case NodeKind::Input: remap[i] = dst.input(src.name_of(n)); break;
      case NodeKind::Param: {
        if (subst) {
          auto it = subst->find(src.name_of(n));
          if (it != subst->end()) {
            remap[i] = dst.constant(it->second);
            break;
          }
        }
        remap[i] = dst.param(src.name_of(n));
        break;
      }
      case NodeKind::Add: remap[i] = dst.add(remap[n.a], remap[n.b]); break;
      case NodeKind::Mul: remap[i] = dst.mul(remap[n.a], remap[n.b]); break;
      case NodeKind::Neg: remap[i] = dst.neg(remap[n.a]); break;
      case NodeKind::Div: remap[i] = dst.div(remap[n.a], remap[n.b]); break;
      case NodeKind::Sin: remap[i] = dst.sin_(remap[n.a]); break;
      case NodeKind::Cos: remap[i] = dst.cos_(remap[n.a]); break;
    }
  }
  return remap;
}

}  // namespace

ExprDag ExprDag::simplified() const {
  ExprDag cur;
  {
    auto remap = rebuild(*this, cur, nullptr);
    for (auto& [name, id] : outputs_) cur.add_output(name, remap[id]);
  }
  for (int pass = 0; pass < 8; ++pass) {
    ExprDag next;
    auto remap = rebuild(cur, next, nullptr);
    for (auto& [name, id] : cur.outputs_) next.add_output(name, remap[id]);
    if (ExprDag::equal(cur, next)) break;
    cur = std::move(next);
  }
  return cur;
}

ExprDag ExprDag::substitute_params(const std::map<std::string, double>& values) const {
  std::set<std::string> have;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Param) have.insert(names_[n.name]);
  for (auto& [label, v] : values)
    if (!have.count(label))
      throw std::invalid_argument("substitute_params: unknown label " + label);
  ExprDag out;
  auto remap = rebuild(*this, out, &values);
  for (auto& [name, id] : outputs_) out.add_output(name, remap[id]);
  return out.simplified();
}

OpCount ExprDag::count_ops() const {
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<uint32_t> stack;
  for (auto& [name, id] : outputs_) stack.push_back(id);
  OpCount c;
  while (!stack.empty()) {
    uint32_t id = stack.back();
    stack.pop_back();
    if (seen[id]) continue;
    seen[id] = 1;
    const DagNode& n = nodes_[id];
    switch (n.kind) {
      case NodeKind::Add: c.adds++; stack.push_back(n.a); stack.push_back(n.b); break;
      case NodeKind::Mul: c.muls++; stack.push_back(n.a); stack.push_back(n.b); break;
      case NodeKind::Div: c.divs++; stack.push_back(n.a); stack.push_back(n.b); break;
      case NodeKind::Sin:
      case NodeKind::Cos: c.funcs++; stack.push_back(n.a); break;
      case NodeKind::Neg: stack.push_back(n.a); break;
      default: break;
    }
  }
  return c;
}

std::vector<double> ExprDag::eval(const std::unordered_map<std::string, double>& inputs,
                                  const std::unordered_map<std::string, double>& params) const {
  std::vector<double> v(nodes_.size());
  for (uint32_t i = 0; i < nodes_.size(); ++i) {
    const DagNode& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::Constant: v[i] = n.value; break;
      case NodeKind::Input: {
        auto it = inputs.find(names_[n.name]);
        if (it == inputs.end())
          throw std::invalid_argument("eval: missing input " + names_[n.name]);
        v[i] = it->second;
        break;
      }
      case NodeKind::Param: {
        auto it = params.find(names_[n.name]);
        if (it == params.end())
          throw std::invalid_argument("eval: missing param " + names_[n.name]);
        v[i] = it->second;
        break;
      }
      case NodeKind::Add: v[i] = v[n.a] + v[n.b]; break;
      case NodeKind::Mul: v[i] = v[n.a] * v[n.b]; break;
      case NodeKind::Neg: v[i] = -v[n.a]; break;
      case NodeKind::Div: v[i] = v[n.a] / v[n.b]; break;
      case NodeKind::Sin: v[i] = std::sin(v[n.a]); break;
      case NodeKind::Cos: v[i] = std::cos(v[n.a]); break;
    }
  }
  std::vector<double> out;
  out.reserve(outputs_.size());
  for (auto& [name, id] : outputs_) out.push_back(v[id]);
  return out;
}

bool ExprDag::equal(const ExprDag& x, const ExprDag& y) {
  if (x.outputs_.size() != y.outputs_.size()) return false;
  std::unordered_map<uint64_t, char> memo;
  // ids are hash-consed within each dag, so (idx, idy) memoization is sound
  std::function<bool(uint32_t, uint32_t)> same = [&](uint32_t a, uint32_t b) -> bool {
    uint64_t key = ((uint64_t)a << 32) | b;
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const DagNode &na = x.nodes_[a], &nb = y.nodes_[b];
    bool r = na.kind == nb.kind;
    if (r) switch (na.kind) {
        case NodeKind::Constant:
          r = std::bit_cast<uint64_t>(na.value) == std::bit_cast<uint64_t>(nb.value);
          break;
        case NodeKind::Input:
        case NodeKind::Param: r = x.names_[na.name] == y.names_[nb.name]; break;
        case NodeKind::Neg:
        case NodeKind::Sin:
        case NodeKind::Cos: r = same(na.a, nb.a); break;
        default: r = same(na.a, nb.a) && same(na.b, nb.b); break;
      }
    memo[key] = r;
    return r;
  };
  for (size_t i = 0; i < x.outputs_.size(); ++i) {
    if (x.outputs_[i].first != y.outputs_[i].first) return false;
    if (!same(x.outputs_[i].second, y.outputs_[i].second)) return false;
  }
  return true;
}

std::vector<std::string> ExprDag::param_labels() const {
  std::set<std::string> s;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Param) s.insert(names_[n.name]);
  return {s.begin(), s.end()};
}

namespace {
const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Constant: return "const";
    case NodeKind::Input: return "input";
    case NodeKind::Param: return "param";
    case NodeKind::Add: return "add";
    case NodeKind::Mul: return "mul";
    case NodeKind::Neg: return "neg";
    case NodeKind::Div: return "div";
    case NodeKind::Sin: return "sin";
    case NodeKind::Cos: return "cos";
  }
  return "?";
}
}  // namespace

std::string ExprDag::to_json() const {
  // dense renumbering of reachable nodes, preserving topological order
  std::vector<char> keep(nodes_.size(), 0);
  {
    std::vector<uint32_t> stack;
    for (auto& [name, id] : outputs_) stack.push_back(id);
    while (!stack.empty()) {
      uint32_t id = stack.back();
      stack.pop_back();
      if (keep[id]) continue;
      keep[id] = 1;
      const DagNode& n = nodes_[id];
      if (n.kind >= NodeKind::Add) {
        stack.push_back(n.a);
        if (n.kind != NodeKind::Neg && n.kind != NodeKind::Sin && n.kind != NodeKind::Cos)
          stack.push_back(n.b);
      }
    }
  }
  std::vector<uint32_t> dense(nodes_.size(), 0);
  uint32_t next = 0;
  for (uint32_t i = 0; i < nodes_.size(); ++i)
    if (keep[i]) dense[i] = next++;

  nlohmann::ordered_json out;
  out["nodes"] = nlohmann::json::array();
  for (uint32_t i = 0; i < nodes_.size(); ++i) {
    if (!keep[i]) continue;
    const DagNode& n = nodes_[i];
    nlohmann::ordered_json jn;
    jn["op"] = kind_name(n.kind);
    if (n.kind == NodeKind::Constant) jn["value"] = n.value;
    else if (n.kind == NodeKind::Input || n.kind == NodeKind::Param) jn["name"] = names_[n.name];
    else if (n.kind == NodeKind::Neg || n.kind == NodeKind::Sin || n.kind == NodeKind::Cos)
      jn["args"] = {dense[n.a]};
    else jn["args"] = {dense[n.a], dense[n.b]};
    out["nodes"].push_back(jn);
  }
  out["outputs"] = nlohmann::ordered_json::object();
  for (auto& [name, id] : outputs_) out["outputs"][name] = dense[id];
  auto c = count_ops();
  out["op_count"] = {{"adds", c.adds}, {"muls", c.muls}, {"funcs", c.funcs},
                     {"divs", c.divs}, {"total", c.total()}};
  return out.dump(1);
}

std::string ExprDag::emit_listing() const {
  std::ostringstream os;
  std::vector<char> keep(nodes_.size(), 0);
  std::vector<uint32_t> stack;
  for (auto& [name, id] : outputs_) stack.push_back(id);
  while (!stack.empty()) {
    uint32_t id = stack.back();
    stack.pop_back();
    if (keep[id]) continue;
    keep[id] = 1;
    const DagNode& n = nodes_[id];
    if (n.kind >= NodeKind::Add) {
      stack.push_back(n.a);
      if (n.kind != NodeKind::Neg && n.kind != NodeKind::Sin && n.kind != NodeKind::Cos)
        stack.push_back(n.b);
    }
  }
  os.precision(17);
  for (uint32_t i = 0; i < nodes_.size(); ++i) {
    if (!keep[i]) continue;
    const DagNode& n = nodes_[i];
    os << "v" << i << " = ";
    switch (n.kind) {
      case NodeKind::Constant: os << n.value; break;
      case NodeKind::Input: os << "input " << names_[n.name]; break;
      case NodeKind::Param: os << "param " << names_[n.name]; break;
      case NodeKind::Neg: os << "neg v" << n.a; break;
      case NodeKind::Sin: os << "sin v" << n.a; break;
      case NodeKind::Cos: os << "cos v" << n.a; break;
      case NodeKind::Add: os << "add v" << n.a << " v" << n.b; break;
      case NodeKind::Mul: os << "mul v" << n.a << " v" << n.b; break;
      case NodeKind::Div: os << "div v" << n.a << " v" << n.b; break;
    }
    os << "\n";
  }
  for (auto& [name, id] : outputs_) os << name << " = v" << id << "\n";
  return os.str();
}

// ---- Sym scalar ----

namespace {
ExprDag* resolve(const Sym& l, const Sym& r) {
  if (l.bound() && r.bound() && l.dag != r.dag)
    throw std::logic_error("Sym operands belong to different dags");
  return l.bound() ? l.dag : r.dag;
}
}  // namespace

Sym operator+(const Sym& l, const Sym& r) {
  ExprDag* d = resolve(l, r);
  if (!d) return Sym(l.lit + r.lit);
  return Sym(d, d->add(l.materialize(d), r.materialize(d)));
}

Sym operator-(const Sym& l, const Sym& r) {
  ExprDag* d = resolve(l, r);
  if (!d) return Sym(l.lit - r.lit);
  return Sym(d, d->sub(l.materialize(d), r.materialize(d)));
}

Sym operator*(const Sym& l, const Sym& r) {
  ExprDag* d = resolve(l, r);
  if (!d) return Sym(l.lit * r.lit);
  return Sym(d, d->mul(l.materialize(d), r.materialize(d)));
}

Sym operator/(const Sym& l, const Sym& r) {
  ExprDag* d = resolve(l, r);
  if (!d) return Sym(l.lit / r.lit);
  return Sym(d, d->div(l.materialize(d), r.materialize(d)));
}

Sym operator-(const Sym& x) {
  if (!x.bound()) return Sym(-x.lit);
  return Sym(x.dag, x.dag->neg(x.id));
}

Sym sin(const Sym& x) {
  if (!x.bound()) return Sym(std::sin(x.lit));
  return Sym(x.dag, x.dag->sin_(x.id));
}

Sym cos(const Sym& x) {
  if (!x.bound()) return Sym(std::cos(x.lit));
  return Sym(x.dag, x.dag->cos_(x.id));
}

}  // namespace paramprune
