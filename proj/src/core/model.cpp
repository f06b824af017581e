#include "core/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/dynamics.hpp"

namespace paramprune {

double InertialParams::slot(int i) const {
  if (i == 0) return m;
  if (i < 4) return d[i - 1];
  return I[i - 4];
}

Transform mdh_transform(const MdhJoint& joint, double theta) {
  const double ca = std::cos(joint.alpha), sa = std::sin(joint.alpha);
  const double th = theta + joint.theta_offset;
  const double ct = std::cos(th), st = std::sin(th);
  Transform t;
  // Rot_x(alpha) * Rot_z(theta)
  t.R << ct, -st, 0,
         ca * st, ca * ct, -sa,
         sa * st, sa * ct, ca;
  t.p << joint.a, -sa * joint.d, ca * joint.d;
  return t;
}

namespace {

void finalize_labels(MultibodyModel& m) {
  m.param_slots = active_param_slots(m);
  m.param_labels.clear();
  for (int slot : m.param_slots)
    m.param_labels.push_back(std::string(kParamSymbols[slot % 10]) + "^" +
                             std::to_string(slot / 10 + 1));
}

}  // namespace

MultibodyModel build_puma560() {
  MultibodyModel m;
  m.topology = Topology::OpenChain;
  m.n_dof = m.n_q = 6;
  const double hp = M_PI / 2;
  m.joints = {
      {0.0, 0.0, 0.0, 0.0, 0},
      {0.0, -hp, 0.0, 0.0, 1},
      {0.4318, 0.0, -0.1491, 0.0, 2},
      {-0.0203, hp, -0.4318, 0.0, 3},
      {0.0, -hp, 0.0, 0.0, 4},
      {0.0, hp, 0.0, 0.0, 5},
  };
  m.bodies = {
      {10.52, {0.0, -0.568, 0.0}, {1.643, 0.0, 0.0, 0.509, 0.0, 1.643}},
      {15.78, {2.206, 0.2, 2.353}, {0.841, 0.2, -0.329, 8.738, 0.4, 8.576}},
      {8.767, {-0.003, -1.727, 0.0}, {3.717, -0.001, 0.002, 0.301, 0.002, 3.717}},
      {1.052, {0.03, 0.06, -0.060}, {0.184, 0.0, 0.0, 0.184, 0.0, 0.127}},
      {1.052, {0.004, -0.007, 0.005}, {0.074, 0.0, 0.0, 0.074, 0.0, 0.127}},
      {0.351, {0.01, 0.02, 0.013}, {0.008, 0.0, 0.002, 0.008, 0.0, 0.014}},
  };
  m.gravity = Eigen::Vector3d(0, 0, -9.81);
  m.nominal_force = (Eigen::VectorXd(6) << 350, 300, 125, 8, 3, 1).finished();
  finalize_labels(m);
  return m;
}

MultibodyModel build_hexaglide() {
  MultibodyModel m;
  m.topology = Topology::HexaglidePUS;
  m.n_dof = 6;
  m.n_q = 24;
  m.geom = {1.0000, 0.1365, 0.4840, 0.0730, 2 * M_PI / 3};
  InertialParams bar{5.804, {0.03, 0.03, -1.469}, {1.044, 0.000, 0.014, 1.044, 0.014, 0.002}};
  InertialParams head{6.697, {0.07, 0.07, -0.238}, {0.0283, 0.001, 0.000, 0.028, 0.000, 0.038}};
  m.bodies = {bar, bar, bar, bar, bar, bar, head};
  m.gravity = Eigen::Vector3d(0, 0, -9.81);
  m.nominal_force = Eigen::VectorXd::Constant(6, 1.7 * 2 * M_PI / 1e-2);
  finalize_labels(m);
  return m;
}

Eigen::VectorXd MultibodyModel::phi_full() const {
  Eigen::VectorXd phi(n_params());
  for (int i = 0; i < n_params(); ++i) {
    int slot = param_slots[i];
    phi(i) = bodies[slot / 10].slot(slot % 10);
  }
  return phi;
}

Eigen::VectorXd MultibodyModel::expand_phi(const Eigen::VectorXd& phi) const {
  if (phi.size() != n_params()) throw ConfigError("expand_phi: wrong phi length");
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(n_slots());
  for (int i = 0; i < n_params(); ++i) raw(param_slots[i]) = phi(i);
  return raw;
}

std::string MultibodyModel::fingerprint() const {
  std::string s = model_to_json(*this);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

namespace {

void fmt(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void fmt_array(std::string& out, const double* v, int n) {
  out += "[";
  for (int i = 0; i < n; ++i) {
    if (i) out += ", ";
    fmt(out, v[i]);
  }
  out += "]";
}

}  // namespace

std::string model_to_json(const MultibodyModel& m) {
  std::string s = "{\n  \"topology\": {";
  if (m.topology == Topology::OpenChain) {
    s += "\"type\": \"open_chain\", \"joints\": [\n";
    for (size_t i = 0; i < m.joints.size(); ++i) {
      const auto& j = m.joints[i];
      s += "    {\"a\": ";
      fmt(s, j.a);
      s += ", \"alpha\": ";
      fmt(s, j.alpha);
      s += ", \"d\": ";
      fmt(s, j.d);
      s += ", \"theta_offset\": ";
      fmt(s, j.theta_offset);
      s += ", \"coordinate_index\": " + std::to_string(j.coordinate_index) + "}";
      if (i + 1 < m.joints.size()) s += ",";
      s += "\n";
    }
    s += "  ]}";
  } else {
    s += "\"type\": \"hexaglide_pus\", \"geometry\": {\"bar_length\": ";
    fmt(s, m.geom.bar_length);
    s += ", \"joint_separation\": ";
    fmt(s, m.geom.joint_separation);
    s += ", \"frame_radius\": ";
    fmt(s, m.geom.frame_radius);
    s += ", \"head_radius\": ";
    fmt(s, m.geom.head_radius);
    s += ", \"symmetry_angle\": ";
    fmt(s, m.geom.symmetry_angle);
    s += "}}";
  }
  s += ",\n  \"bodies\": [\n";
  for (size_t b = 0; b < m.bodies.size(); ++b) {
    const auto& body = m.bodies[b];
    s += "    {\"m\": ";
    fmt(s, body.m);
    s += ", \"d\": ";
    fmt_array(s, body.d.data(), 3);
    s += ", \"I\": ";
    fmt_array(s, body.I.data(), 6);
    s += "}";
    if (b + 1 < m.bodies.size()) s += ",";
    s += "\n";
  }
  s += "  ],\n  \"gravity\": ";
  fmt_array(s, m.gravity.data(), 3);
  s += ",\n  \"nominal_force\": ";
  fmt_array(s, m.nominal_force.data(), (int)m.nominal_force.size());
  s += ",\n  \"param_labels\": [";
  for (size_t i = 0; i < m.param_labels.size(); ++i) {
    if (i) s += ", ";
    s += "\"" + m.param_labels[i] + "\"";
  }
  s += "]\n}\n";
  return s;
}

MultibodyModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model parse error: ") + e.what());
  }
  MultibodyModel m;
  const auto& topo = j.at("topology");
  std::string type = topo.at("type");
  if (type == "open_chain") {
    m.topology = Topology::OpenChain;
    for (const auto& jj : topo.at("joints")) {
      MdhJoint joint;
      joint.a = jj.at("a");
      joint.alpha = jj.at("alpha");
      joint.d = jj.at("d");
      joint.theta_offset = jj.at("theta_offset");
      joint.coordinate_index = jj.at("coordinate_index");
      m.joints.push_back(joint);
    }
    m.n_dof = m.n_q = (int)m.joints.size();
  } else if (type == "hexaglide_pus") {
    m.topology = Topology::HexaglidePUS;
    const auto& g = topo.at("geometry");
    m.geom.bar_length = g.at("bar_length");
    m.geom.joint_separation = g.at("joint_separation");
    m.geom.frame_radius = g.at("frame_radius");
    m.geom.head_radius = g.at("head_radius");
    m.geom.symmetry_angle = g.at("symmetry_angle");
    m.n_dof = 6;
    m.n_q = 24;
  } else {
    throw ConfigError("unknown topology type: " + type);
  }
  for (const auto& jb : j.at("bodies")) {
    InertialParams b;
    b.m = jb.at("m");
    for (int i = 0; i < 3; ++i) b.d[i] = jb.at("d").at(i);
    for (int i = 0; i < 6; ++i) b.I[i] = jb.at("I").at(i);
    m.bodies.push_back(b);
  }
  for (int i = 0; i < 3; ++i) m.gravity(i) = j.at("gravity").at(i);
  const auto& nf = j.at("nominal_force");
  m.nominal_force.resize((int)nf.size());
  for (int i = 0; i < (int)nf.size(); ++i) m.nominal_force(i) = nf.at(i);
  if (m.nominal_force.size() != m.n_dof)
    throw ConfigError("nominal_force length does not match dof count");

  if (j.contains("param_labels") && !j.at("param_labels").empty()) {
    for (const auto& l : j.at("param_labels")) {
      std::string label = l;
      auto caret = label.find('^');
      if (caret == std::string::npos) throw ConfigError("bad param label " + label);
      std::string sym = label.substr(0, caret);
      int body = std::stoi(label.substr(caret + 1));
      int comp = -1;
      for (int c = 0; c < 10; ++c)
        if (sym == kParamSymbols[c]) comp = c;
      if (comp < 0 || body < 1 || body >(int)m.bodies.size())
        throw ConfigError("bad param label " + label);
      m.param_labels.push_back(label);
      m.param_slots.push_back(10 * (body - 1) + comp);
    }
  } else {
    m.param_slots = active_param_slots(m);
    for (int slot : m.param_slots)
      m.param_labels.push_back(std::string(kParamSymbols[slot % 10]) + "^" +
                               std::to_string(slot / 10 + 1));
  }
  return m;
}

void save_model(const MultibodyModel& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << model_to_json(m);
}

MultibodyModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace paramprune
