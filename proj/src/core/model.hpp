#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace paramprune {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigurationSingular : NumericalError {
  double cond;
  explicit ConfigurationSingular(double c)
      : NumericalError("singular dependent-coordinate jacobian, cond=" + std::to_string(c)),
        cond(c) {}
};
struct MassSingular : NumericalError {
  double cond;
  int sample_index;
  explicit MassSingular(double c, int sample = -1)
      : NumericalError("mass matrix singular or ill-conditioned, cond=" + std::to_string(c)),
        cond(c), sample_index(sample) {}
};
struct OutsideWorkspace : NumericalError {
  using NumericalError::NumericalError;
};
struct InfeasibleExcitation : NumericalError {
  using NumericalError::NumericalError;
};

// Per-body dynamic parameters: mass, first moment of mass (m*c), and the
// inertia tensor about the body frame origin. Serialization order is fixed:
// (m, d_x, d_y, d_z, I_xx, I_xy, I_xz, I_yy, I_yz, I_zz).
struct InertialParams {
  double m = 0;
  std::array<double, 3> d{};            // first moments, kg*m
  std::array<double, 6> I{};            // xx, xy, xz, yy, yz, zz about the frame origin
  double slot(int i) const;             // i in [0, 10)
};

inline constexpr const char* kParamSymbols[10] = {
    "m", "d_x", "d_y", "d_z", "I_xx", "I_xy", "I_xz", "I_yy", "I_yz", "I_zz"};

// Modified Denavit-Hartenberg joint (Khalil convention):
// T = Rot_x(alpha) * Trans_x(a) * Rot_z(theta + theta_offset) * Trans_z(d).
struct MdhJoint {
  double a = 0, alpha = 0, d = 0, theta_offset = 0;
  int coordinate_index = 0;
};

struct Transform {
  Eigen::Matrix3d R;
  Eigen::Vector3d p;
};

Transform mdh_transform(const MdhJoint& joint, double theta);

struct HexaglideGeometry {
  double bar_length = 0;        // L
  double joint_separation = 0;  // e, same for guide pairs and head joints
  double frame_radius = 0;      // frame axis to U joint
  double head_radius = 0;       // head axis to S joint
  double symmetry_angle = 0;    // 2*pi/3
};

enum class Topology { OpenChain, HexaglidePUS };

struct MultibodyModel {
  Topology topology = Topology::OpenChain;
  std::vector<MdhJoint> joints;   // open chain only
  HexaglideGeometry geom;         // closed loop only
  std::vector<InertialParams> bodies;
  int n_dof = 0;
  int n_q = 0;
  Eigen::Vector3d gravity{0, 0, -9.81};
  Eigen::VectorXd nominal_force;

  // Label filter: parameters with no dynamic role (identically zero regressor
  // columns over a probe dataset) are excluded. slot = 10*body + component.
  std::vector<int> param_slots;
  std::vector<std::string> param_labels;

  int n_params() const { return (int)param_labels.size(); }
  int n_slots() const { return 10 * (int)bodies.size(); }
  Eigen::VectorXd phi_full() const;                       // filtered values
  Eigen::VectorXd expand_phi(const Eigen::VectorXd& phi) const;  // filtered -> raw slots
  std::string fingerprint() const;
};

MultibodyModel build_puma560();
MultibodyModel build_hexaglide();

// JSON model file {topology, bodies[], gravity, nominal_force, param_labels};
// floats are written with 17 significant digits.
void save_model(const MultibodyModel& m, const std::string& path);
MultibodyModel load_model(const std::string& path);
std::string model_to_json(const MultibodyModel& m);
MultibodyModel model_from_json(const std::string& text);

}  // namespace paramprune
