#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace landair {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class GimbalLockError : public Error {
 public:
  using Error::Error;
};

class InfeasibleWrench : public Error {
 public:
  using Error::Error;
};

/// Thrown when a trajectory cannot satisfy its boundary conditions under the
/// motion limits. `binding()` names the constraint that made it infeasible.
class InfeasiblePlan : public Error {
 public:
  InfeasiblePlan(const std::string& binding, const std::string& what)
      : Error(what), binding_(binding) {}
  const std::string& binding() const { return binding_; }

 private:
  std::string binding_;
};

class NotStabilizable : public Error {
 public:
  using Error::Error;
};

class OrderingViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const MatX>& m) { return m.allFinite(); }

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace landair
