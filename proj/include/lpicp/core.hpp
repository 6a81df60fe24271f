#pragma once

// Geometry primitives shared by every lpicp module: points, Euler-angle poses,
// rotation matrices and rigid-transform composition.
//
// Rotation convention: R = Rz(yaw) * Ry(pitch) * Rx(roll). The state vector of a
// pose is x = (roll, pitch, yaw, tx, ty, tz), i.e. rotation angles about the x, y
// and z axes followed by the translation in the map frame. Angles are stored
// unwrapped; wrap_angle() is only applied when poses are written out.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpicp {

using Point3 = Eigen::Vector3d;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using RowVector6d = Eigen::Matrix<double, 1, 6>;

enum class ErrorCode {
  kInvalidInput,
  kEmptyScan,
  kEmptyMap,
  kTooFewPoints,
  kEmptyConstraintSet,
  kSingularKkt,
  kNoCorrespondences,
  kGimbalLock,
  kIo,
  kConfig,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kEmptyScan: return "EmptyScan";
    case ErrorCode::kEmptyMap: return "EmptyMap";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kEmptyConstraintSet: return "EmptyConstraintSet";
    case ErrorCode::kSingularKkt: return "SingularKKT";
    case ErrorCode::kNoCorrespondences: return "NoCorrespondences";
    case ErrorCode::kGimbalLock: return "GimbalLock";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Pose as three Euler angles (rad) and a translation (m).
struct Pose6D {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();     // roll, pitch, yaw
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // tx, ty, tz

  static Pose6D identity() { return {}; }

  static Pose6D from_vector(const Vector6d& x) {
    return {x.head<3>(), x.tail<3>()};
  }

  static Pose6D from_values(double roll, double pitch, double yaw, double tx, double ty,
                            double tz) {
    return {Eigen::Vector3d(roll, pitch, yaw), Eigen::Vector3d(tx, ty, tz)};
  }

  Vector6d vector() const {
    Vector6d x;
    x << rotation, translation;
    return x;
  }

  bool finite() const { return rotation.allFinite() && translation.allFinite(); }
};

struct PointCloud {
  std::vector<Point3> points;
  std::vector<int> ring;  // empty, or one scan-line index per point

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
  bool has_rings() const { return !ring.empty(); }
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

inline Eigen::Matrix3d rotation_from_euler(const Eigen::Vector3d& rpy) {
  const double sr = std::sin(rpy.x()), cr = std::cos(rpy.x());
  const double sp = std::sin(rpy.y()), cp = std::cos(rpy.y());
  const double sy = std::sin(rpy.z()), cy = std::cos(rpy.z());
  Eigen::Matrix3d r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  return r;
}

inline Eigen::Matrix3d euler_to_rotation(const Pose6D& pose) {
  return rotation_from_euler(pose.rotation);
}

/// Extracts (roll, pitch, yaw) with pitch in [-pi/2, pi/2]. Throws kGimbalLock when
/// |cos(pitch)| < 1e-9, where roll and yaw are not separable.
inline Eigen::Vector3d euler_from_rotation(const Eigen::Matrix3d& r) {
  const double cos_pitch = std::hypot(r(0, 0), r(1, 0));
  if (cos_pitch < 1e-9) {
    throw Error(ErrorCode::kGimbalLock, "pitch at +-pi/2, Euler angles are not unique");
  }
  const double pitch = std::atan2(-r(2, 0), cos_pitch);
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

inline Point3 transform_point(const Pose6D& pose, const Point3& p) {
  return euler_to_rotation(pose) * p + pose.translation;
}

inline Eigen::Isometry3d to_isometry(const Pose6D& pose) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = euler_to_rotation(pose);
  t.translation() = pose.translation;
  return t;
}

inline Pose6D from_isometry(const Eigen::Isometry3d& t) {
  return {euler_from_rotation(t.linear()), t.translation()};
}

/// T(compose(a, b)) = T(a) * T(b).
inline Pose6D compose(const Pose6D& a, const Pose6D& b) {
  return from_isometry(to_isometry(a) * to_isometry(b));
}

inline Pose6D invert(const Pose6D& a) {
  return from_isometry(to_isometry(a).inverse());
}

/// Same pose with every angle wrapped into (-pi, pi].
inline Pose6D wrapped(const Pose6D& pose) {
  Pose6D out = pose;
  for (int i = 0; i < 3; ++i) out.rotation[i] = wrap_angle(out.rotation[i]);
  return out;
}

inline std::vector<Point3> transform_points(const Pose6D& pose, const std::vector<Point3>& pts) {
  const Eigen::Matrix3d r = euler_to_rotation(pose);
  std::vector<Point3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(r * p + pose.translation);
  return out;
}

}  // namespace lpicp
