#pragma once

#include <array>

#include <Eigen/Core>

namespace fieldfuse {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rigid camera-to-world (or frame-to-frame) transform. Rotation is checked
/// to be orthonormal with det +1 at construction.
class Se3Pose {
 public:
  Se3Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Se3Pose(const Mat3& rotation, const Vec3& translation);

  static Se3Pose identity() { return {}; }
  /// Camera at `eye` looking at `target`; camera looks down its local -z with
  /// local +y as close to `up` as possible.
  static Se3Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Se3Pose inverse() const;
  Se3Pose operator*(const Se3Pose& rhs) const;

  Mat4 matrix() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Similarity transform p -> R (s p) + t, i.e. the rigid part G applied after
/// the uniform scale S.
class Sim3Transform {
 public:
  Sim3Transform() = default;
  Sim3Transform(const Se3Pose& pose, double scale);

  static Sim3Transform identity() { return {}; }
  static Sim3Transform from_scale(double scale) { return {Se3Pose(), scale}; }
  /// Parses [sR t; 0 1]. The scale is recovered from the column norms of the
  /// upper-left block.
  static Sim3Transform from_matrix(const Mat4& m);

  const Se3Pose& pose() const { return pose_; }
  double scale() const { return scale_; }

  Vec3 apply(const Vec3& p) const {
    return pose_.rotation() * (scale_ * p) + pose_.translation();
  }
  Vec3 apply_direction(const Vec3& d) const { return pose_.rotation() * d; }

  Sim3Transform inverse() const;
  Sim3Transform operator*(const Sim3Transform& rhs) const;

  Mat4 matrix() const;

 private:
  Se3Pose pose_;
  double scale_ = 1.0;
};

struct RegistrationError {
  double rotation_deg = 0.0;
  double translation = 0.0;
  double log_scale = 0.0;
};

struct Sim3Parts {
  Se3Pose pose;
  double scale;
};

Sim3Parts decompose_sim3(const Sim3Transform& t);
Sim3Transform compose_sim3(const Se3Pose& pose, double scale);

/// Query pose in frame A for a camera given in frame B: T_BA * G_B * S_BA^-1.
Se3Pose convert_query_pose(const Se3Pose& g_b, const Sim3Transform& t_ba);

/// Angle of a rotation matrix in degrees, in [0, 180].
double rotation_angle_deg(const Mat3& r);

/// Errors of `t_est` against `t_true` from dT = t_est * t_true^-1.
RegistrationError registration_error(const Sim3Transform& t_true,
                                     const Sim3Transform& t_est);

/// Nearest rotation in Frobenius norm (polar projection, det forced to +1).
Mat3 project_to_rotation(const Mat3& m);

/// Rotation about a unit axis by an angle in radians.
Mat3 axis_angle(const Vec3& axis, double angle_rad);

/// Row-major 16 values <-> 4x4.
Mat4 matrix_from_row_major(const std::array<double, 16>& values);
std::array<double, 16> row_major(const Mat4& m);

}  // namespace fieldfuse
