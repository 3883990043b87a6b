#include "fieldfuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "fieldfuse/error.hpp"

namespace fieldfuse {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kNotEnoughPoses: return "not enough poses";
    case ErrorCode::kDegenerateGeometry: return "degenerate geometry";
    case ErrorCode::kContractViolation: return "contract violation";
    case ErrorCode::kBackendFailure: return "backend failure";
  }
  return "unknown error";
}

namespace {

constexpr double kOrthonormalTol = 1e-9;

bool finite(const Mat3& m) { return m.allFinite(); }

}  // namespace

Se3Pose::Se3Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!finite(rotation) || !translation.allFinite()) {
    fail(ErrorCode::kInvalidArgument, "Se3Pose: non-finite entries");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  if (ortho > kOrthonormalTol || rotation.determinant() <= 0.0) {
    std::ostringstream os;
    os << "Se3Pose: rotation is not orthonormal with det +1 (|R^T R - I| = "
       << ortho << ", det = " << rotation.determinant() << ")";
    fail(ErrorCode::kInvalidArgument, os.str());
  }
}

Se3Pose Se3Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 back = eye - target;
  if (back.norm() < 1e-12) {
    fail(ErrorCode::kInvalidArgument, "look_at: eye coincides with target");
  }
  const Vec3 z = back.normalized();
  Vec3 x = up.cross(z);
  if (x.norm() < 1e-9) {
    // Looking along the up axis; any horizontal reference works.
    x = (std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(z);
  }
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, eye};
}

Se3Pose Se3Pose::inverse() const {
  const Mat3 rt = rotation_.transpose();
  Se3Pose out;
  out.rotation_ = rt;
  out.translation_ = -(rt * translation_);
  return out;
}

Se3Pose Se3Pose::operator*(const Se3Pose& rhs) const {
  Se3Pose out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

Mat4 Se3Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Sim3Transform::Sim3Transform(const Se3Pose& pose, double scale)
    : pose_(pose), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    fail(ErrorCode::kInvalidArgument, "Sim3Transform: scale must be positive and finite");
  }
}

Sim3Transform Sim3Transform::from_matrix(const Mat4& m) {
  if (!m.allFinite()) {
    fail(ErrorCode::kInvalidArgument, "Sim3Transform: non-finite matrix");
  }
  const Eigen::RowVector4d bottom = m.row(3);
  if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-12) {
    fail(ErrorCode::kInvalidArgument, "Sim3Transform: bottom row must be 0 0 0 1");
  }
  const Mat3 block = m.topLeftCorner<3, 3>();
  const double s0 = block.col(0).norm();
  const double s1 = block.col(1).norm();
  const double s2 = block.col(2).norm();
  const double scale = (s0 + s1 + s2) / 3.0;
  if (!(scale > 0.0) || std::max({std::abs(s0 - scale), std::abs(s1 - scale),
                                  std::abs(s2 - scale)}) > 1e-9 * scale) {
    fail(ErrorCode::kInvalidArgument, "Sim3Transform: scale is not uniform");
  }
  return {Se3Pose(block / scale, m.topRightCorner<3, 1>()), scale};
}

Sim3Transform Sim3Transform::inverse() const {
  const Mat3 rt = pose_.rotation().transpose();
  const double inv = 1.0 / scale_;
  return {Se3Pose(rt, -(inv * (rt * pose_.translation()))), inv};
}

Sim3Transform Sim3Transform::operator*(const Sim3Transform& rhs) const {
  const Mat3& r = pose_.rotation();
  return {Se3Pose(r * rhs.pose_.rotation(),
                  scale_ * (r * rhs.pose_.translation()) + pose_.translation()),
          scale_ * rhs.scale_};
}

Mat4 Sim3Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = pose_.rotation() * scale_;
  m.topRightCorner<3, 1>() = pose_.translation();
  return m;
}

Sim3Parts decompose_sim3(const Sim3Transform& t) { return {t.pose(), t.scale()}; }

Sim3Transform compose_sim3(const Se3Pose& pose, double scale) { return {pose, scale}; }

Se3Pose convert_query_pose(const Se3Pose& g_b, const Sim3Transform& t_ba) {
  const Mat3& r = t_ba.pose().rotation();
  return {r * g_b.rotation(),
          t_ba.scale() * (r * g_b.translation()) + t_ba.pose().translation()};
}

double rotation_angle_deg(const Mat3& r) {
  // atan2 of (sin, cos) keeps full precision near the identity, where
  // acos((tr - 1) / 2) loses half the digits.
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * axis.norm();
  return std::atan2(s, c) * 180.0 / std::numbers::pi;
}

RegistrationError registration_error(const Sim3Transform& t_true,
                                     const Sim3Transform& t_est) {
  const auto [pose, scale] = decompose_sim3(t_est * t_true.inverse());
  return {rotation_angle_deg(pose.rotation()), pose.translation().norm(),
          std::abs(std::log(scale))};
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 axis_angle(const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Mat4 matrix_from_row_major(const std::array<double, 16>& values) {
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = values[static_cast<size_t>(4 * r + c)];
  }
  return m;
}

std::array<double, 16> row_major(const Mat4& m) {
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out[static_cast<size_t>(4 * r + c)] = m(r, c);
  }
  return out;
}

}  // namespace fieldfuse
