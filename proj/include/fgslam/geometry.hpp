#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>

namespace fgslam {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// 6-vector twist, rotation part first: [wx, wy, wz, vx, vy, vz].
using Twist = Eigen::Matrix<double, 6, 1>;

inline Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Rigid camera-to-world transform, unit quaternion + translation in meters.
struct Pose {
  Quat q = Quat::Identity();
  Vec3 t = Vec3::Zero();

  Pose() = default;
  Pose(const Quat& q_, const Vec3& t_) : q(q_.normalized()), t(t_) {}

  static Pose identity() { return Pose(); }
  static Pose translation(const Vec3& t_) { return Pose(Quat::Identity(), t_); }

  Vec3 apply(const Vec3& p) const { return q * p + t; }
  Vec3 rotate(const Vec3& v) const { return q * v; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = q.toRotationMatrix();
    m.topRightCorner<3, 1>() = t;
    return m;
  }
};

inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.q = (a.q * b.q).normalized();
  out.t = a.q * b.t + a.t;
  return out;
}

inline Pose inverse(const Pose& p) {
  Pose out;
  out.q = p.q.conjugate();
  out.t = -(out.q * p.t);
  return out;
}

/// SE(3) exponential map. Taylor branches keep exp(0) exactly identity.
inline Pose exp_se3(const Twist& xi) {
  const Vec3 w = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);

  Pose out;
  if (theta < 1e-9) {
    out.q = Quat(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z()).normalized();
    out.t = v + 0.5 * w.cross(v) + w.cross(w.cross(v)) / 6.0;
  } else {
    const double half = 0.5 * theta;
    const double s = std::sin(half) / theta;
    out.q = Quat(std::cos(half), s * w.x(), s * w.y(), s * w.z());
    const Eigen::Matrix3d W = skew(w);
    const Eigen::Matrix3d V = Eigen::Matrix3d::Identity() +
                              ((1.0 - std::cos(theta)) / theta2) * W +
                              ((theta - std::sin(theta)) / (theta2 * theta)) * W * W;
    out.t = V * v;
  }
  return out;
}

/// Inverse of exp_se3: recovers the twist of a pose.
inline Twist log_se3(const Pose& p) {
  Quat q = p.q;
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const Vec3 qv(q.x(), q.y(), q.z());
  const double sin_half = qv.norm();
  const double cos_half = q.w();

  Vec3 w;
  if (sin_half < 1e-9) {
    w = 2.0 * qv;
  } else {
    const double theta = 2.0 * std::atan2(sin_half, cos_half);
    w = (theta / sin_half) * qv;
  }

  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  Eigen::Matrix3d Vinv;
  if (theta < 1e-9) {
    const Eigen::Matrix3d W = skew(w);
    Vinv = Eigen::Matrix3d::Identity() - 0.5 * W + W * W / 12.0;
  } else {
    const Eigen::Matrix3d W = skew(w);
    const double half = 0.5 * theta;
    const double k = (1.0 - half * std::cos(half) / std::sin(half)) / theta2;
    Vinv = Eigen::Matrix3d::Identity() - 0.5 * W + k * W * W;
  }

  Twist xi;
  xi.head<3>() = w;
  xi.tail<3>() = Vinv * p.t;
  return xi;
}

/// Left-multiplied retraction: exp(delta) * p. retract(p, 0) == p bit-exactly.
inline Pose retract(const Pose& p, const Twist& delta) {
  if ((delta.array() == 0.0).all()) return p;
  Pose out = compose(exp_se3(delta), p);
  out.q.normalize();
  return out;
}

/// Relative twist delta such that retract(p, delta) == q (up to normalization).
inline Twist relative_twist(const Pose& p, const Pose& target) {
  return log_se3(compose(target, inverse(p)));
}

/// Pinhole camera. Image convention: x right, y down, z forward; integer
/// pixel coordinates coincide with the principal point lattice.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  double depth_scale = 5000.0;  // raw units per meter

  void validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: fx, fy must be positive");
    if (cx <= 0 || cx >= width || cy <= 0 || cy >= height)
      throw std::invalid_argument("intrinsics: principal point outside image");
    if (depth_scale <= 0) throw std::invalid_argument("intrinsics: depth_scale must be positive");
  }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();  // unit norm
  int row = 0, col = 0;
};

/// Camera-frame back-projection of a pixel, unnormalized ((u-cx)/fx, (v-cy)/fy, 1).
inline Vec3 pixel_dir_cam(const CameraIntrinsics& intr, double row, double col) {
  return Vec3((col - intr.cx) / intr.fx, (row - intr.cy) / intr.fy, 1.0);
}

/// Scale factor between z-depth and euclidean range along the pixel's ray.
inline double depth_to_range_factor(const CameraIntrinsics& intr, double row, double col) {
  return pixel_dir_cam(intr, row, col).norm();
}

inline Ray pixel_ray(const CameraIntrinsics& intr, const Pose& pose, int row, int col) {
  if (row < 0 || row >= intr.height || col < 0 || col >= intr.width)
    throw std::out_of_range("pixel_ray: pixel outside image bounds");
  Ray r;
  r.origin = pose.t;
  r.dir = pose.rotate(pixel_dir_cam(intr, row, col).normalized());
  r.row = row;
  r.col = col;
  return r;
}

}  // namespace fgslam
