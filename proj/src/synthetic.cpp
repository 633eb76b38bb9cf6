#include "fgslam/synthetic.hpp"

#include <cmath>

#include "fgslam/rng.hpp"

namespace fgslam {

void SyntheticSceneSpec::validate() const {
  BoundingBox{box_min, box_max}.validate();
  if (width < 8 || height < 8) throw std::invalid_argument("synthetic: image size must be >= 8x8");
  if (num_frames < 1 && explicit_poses.empty())
    throw std::invalid_argument("synthetic: need at least one frame");
  if (depth_scale <= 0) throw std::invalid_argument("synthetic: depth_scale must be positive");
}

CameraIntrinsics SyntheticSceneSpec::make_intrinsics() const {
  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.fx = 0.5 * width / std::tan(0.5 * fov_x_deg * M_PI / 180.0);
  intr.fy = intr.fx;
  intr.cx = 0.5 * width;
  intr.cy = 0.5 * height;
  intr.depth_scale = depth_scale;
  return intr;
}

double signed_distance_box(const Vec3& p, const BoundingBox& box) {
  const Vec3 q = (p - box.center()).cwiseAbs() - 0.5 * box.extent();
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

namespace {

// Camera orientation from a forward direction, image y pointing toward
// world -z (x right, y down, z forward camera axes).
Quat look_rotation(const Vec3& forward) {
  const Vec3 z = forward.normalized();
  Vec3 y = Vec3(0, 0, -1) - Vec3(0, 0, -1).dot(z) * z;
  if (y.norm() < 1e-9) y = Vec3(0, 1, 0);  // looking straight up/down
  y.normalize();
  const Vec3 x = y.cross(z);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Quat(r);
}

}  // namespace

SyntheticScene::SyntheticScene(const SyntheticSceneSpec& spec, uint64_t seed)
    : spec_(spec), seed_(seed), intr_(spec.make_intrinsics()) {
  spec_.validate();
  intr_.validate();

  if (!spec_.explicit_poses.empty()) {
    poses_ = spec_.explicit_poses;
  } else {
    poses_.reserve(spec_.num_frames);
    for (int i = 0; i < spec_.num_frames; ++i)
      poses_.push_back(orbit_pose(spec_.num_frames > 1 ? double(i) / spec_.num_frames : 0.0));
  }
  const BoundingBox box = room();
  for (const Pose& p : poses_)
    if (!box.contains(p.t)) throw std::invalid_argument("synthetic: camera outside the box");

  Trajectory gt;
  for (std::size_t i = 0; i < poses_.size(); ++i)
    gt.push(double(i) / spec_.fps, poses_[i]);
  gt_ = std::move(gt);
}

Pose SyntheticScene::orbit_pose(double phase01) const {
  const double yaw = 2.0 * M_PI * spec_.yaw_revolutions * phase01;
  const double pitch = spec_.pitch_amplitude_deg * M_PI / 180.0 *
                       std::sin(2.0 * M_PI * spec_.pitch_cycles * phase01);
  const Vec3 center = room().center();
  const Vec3 outward(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 pos = center + spec_.orbit_radius * outward;
  const Vec3 forward(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
                     -std::sin(pitch));
  return Pose(look_rotation(forward), pos);
}

std::vector<Pose> SyntheticScene::heldout_poses(int n) const {
  std::vector<Pose> out;
  out.reserve(n);
  const double step = 1.0 / std::max<std::size_t>(poses_.size(), 1);
  for (int i = 0; i < n; ++i)
    out.push_back(orbit_pose((i + 0.5) * step * double(poses_.size()) / n));
  return out;
}

SyntheticScene::Hit SyntheticScene::cast_from_inside(const Vec3& origin,
                                                     const Vec3& dir) const {
  const BoundingBox box = room();
  double best_t = std::numeric_limits<double>::infinity();
  int best_face = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) continue;
    const bool positive = dir[a] > 0;
    const double wall = positive ? box.max_corner[a] : box.min_corner[a];
    const double t = (wall - origin[a]) / dir[a];
    if (t > 0 && t < best_t) {
      best_t = t;
      best_face = a * 2 + (positive ? 1 : 0);
    }
  }
  if (best_face < 0) throw std::runtime_error("synthetic: ray escaped the box");
  return {best_t, best_face, origin + best_t * dir};
}

Vec3 SyntheticScene::wall_color(const Hit& hit) const {
  static const Vec3 base[6] = {
      {0.85, 0.35, 0.30}, {0.30, 0.75, 0.40}, {0.30, 0.45, 0.85},
      {0.85, 0.75, 0.30}, {0.70, 0.35, 0.80}, {0.35, 0.75, 0.75},
  };
  const int axis = hit.face / 2;
  const int ua = (axis + 1) % 3;
  const int va = (axis + 2) % 3;
  const BoundingBox box = room();
  const double u = (hit.point[ua] - box.min_corner[ua]) / box.extent()[ua];
  const double v = (hit.point[va] - box.min_corner[va]) / box.extent()[va];

  const int cu = int(std::floor(u * spec_.checker_frequency));
  const int cv = int(std::floor(v * spec_.checker_frequency));
  const double checker = ((cu + cv) & 1) ? 1.0 : 0.72;

  Vec3 c = base[hit.face] * (0.55 + 0.45 * u) * checker;
  c += Vec3(0.12, 0.12, 0.12) * v;
  return c.cwiseMin(1.0).cwiseMax(0.0);
}

double SyntheticScene::analytic_depth(const Pose& pose, int row, int col) const {
  const Vec3 d_cam = pixel_dir_cam(intr_, row, col);
  const double n = d_cam.norm();
  const Hit hit = cast_from_inside(pose.t, pose.rotate(d_cam / n));
  return hit.range / n;  // z-depth
}

Frame SyntheticScene::render_view(const Pose& pose, int index, double timestamp) const {
  Frame f;
  f.index = index;
  f.timestamp = timestamp;
  f.width = intr_.width;
  f.height = intr_.height;
  f.pose = pose;
  f.color.resize(std::size_t(f.width) * f.height * 3);
  f.depth.resize(std::size_t(f.width) * f.height);

  Rng rng(derive_seed(seed_, 0x5eed0000u + uint64_t(index)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool noisy = spec_.depth_noise_sigma > 0 || spec_.color_noise_sigma > 0;

  for (int row = 0; row < f.height; ++row) {
    for (int col = 0; col < f.width; ++col) {
      const Vec3 d_cam = pixel_dir_cam(intr_, row, col);
      const double n = d_cam.norm();
      const Hit hit = cast_from_inside(pose.t, pose.rotate(d_cam / n));
      double z = hit.range / n;
      Vec3 c = wall_color(hit);
      if (noisy) {
        if (spec_.depth_noise_sigma > 0) z += gauss(rng) * spec_.depth_noise_sigma * z;
        if (spec_.color_noise_sigma > 0)
          for (int k = 0; k < 3; ++k) c[k] += gauss(rng) * spec_.color_noise_sigma;
        z = std::max(z, 0.0);
        c = c.cwiseMin(1.0).cwiseMax(0.0);
      }
      const std::size_t pi = std::size_t(row) * f.width + col;
      f.depth[pi] = z;
      f.color[3 * pi + 0] = c[0];
      f.color[3 * pi + 1] = c[1];
      f.color[3 * pi + 2] = c[2];
    }
  }
  return f;
}

std::optional<Frame> SyntheticScene::next() {
  if (cursor_ >= poses_.size()) return std::nullopt;
  const std::size_t i = cursor_++;
  return render_view(poses_[i], int(i), double(i) / spec_.fps);
}

}  // namespace fgslam
