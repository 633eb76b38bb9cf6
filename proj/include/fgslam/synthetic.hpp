#pragma once

#include "fgslam/datasets.hpp"
#include "fgslam/factor_grid.hpp"

namespace fgslam {

/// Procedurally textured box room observed from inside. The default
/// trajectory is an orbit about the room center looking outward, with an
/// optional pitch wobble; zero wobble yields a constant-twist screw motion.
struct SyntheticSceneSpec {
  Vec3 box_min = Vec3(-2.0, -1.5, -1.25);
  Vec3 box_max = Vec3(2.0, 1.5, 1.25);
  double checker_frequency = 4.0;

  int num_frames = 50;
  double fps = 30.0;
  double orbit_radius = 0.5;
  double yaw_revolutions = 1.0;      // total sweep, in turns
  double pitch_amplitude_deg = 25.0;
  double pitch_cycles = 1.0;
  std::vector<Pose> explicit_poses;  // overrides the orbit when nonempty

  int width = 80, height = 60;
  double fov_x_deg = 90.0;
  double depth_scale = 5000.0;

  double depth_noise_sigma = 0.0;  // stddev as a fraction of depth
  double color_noise_sigma = 0.0;

  void validate() const;
  CameraIntrinsics make_intrinsics() const;
};

/// Signed distance of a solid axis-aligned box: negative inside the box.
double signed_distance_box(const Vec3& p, const BoundingBox& box);

class SyntheticScene final : public FrameSource {
 public:
  SyntheticScene(const SyntheticSceneSpec& spec, uint64_t seed);

  const SyntheticSceneSpec& spec() const { return spec_; }
  BoundingBox room() const { return {spec_.box_min, spec_.box_max}; }
  const std::vector<Pose>& gt_poses() const { return poses_; }

  /// Analytic render at an arbitrary interior pose (noise-free).
  Frame render_view(const Pose& pose, int index = 0, double timestamp = 0.0) const;

  /// Room SDF oracle: positive in the room interior (observable free
  /// space), negative inside the walls; |grad| = 1 away from edges.
  double sdf(const Vec3& p) const { return -signed_distance_box(p, room()); }

  /// z-depth of the wall hit seen by (row, col) from `pose`.
  double analytic_depth(const Pose& pose, int row, int col) const;

  /// Orbit poses phase-shifted between the training samples.
  std::vector<Pose> heldout_poses(int n) const;

  std::optional<Frame> next() override;
  const CameraIntrinsics& intrinsics() const override { return intr_; }
  const std::optional<Trajectory>& ground_truth_trajectory() const override { return gt_; }
  std::size_t size_hint() const override { return poses_.size(); }
  void rewind() { cursor_ = 0; }

 private:
  SyntheticSceneSpec spec_;
  uint64_t seed_ = 0;
  CameraIntrinsics intr_;
  std::vector<Pose> poses_;
  std::optional<Trajectory> gt_;
  std::size_t cursor_ = 0;

  Pose orbit_pose(double phase01) const;
  struct Hit {
    double range;  // euclidean distance to the wall
    int face;      // axis*2 + (positive ? 1 : 0)
    Vec3 point;
  };
  Hit cast_from_inside(const Vec3& origin, const Vec3& dir_unit) const;
  Vec3 wall_color(const Hit& hit) const;
};

}  // namespace fgslam
