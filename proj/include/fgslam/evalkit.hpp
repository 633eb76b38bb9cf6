#pragma once

#include <array>
#include <functional>

#include "fgslam/renderer.hpp"
#include "fgslam/trajectory.hpp"

namespace fgslam {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  double surface_area() const;
  void validate() const;
};

/// Axis-aligned box surface as 12 triangles.
Mesh make_box_mesh(const BoundingBox& box);

/// ASCII PLY with vertex x/y/z and face vertex_indices.
void save_ply(const std::filesystem::path& path, const Mesh& mesh);
Mesh load_ply(const std::filesystem::path& path);

using FieldFn = std::function<double(const Vec3&)>;

/// Zero isosurface of a scalar field sampled on a uniform grid over `box`
/// with spacing <= voxel. Cells are decomposed into six conforming
/// tetrahedra, so the surface is watertight; throws when the field has no
/// zero crossing.
Mesh extract_mesh_from_field(const FieldFn& field, const BoundingBox& box, double voxel);

/// Zero isosurface of the model's decoded TSDF over its bounding box.
Mesh extract_mesh(const SceneModel& model, double voxel);

/// Absolute trajectory error after closed-form rigid alignment, in cm.
/// Pairs are associated by nearest timestamp within `max_dt`.
double ate_rmse_cm(const Trajectory& estimate, const Trajectory& ground_truth,
                   double max_dt = 0.02);

/// Area-weighted uniform surface samples.
std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, int count, uint64_t seed);

/// Exact point-to-surface distance queries over a triangle mesh.
class MeshDistanceIndex {
 public:
  explicit MeshDistanceIndex(const Mesh& mesh);
  double distance(const Vec3& p) const;

 private:
  const Mesh& mesh_;
  Vec3 grid_min_;
  double cell_ = 1.0;
  std::array<int, 3> dims_ = {1, 1, 1};
  std::vector<std::vector<int>> cells_;
};

struct MeshMetrics {
  double accuracy_cm = 0.0;          // recon samples -> gt surface
  double completion_cm = 0.0;        // gt samples -> recon surface
  double completion_ratio_pct = 0.0; // % of gt samples within the threshold
};

MeshMetrics mesh_metrics(const Mesh& recon, const Mesh& gt, int samples = 100000,
                         double threshold_cm = 5.0, uint64_t seed = 0);

/// Renders z-depth maps by marching a TSDF field with the paper's
/// weight conversion; used for held-out-view depth evaluation.
struct TsdfDepthField {
  FieldFn field;
  BoundingBox bbox;
  double beta = 10.0;
  double truncation = 0.06;
  double near = 0.01;
  int samples_per_ray = 128;

  double render_z_depth(const CameraIntrinsics& intr, const Pose& pose, int row, int col) const;
};

TsdfDepthField model_depth_field(const SceneModel& model);

/// Mean |rendered - ground truth| z-depth in cm over valid pixels, sampled
/// with `pixel_stride` in both image axes. gt_depth(view, row, col) returns
/// 0 for invalid pixels.
double depth_l1_cm(const TsdfDepthField& field, const CameraIntrinsics& intr,
                   std::span<const Pose> poses,
                   const std::function<double(int, int, int)>& gt_depth, int pixel_stride = 4);

}  // namespace fgslam
