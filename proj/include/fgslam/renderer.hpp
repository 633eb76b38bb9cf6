#pragma once

#include <optional>

#include "fgslam/rng.hpp"
#include "fgslam/scene_model.hpp"

namespace fgslam {

enum class RenderPath { Integrated, Volumetric };

struct SamplingConfig {
  int n_stratified = 32;
  int n_surface = 8;
  double near = 0.01;  // meters
  double far = 0.0;    // 0: use bbox diagonal, clipped per ray

  void validate() const {
    if (n_stratified + n_surface < 1)
      throw std::invalid_argument("sampling: need at least one sample per ray");
    if (far > 0 && near >= far) throw std::invalid_argument("sampling: near must be < far");
    if (near <= 0) throw std::invalid_argument("sampling: near must be positive");
  }
};

/// One pixel's ray with its sample depths and ground truth. Depths are
/// euclidean range along the unit direction; gt_depth 0 means invalid.
struct SampleBatch {
  Ray ray;                         // world frame at batch-construction time
  Vec3 dir_cam = Vec3::UnitZ();    // unit camera-frame direction
  int frame_slot = 0;              // pose slot during joint optimization
  std::vector<double> z;           // strictly increasing
  Vec3 gt_color = Vec3::Zero();
  double gt_depth = 0.0;
};

struct RenderResult {
  Eigen::VectorXd sdf;         // per sample, meters
  Eigen::VectorXd sigma;       // per sample, in [0,1)
  Eigen::VectorXd weights;     // nonnegative, sum <= 1
  double depth = 0.0;          // meters along the ray
  Eigen::VectorXd ray_feature; // integrated appearance feature
  Vec3 color = Vec3::Zero();
};

/// Distance to the exit of the bbox along the ray, or nullopt if the ray
/// misses the box entirely.
std::optional<double> ray_bbox_exit(const Ray& ray, const BoundingBox& bbox);

/// Stratified samples over [near, far] plus, when gt_depth is valid, surface
/// samples uniform in [gt_depth - tr, gt_depth + tr]; merged and sorted.
SampleBatch sample_along_ray(const Ray& ray, double gt_depth, const SamplingConfig& cfg,
                             const BoundingBox& bbox, double truncation, Rng& rng);

/// sigma(s) = 1 - exp(-beta * sigmoid(-(s/tr) * beta)). The SDF enters in
/// truncation units so the density transition spans the truncation band;
/// at the free-space target s = tr the sample is transparent, at s = 0 the
/// value is 1 - exp(-beta/2) regardless of tr.
double sigma_from_sdf(double s, double beta, double truncation);
double dsigma_dsdf(double s, double beta, double truncation);

/// w_i = sigma_i * prod_{j<i} (1 - sigma_j).
Eigen::VectorXd weights_from_density(const Eigen::VectorXd& sigma);

/// Combined TSDF -> (sigma, weights) conversion.
std::pair<Eigen::VectorXd, Eigen::VectorXd> tsdf_to_weights(const Eigen::VectorXd& sdf,
                                                            double beta, double truncation);

double render_depth(const Eigen::VectorXd& weights, std::span<const double> z);

/// Channelwise weighted sum of per-sample features (columns).
Eigen::VectorXd integrate_ray_feature(const Eigen::VectorXd& weights,
                                      const Eigen::MatrixXd& features);

/// Full forward stash for one ray, reused across rays to avoid allocation.
struct RayWorkspace {
  std::vector<Vec3> points;
  FeatureTrace geo_trace, app_trace;
  Eigen::MatrixXd f_geo, f_app;   // feature_channels x N
  Mlp::Trace geo_mlp_trace, color_mlp_trace;
  Eigen::VectorXd transmittance;  // prefix products of (1 - sigma)
  Eigen::MatrixXd sample_colors;  // 3 x N, volumetric path only
  RenderResult result;
};

/// Upstream adjoints for one rendered ray.
struct RayAdjoint {
  Vec3 d_color = Vec3::Zero();
  double d_depth = 0.0;
  Eigen::VectorXd d_sdf;  // direct per-sample SDF adjoints (may be empty)
};

/// Accumulated gradient of the loss w.r.t. a pose's left twist at identity.
struct TwistGrad {
  Twist g = Twist::Zero();
  void add_point(const Vec3& x, const Vec3& dx) {
    g.head<3>() += x.cross(dx);
    g.tail<3>() += dx;
  }
};

/// Renders one ray through the model at `pose`, filling ws.result. World
/// sample points are recomputed from (pose, dir_cam, z) so pose gradients
/// stay consistent.
void render_ray(const SceneModel& model, const Pose& pose, const SampleBatch& batch,
                RenderPath path, RayWorkspace& ws);

/// Reverse pass matching the last render_ray into `ws`. Accumulates grid and
/// decoder gradients into the (non-frozen) model blocks and, when pose_grad
/// is non-null, the pose twist gradient.
void render_ray_backward(SceneModel& model, const Pose& pose, const SampleBatch& batch,
                         RenderPath path, RayWorkspace& ws, const RayAdjoint& up,
                         TwistGrad* pose_grad);

/// Convenience single-ray renders on a world-space batch.
RenderResult render_ray_integrated(const SceneModel& model, const SampleBatch& batch);
RenderResult render_ray_volumetric(const SceneModel& model, const SampleBatch& batch);

}  // namespace fgslam
