#include "fgslam/pipeline.hpp"

namespace fgslam {

BatchEval evaluate_batch(SceneModel& model, std::span<const SampleBatch> rays,
                         std::span<const Pose> poses, const LossWeights& weights,
                         RenderPath path, std::span<ParamBlock* const> pose_twists,
                         bool backward) {
  if (rays.empty()) throw std::invalid_argument("evaluate_batch: empty ray batch");
  weights.validate();
  const double tr = model.config().truncation;

  BatchEval ev;
  ev.n_rays = int(rays.size());
  for (const SampleBatch& r : rays)
    if (r.gt_depth > 0.0) ++ev.n_valid;

  std::vector<TwistGrad> twist_grads(poses.size());

  RayWorkspace ws;
  RayAdjoint up;
  for (const SampleBatch& ray : rays) {
    const Pose& pose = poses[ray.frame_slot];
    render_ray(model, pose, ray, path, ws);
    const RenderResult& r = ws.result;
    const int n = int(ray.z.size());

    const Vec3 color_err = r.color - ray.gt_color;
    ev.terms.color += color_err.squaredNorm() / ev.n_rays;
    up.d_color = weights.color * (2.0 / ev.n_rays) * color_err;
    up.d_depth = 0.0;
    up.d_sdf.setZero(n);

    if (ray.gt_depth > 0.0) {
      const double depth_err = r.depth - ray.gt_depth;
      ev.terms.depth += depth_err * depth_err / ev.n_valid;
      up.d_depth = weights.depth * (2.0 / ev.n_valid) * depth_err;

      const SamplePartition part =
          classify_samples(ray.z, ray.gt_depth, tr, weights.center_frac);
      if (!part.freespace.empty()) {
        const double norm = 1.0 / (double(ev.n_valid) * part.freespace.size());
        for (int i : part.freespace) {
          const double res = r.sdf[i] - tr;
          ev.terms.freespace += res * res * norm;
          up.d_sdf[i] += weights.freespace * 2.0 * res * norm;
        }
      }
      if (!part.center.empty()) {
        const double norm = 1.0 / (double(ev.n_valid) * part.center.size());
        for (int i : part.center) {
          const double res = r.sdf[i] + ray.z[i] - ray.gt_depth;
          ev.terms.sdf_center += res * res * norm;
          up.d_sdf[i] += weights.sdf_center * 2.0 * res * norm;
        }
      }
      if (!part.tail.empty()) {
        const double norm = 1.0 / (double(ev.n_valid) * part.tail.size());
        for (int i : part.tail) {
          const double res = r.sdf[i] + ray.z[i] - ray.gt_depth;
          ev.terms.sdf_tail += res * res * norm;
          up.d_sdf[i] += weights.sdf_tail * 2.0 * res * norm;
        }
      }
    }

    if (backward) {
      ParamBlock* twist = pose_twists.empty() ? nullptr : pose_twists[ray.frame_slot];
      const bool want_pose = twist != nullptr && !twist->frozen;
      render_ray_backward(model, pose, ray, path, ws, up,
                          want_pose ? &twist_grads[ray.frame_slot] : nullptr);
    }
  }

  if (backward && !pose_twists.empty()) {
    for (std::size_t s = 0; s < poses.size(); ++s) {
      ParamBlock* twist = pose_twists[s];
      if (!twist || twist->frozen) continue;
      if (twist->size() != 6) throw std::invalid_argument("pose twist block must have 6 entries");
      for (int k = 0; k < 6; ++k) twist->grad[k] += twist_grads[s].g[k];
    }
  }

  ev.total = ev.terms.total(weights);
  if (!std::isfinite(ev.total))
    throw std::runtime_error("evaluate_batch: non-finite total loss");
  return ev;
}

BatchEval evaluate_batch_loss(const SceneModel& model, std::span<const SampleBatch> rays,
                              std::span<const Pose> poses, const LossWeights& weights,
                              RenderPath path) {
  // Forward-only: the backward branch is never taken, so the model is not
  // written to despite the non-const plumbing.
  return evaluate_batch(const_cast<SceneModel&>(model), rays, poses, weights, path, {}, false);
}

}  // namespace fgslam
