#pragma once

#include "fgslam/losses.hpp"

namespace fgslam {

/// Loss value (and per-term breakdown) of one forward pass over a ray batch.
struct BatchEval {
  LossTerms terms;
  double total = 0.0;
  int n_rays = 0;
  int n_valid = 0;
};

/// Fused forward (+ optional reverse) pass of the total loss over a batch of
/// rays. Poses are indexed by each ray's frame_slot; `pose_twists`, when
/// non-null per slot, receive the gradient of the loss w.r.t. that pose's
/// left twist at identity. Grid and decoder gradients accumulate into the
/// model's non-frozen blocks. Rays are processed in order, so accumulation
/// is deterministic.
BatchEval evaluate_batch(SceneModel& model, std::span<const SampleBatch> rays,
                         std::span<const Pose> poses, const LossWeights& weights,
                         RenderPath path, std::span<ParamBlock* const> pose_twists,
                         bool backward);

/// Forward-only convenience on a const model.
BatchEval evaluate_batch_loss(const SceneModel& model, std::span<const SampleBatch> rays,
                              std::span<const Pose> poses, const LossWeights& weights,
                              RenderPath path);

}  // namespace fgslam
