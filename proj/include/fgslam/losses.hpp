#pragma once

#include "fgslam/renderer.hpp"

namespace fgslam {

struct LossWeights {
  double color = 5.0;
  double depth = 0.1;
  double freespace = 10.0;
  double sdf_center = 200.0;
  double sdf_tail = 50.0;
  double center_frac = 0.4;  // inner fraction of the truncation band

  void validate() const {
    if (color < 0 || depth < 0 || freespace < 0 || sdf_center < 0 || sdf_tail < 0)
      throw std::invalid_argument("loss weights must be nonnegative");
    if (center_frac < 0 || center_frac > 1)
      throw std::invalid_argument("center_frac must be in [0,1]");
  }

  static LossWeights mapping_defaults() { return {}; }
  static LossWeights tracking_defaults() {
    LossWeights w;
    w.color = 1.0;
    return w;
  }
};

/// Disjoint index sets over a ray's samples relative to the measured depth.
struct SamplePartition {
  std::vector<int> freespace;  // z < D - tr
  std::vector<int> center;     // |z - D| <= center_frac * tr
  std::vector<int> tail;       // remainder of |z - D| <= tr
  std::vector<int> ignored;    // z > D + tr
};

SamplePartition classify_samples(std::span<const double> z, double gt_depth, double truncation,
                                 double center_frac);

/// Rays with their render results; the unit the loss terms are defined over.
struct PixelBatch {
  std::vector<SampleBatch> rays;
  std::vector<RenderResult> renders;

  std::size_t size() const { return rays.size(); }
  std::size_t valid_depth_count() const;
};

/// Unweighted loss terms; total() applies the weighting coefficients.
struct LossTerms {
  double color = 0.0;
  double depth = 0.0;
  double freespace = 0.0;
  double sdf_center = 0.0;
  double sdf_tail = 0.0;

  double total(const LossWeights& w) const {
    return w.color * color + w.depth * depth + w.freespace * freespace +
           w.sdf_center * sdf_center + w.sdf_tail * sdf_tail;
  }
};

/// Mean over rays of the channel-summed squared color error.
double color_loss(const PixelBatch& batch);

/// Mean over valid-depth rays of the squared depth error; 0 when none valid.
double depth_loss(const PixelBatch& batch);

/// Mean over valid rays of the per-ray mean of (s - tr)^2 over freespace samples.
double freespace_loss(const PixelBatch& batch, double truncation);

/// Center/tail truncation-region means of (s + z - D)^2, combined with their
/// weighting coefficients.
double sdf_loss(const PixelBatch& batch, const LossWeights& weights, double truncation);

LossTerms loss_terms(const PixelBatch& batch, double truncation, double center_frac);

double total_loss(const PixelBatch& batch, const LossWeights& weights, double truncation);

}  // namespace fgslam
