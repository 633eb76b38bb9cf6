#include "fgslam/losses.hpp"

namespace fgslam {

SamplePartition classify_samples(std::span<const double> z, double gt_depth, double truncation,
                                 double center_frac) {
  if (gt_depth <= 0.0) throw std::invalid_argument("classify_samples: invalid ground-truth depth");
  SamplePartition p;
  for (int i = 0; i < int(z.size()); ++i) {
    const double off = z[i] - gt_depth;
    if (off < -truncation) {
      p.freespace.push_back(i);
    } else if (off > truncation) {
      p.ignored.push_back(i);
    } else if (std::abs(off) <= center_frac * truncation) {
      p.center.push_back(i);
    } else {
      p.tail.push_back(i);
    }
  }
  return p;
}

std::size_t PixelBatch::valid_depth_count() const {
  std::size_t n = 0;
  for (const SampleBatch& r : rays)
    if (r.gt_depth > 0.0) ++n;
  return n;
}

double color_loss(const PixelBatch& batch) {
  if (batch.rays.empty()) throw std::invalid_argument("color_loss: empty batch");
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.rays.size(); ++k)
    sum += (batch.renders[k].color - batch.rays[k].gt_color).squaredNorm();
  return sum / double(batch.rays.size());
}

double depth_loss(const PixelBatch& batch) {
  const std::size_t n_valid = batch.valid_depth_count();
  if (n_valid == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.rays.size(); ++k) {
    if (batch.rays[k].gt_depth <= 0.0) continue;
    const double e = batch.rays[k].gt_depth - batch.renders[k].depth;
    sum += e * e;
  }
  return sum / double(n_valid);
}

namespace {
template <typename F>
double mean_sq_over(std::span<const int> idx, F residual) {
  if (idx.empty()) return 0.0;
  double sum = 0.0;
  for (int i : idx) {
    const double r = residual(i);
    sum += r * r;
  }
  return sum / double(idx.size());
}
}  // namespace

LossTerms loss_terms(const PixelBatch& batch, double truncation, double center_frac) {
  LossTerms t;
  t.color = color_loss(batch);
  t.depth = depth_loss(batch);
  const std::size_t n_valid = batch.valid_depth_count();
  if (n_valid == 0) return t;
  for (std::size_t k = 0; k < batch.rays.size(); ++k) {
    const SampleBatch& ray = batch.rays[k];
    if (ray.gt_depth <= 0.0) continue;
    const RenderResult& r = batch.renders[k];
    const SamplePartition p = classify_samples(ray.z, ray.gt_depth, truncation, center_frac);
    t.freespace += mean_sq_over(p.freespace, [&](int i) { return r.sdf[i] - truncation; });
    t.sdf_center +=
        mean_sq_over(p.center, [&](int i) { return r.sdf[i] + ray.z[i] - ray.gt_depth; });
    t.sdf_tail +=
        mean_sq_over(p.tail, [&](int i) { return r.sdf[i] + ray.z[i] - ray.gt_depth; });
  }
  t.freespace /= double(n_valid);
  t.sdf_center /= double(n_valid);
  t.sdf_tail /= double(n_valid);
  return t;
}

double freespace_loss(const PixelBatch& batch, double truncation) {
  return loss_terms(batch, truncation, 0.4).freespace;
}

double sdf_loss(const PixelBatch& batch, const LossWeights& weights, double truncation) {
  const LossTerms t = loss_terms(batch, truncation, weights.center_frac);
  return weights.sdf_center * t.sdf_center + weights.sdf_tail * t.sdf_tail;
}

double total_loss(const PixelBatch& batch, const LossWeights& weights, double truncation) {
  return loss_terms(batch, truncation, weights.center_frac).total(weights);
}

}  // namespace fgslam
