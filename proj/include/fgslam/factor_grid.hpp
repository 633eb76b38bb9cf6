#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>

#include "fgslam/geometry.hpp"
#include "fgslam/param_block.hpp"

namespace fgslam {

struct BoundingBox {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Ones();

  void validate() const {
    if (!(max_corner.array() > min_corner.array()).all())
      throw std::invalid_argument("bounding box: max_corner must exceed min_corner");
  }
  Vec3 extent() const { return max_corner - min_corner; }
  Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
  }
};

struct GridInit {
  enum class Kind { Constant, Gaussian } kind = Kind::Constant;
  double value = 0.0;  // constant fill
  double sigma = 0.0;  // gaussian stddev
  uint64_t seed = 0;

  static GridInit constant(double v) { return {Kind::Constant, v, 0.0, 0}; }
  static GridInit gaussian(double sigma, uint64_t seed) {
    return {Kind::Gaussian, 0.0, sigma, seed};
  }
};

/// Dense C-channel tensor grid over a bounding box, vertex-centered:
/// node 0 sits on min_corner, node res-1 on max_corner. Out-of-bounds
/// queries clamp to the boundary cell.
class FactorGrid {
 public:
  FactorGrid() = default;
  FactorGrid(std::string name, const BoundingBox& bbox, const std::array<int, 3>& resolution,
             int channels, const GridInit& init)
      : bbox_(bbox), res_(resolution), channels_(channels) {
    bbox_.validate();
    for (int r : res_)
      if (r < 2) throw std::invalid_argument("factor grid: resolution must be >= 2 per axis");
    if (channels < 1) throw std::invalid_argument("factor grid: channels must be positive");

    const std::size_t n =
        std::size_t(res_[0]) * res_[1] * res_[2] * std::size_t(channels_);
    block_ = ParamBlock(std::move(name), n);
    if (init.kind == GridInit::Kind::Constant) {
      std::fill(block_.value.begin(), block_.value.end(), init.value);
    } else {
      std::mt19937_64 rng(init.seed);
      std::normal_distribution<double> dist(0.0, init.sigma);
      for (double& v : block_.value) v = dist(rng);
    }
    for (int a = 0; a < 3; ++a)
      scale_[a] = (res_[a] - 1) / (bbox_.max_corner[a] - bbox_.min_corner[a]);
  }

  const BoundingBox& bbox() const { return bbox_; }
  const std::array<int, 3>& resolution() const { return res_; }
  int channels() const { return channels_; }
  ParamBlock& block() { return block_; }
  const ParamBlock& block() const { return block_; }
  std::size_t node_count() const { return block_.size() / channels_; }

  std::size_t value_index(int ix, int iy, int iz, int c) const {
    return ((std::size_t(ix) * res_[1] + iy) * res_[2] + iz) * channels_ + c;
  }

  /// Interpolation stencil at a point: base cell, weights, and the
  /// d(weight)/d(position) scale (zero along clamped axes).
  struct Stencil {
    int i0[3];
    double f[3];        // fractional position within the cell, in [0,1]
    double dscale[3];   // du/dp per axis, 0 if the query clamped on that axis
  };

  Stencil stencil(const Vec3& p) const {
    Stencil st;
    for (int a = 0; a < 3; ++a) {
      double u = (p[a] - bbox_.min_corner[a]) * scale_[a];
      st.dscale[a] = scale_[a];
      if (u <= 0.0) {
        u = 0.0;
        st.dscale[a] = 0.0;
      } else if (u >= res_[a] - 1) {
        u = res_[a] - 1;
        st.dscale[a] = 0.0;
      }
      int i = int(u);
      if (i > res_[a] - 2) i = res_[a] - 2;
      st.i0[a] = i;
      st.f[a] = u - i;
    }
    return st;
  }

  /// Trilinear sample of all channels at p into out (size channels()).
  void sample(const Vec3& p, std::span<double> out) const {
    const Stencil st = stencil(p);
    const double* v = block_.value.data();
    for (int c = 0; c < channels_; ++c) out[c] = 0.0;
    for (int dx = 0; dx < 2; ++dx) {
      const double wx = dx ? st.f[0] : 1.0 - st.f[0];
      for (int dy = 0; dy < 2; ++dy) {
        const double wxy = wx * (dy ? st.f[1] : 1.0 - st.f[1]);
        for (int dz = 0; dz < 2; ++dz) {
          const double w = wxy * (dz ? st.f[2] : 1.0 - st.f[2]);
          const double* node =
              v + value_index(st.i0[0] + dx, st.i0[1] + dy, st.i0[2] + dz, 0);
          for (int c = 0; c < channels_; ++c) out[c] += w * node[c];
        }
      }
    }
  }

  /// Adjoint of sample: distributes `upstream` onto the 8 corner slots of
  /// `grad` (shaped like the value array) and, when pos_grad is non-null,
  /// accumulates d<upstream, sample(p)>/dp into it.
  void backward_sample(const Vec3& p, std::span<const double> upstream,
                       std::span<double> grad, Vec3* pos_grad) const {
    if (!grad.empty() && grad.size() != block_.size())
      throw std::invalid_argument("scatter_adjoint: gradient buffer shape mismatch");
    const Stencil st = stencil(p);
    const double* v = block_.value.data();
    double* g = grad.empty() ? nullptr : grad.data();
    double dfdu[3] = {0, 0, 0};
    for (int dx = 0; dx < 2; ++dx) {
      const double wx = dx ? st.f[0] : 1.0 - st.f[0];
      const double sx = dx ? 1.0 : -1.0;
      for (int dy = 0; dy < 2; ++dy) {
        const double wy = dy ? st.f[1] : 1.0 - st.f[1];
        const double sy = dy ? 1.0 : -1.0;
        for (int dz = 0; dz < 2; ++dz) {
          const double wz = dz ? st.f[2] : 1.0 - st.f[2];
          const double sz = dz ? 1.0 : -1.0;
          const std::size_t base =
              value_index(st.i0[0] + dx, st.i0[1] + dy, st.i0[2] + dz, 0);
          double dot = 0.0;
          if (pos_grad || g) {
            const double w = wx * wy * wz;
            for (int c = 0; c < channels_; ++c) {
              if (g) g[base + c] += w * upstream[c];
              dot += upstream[c] * v[base + c];
            }
          }
          if (pos_grad) {
            dfdu[0] += sx * wy * wz * dot;
            dfdu[1] += wx * sy * wz * dot;
            dfdu[2] += wx * wy * sz * dot;
          }
        }
      }
    }
    if (pos_grad)
      for (int a = 0; a < 3; ++a) (*pos_grad)[a] += dfdu[a] * st.dscale[a];
  }

 private:
  BoundingBox bbox_;
  std::array<int, 3> res_ = {2, 2, 2};
  int channels_ = 1;
  double scale_[3] = {1, 1, 1};
  ParamBlock block_;
};

inline FactorGrid new_grid(const BoundingBox& bbox, const std::array<int, 3>& resolution,
                           int channels, const GridInit& init, std::string name = "grid") {
  return FactorGrid(std::move(name), bbox, resolution, channels, init);
}

/// Batch sample: one channel-vector per point.
inline std::vector<std::vector<double>> sample_trilinear(const FactorGrid& grid,
                                                         std::span<const Vec3> points) {
  std::vector<std::vector<double>> out(points.size(),
                                       std::vector<double>(grid.channels()));
  for (std::size_t i = 0; i < points.size(); ++i) grid.sample(points[i], out[i]);
  return out;
}

/// Batch adjoint accumulation into grad_buffer (shaped like grid values).
inline void scatter_adjoint(const FactorGrid& grid, std::span<const Vec3> points,
                            std::span<const std::vector<double>> upstream,
                            std::span<double> grad_buffer) {
  if (upstream.size() != points.size())
    throw std::invalid_argument("scatter_adjoint: points/upstream length mismatch");
  for (std::size_t i = 0; i < points.size(); ++i)
    grid.backward_sample(points[i], upstream[i], grad_buffer, nullptr);
}

}  // namespace fgslam
