#pragma once

#include <atomic>
#include <span>
#include <vector>

#include "fgslam/factor_grid.hpp"
#include "fgslam/mlp.hpp"

namespace fgslam {

struct ModelConfig {
  BoundingBox bbox;
  int num_levels = 6;
  std::vector<int> basis_channels = {4, 4, 4, 2, 2, 2};
  // Nodes along the longest bbox axis per level; other axes scale by aspect.
  std::vector<int> basis_resolutions = {32, 51, 70, 90, 109, 128};
  int coeff_resolution = 32;
  int feature_channels = 18;
  double truncation = 0.06;  // meters
  double beta = 10.0;
  int geo_hidden = 64;
  int color_hidden = 128;
  bool share_factor_grids = false;
  double basis_init_sigma = 0.05;
  double coeff_init_value = 0.1;

  void validate() const;
  std::array<int, 3> level_resolution(int level) const;
  std::array<int, 3> coeff_res3() const;

  /// Evenly spaced node counts from `coarsest` to `finest` inclusive.
  static std::vector<int> linear_resolutions(int coarsest, int finest, int levels);

  /// Collapses the basis pyramid to a single level at the finest resolution
  /// carrying all feature channels.
  void apply_single_level();
};

/// Per-point stash from a feature evaluation, needed by the backward pass.
struct FeatureTrace {
  Eigen::MatrixXd basis;  // feature_channels x N, concatenated level samples
  Eigen::MatrixXd coeff;  // feature_channels x N
};

/// The learnable scene: geometry/appearance basis pyramids, coefficient
/// grids, and the two decoders. Features are element-wise products of the
/// concatenated basis samples with the coefficient samples.
class SceneModel {
 public:
  SceneModel() = default;
  SceneModel(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  Eigen::MatrixXd geometry_feature(std::span<const Vec3> pts, FeatureTrace* trace = nullptr) const;
  Eigen::MatrixXd appearance_feature(std::span<const Vec3> pts,
                                     FeatureTrace* trace = nullptr) const;

  /// Adjoints of the feature ops: accumulate grid-value gradients (skipping
  /// frozen blocks) and, when pos_grads is nonempty, d<upstream,f>/d(point).
  void geometry_feature_backward(std::span<const Vec3> pts, const FeatureTrace& trace,
                                 const Eigen::MatrixXd& upstream, std::span<Vec3> pos_grads);
  void appearance_feature_backward(std::span<const Vec3> pts, const FeatureTrace& trace,
                                   const Eigen::MatrixXd& upstream, std::span<Vec3> pos_grads);

  /// TSDF decode, one scalar (meters) per feature column.
  Eigen::VectorXd decode_tsdf(const Eigen::MatrixXd& features, Mlp::Trace* trace = nullptr) const;

  /// Color decode of a single ray feature; counts one decoder invocation.
  Vec3 decode_color(const Eigen::VectorXd& ray_feature, Mlp::Trace* trace = nullptr) const;

  /// Per-sample color decode (volumetric path); counts N invocations.
  Eigen::MatrixXd decode_color_batch(const Eigen::MatrixXd& features,
                                     Mlp::Trace* trace = nullptr) const;

  Mlp& geometry_decoder() { return geo_mlp_; }
  Mlp& color_decoder() { return color_mlp_; }
  const Mlp& geometry_decoder() const { return geo_mlp_; }
  const Mlp& color_decoder() const { return color_mlp_; }

  std::vector<FactorGrid>& geometry_basis() { return geo_basis_; }
  FactorGrid& geometry_coeff() { return geo_coeff_; }
  std::vector<FactorGrid>& appearance_basis() {
    return cfg_.share_factor_grids ? geo_basis_ : app_basis_;
  }
  FactorGrid& appearance_coeff() { return cfg_.share_factor_grids ? geo_coeff_ : app_coeff_; }

  /// Deep value copy; later updates to this model do not alter the snapshot.
  SceneModel snapshot() const { return *this; }

  struct ParameterReport {
    std::size_t scalar_count = 0;
    std::size_t bytes = 0;
  };
  ParameterReport parameter_report() const;

  /// Stable-order list of every learnable block (grids then decoders).
  std::vector<ParamBlock*> parameter_blocks();
  std::vector<const ParamBlock*> parameter_blocks() const;
  void zero_grads();
  void set_all_frozen(bool frozen);

  uint64_t color_decode_calls() const { return color_calls_.load(); }
  void reset_decode_counter() const { color_calls_.store(0); }

  /// FNV-1a hash over all parameter bytes; used for byte-identity checks.
  uint64_t value_digest() const;

 private:
  ModelConfig cfg_;
  std::vector<FactorGrid> geo_basis_;
  FactorGrid geo_coeff_;
  std::vector<FactorGrid> app_basis_;
  FactorGrid app_coeff_;
  Mlp geo_mlp_;
  Mlp color_mlp_;

  struct Counter {
    std::atomic<uint64_t> n{0};
    Counter() = default;
    Counter(const Counter& o) : n(o.n.load()) {}
    Counter& operator=(const Counter& o) {
      n.store(o.n.load());
      return *this;
    }
    void store(uint64_t v) { n.store(v); }
    uint64_t load() const { return n.load(); }
    void add(uint64_t k) const { const_cast<std::atomic<uint64_t>&>(n).fetch_add(k); }
  };
  mutable Counter color_calls_;

  Eigen::MatrixXd feature_impl(std::span<const Vec3> pts, const std::vector<FactorGrid>& basis,
                               const FactorGrid& coeff, FeatureTrace* trace) const;
  void feature_backward_impl(std::span<const Vec3> pts, const FeatureTrace& trace,
                             const Eigen::MatrixXd& upstream, std::vector<FactorGrid>& basis,
                             FactorGrid& coeff, std::span<Vec3> pos_grads);
};

}  // namespace fgslam
