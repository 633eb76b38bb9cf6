#include "fgslam/scene_model.hpp"

#include <cmath>
#include <numeric>

#include "fgslam/rng.hpp"

namespace fgslam {

void ModelConfig::validate() const {
  bbox.validate();
  if (num_levels < 1) throw std::invalid_argument("model: num_levels must be >= 1");
  if (int(basis_channels.size()) != num_levels || int(basis_resolutions.size()) != num_levels)
    throw std::invalid_argument("model: per-level lists must match num_levels");
  const int ch_sum = std::accumulate(basis_channels.begin(), basis_channels.end(), 0);
  if (ch_sum != feature_channels)
    throw std::invalid_argument("model: basis channels must sum to feature_channels");
  for (int l = 1; l < num_levels; ++l)
    if (basis_resolutions[l] <= basis_resolutions[l - 1])
      throw std::invalid_argument("model: basis resolutions must be strictly increasing");
  if (coeff_resolution < 2) throw std::invalid_argument("model: coeff_resolution must be >= 2");
  if (truncation <= 0) throw std::invalid_argument("model: truncation must be positive");
  if (beta <= 0) throw std::invalid_argument("model: beta must be positive");
  if (geo_hidden < 1 || color_hidden < 1)
    throw std::invalid_argument("model: decoder widths must be positive");
}

namespace {
std::array<int, 3> aspect_scaled(const BoundingBox& bbox, int longest_axis_nodes) {
  const Vec3 ext = bbox.extent();
  const double longest = ext.maxCoeff();
  std::array<int, 3> res;
  for (int a = 0; a < 3; ++a)
    res[a] = std::max(2, int(std::lround(longest_axis_nodes * ext[a] / longest)));
  return res;
}
}  // namespace

std::array<int, 3> ModelConfig::level_resolution(int level) const {
  return aspect_scaled(bbox, basis_resolutions[level]);
}

std::array<int, 3> ModelConfig::coeff_res3() const {
  return aspect_scaled(bbox, coeff_resolution);
}

std::vector<int> ModelConfig::linear_resolutions(int coarsest, int finest, int levels) {
  std::vector<int> out(levels);
  if (levels == 1) {
    out[0] = finest;
    return out;
  }
  for (int l = 0; l < levels; ++l)
    out[l] = int(std::lround(coarsest + (finest - coarsest) * double(l) / (levels - 1)));
  return out;
}

void ModelConfig::apply_single_level() {
  basis_resolutions = {basis_resolutions.back()};
  basis_channels = {feature_channels};
  num_levels = 1;
}

SceneModel::SceneModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  auto make_pyramid = [&](const std::string& prefix, uint64_t stream) {
    std::vector<FactorGrid> grids;
    grids.reserve(cfg_.num_levels);
    for (int l = 0; l < cfg_.num_levels; ++l) {
      grids.emplace_back(prefix + ".basis" + std::to_string(l), cfg_.bbox,
                         cfg_.level_resolution(l), cfg_.basis_channels[l],
                         GridInit::gaussian(cfg_.basis_init_sigma, derive_seed(seed, stream + l)));
    }
    return grids;
  };
  geo_basis_ = make_pyramid("geo", 100);
  geo_coeff_ = FactorGrid("geo.coeff", cfg_.bbox, cfg_.coeff_res3(), cfg_.feature_channels,
                          GridInit::constant(cfg_.coeff_init_value));
  if (!cfg_.share_factor_grids) {
    app_basis_ = make_pyramid("app", 200);
    app_coeff_ = FactorGrid("app.coeff", cfg_.bbox, cfg_.coeff_res3(), cfg_.feature_channels,
                            GridInit::constant(cfg_.coeff_init_value));
  }
  geo_mlp_ = Mlp("mlp_g", {cfg_.feature_channels, cfg_.geo_hidden, 1}, Mlp::Output::Linear,
                 derive_seed(seed, 300));
  color_mlp_ = Mlp("mlp_a", {cfg_.feature_channels, cfg_.color_hidden, cfg_.color_hidden, 3},
                   Mlp::Output::Sigmoid, derive_seed(seed, 301));
}

Eigen::MatrixXd SceneModel::feature_impl(std::span<const Vec3> pts,
                                         const std::vector<FactorGrid>& basis,
                                         const FactorGrid& coeff, FeatureTrace* trace) const {
  const int ch = cfg_.feature_channels;
  const int n = int(pts.size());
  Eigen::MatrixXd basis_vals(ch, n), coeff_vals(ch, n);
  for (int i = 0; i < n; ++i) {
    double* col = basis_vals.col(i).data();
    int off = 0;
    for (const FactorGrid& g : basis) {
      g.sample(pts[i], std::span<double>(col + off, g.channels()));
      off += g.channels();
    }
    coeff.sample(pts[i], std::span<double>(coeff_vals.col(i).data(), ch));
  }
  Eigen::MatrixXd f = basis_vals.cwiseProduct(coeff_vals);
  if (trace) {
    trace->basis = std::move(basis_vals);
    trace->coeff = std::move(coeff_vals);
  }
  return f;
}

Eigen::MatrixXd SceneModel::geometry_feature(std::span<const Vec3> pts,
                                             FeatureTrace* trace) const {
  return feature_impl(pts, geo_basis_, geo_coeff_, trace);
}

Eigen::MatrixXd SceneModel::appearance_feature(std::span<const Vec3> pts,
                                               FeatureTrace* trace) const {
  if (cfg_.share_factor_grids) return feature_impl(pts, geo_basis_, geo_coeff_, trace);
  return feature_impl(pts, app_basis_, app_coeff_, trace);
}

void SceneModel::feature_backward_impl(std::span<const Vec3> pts, const FeatureTrace& trace,
                                       const Eigen::MatrixXd& upstream,
                                       std::vector<FactorGrid>& basis, FactorGrid& coeff,
                                       std::span<Vec3> pos_grads) {
  const int ch = cfg_.feature_channels;
  const int n = int(pts.size());
  if (upstream.rows() != ch || upstream.cols() != n)
    throw std::invalid_argument("feature backward: upstream shape mismatch");
  Eigen::VectorXd d_basis(ch), d_coeff(ch);
  for (int i = 0; i < n; ++i) {
    d_basis = upstream.col(i).cwiseProduct(trace.coeff.col(i));
    d_coeff = upstream.col(i).cwiseProduct(trace.basis.col(i));
    Vec3* pg = pos_grads.empty() ? nullptr : &pos_grads[i];
    int off = 0;
    for (FactorGrid& g : basis) {
      std::span<double> gbuf =
          g.block().frozen ? std::span<double>() : std::span<double>(g.block().grad);
      g.backward_sample(pts[i], std::span<const double>(d_basis.data() + off, g.channels()),
                        gbuf, pg);
      off += g.channels();
    }
    std::span<double> cbuf =
        coeff.block().frozen ? std::span<double>() : std::span<double>(coeff.block().grad);
    coeff.backward_sample(pts[i], std::span<const double>(d_coeff.data(), ch), cbuf, pg);
  }
}

void SceneModel::geometry_feature_backward(std::span<const Vec3> pts, const FeatureTrace& trace,
                                           const Eigen::MatrixXd& upstream,
                                           std::span<Vec3> pos_grads) {
  feature_backward_impl(pts, trace, upstream, geo_basis_, geo_coeff_, pos_grads);
}

void SceneModel::appearance_feature_backward(std::span<const Vec3> pts, const FeatureTrace& trace,
                                             const Eigen::MatrixXd& upstream,
                                             std::span<Vec3> pos_grads) {
  if (cfg_.share_factor_grids) {
    feature_backward_impl(pts, trace, upstream, geo_basis_, geo_coeff_, pos_grads);
  } else {
    feature_backward_impl(pts, trace, upstream, app_basis_, app_coeff_, pos_grads);
  }
}

Eigen::VectorXd SceneModel::decode_tsdf(const Eigen::MatrixXd& features,
                                        Mlp::Trace* trace) const {
  return geo_mlp_.forward(features, trace).row(0).transpose();
}

Vec3 SceneModel::decode_color(const Eigen::VectorXd& ray_feature, Mlp::Trace* trace) const {
  color_calls_.add(1);
  return color_mlp_.forward(ray_feature, trace).col(0);
}

Eigen::MatrixXd SceneModel::decode_color_batch(const Eigen::MatrixXd& features,
                                               Mlp::Trace* trace) const {
  color_calls_.add(uint64_t(features.cols()));
  return color_mlp_.forward(features, trace);
}

SceneModel::ParameterReport SceneModel::parameter_report() const {
  ParameterReport r;
  for (const ParamBlock* b : parameter_blocks()) r.scalar_count += b->size();
  r.bytes = r.scalar_count * sizeof(double);
  return r;
}

std::vector<ParamBlock*> SceneModel::parameter_blocks() {
  std::vector<ParamBlock*> out;
  for (FactorGrid& g : geo_basis_) out.push_back(&g.block());
  out.push_back(&geo_coeff_.block());
  if (!cfg_.share_factor_grids) {
    for (FactorGrid& g : app_basis_) out.push_back(&g.block());
    out.push_back(&app_coeff_.block());
  }
  for (ParamBlock* b : geo_mlp_.blocks()) out.push_back(b);
  for (ParamBlock* b : color_mlp_.blocks()) out.push_back(b);
  return out;
}

std::vector<const ParamBlock*> SceneModel::parameter_blocks() const {
  std::vector<const ParamBlock*> out;
  auto* self = const_cast<SceneModel*>(this);
  for (ParamBlock* b : self->parameter_blocks()) out.push_back(b);
  return out;
}

void SceneModel::zero_grads() {
  for (ParamBlock* b : parameter_blocks()) b->zero_grad();
}

void SceneModel::set_all_frozen(bool frozen) {
  for (ParamBlock* b : parameter_blocks()) b->frozen = frozen;
}

uint64_t SceneModel::value_digest() const {
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const ParamBlock* b : parameter_blocks()) {
    feed(b->name.data(), b->name.size());
    feed(b->value.data(), b->value.size() * sizeof(double));
  }
  return h;
}

}  // namespace fgslam
