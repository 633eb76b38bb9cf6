#include "fgslam/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace fgslam {

std::optional<double> ray_bbox_exit(const Ray& ray, const BoundingBox& bbox) {
  double t_enter = 0.0;
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.dir[a];
    if (std::abs(d) < 1e-15) {
      if (ray.origin[a] < bbox.min_corner[a] || ray.origin[a] > bbox.max_corner[a])
        return std::nullopt;
      continue;
    }
    double t0 = (bbox.min_corner[a] - ray.origin[a]) / d;
    double t1 = (bbox.max_corner[a] - ray.origin[a]) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_exit < t_enter) return std::nullopt;
  return t_exit;
}

SampleBatch sample_along_ray(const Ray& ray, double gt_depth, const SamplingConfig& cfg,
                             const BoundingBox& bbox, double truncation, Rng& rng) {
  cfg.validate();
  SampleBatch batch;
  batch.ray = ray;
  batch.gt_depth = gt_depth;

  double far = cfg.far > 0 ? cfg.far : bbox.diagonal();
  if (auto exit = ray_bbox_exit(ray, bbox)) far = std::min(far, *exit);
  far = std::max(far, cfg.near * (1.0 + 1e-6));

  batch.z.reserve(cfg.n_stratified + cfg.n_surface);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double span = (far - cfg.near) / cfg.n_stratified;
  for (int i = 0; i < cfg.n_stratified; ++i)
    batch.z.push_back(cfg.near + span * (i + uni(rng)));
  if (gt_depth > 0.0) {
    for (int i = 0; i < cfg.n_surface; ++i)
      batch.z.push_back(gt_depth - truncation + 2.0 * truncation * uni(rng));
  }
  std::sort(batch.z.begin(), batch.z.end());
  // strict monotonicity for downstream invariants
  for (std::size_t i = 1; i < batch.z.size(); ++i)
    if (batch.z[i] <= batch.z[i - 1]) batch.z[i] = std::nextafter(batch.z[i - 1], 1e300);
  return batch;
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

double sigma_from_sdf(double s, double beta, double truncation) {
  return 1.0 - std::exp(-beta * stable_sigmoid(-s / truncation * beta));
}

double dsigma_dsdf(double s, double beta, double truncation) {
  const double g = stable_sigmoid(-s / truncation * beta);
  return -(beta * beta / truncation) * g * (1.0 - g) * std::exp(-beta * g);
}

Eigen::VectorXd weights_from_density(const Eigen::VectorXd& sigma) {
  Eigen::VectorXd w(sigma.size());
  double transmittance = 1.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    w[i] = sigma[i] * transmittance;
    transmittance *= 1.0 - sigma[i];
  }
  return w;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> tsdf_to_weights(const Eigen::VectorXd& sdf,
                                                            double beta, double truncation) {
  Eigen::VectorXd sigma(sdf.size());
  for (Eigen::Index i = 0; i < sdf.size(); ++i)
    sigma[i] = sigma_from_sdf(sdf[i], beta, truncation);
  return {sigma, weights_from_density(sigma)};
}

double render_depth(const Eigen::VectorXd& weights, std::span<const double> z) {
  if (std::size_t(weights.size()) != z.size())
    throw std::invalid_argument("render_depth: weights/depths length mismatch");
  double d = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) d += weights[i] * z[i];
  return d;
}

Eigen::VectorXd integrate_ray_feature(const Eigen::VectorXd& weights,
                                      const Eigen::MatrixXd& features) {
  if (weights.size() != features.cols())
    throw std::invalid_argument("integrate_ray_feature: weights/features length mismatch");
  return features * weights;
}

void render_ray(const SceneModel& model, const Pose& pose, const SampleBatch& batch,
                RenderPath path, RayWorkspace& ws) {
  const int n = int(batch.z.size());
  if (n < 1) throw std::invalid_argument("render_ray: empty sample batch");
  const Vec3 dir_world = pose.rotate(batch.dir_cam);

  ws.points.resize(n);
  for (int i = 0; i < n; ++i) ws.points[i] = pose.t + batch.z[i] * dir_world;

  ws.f_geo = model.geometry_feature(ws.points, &ws.geo_trace);
  RenderResult& r = ws.result;
  r.sdf = model.decode_tsdf(ws.f_geo, &ws.geo_mlp_trace);
  if (!r.sdf.allFinite()) throw std::runtime_error("render_ray: non-finite sdf from decode_tsdf");

  const double beta = model.config().beta;
  const double tr = model.config().truncation;
  r.sigma.resize(n);
  for (int i = 0; i < n; ++i) r.sigma[i] = sigma_from_sdf(r.sdf[i], beta, tr);

  ws.transmittance.resize(n);
  r.weights.resize(n);
  double transmittance = 1.0;
  for (int i = 0; i < n; ++i) {
    ws.transmittance[i] = transmittance;
    r.weights[i] = r.sigma[i] * transmittance;
    transmittance *= 1.0 - r.sigma[i];
  }

  r.depth = render_depth(r.weights, batch.z);

  ws.f_app = model.appearance_feature(ws.points, &ws.app_trace);
  if (path == RenderPath::Integrated) {
    r.ray_feature = integrate_ray_feature(r.weights, ws.f_app);
    r.color = model.decode_color(r.ray_feature, &ws.color_mlp_trace);
  } else {
    ws.sample_colors = model.decode_color_batch(ws.f_app, &ws.color_mlp_trace);
    r.ray_feature = integrate_ray_feature(r.weights, ws.f_app);
    r.color = ws.sample_colors * r.weights;
  }
  if (!r.color.allFinite()) throw std::runtime_error("render_ray: non-finite rendered color");
}

void render_ray_backward(SceneModel& model, const Pose& pose, const SampleBatch& batch,
                         RenderPath path, RayWorkspace& ws, const RayAdjoint& up,
                         TwistGrad* pose_grad) {
  const int n = int(batch.z.size());
  const RenderResult& r = ws.result;

  Eigen::VectorXd dw = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd d_f_app;

  if (path == RenderPath::Integrated) {
    // color <- MLP_a(sum_i w_i f_a_i)
    Eigen::MatrixXd d_feat =
        model.color_decoder().backward(ws.color_mlp_trace, up.d_color);
    const Eigen::VectorXd d_ray_feature = d_feat.col(0);
    dw.noalias() += ws.f_app.transpose() * d_ray_feature;
    d_f_app = d_ray_feature * r.weights.transpose();
  } else {
    // color <- sum_i w_i MLP_a(f_a_i)
    dw.noalias() += ws.sample_colors.transpose() * up.d_color;
    Eigen::MatrixXd d_rgb = up.d_color * r.weights.transpose();
    d_f_app = model.color_decoder().backward(ws.color_mlp_trace, d_rgb);
  }

  // depth <- sum_i w_i z_i
  for (int i = 0; i < n; ++i) dw[i] += up.d_depth * batch.z[i];

  // weights <- sigma via the transmittance recurrence, reversed without division
  Eigen::VectorXd d_sigma(n);
  double d_transmittance_next = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double ti = ws.transmittance[i];
    d_sigma[i] = dw[i] * ti - d_transmittance_next * ti;
    d_transmittance_next = dw[i] * r.sigma[i] + d_transmittance_next * (1.0 - r.sigma[i]);
  }

  // sigma <- sdf, plus any direct per-sample SDF adjoints from the losses
  const double beta = model.config().beta;
  const double tr = model.config().truncation;
  Eigen::MatrixXd d_sdf(1, n);
  for (int i = 0; i < n; ++i) {
    d_sdf(0, i) = d_sigma[i] * dsigma_dsdf(r.sdf[i], beta, tr);
    if (up.d_sdf.size() > 0) d_sdf(0, i) += up.d_sdf[i];
  }

  Eigen::MatrixXd d_f_geo = model.geometry_decoder().backward(ws.geo_mlp_trace, d_sdf);

  std::vector<Vec3> pos_grads;
  std::span<Vec3> pos_span;
  if (pose_grad) {
    pos_grads.assign(n, Vec3::Zero());
    pos_span = pos_grads;
  }
  model.geometry_feature_backward(ws.points, ws.geo_trace, d_f_geo, pos_span);
  model.appearance_feature_backward(ws.points, ws.app_trace, d_f_app, pos_span);

  if (pose_grad) {
    for (int i = 0; i < n; ++i) pose_grad->add_point(ws.points[i], pos_grads[i]);
  }
}

namespace {
RenderResult render_world_ray(const SceneModel& model, const SampleBatch& batch,
                              RenderPath path) {
  RayWorkspace ws;
  SampleBatch b = batch;
  b.dir_cam = batch.ray.dir;
  render_ray(model, Pose(Quat::Identity(), batch.ray.origin), b, path, ws);
  return ws.result;
}
}  // namespace

RenderResult render_ray_integrated(const SceneModel& model, const SampleBatch& batch) {
  return render_world_ray(model, batch, RenderPath::Integrated);
}

RenderResult render_ray_volumetric(const SceneModel& model, const SampleBatch& batch) {
  return render_world_ray(model, batch, RenderPath::Volumetric);
}

}  // namespace fgslam
