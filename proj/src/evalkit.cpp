#include "fgslam/evalkit.hpp"

#include <Eigen/SVD>
#include <fstream>
#include <sstream>

#include "fgslam/rng.hpp"

namespace fgslam {

double Mesh::surface_area() const {
  double area = 0.0;
  for (const auto& t : triangles) {
    const Vec3& a = vertices[t[0]];
    area += 0.5 * (vertices[t[1]] - a).cross(vertices[t[2]] - a).norm();
  }
  return area;
}

void Mesh::validate() const {
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k)
      if (t[k] < 0 || t[k] >= int(vertices.size()))
        throw std::runtime_error("mesh: triangle index out of range");
}

Mesh make_box_mesh(const BoundingBox& box) {
  Mesh m;
  const Vec3& lo = box.min_corner;
  const Vec3& hi = box.max_corner;
  for (int k = 0; k < 8; ++k)
    m.vertices.emplace_back(k & 1 ? hi.x() : lo.x(), k & 2 ? hi.y() : lo.y(),
                            k & 4 ? hi.z() : lo.z());
  const int faces[6][4] = {
      {0, 2, 6, 4}, {1, 5, 7, 3},  // x- x+
      {0, 4, 5, 1}, {2, 3, 7, 6},  // y- y+
      {0, 1, 3, 2}, {4, 6, 7, 5},  // z- z+
  };
  for (const auto& f : faces) {
    m.triangles.push_back({f[0], f[1], f[2]});
    m.triangles.push_back({f[0], f[2], f[3]});
  }
  return m;
}

void save_ply(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh: " + path.string());
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  out.precision(12);
  for (const Vec3& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

Mesh load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh: " + path.string());
  std::string line;
  std::size_t n_vertices = 0, n_faces = 0;
  if (!std::getline(in, line) || line != "ply")
    throw std::runtime_error("not a PLY file: " + path.string());
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "element") {
      std::string what;
      std::size_t count;
      ss >> what >> count;
      if (what == "vertex") n_vertices = count;
      if (what == "face") n_faces = count;
    } else if (tok == "end_header") {
      break;
    }
  }
  Mesh m;
  m.vertices.resize(n_vertices);
  for (auto& v : m.vertices)
    if (!(in >> v.x() >> v.y() >> v.z()))
      throw std::runtime_error("truncated PLY vertices: " + path.string());
  m.triangles.resize(n_faces);
  for (auto& t : m.triangles) {
    int count;
    if (!(in >> count >> t[0] >> t[1] >> t[2]) || count != 3)
      throw std::runtime_error("PLY faces must be triangles: " + path.string());
  }
  m.validate();
  return m;
}

double ate_rmse_cm(const Trajectory& estimate, const Trajectory& ground_truth, double max_dt) {
  estimate.validate();
  ground_truth.validate();

  std::vector<std::pair<Vec3, Vec3>> pairs;  // (est, gt) translations
  for (const auto& e : estimate.entries) {
    const Trajectory::Entry* best = nullptr;
    double best_dt = max_dt;
    for (const auto& g : ground_truth.entries) {
      const double dt = std::abs(g.timestamp - e.timestamp);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &g;
      }
    }
    if (best) pairs.emplace_back(e.pose.t, best->pose.t);
  }
  if (pairs.size() < 2)
    throw std::invalid_argument("ate_rmse: fewer than 2 associated pose pairs");

  Vec3 mean_est = Vec3::Zero(), mean_gt = Vec3::Zero();
  for (const auto& [e, g] : pairs) {
    mean_est += e;
    mean_gt += g;
  }
  mean_est /= double(pairs.size());
  mean_gt /= double(pairs.size());

  Eigen::Matrix3d w = Eigen::Matrix3d::Zero();
  for (const auto& [e, g] : pairs) w += (g - mean_gt) * (e - mean_est).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) s(2, 2) = -1.0;
  const Eigen::Matrix3d rot = svd.matrixU() * s * svd.matrixV().transpose();
  const Vec3 trans = mean_gt - rot * mean_est;

  double sq_sum = 0.0;
  for (const auto& [e, g] : pairs) sq_sum += (g - (rot * e + trans)).squaredNorm();
  return 100.0 * std::sqrt(sq_sum / double(pairs.size()));
}

std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, int count, uint64_t seed) {
  if (mesh.empty()) throw std::invalid_argument("sample_mesh_surface: empty mesh");
  std::vector<double> cum_area(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const Vec3& a = mesh.vertices[t[0]];
    total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
    cum_area[i] = total;
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double pick = uni(rng) * total;
    const auto it = std::lower_bound(cum_area.begin(), cum_area.end(), pick);
    const auto& t = mesh.triangles[it - cum_area.begin()];
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    out.push_back(mesh.vertices[t[0]] + u * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                  v * (mesh.vertices[t[2]] - mesh.vertices[t[0]]));
  }
  return out;
}

namespace {

// Ericson-style closest point on triangle.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + (d1 / (d1 - d3)) * ab)).norm();

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + (d2 / (d2 - d6)) * ac)).norm();

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b))).norm();

  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + (vb * denom) * ab + (vc * denom) * ac)).norm();
}

}  // namespace

MeshDistanceIndex::MeshDistanceIndex(const Mesh& mesh) : mesh_(mesh) {
  if (mesh.empty()) throw std::invalid_argument("mesh distance index: empty mesh");
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 extent = (hi - lo).cwiseMax(1e-9);
  cell_ = std::max(extent.maxCoeff() / 64.0, 1e-9);
  for (int a = 0; a < 3; ++a)
    dims_[a] = std::clamp(int(std::ceil(extent[a] / cell_)), 1, 64);
  grid_min_ = lo;
  cells_.resize(std::size_t(dims_[0]) * dims_[1] * dims_[2]);

  auto cell_index = [&](int ix, int iy, int iz) {
    return (std::size_t(ix) * dims_[1] + iy) * dims_[2] + iz;
  };
  for (int t = 0; t < int(mesh.triangles.size()); ++t) {
    Vec3 tlo = mesh.vertices[mesh.triangles[t][0]];
    Vec3 thi = tlo;
    for (int k = 1; k < 3; ++k) {
      tlo = tlo.cwiseMin(mesh.vertices[mesh.triangles[t][k]]);
      thi = thi.cwiseMax(mesh.vertices[mesh.triangles[t][k]]);
    }
    int c0[3], c1[3];
    for (int a = 0; a < 3; ++a) {
      c0[a] = std::clamp(int((tlo[a] - grid_min_[a]) / cell_), 0, dims_[a] - 1);
      c1[a] = std::clamp(int((thi[a] - grid_min_[a]) / cell_), 0, dims_[a] - 1);
    }
    for (int ix = c0[0]; ix <= c1[0]; ++ix)
      for (int iy = c0[1]; iy <= c1[1]; ++iy)
        for (int iz = c0[2]; iz <= c1[2]; ++iz) cells_[cell_index(ix, iy, iz)].push_back(t);
  }
}

double MeshDistanceIndex::distance(const Vec3& p) const {
  int pc[3];
  for (int a = 0; a < 3; ++a)
    pc[a] = std::clamp(int((p[a] - grid_min_[a]) / cell_), 0, dims_[a] - 1);

  double best = std::numeric_limits<double>::infinity();
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  for (int ring = 0; ring <= max_ring; ++ring) {
    // cells strictly beyond this ring cannot contain anything closer
    if (best < double(ring) * cell_ - cell_) break;
    for (int ix = pc[0] - ring; ix <= pc[0] + ring; ++ix) {
      if (ix < 0 || ix >= dims_[0]) continue;
      for (int iy = pc[1] - ring; iy <= pc[1] + ring; ++iy) {
        if (iy < 0 || iy >= dims_[1]) continue;
        for (int iz = pc[2] - ring; iz <= pc[2] + ring; ++iz) {
          if (iz < 0 || iz >= dims_[2]) continue;
          const int cheb = std::max({std::abs(ix - pc[0]), std::abs(iy - pc[1]),
                                     std::abs(iz - pc[2])});
          if (cheb != ring) continue;
          const auto& bucket = cells_[(std::size_t(ix) * dims_[1] + iy) * dims_[2] + iz];
          for (int t : bucket) {
            const auto& tri = mesh_.triangles[t];
            best = std::min(best, point_triangle_distance(p, mesh_.vertices[tri[0]],
                                                          mesh_.vertices[tri[1]],
                                                          mesh_.vertices[tri[2]]));
          }
        }
      }
    }
  }
  return best;
}

MeshMetrics mesh_metrics(const Mesh& recon, const Mesh& gt, int samples, double threshold_cm,
                         uint64_t seed) {
  if (recon.empty() || gt.empty()) throw std::invalid_argument("mesh_metrics: empty mesh");
  const auto recon_pts = sample_mesh_surface(recon, samples, derive_seed(seed, 1));
  const auto gt_pts = sample_mesh_surface(gt, samples, derive_seed(seed, 2));
  const MeshDistanceIndex recon_index(recon);
  const MeshDistanceIndex gt_index(gt);

  MeshMetrics m;
  for (const Vec3& p : recon_pts) m.accuracy_cm += gt_index.distance(p);
  m.accuracy_cm = 100.0 * m.accuracy_cm / double(recon_pts.size());

  int within = 0;
  for (const Vec3& p : gt_pts) {
    const double d = recon_index.distance(p);
    m.completion_cm += d;
    if (100.0 * d < threshold_cm) ++within;
  }
  m.completion_cm = 100.0 * m.completion_cm / double(gt_pts.size());
  m.completion_ratio_pct = 100.0 * double(within) / double(gt_pts.size());
  return m;
}

double TsdfDepthField::render_z_depth(const CameraIntrinsics& intr, const Pose& pose, int row,
                                      int col) const {
  const Vec3 d_cam = pixel_dir_cam(intr, row, col);
  const double range_factor = d_cam.norm();
  Ray ray;
  ray.origin = pose.t;
  ray.dir = pose.rotate(d_cam / range_factor);

  double far = bbox.diagonal();
  if (auto exit = ray_bbox_exit(ray, bbox)) far = std::min(far, *exit);
  far = std::max(far, near * (1 + 1e-9));

  const int n = samples_per_ray;
  Eigen::VectorXd sdf(n);
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) {
    z[i] = near + (far - near) * (i + 0.5) / n;
    sdf[i] = field(ray.origin + z[i] * ray.dir);
  }
  const auto [sigma, w] = tsdf_to_weights(sdf, beta, truncation);
  return render_depth(w, z) / range_factor;
}

TsdfDepthField model_depth_field(const SceneModel& model) {
  TsdfDepthField f;
  f.field = [&model](const Vec3& p) {
    return model.decode_tsdf(model.geometry_feature(std::span<const Vec3>(&p, 1)))(0);
  };
  f.bbox = model.config().bbox;
  f.beta = model.config().beta;
  f.truncation = model.config().truncation;
  return f;
}

double depth_l1_cm(const TsdfDepthField& field, const CameraIntrinsics& intr,
                   std::span<const Pose> poses,
                   const std::function<double(int, int, int)>& gt_depth, int pixel_stride) {
  double err = 0.0;
  int count = 0;
  for (int view = 0; view < int(poses.size()); ++view) {
    for (int row = pixel_stride / 2; row < intr.height; row += pixel_stride) {
      for (int col = pixel_stride / 2; col < intr.width; col += pixel_stride) {
        const double gt = gt_depth(view, row, col);
        if (gt <= 0.0) continue;
        err += std::abs(field.render_z_depth(intr, poses[view], row, col) - gt);
        ++count;
      }
    }
  }
  if (count == 0) throw std::runtime_error("depth_l1: no valid pixels");
  return 100.0 * err / double(count);
}

}  // namespace fgslam
