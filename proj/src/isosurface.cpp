#include <map>

#include "fgslam/evalkit.hpp"

namespace fgslam {

namespace {

// Six tetrahedra around the 0-7 cube diagonal; the induced face diagonals
// match between neighboring cells, so the extracted surface is conforming.
constexpr int kTets[6][4] = {
    {0, 1, 5, 7}, {0, 5, 4, 7}, {0, 4, 6, 7},
    {0, 6, 2, 7}, {0, 2, 3, 7}, {0, 3, 1, 7},
};

struct GridMesher {
  const std::vector<double>& values;
  std::array<int, 3> dims;
  Vec3 origin;
  Vec3 spacing;
  Mesh mesh;
  std::map<std::pair<int64_t, int64_t>, int> edge_vertices;

  int64_t node_id(int ix, int iy, int iz) const {
    return (int64_t(ix) * dims[1] + iy) * dims[2] + iz;
  }
  double value_at(int64_t id) const { return values[std::size_t(id)]; }
  Vec3 point_at(int64_t id) const {
    const int iz = int(id % dims[2]);
    const int iy = int((id / dims[2]) % dims[1]);
    const int ix = int(id / (int64_t(dims[1]) * dims[2]));
    return origin + Vec3(ix * spacing[0], iy * spacing[1], iz * spacing[2]);
  }

  // Crossing vertex on the grid edge (a, b); endpoint order is normalized so
  // shared edges produce bit-identical positions.
  int edge_vertex(int64_t a, int64_t b) {
    if (a > b) std::swap(a, b);
    const auto key = std::make_pair(a, b);
    auto it = edge_vertices.find(key);
    if (it != edge_vertices.end()) return it->second;
    const double va = value_at(a), vb = value_at(b);
    const double t = va / (va - vb);
    const Vec3 p = point_at(a) + t * (point_at(b) - point_at(a));
    const int idx = int(mesh.vertices.size());
    mesh.vertices.push_back(p);
    edge_vertices.emplace(key, idx);
    return idx;
  }

  void emit(int v0, int v1, int v2) {
    const Vec3& a = mesh.vertices[v0];
    const Vec3& b = mesh.vertices[v1];
    const Vec3& c = mesh.vertices[v2];
    if ((b - a).cross(c - a).norm() < 1e-14) return;  // degenerate
    mesh.triangles.push_back({v0, v1, v2});
  }

  void march_tet(const int64_t n[4]) {
    int pos[4], neg[4];
    int npos = 0, nneg = 0;
    for (int i = 0; i < 4; ++i) {
      if (value_at(n[i]) > 0.0)
        pos[npos++] = i;
      else
        neg[nneg++] = i;
    }
    if (npos == 0 || nneg == 0) return;
    if (npos == 1 || npos == 3) {
      const int apex = npos == 1 ? pos[0] : neg[0];
      const int* base = npos == 1 ? neg : pos;
      const int v0 = edge_vertex(n[apex], n[base[0]]);
      const int v1 = edge_vertex(n[apex], n[base[1]]);
      const int v2 = edge_vertex(n[apex], n[base[2]]);
      emit(v0, v1, v2);
    } else {
      // two-vs-two: quad split into two triangles
      const int v00 = edge_vertex(n[pos[0]], n[neg[0]]);
      const int v01 = edge_vertex(n[pos[0]], n[neg[1]]);
      const int v11 = edge_vertex(n[pos[1]], n[neg[1]]);
      const int v10 = edge_vertex(n[pos[1]], n[neg[0]]);
      emit(v00, v01, v11);
      emit(v00, v11, v10);
    }
  }

  void run() {
    for (int ix = 0; ix + 1 < dims[0]; ++ix)
      for (int iy = 0; iy + 1 < dims[1]; ++iy)
        for (int iz = 0; iz + 1 < dims[2]; ++iz) {
          int64_t corner[8];
          bool any_pos = false, any_neg = false;
          for (int k = 0; k < 8; ++k) {
            corner[k] = node_id(ix + (k & 1), iy + ((k >> 1) & 1), iz + ((k >> 2) & 1));
            (value_at(corner[k]) > 0.0 ? any_pos : any_neg) = true;
          }
          if (!any_pos || !any_neg) continue;
          for (const auto& tet : kTets) {
            const int64_t n[4] = {corner[tet[0]], corner[tet[1]], corner[tet[2]],
                                  corner[tet[3]]};
            march_tet(n);
          }
        }
  }
};

}  // namespace

Mesh extract_mesh_from_field(const FieldFn& field, const BoundingBox& box, double voxel) {
  box.validate();
  if (voxel <= 0) throw std::invalid_argument("extract_mesh: voxel size must be positive");
  std::array<int, 3> dims;
  Vec3 spacing;
  for (int a = 0; a < 3; ++a) {
    dims[a] = std::max(2, int(std::ceil(box.extent()[a] / voxel)) + 1);
    spacing[a] = box.extent()[a] / (dims[a] - 1);
  }
  std::vector<double> values(std::size_t(dims[0]) * dims[1] * dims[2]);
  std::size_t i = 0;
  for (int ix = 0; ix < dims[0]; ++ix)
    for (int iy = 0; iy < dims[1]; ++iy)
      for (int iz = 0; iz < dims[2]; ++iz)
        values[i++] = field(box.min_corner +
                            Vec3(ix * spacing[0], iy * spacing[1], iz * spacing[2]));

  GridMesher mesher{values, dims, box.min_corner, spacing, {}, {}};
  mesher.run();
  if (mesher.mesh.empty())
    throw std::runtime_error("extract_mesh: empty isosurface (field has no zero crossing)");
  mesher.mesh.validate();
  return mesher.mesh;
}

Mesh extract_mesh(const SceneModel& model, double voxel) {
  // batched decode, one z-column of grid points at a time
  const BoundingBox& box = model.config().bbox;
  std::array<int, 3> dims;
  Vec3 spacing;
  for (int a = 0; a < 3; ++a) {
    dims[a] = std::max(2, int(std::ceil(box.extent()[a] / voxel)) + 1);
    spacing[a] = box.extent()[a] / (dims[a] - 1);
  }
  std::vector<double> values(std::size_t(dims[0]) * dims[1] * dims[2]);
  std::vector<Vec3> column(dims[2]);
  std::size_t i = 0;
  for (int ix = 0; ix < dims[0]; ++ix)
    for (int iy = 0; iy < dims[1]; ++iy) {
      for (int iz = 0; iz < dims[2]; ++iz)
        column[iz] = box.min_corner + Vec3(ix * spacing[0], iy * spacing[1], iz * spacing[2]);
      const Eigen::VectorXd sdf = model.decode_tsdf(model.geometry_feature(column));
      for (int iz = 0; iz < dims[2]; ++iz) values[i++] = sdf[iz];
    }

  GridMesher mesher{values, dims, box.min_corner, spacing, {}, {}};
  mesher.run();
  if (mesher.mesh.empty())
    throw std::runtime_error("extract_mesh: empty isosurface (field has no zero crossing)");
  mesher.mesh.validate();
  return mesher.mesh;
}

}  // namespace fgslam
