#include "coseg/mesh.hpp"

#include "coseg/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <vector>

namespace coseg {

namespace {

void check_faces(const TriMesh& mesh) {
  const int nv = static_cast<int>(mesh.num_vertices());
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv)
      throw Error(ErrorKind::contract, "face index out of range");
    if (a == b || b == c || a == c)
      throw Error(ErrorKind::contract, "degenerate face");
  }
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

MatX2i unique_edges(const TriMesh& mesh) {
  check_faces(mesh);
  std::vector<std::uint64_t> keys;
  keys.reserve(static_cast<std::size_t>(mesh.num_faces()) * 3);
  for (Index f = 0; f < mesh.num_faces(); ++f)
    for (int e = 0; e < 3; ++e)
      keys.push_back(edge_key(mesh.faces(f, e), mesh.faces(f, (e + 1) % 3)));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  MatX2i edges(static_cast<Index>(keys.size()), 2);
  for (Index i = 0; i < edges.rows(); ++i) {
    edges(i, 0) = static_cast<int>(keys[static_cast<std::size_t>(i)] >> 32);
    edges(i, 1) = static_cast<int>(keys[static_cast<std::size_t>(i)] &
                                   0xffffffffull);
  }
  return edges;
}

bool is_watertight(const TriMesh& mesh) {
  if (mesh.num_faces() == 0) return false;
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(static_cast<std::size_t>(mesh.num_faces()) * 3);
  for (Index f = 0; f < mesh.num_faces(); ++f)
    for (int e = 0; e < 3; ++e) {
      const int a = mesh.faces(f, e), b = mesh.faces(f, (e + 1) % 3);
      const auto key =
          (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
      if (++directed[key] > 1) return false;  // repeated directed edge
    }
  for (const auto& [key, count] : directed) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffull);
    const auto rev =
        (static_cast<std::uint64_t>(b) << 32) | static_cast<std::uint32_t>(a);
    if (directed.find(rev) == directed.end()) return false;
  }
  return true;
}

Index euler_characteristic(const TriMesh& mesh) {
  return mesh.num_vertices() - unique_edges(mesh).rows() + mesh.num_faces();
}

double surface_area(const TriMesh& mesh) {
  double area = 0.0;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

double enclosed_volume(const TriMesh& mesh) {
  double vol = 0.0;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return vol;
}

TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriMesh mesh;
  mesh.vertices.resize(static_cast<Index>(verts.size()), 3);
  for (Index i = 0; i < mesh.vertices.rows(); ++i)
    mesh.vertices.row(i) =
        (center + radius * verts[static_cast<std::size_t>(i)]).transpose();
  mesh.faces.resize(static_cast<Index>(faces.size()), 3);
  for (Index f = 0; f < mesh.faces.rows(); ++f)
    for (int e = 0; e < 3; ++e)
      mesh.faces(f, e) = faces[static_cast<std::size_t>(f)][static_cast<std::size_t>(e)];
  return mesh;
}

namespace {

std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
  const MatX2i edges = unique_edges(mesh);
  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(mesh.num_vertices()));
  for (Index e = 0; e < edges.rows(); ++e) {
    nbr[static_cast<std::size_t>(edges(e, 0))].push_back(edges(e, 1));
    nbr[static_cast<std::size_t>(edges(e, 1))].push_back(edges(e, 0));
  }
  return nbr;
}

void umbrella_step(TriMesh& mesh, const std::vector<std::vector<int>>& nbr,
                   double factor) {
  MatX3 next = mesh.vertices;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const auto& ns = nbr[static_cast<std::size_t>(v)];
    if (ns.empty()) continue;
    Vec3 centroid = Vec3::Zero();
    for (int n : ns) centroid += mesh.vertices.row(n).transpose();
    centroid /= static_cast<double>(ns.size());
    next.row(v) = mesh.vertices.row(v) +
                  factor * (centroid.transpose() - mesh.vertices.row(v));
  }
  mesh.vertices = std::move(next);
}

}  // namespace

TriMesh laplacian_smooth(const TriMesh& mesh, int iterations, double lambda) {
  if (iterations < 0)
    throw Error(ErrorKind::argument, "laplacian_smooth: negative iterations");
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw Error(ErrorKind::argument, "laplacian_smooth: lambda must be in (0,1]");
  TriMesh out = mesh;
  if (iterations == 0) return out;
  const auto nbr = vertex_neighbors(mesh);
  for (int it = 0; it < iterations; ++it) umbrella_step(out, nbr, lambda);
  return out;
}

TriMesh taubin_smooth(const TriMesh& mesh, int iterations, double lambda,
                      double mu) {
  if (iterations < 0)
    throw Error(ErrorKind::argument, "taubin_smooth: negative iterations");
  if (!(lambda > 0.0))
    throw Error(ErrorKind::argument, "taubin_smooth: lambda must be positive");
  if (!(mu < 0.0))
    throw Error(ErrorKind::argument, "taubin_smooth: mu must be negative");
  if (!(std::abs(mu) > lambda))
    throw Error(ErrorKind::argument, "taubin_smooth: |mu| must exceed lambda");
  TriMesh out = mesh;
  if (iterations == 0) return out;
  const auto nbr = vertex_neighbors(mesh);
  for (int it = 0; it < iterations; ++it) {
    umbrella_step(out, nbr, lambda);
    umbrella_step(out, nbr, mu);
  }
  return out;
}

MatX3 vertex_normals(const TriMesh& mesh) {
  check_faces(mesh);
  MatX3 normals = MatX3::Zero(mesh.num_vertices(), 3);
  std::vector<char> touched(static_cast<std::size_t>(mesh.num_vertices()), 0);
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    const Vec3 n = (b - a).cross(c - a);  // |n| = 2*area, weights by area
    for (int e = 0; e < 3; ++e) {
      normals.row(mesh.faces(f, e)) += n.transpose();
      touched[static_cast<std::size_t>(mesh.faces(f, e))] = 1;
    }
  }
  for (Index v = 0; v < normals.rows(); ++v) {
    if (!touched[static_cast<std::size_t>(v)])
      throw Error(ErrorKind::contract, "vertex with no incident face");
    const double len = normals.row(v).norm();
    if (len == 0.0)
      throw Error(ErrorKind::numerical, "zero vertex normal");
    normals.row(v) /= len;
  }
  return normals;
}

std::pair<int, double> nearest_vertex(const Vec3& query, const TriMesh& mesh) {
  if (mesh.empty()) throw Error(ErrorKind::contract, "empty mesh");
  VertexKdTree tree(mesh.vertices);
  return tree.nearest(query);
}

}  // namespace coseg
