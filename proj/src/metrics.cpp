#include "coseg/metrics.hpp"

#include "coseg/bvh.hpp"
#include "coseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace coseg {

MatX3 sample_surface_points(const TriMesh& mesh, Index n_samples,
                            std::uint64_t seed) {
  if (mesh.num_faces() == 0)
    throw Error(ErrorKind::degenerate_input, "cannot sample an empty mesh");
  if (n_samples < 1)
    throw Error(ErrorKind::argument, "n_samples must be >= 1");

  std::vector<double> cumulative(static_cast<std::size_t>(mesh.num_faces()));
  double total = 0.0;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative[static_cast<std::size_t>(f)] = total;
  }
  if (!(total > 0.0))
    throw Error(ErrorKind::degenerate_input, "mesh has zero area");

  Rng rng(seed);
  MatX3 points(n_samples, 3);
  for (Index s = 0; s < n_samples; ++s) {
    const double pick = rng.uniform01() * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
    const Index f = std::min<Index>(
        static_cast<Index>(it - cumulative.begin()), mesh.num_faces() - 1);
    // sqrt trick for uniform barycentric coordinates
    const double r1 = std::sqrt(rng.uniform01());
    const double r2 = rng.uniform01();
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    points.row(s) =
        ((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c).transpose();
  }
  return points;
}

namespace {

void directed_distances(const TriMesh& from, const TriBvh& to_bvh,
                        Index n_samples, std::uint64_t seed,
                        std::vector<double>& out) {
  const MatX3 pts = sample_surface_points(from, n_samples, seed);
  out.reserve(out.size() + static_cast<std::size_t>(n_samples));
  for (Index i = 0; i < pts.rows(); ++i) {
    const auto hit = to_bvh.closest_point(pts.row(i));
    out.push_back(std::sqrt(hit.distance2));
  }
}

}  // namespace

double assd(const TriMesh& a, const TriMesh& b, Index n_samples,
            std::uint64_t seed) {
  const TriBvh bvh_a(a.vertices, a.faces);
  const TriBvh bvh_b(b.vertices, b.faces);
  // Both directions draw from the same seed so assd(a,b) == assd(b,a).
  std::vector<double> dab, dba;
  directed_distances(a, bvh_b, n_samples, seed, dab);
  directed_distances(b, bvh_a, n_samples, seed, dba);
  double ma = 0.0, mb = 0.0;
  for (const double d : dab) ma += d;
  for (const double d : dba) mb += d;
  ma /= static_cast<double>(dab.size());
  mb /= static_cast<double>(dba.size());
  return 0.5 * (ma + mb);
}

double hd90(const TriMesh& a, const TriMesh& b, Index n_samples,
            std::uint64_t seed) {
  const TriBvh bvh_a(a.vertices, a.faces);
  const TriBvh bvh_b(b.vertices, b.faces);
  std::vector<double> pooled;
  directed_distances(a, bvh_b, n_samples, seed, pooled);
  directed_distances(b, bvh_a, n_samples, seed, pooled);
  std::sort(pooled.begin(), pooled.end());
  const auto n = static_cast<Index>(pooled.size());
  const Index rank = std::min<Index>(
      n - 1, static_cast<Index>(std::ceil(0.90 * static_cast<double>(n))) - 1);
  return pooled[static_cast<std::size_t>(std::max<Index>(rank, 0))];
}

namespace {

void require_same_connectivity(const TriMesh& a, const TriMesh& b) {
  const bool ok = a.num_vertices() == b.num_vertices() &&
                  a.faces.rows() == b.faces.rows() &&
                  (a.faces.array() == b.faces.array()).all();
  if (!ok) throw Error(ErrorKind::contract, "connectivity mismatch");
}

}  // namespace

VecX cortical_thickness(const TriMesh& white, const TriMesh& pial) {
  require_same_connectivity(white, pial);
  VecX t(white.num_vertices());
  for (Index v = 0; v < white.num_vertices(); ++v)
    t[v] = (pial.vertices.row(v) - white.vertices.row(v)).norm();
  return t;
}

VecX sulcal_depth(const TriMesh& mid, int smooth_iters, double lambda) {
  const TriMesh smooth = laplacian_smooth(mid, smooth_iters, lambda);
  const TriBvh bvh(smooth.vertices, smooth.faces);
  VecX depth(mid.num_vertices());
  for (Index v = 0; v < mid.num_vertices(); ++v) {
    const Vec3 p = mid.vertices.row(v);
    const auto hit = bvh.closest_point(p);
    const Vec3 a = smooth.vertices.row(smooth.faces(hit.face, 0));
    const Vec3 b = smooth.vertices.row(smooth.faces(hit.face, 1));
    const Vec3 c = smooth.vertices.row(smooth.faces(hit.face, 2));
    const Vec3 n = (b - a).cross(c - a);  // outward for oriented input
    const Vec3 to_surface = hit.point - p;
    const double sign = n.dot(to_surface) >= 0.0 ? 1.0 : -1.0;
    depth[v] = sign * to_surface.norm();
  }
  return depth;
}

TriMesh midthickness_surface(const TriMesh& white, const TriMesh& pial) {
  require_same_connectivity(white, pial);
  TriMesh mid = white;
  mid.vertices = 0.5 * (white.vertices + pial.vertices);
  return mid;
}

double mean_l1_error(const VecX& a, const VecX& b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::contract, "map size mismatch");
  return (a - b).cwiseAbs().mean();
}

}  // namespace coseg
