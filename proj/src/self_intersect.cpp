#include "coseg/bvh.hpp"
#include "coseg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace coseg {

namespace {

// Interval endpoints of a triangle's intersection with the common line.
// u* are vertex projections on the line, d* signed distances to the other
// plane; not all d* may share one strict sign. Returns false if coplanar.
bool tri_interval(double u0, double u1, double u2, double d0, double d1,
                  double d2, double& t0, double& t1) {
  auto isect = [&](double ua, double ub, double uc, double da, double db,
                   double dc) {
    // vertex a sits alone on its side of the plane
    t0 = ua + (ub - ua) * da / (da - db);
    t1 = ua + (uc - ua) * da / (da - dc);
  };
  if (d0 * d1 > 0.0)
    isect(u2, u0, u1, d2, d0, d1);
  else if (d0 * d2 > 0.0)
    isect(u1, u0, u2, d1, d0, d2);
  else if (d1 * d2 > 0.0 || d0 != 0.0)
    isect(u0, u1, u2, d0, d1, d2);
  else if (d1 != 0.0)
    isect(u1, u0, u2, d1, d0, d2);
  else if (d2 != 0.0)
    isect(u2, u0, u1, d2, d0, d1);
  else
    return false;
  if (t0 > t1) std::swap(t0, t1);
  return true;
}

bool segments_intersect_2d(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                           const Eigen::Vector2d& q0,
                           const Eigen::Vector2d& q1) {
  auto cross2 = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() * b.y() - a.y() * b.x();
  };
  const Eigen::Vector2d d = p1 - p0, e = q1 - q0;
  const double denom = cross2(d, e);
  const Eigen::Vector2d w = q0 - p0;
  if (denom == 0.0) {
    if (cross2(d, w) != 0.0) return false;  // parallel, not collinear
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return false;
    double s0 = d.dot(w) / len2;
    double s1 = d.dot(q1 - p0) / len2;
    if (s0 > s1) std::swap(s0, s1);
    return s1 >= 0.0 && s0 <= 1.0;
  }
  const double s = cross2(w, e) / denom;
  const double t = cross2(w, d) / denom;
  return s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0;
}

bool point_in_tri_2d(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  auto side = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v,
                 const Eigen::Vector2d& w) {
    return (v.x() - u.x()) * (w.y() - u.y()) - (v.y() - u.y()) * (w.x() - u.x());
  };
  const double s0 = side(a, b, p), s1 = side(b, c, p), s2 = side(c, a, p);
  const bool has_neg = s0 < 0 || s1 < 0 || s2 < 0;
  const bool has_pos = s0 > 0 || s1 > 0 || s2 > 0;
  return !(has_neg && has_pos);
}

bool coplanar_tri_tri(const Vec3& n, const Vec3 a[3], const Vec3 b[3]) {
  int axis;
  n.cwiseAbs().maxCoeff(&axis);
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  Eigen::Vector2d a2[3], b2[3];
  for (int i = 0; i < 3; ++i) {
    a2[i] = {a[i][u], a[i][v]};
    b2[i] = {b[i][u], b[i][v]};
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (segments_intersect_2d(a2[i], a2[(i + 1) % 3], b2[j], b2[(j + 1) % 3]))
        return true;
  return point_in_tri_2d(a2[0], b2[0], b2[1], b2[2]) ||
         point_in_tri_2d(b2[0], a2[0], a2[1], a2[2]);
}

}  // namespace

bool tri_tri_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2,
                       const Vec3& b0, const Vec3& b1, const Vec3& b2) {
  const Vec3 na = (a1 - a0).cross(a2 - a0);
  const double da = -na.dot(a0);
  double db0 = na.dot(b0) + da;
  double db1 = na.dot(b1) + da;
  double db2 = na.dot(b2) + da;
  if ((db0 > 0 && db1 > 0 && db2 > 0) || (db0 < 0 && db1 < 0 && db2 < 0))
    return false;

  const Vec3 nb = (b1 - b0).cross(b2 - b0);
  const double dbp = -nb.dot(b0);
  double da0 = nb.dot(a0) + dbp;
  double da1 = nb.dot(a1) + dbp;
  double da2 = nb.dot(a2) + dbp;
  if ((da0 > 0 && da1 > 0 && da2 > 0) || (da0 < 0 && da1 < 0 && da2 < 0))
    return false;

  const Vec3 dir = na.cross(nb);
  int axis;
  dir.cwiseAbs().maxCoeff(&axis);
  const double ua0 = a0[axis], ua1 = a1[axis], ua2 = a2[axis];
  const double ub0 = b0[axis], ub1 = b1[axis], ub2 = b2[axis];

  double s0, s1, t0, t1;
  const bool ia = tri_interval(ua0, ua1, ua2, da0, da1, da2, s0, s1);
  const bool ib = tri_interval(ub0, ub1, ub2, db0, db1, db2, t0, t1);
  if (!ia || !ib) {
    const Vec3 a[3] = {a0, a1, a2}, b[3] = {b0, b1, b2};
    return coplanar_tri_tri(na, a, b);
  }
  return std::max(s0, t0) <= std::min(s1, t1);
}

int count_self_intersections(const TriMesh& mesh) {
  if (mesh.num_faces() == 0) return 0;
  TriBvh bvh(mesh.vertices, mesh.faces);
  std::vector<char> hit(static_cast<std::size_t>(mesh.num_faces()), 0);
  bvh.overlapping_pairs([&](int fa, int fb) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (mesh.faces(fa, i) == mesh.faces(fb, j)) return;  // adjacent
    if (hit[static_cast<std::size_t>(fa)] && hit[static_cast<std::size_t>(fb)])
      return;
    if (tri_tri_intersect(mesh.vertices.row(mesh.faces(fa, 0)),
                          mesh.vertices.row(mesh.faces(fa, 1)),
                          mesh.vertices.row(mesh.faces(fa, 2)),
                          mesh.vertices.row(mesh.faces(fb, 0)),
                          mesh.vertices.row(mesh.faces(fb, 1)),
                          mesh.vertices.row(mesh.faces(fb, 2)))) {
      hit[static_cast<std::size_t>(fa)] = 1;
      hit[static_cast<std::size_t>(fb)] = 1;
    }
  });
  int count = 0;
  for (const char h : hit) count += h;
  return count;
}

}  // namespace coseg
