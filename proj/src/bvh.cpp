#include "coseg/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coseg {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {
constexpr int kLeafSize = 8;

// Moller-Trumbore with slightly inclusive barycentric bounds so rays that
// graze shared edges still report a hit.
bool ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b,
                  const Vec3& c, double& t_out) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = d.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < kEps) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = o - a;
  const double u = tv.dot(pv) * inv;
  if (u < -1e-9 || u > 1.0 + 1e-9) return false;
  const Vec3 qv = tv.cross(e1);
  const double v = d.dot(qv) * inv;
  if (v < -1e-9 || u + v > 1.0 + 1e-9) return false;
  const double t = e2.dot(qv) * inv;
  if (t < 0.0) return false;
  t_out = t;
  return true;
}

}  // namespace

TriBvh::TriBvh(const MatX3& vertices, const MatX3i& faces)
    : vertices_(vertices), faces_(faces) {
  if (faces_.rows() == 0)
    throw Error(ErrorKind::contract, "empty triangle set");
  centroids_.resize(static_cast<std::size_t>(faces_.rows()));
  for (Index f = 0; f < faces_.rows(); ++f) {
    centroids_[static_cast<std::size_t>(f)] =
        (vertices_.row(faces_(f, 0)) + vertices_.row(faces_(f, 1)) +
         vertices_.row(faces_(f, 2)))
            .transpose() /
        3.0;
  }
  order_.resize(static_cast<std::size_t>(faces_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(static_cast<std::size_t>(2 * faces_.rows() / kLeafSize + 2));
  root_ = build(0, static_cast<int>(faces_.rows()));
}

int TriBvh::build(int begin, int end) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int i = begin; i < end; ++i) {
    const int f = order_[static_cast<std::size_t>(i)];
    for (int e = 0; e < 3; ++e) {
      const Vec3 p = vertices_.row(faces_(f, e));
      node.lo = node.lo.cwiseMin(p);
      node.hi = node.hi.cwiseMax(p);
    }
  }
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    std::sort(order_.begin() + begin, order_.begin() + end);
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  Vec3 clo = centroids_[static_cast<std::size_t>(
      order_[static_cast<std::size_t>(begin)])];
  Vec3 chi = clo;
  for (int i = begin + 1; i < end; ++i) {
    const Vec3& c =
        centroids_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
    clo = clo.cwiseMin(c);
    chi = chi.cwiseMax(c);
  }
  int axis;
  (chi - clo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int fa, int fb) {
                     const double ca = centroids_[static_cast<std::size_t>(fa)][axis];
                     const double cb = centroids_[static_cast<std::size_t>(fb)][axis];
                     if (ca != cb) return ca < cb;
                     return fa < fb;
                   });
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[static_cast<std::size_t>(self)].left = left;
  nodes_[static_cast<std::size_t>(self)].right = right;
  return self;
}

double TriBvh::box_dist2(const Node& n, const Vec3& q) const {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = std::max({n.lo[a] - q[a], 0.0, q[a] - n.hi[a]});
    d2 += d * d;
  }
  return d2;
}

void TriBvh::closest_rec(int node_id, const Vec3& q, ClosestHit& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (box_dist2(node, q) >= best.distance2) return;
  if (node.leaf()) {
    for (int i = node.begin; i < node.end; ++i) {
      const int f = order_[static_cast<std::size_t>(i)];
      const Vec3 cp = closest_point_on_triangle(
          q, vertices_.row(faces_(f, 0)), vertices_.row(faces_(f, 1)),
          vertices_.row(faces_(f, 2)));
      const double d2 = (cp - q).squaredNorm();
      if (d2 < best.distance2) {
        best.distance2 = d2;
        best.face = f;
        best.point = cp;
      }
    }
    return;
  }
  const double dl = box_dist2(nodes_[static_cast<std::size_t>(node.left)], q);
  const double dr = box_dist2(nodes_[static_cast<std::size_t>(node.right)], q);
  if (dl <= dr) {
    closest_rec(node.left, q, best);
    closest_rec(node.right, q, best);
  } else {
    closest_rec(node.right, q, best);
    closest_rec(node.left, q, best);
  }
}

TriBvh::ClosestHit TriBvh::closest_point(const Vec3& query) const {
  ClosestHit best;
  closest_rec(root_, query, best);
  return best;
}

void TriBvh::ray_rec(int node_id, const Vec3& o, const Vec3& d,
                     double& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  // slab test
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < node.lo[a] - 1e-12 || o[a] > node.hi[a] + 1e-12) return;
      continue;
    }
    double ta = (node.lo[a] - o[a]) / d[a];
    double tb = (node.hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 + 1e-12) return;
  if (node.leaf()) {
    for (int i = node.begin; i < node.end; ++i) {
      const int f = order_[static_cast<std::size_t>(i)];
      double t;
      if (ray_triangle(o, d, vertices_.row(faces_(f, 0)),
                       vertices_.row(faces_(f, 1)), vertices_.row(faces_(f, 2)),
                       t))
        best = std::max(best, t);
    }
    return;
  }
  ray_rec(node.left, o, d, best);
  ray_rec(node.right, o, d, best);
}

double TriBvh::farthest_hit(const Vec3& origin, const Vec3& dir) const {
  double best = -1.0;
  ray_rec(root_, origin, dir, best);
  return best;
}

void TriBvh::pairs_rec(int a, int b,
                       const std::function<void(int, int)>& fn) const {
  const Node& na = nodes_[static_cast<std::size_t>(a)];
  const Node& nb = nodes_[static_cast<std::size_t>(b)];
  if ((na.lo.array() > nb.hi.array()).any() ||
      (nb.lo.array() > na.hi.array()).any())
    return;
  if (na.leaf() && nb.leaf()) {
    for (int i = na.begin; i < na.end; ++i)
      for (int j = (a == b) ? i + 1 : nb.begin; j < nb.end; ++j) {
        const int fa = order_[static_cast<std::size_t>(i)];
        const int fb = order_[static_cast<std::size_t>(j)];
        fn(std::min(fa, fb), std::max(fa, fb));
      }
    return;
  }
  if (a == b) {
    pairs_rec(na.left, na.left, fn);
    pairs_rec(na.right, na.right, fn);
    pairs_rec(na.left, na.right, fn);
    return;
  }
  if (na.leaf()) {
    pairs_rec(a, nb.left, fn);
    pairs_rec(a, nb.right, fn);
  } else {
    pairs_rec(na.left, b, fn);
    pairs_rec(na.right, b, fn);
  }
}

void TriBvh::overlapping_pairs(const std::function<void(int, int)>& fn) const {
  pairs_rec(root_, root_, fn);
}

}  // namespace coseg
