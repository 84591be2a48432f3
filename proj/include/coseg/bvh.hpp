#pragma once

#include "coseg/types.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace coseg {

/// Axis-aligned bounding-box tree over triangles. Serves the point-to-surface
/// queries of the metrics, ray casts for the phantom generator, and the
/// candidate-pair search of the self-intersection counter.
class TriBvh {
 public:
  TriBvh(const MatX3& vertices, const MatX3i& faces);

  struct ClosestHit {
    int face = -1;
    double distance2 = std::numeric_limits<double>::infinity();
    Vec3 point = Vec3::Zero();
  };

  /// Exact closest point on the triangle soup.
  ClosestHit closest_point(const Vec3& query) const;

  /// Largest ray parameter t >= 0 with origin + t*dir on the surface;
  /// negative if the ray misses.
  double farthest_hit(const Vec3& origin, const Vec3& dir) const;

  /// Calls fn(fa, fb) with fa < fb for every pair of triangles whose boxes
  /// overlap (including pairs inside one leaf).
  void overlapping_pairs(const std::function<void(int, int)>& fn) const;

  Index num_faces() const { return faces_.rows(); }
  const MatX3& vertices() const { return vertices_; }
  const MatX3i& faces() const { return faces_; }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf face range in order_
    bool leaf() const { return left < 0; }
  };

  int build(int begin, int end);
  void closest_rec(int node, const Vec3& q, ClosestHit& best) const;
  double box_dist2(const Node& n, const Vec3& q) const;
  void ray_rec(int node, const Vec3& o, const Vec3& d, double& best) const;
  void pairs_rec(int a, int b, const std::function<void(int, int)>& fn) const;

  MatX3 vertices_;
  MatX3i faces_;
  std::vector<Vec3> centroids_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c);

}  // namespace coseg
