#pragma once

#include "coseg/types.hpp"

#include <utility>
#include <vector>

namespace coseg {

/// Static KD-tree over a point set. Queries return exactly what a linear
/// scan would (same squared distances, ties to the smallest point index),
/// which keeps losses built on it bit-reproducible.
class VertexKdTree {
 public:
  explicit VertexKdTree(const MatX3& points);

  /// (index, squared distance) of the nearest point.
  std::pair<int, double> nearest(const Vec3& query) const;

  Index size() const { return points_.rows(); }

 private:
  struct Node {
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;  // leaf range in order_
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end, int depth);
  void search(int node, const Vec3& q, int& best_idx, double& best_d2) const;

  MatX3 points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace coseg
