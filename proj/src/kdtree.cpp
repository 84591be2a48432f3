#include "coseg/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace coseg {

namespace {
constexpr int kLeafSize = 16;
}

VertexKdTree::VertexKdTree(const MatX3& points) : points_(points) {
  if (points_.rows() == 0)
    throw Error(ErrorKind::contract, "empty point set");
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(static_cast<std::size_t>(2 * points_.rows() / kLeafSize + 2));
  root_ = build(0, static_cast<int>(points_.rows()), 0);
}

int VertexKdTree::build(int begin, int end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    // Sorted leaves make the smallest-index tie rule fall out of scan order.
    std::sort(order_.begin() + begin, order_.begin() + end);
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  // Split the widest axis at the median.
  Vec3 lo = points_.row(order_[static_cast<std::size_t>(begin)]);
  Vec3 hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    const Vec3 p = points_.row(order_[static_cast<std::size_t>(i)]);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     if (points_(a, axis) != points_(b, axis))
                       return points_(a, axis) < points_(b, axis);
                     return a < b;
                   });
  node.axis = axis;
  node.split = points_(order_[static_cast<std::size_t>(mid)], axis);
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(self)].left = left;
  nodes_[static_cast<std::size_t>(self)].right = right;
  return self;
}

void VertexKdTree::search(int node_id, const Vec3& q, int& best_idx,
                          double& best_d2) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[static_cast<std::size_t>(i)];
      const double d2 = (points_.row(idx).transpose() - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
        best_d2 = d2;
        best_idx = idx;
      }
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search(near, q, best_idx, best_d2);
  // <= keeps equal-distance candidates reachable for the tie rule.
  if (delta * delta <= best_d2) search(far, q, best_idx, best_d2);
}

std::pair<int, double> VertexKdTree::nearest(const Vec3& query) const {
  int best_idx = std::numeric_limits<int>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, best_idx, best_d2);
  return {best_idx, best_d2};
}

}  // namespace coseg
