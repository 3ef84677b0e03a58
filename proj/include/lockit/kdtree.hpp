#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace lockit {

/// Static k-d tree over a fixed set of points. Query results are exact and
/// ties on distance are resolved by the smaller point index, which makes
/// every query reproducible against a linear scan.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  struct Neighbor {
    std::size_t index;
    double sq_dist;
  };

  KdTree() = default;

  explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points_.size() / kLeafSize * 2 + 1);
    if (!points_.empty()) build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& point(std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const { return points_; }

  /// k nearest neighbors, ascending by (distance, index).
  std::vector<Neighbor> knn(const Point& q, std::size_t k) const {
    std::vector<Neighbor> out;
    if (k == 0 || points_.empty()) return out;
    std::priority_queue<Neighbor, std::vector<Neighbor>, Worse> heap;
    search_knn(0, q, k, heap);
    out.resize(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

  Neighbor nearest(const Point& q) const { return knn(q, 1).front(); }

  /// All points within `radius` (inclusive), ascending by (distance, index).
  std::vector<Neighbor> radius_search(const Point& q, double radius) const {
    std::vector<Neighbor> out;
    if (points_.empty()) return out;
    search_radius(0, q, radius * radius, out);
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
    });
    return out;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin, end;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  struct Worse {
    bool operator()(const Neighbor& a, const Neighbor& b) const {
      return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
    }
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    Point lo = Point::Constant(std::numeric_limits<double>::infinity());
    Point hi = Point::Constant(-std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  template <typename Heap>
  void search_knn(std::size_t id, const Point& q, std::size_t k, Heap& heap) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (Worse{}(cand, heap.top())) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t first = diff < 0 ? n.left : n.right;
    const std::size_t second = diff < 0 ? n.right : n.left;
    search_knn(first, q, k, heap);
    // Inclusive bound keeps equal-distance candidates reachable for the index tie-break.
    if (heap.size() < k || diff * diff <= heap.top().sq_dist) search_knn(second, q, k, heap);
  }

  void search_radius(std::size_t id, const Point& q, double r2, std::vector<Neighbor>& out) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 <= r2) out.push_back({idx, d2});
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t first = diff < 0 ? n.left : n.right;
    const std::size_t second = diff < 0 ? n.right : n.left;
    search_radius(first, q, r2, out);
    if (diff * diff <= r2) search_radius(second, q, r2, out);
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

}  // namespace lockit
