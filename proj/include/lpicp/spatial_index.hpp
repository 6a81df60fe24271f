#pragma once

// Static 3-D k-d tree for exact k-nearest-neighbour queries.
//
// Results are ordered by (squared distance, point index), so equal distances are
// broken by the lower insertion index and queries are fully deterministic.

#include "lpicp/core.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace lpicp {

struct Neighbor {
  std::size_t index = 0;
  double sq_dist = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
  }
};

class SpatialIndex {
 public:
  SpatialIndex() = default;

  explicit SpatialIndex(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorCode::kEmptyMap, "cannot index an empty cloud");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point3& point(std::size_t i) const { return points_[i]; }
  const std::vector<Point3>& points() const { return points_; }

  /// The k closest points sorted by distance. Throws kTooFewPoints if k > size().
  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const {
    if (k > points_.size()) {
      throw Error(ErrorCode::kTooFewPoints, "k=" + std::to_string(k) + " exceeds index size " +
                                                std::to_string(points_.size()));
    }
    std::vector<Neighbor> best;
    if (k == 0) return best;
    best.reserve(k + 1);
    search(0, query, k, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin = 0, end = 0;    // range in order_
    std::int32_t left = -1, right = -1;
    int axis = -1;                     // -1 marks a leaf
    double split = 0.0;
  };

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  static void offer(std::vector<Neighbor>& best, std::size_t k, Neighbor cand) {
    if (best.size() == k && !(cand < best.back())) return;
    auto pos = std::upper_bound(best.begin(), best.end(), cand);
    best.insert(pos, cand);
    if (best.size() > k) best.pop_back();
  }

  void search(std::int32_t id, const Point3& q, std::size_t k, std::vector<Neighbor>& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        offer(best, k, Neighbor{idx, (points_[idx] - q).squaredNorm()});
      }
      return;
    }
    // Points equal to the split value can land on either side of nth_element, so
    // the far side is pruned only when strictly farther than the current worst.
    const double diff = q[node.axis] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, best);
    if (best.size() < k || diff * diff <= best.back().sq_dist) search(far, q, k, best);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

inline SpatialIndex build_index(const PointCloud& map) {
  if (map.empty()) throw Error(ErrorCode::kEmptyMap, "map cloud is empty");
  return SpatialIndex(map.points);
}

}  // namespace lpicp
