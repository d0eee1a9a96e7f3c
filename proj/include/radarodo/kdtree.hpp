#pragma once

// Exact 3-D k-d tree for nearest-neighbor queries on radar clouds.
// Small and allocation-friendly: nodes live in one flat vector.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "radarodo/geometry.hpp"

namespace radarodo {

class KdTree3 {
 public:
  KdTree3() = default;

  explicit KdTree3(std::vector<Vec3> points) : pts_(std::move(points)) {
    std::vector<int> idx(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) idx[i] = static_cast<int>(i);
    nodes_.reserve(pts_.size());
    root_ = build(idx.data(), static_cast<int>(idx.size()), 0);
  }

  const std::vector<Vec3>& points() const { return pts_; }
  std::size_t size() const { return pts_.size(); }

  // Index of the nearest point, -1 on an empty tree.
  int nearest(const Vec3& query, double* dist_sq_out = nullptr) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (root_ >= 0) search_one(root_, query, best, best_d2);
    if (dist_sq_out) *dist_sq_out = best_d2;
    return best;
  }

  // Indices of the k nearest points, ascending by distance.
  std::vector<int> knn(const Vec3& query, int k) const {
    k = std::min<int>(k, static_cast<int>(pts_.size()));
    if (k <= 0) return {};
    // max-heap of (dist_sq, index)
    std::vector<std::pair<double, int>> heap;
    heap.reserve(static_cast<std::size_t>(k));
    if (root_ >= 0) search_knn(root_, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    std::vector<int> out(heap.size());
    for (std::size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].second;
    return out;
  }

 private:
  struct Node {
    int point = -1;
    int left = -1, right = -1;
    std::uint8_t axis = 0;
  };

  int build(int* idx, int count, int depth) {
    if (count <= 0) return -1;
    const std::uint8_t axis = static_cast<std::uint8_t>(depth % 3);
    const int mid = count / 2;
    std::nth_element(idx, idx + mid, idx + count, [&](int a, int b) {
      return pts_[static_cast<std::size_t>(a)](axis) <
             pts_[static_cast<std::size_t>(b)](axis);
    });
    const int node_id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{idx[mid], -1, -1, axis});
    const int left = build(idx, mid, depth + 1);
    const int right = build(idx + mid + 1, count - mid - 1, depth + 1);
    nodes_[static_cast<std::size_t>(node_id)].left = left;
    nodes_[static_cast<std::size_t>(node_id)].right = right;
    return node_id;
  }

  void search_one(int node_id, const Vec3& q, int& best, double& best_d2) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    const Vec3& p = pts_[static_cast<std::size_t>(node.point)];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = node.point;
    }
    const double delta = q(node.axis) - p(node.axis);
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    if (near >= 0) search_one(near, q, best, best_d2);
    if (far >= 0 && delta * delta < best_d2) search_one(far, q, best, best_d2);
  }

  void search_knn(int node_id, const Vec3& q, int k,
                  std::vector<std::pair<double, int>>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    const Vec3& p = pts_[static_cast<std::size_t>(node.point)];
    const double d2 = (p - q).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace_back(d2, node.point);
      std::push_heap(heap.begin(), heap.end());
    } else if (d2 < heap.front().first) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = {d2, node.point};
      std::push_heap(heap.begin(), heap.end());
    }
    const double delta = q(node.axis) - p(node.axis);
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    if (near >= 0) search_knn(near, q, k, heap);
    const bool heap_full = static_cast<int>(heap.size()) >= k;
    if (far >= 0 && (!heap_full || delta * delta < heap.front().first))
      search_knn(far, q, k, heap);
  }

  std::vector<Vec3> pts_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace radarodo
