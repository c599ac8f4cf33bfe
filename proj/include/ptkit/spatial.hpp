#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptkit/core.hpp"

namespace ptkit {

/// Integer cell of a position: floor(p / cell_size) per axis, on raw coordinates.
struct VoxelKey {
  std::int64_t i = 0;
  std::int64_t j = 0;
  std::int64_t k = 0;

  static VoxelKey of(const Vec3& p, double cell_size);
  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& key) const noexcept;
};

/// Occupied voxels in order of first appearance, plus the voxel of every point.
struct VoxelAssignment {
  std::vector<VoxelKey> keys;
  std::vector<Index> mapping;
};

VoxelAssignment assign_voxels(const Positions& positions, double cell_size);

/// Most frequent non-ignored label; ties go to the smallest id. All ignored -> kIgnoreLabel.
Label majority_label(std::span<const Label> labels);

enum class LabelMode {
  kMajority,   ///< labels by majority vote, probabilities dropped
  kKeepProbs,  ///< labels by majority vote, probability rows averaged
};

struct GridSubsampleResult {
  PointCloud cloud;
  /// mapping[i] = output row of input point i.
  std::vector<Index> mapping;
};

/// One output point per occupied voxel, at the mean of its members.
/// Output rows follow first appearance of each voxel in the input.
GridSubsampleResult grid_subsample(const PointCloud& cloud, double cell_size,
                                   LabelMode mode = LabelMode::kMajority);

/// Fixed-width neighbor lists. Unused slots hold `sentinel` (the support size),
/// so consumers can append a shadow row at that index.
struct NeighborTable {
  Index num_queries = 0;
  Index width = 0;
  Index sentinel = 0;
  std::vector<Index> indices;  ///< num_queries x width, row-major
  std::vector<Index> counts;   ///< true neighbors per query

  std::span<const Index> row(Index q) const {
    return {indices.data() + q * width, static_cast<std::size_t>(width)};
  }
  std::span<const Index> neighbors(Index q) const {
    return {indices.data() + q * width, static_cast<std::size_t>(counts[static_cast<std::size_t>(q)])};
  }

  friend bool operator==(const NeighborTable&, const NeighborTable&) = default;
};

/// Uniform hash grid over a fixed point set, stored as compressed cell buckets.
class HashGrid {
 public:
  HashGrid(const Positions& points, double cell_size);

  double cell_size() const { return cell_size_; }
  const Positions& points() const { return *points_; }

  /// Indices with squared distance to `center` <= r^2, ascending.
  std::vector<Index> ball(const Vec3& center, double r) const;
  /// (squared distance, index) pairs within r, unordered.
  void ball_with_distances(const Vec3& center, double r,
                           std::vector<std::pair<double, Index>>& out) const;
  bool any_within(const Vec3& center, double r) const;

 private:
  template <typename Visit>
  void visit_candidates(const Vec3& center, double r, Visit&& visit) const;

  const Positions* points_;
  double cell_size_;
  std::unordered_map<VoxelKey, std::uint32_t, VoxelKeyHash> cell_of_key_;
  std::vector<VoxelKey> cell_keys_;
  std::vector<Index> offsets_;
  std::vector<Index> members_;
};

/// Static 3-d tree for exact k-nearest-neighbor queries with index tie-breaking.
class KdTree {
 public:
  explicit KdTree(const Positions& points);

  /// The min(k, N) nearest points as (squared distance, index), sorted by
  /// distance then index.
  void knn(const Vec3& query, Index k, std::vector<std::pair<double, Index>>& out) const;

 private:
  struct Node {
    Index begin;
    Index end;
    int axis;  // -1 for leaves
    double split;
    std::int32_t left;
    std::int32_t right;
  };
  std::int32_t build(Index begin, Index end);

  const Positions* points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

/// Up to `max_k` support points within `radius` of each query; when more exist the
/// nearest are kept. Lists are sorted by (distance, index).
NeighborTable radius_search(const Positions& support, const Positions& query, double radius,
                            Index max_k, int workers = 1);

/// Exactly min(k, N) nearest support points per query, sorted by (distance, index).
NeighborTable knn_search(const Positions& support, const Positions& query, Index k,
                         int workers = 1);

/// Greedy max-min selection starting at `seed_index`, in selection order.
std::vector<Index> farthest_point_sampling(const Positions& points, Index m, Index seed_index = 0);

/// Inverse-distance weighted average of the k nearest source features
/// (w = 1 / (d + 1e-8)). Targets coincident with a source copy its feature.
Matrix knn_interpolate(const Positions& source, const Matrix& source_features,
                       const Positions& targets, Index k, int workers = 1);

/// All indices within `radius` of `center`, ascending.
std::vector<Index> sphere_query(const Positions& points, const Vec3& center, double radius);

inline double squared_distance(const Positions& points, Index i, const Vec3& q) {
  const double dx = points(i, 0) - q.x();
  const double dy = points(i, 1) - q.y();
  const double dz = points(i, 2) - q.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace ptkit
