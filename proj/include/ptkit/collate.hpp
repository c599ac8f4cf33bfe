#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ptkit/core.hpp"
#include "ptkit/random.hpp"

namespace ptkit {

/// conv_type "DENSE": every instance resampled to the same size and stacked.
struct DenseBatch {
  Index batch_size = 0;
  Index num_points = 0;
  Index channels = 0;         ///< 3 position columns followed by the features
  std::vector<double> data;   ///< batch_size x num_points x channels
  std::vector<Label> labels;  ///< batch_size x num_points, empty when unlabeled

  double at(Index b, Index n, Index c) const {
    return data[static_cast<std::size_t>((b * num_points + n) * channels + c)];
  }
};

/// conv_type "PARTIAL_DENSE": instances concatenated with a batch vector.
struct PartialDenseBatch {
  PointCloud points;
  std::vector<Index> batch;    ///< instance of each row, non-decreasing
  std::vector<Index> offsets;  ///< batch_size + 1 row offsets

  Index batch_size() const { return static_cast<Index>(offsets.size()) - 1; }
  /// Rows of instance `b` as a standalone cloud.
  PointCloud slice(Index b) const;
};

using VoxelCoord = std::array<std::int64_t, 3>;

/// Sparse voxel batch: one row per (instance, voxel), rows sorted by (batch, i, j, k).
struct SparseBatch {
  std::vector<VoxelCoord> coords;
  std::vector<Index> batch;
  Matrix features;            ///< mean of member features
  std::vector<Label> labels;  ///< majority of member labels, empty when unlabeled
};

DenseBatch collate_dense(const std::vector<PointCloud>& clouds, Index num_points, Rng& rng);
PartialDenseBatch collate_partial_dense(const std::vector<PointCloud>& clouds);
SparseBatch collate_sparse(const std::vector<PointCloud>& clouds, double cell_size);

}  // namespace ptkit
