#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ptkit/core.hpp"

namespace ptkit {

struct Correspondence {
  Index source;  ///< row in cloud A
  Index target;  ///< row in cloud B
  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  std::vector<double> weights;  ///< empty, or one nonnegative weight per pair

  std::size_t size() const { return pairs.size(); }
};

/// Nearest neighbor in feature space (squared Euclidean, ties to the lower index)
/// for every row of `feat_a`. With `mutual`, only reciprocal pairs are kept.
CorrespondenceSet match_features(const Matrix& feat_a, const Matrix& feat_b, bool mutual, int workers = 1);

/// Weighted least-squares rigid motion taking `a` onto `b` (Kabsch/Umeyama without scale).
/// Throws EstimationError when the centered covariance has rank < 2.
RigidTransform fit_rigid(const Positions& a, const Positions& b,
                         std::span<const double> weights = {});

struct RansacOptions {
  Index iterations = 10000;
  double inlier_distance = 0.05;  ///< meters
  std::uint64_t seed = 0;
  int workers = 1;
};

struct RansacResult {
  RigidTransform transform;
  std::vector<Index> inliers;  ///< positions in the correspondence list, ascending
  Index best_iteration = -1;
};

/// Minimal 3-sample RANSAC with a final refit on the winning inlier set.
/// Iteration i draws from a stream derived from (seed, i), so results do not
/// depend on `workers`. Throws EstimationError when no hypothesis reaches 3 inliers.
RansacResult ransac_rigid(const Positions& cloud_a, const Positions& cloud_b, const CorrespondenceSet& corrs,
                          const RansacOptions& options);

}  // namespace ptkit
