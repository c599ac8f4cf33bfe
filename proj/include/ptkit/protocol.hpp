#pragma once

#include <span>
#include <vector>

#include "ptkit/core.hpp"
#include "ptkit/random.hpp"
#include "ptkit/spatial.hpp"

namespace ptkit {

inline constexpr double kDefaultSphereRadius = 2.0;  // meters
inline constexpr Index kDefaultSphereCount = 3000;   // training spheres per epoch
inline constexpr double kDefaultGridSpacing = 2.0;   // meters between inference centers

struct SphereRegion {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  std::vector<Index> members;  ///< ascending indices into the host cloud
};

/// w_i = 1 / sqrt(count(label_i) / N_valid), 0 for ignored points. Unnormalized.
std::vector<double> class_balanced_weights(std::span<const Label> labels, Index num_classes);

/// Draws training spheres centered on points chosen with class-balanced weights.
class SphereSampler {
 public:
  /// `cloud` must outlive the sampler. Classes are taken as [0, max label].
  SphereSampler(const PointCloud& cloud, double radius);

  Index draw_center(Rng& rng) const;
  SphereRegion draw(Rng& rng) const;
  SphereRegion region_at(Index center) const;

  double radius() const { return radius_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  const PointCloud* cloud_;
  double radius_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  HashGrid grid_;
};

std::vector<SphereRegion> sample_training_spheres(const PointCloud& cloud, double radius, Index count,
                                                  Rng& rng);

/// Grid nodes from the bounding-box min corner at `spacing`, covering the box,
/// keeping only nodes whose sphere of `radius` holds at least one point.
std::vector<Vec3> inference_grid_centers(const Positions& positions, double radius, double spacing);
std::vector<SphereRegion> inference_regions(const Positions& positions, double radius, double spacing);

/// Class probabilities for the members of one region, row-aligned with `members`.
struct RegionPrediction {
  std::vector<Index> members;
  Matrix probs;
};

struct PredictionSet {
  Index num_points = 0;
  Index num_classes = 0;
  std::vector<RegionPrediction> regions;
};

struct AggregatedPrediction {
  Matrix probs;               ///< num_points x num_classes
  std::vector<char> covered;  ///< 0 for points no region touched (uniform row)
  Index uncovered = 0;
};

/// Per-point mean over every region that contains the point.
AggregatedPrediction aggregate_sphere_predictions(const PredictionSet& preds);
/// Same, after checking that `preds` lines up with `regions` member-for-member.
AggregatedPrediction aggregate_sphere_predictions(const std::vector<SphereRegion>& regions,
                                                  const PredictionSet& preds);

/// Row argmax, ties to the smallest class id.
std::vector<Label> argmax_rows(const Matrix& probs);

/// Labels every full-resolution point with the argmax class of its nearest sub point.
std::vector<Label> project_full_resolution(const Positions& sub_positions, const Matrix& sub_probs,
                                           const Positions& full_positions, int workers = 1);

/// Elementwise mean of equally shaped probability matrices.
Matrix vote_average(const std::vector<Matrix>& runs);

}  // namespace ptkit
