#pragma once

#include <span>
#include <vector>

#include "ptkit/core.hpp"
#include "ptkit/evaluate.hpp"
#include "ptkit/protocol.hpp"
#include "ptkit/random.hpp"

namespace ptkit {

struct SceneOptions {
  Index points = 100000;
  Index classes = 5;
  double extent = 10.0;  ///< x and y span, meters
  double height = 3.0;   ///< z span, meters
  Index feature_dim = 3;
};

/// Uniform points in a box, labeled by the nearest of `classes` random anchors,
/// which gives spatially coherent and unevenly sized classes.
PointCloud synthetic_scene(const SceneOptions& options, Rng& rng);

/// One-hot region predictions from per-point labels of the region host cloud.
PredictionSet one_hot_predictions(const std::vector<SphereRegion>& regions, std::span<const Label> labels,
                                  Index num_classes);

struct PairOptions {
  Index points = 1000;
  double outlier_fraction = 0.3;
  double noise_sigma = 0.01;  ///< meters, per coordinate of the target cloud
  double extent = 5.0;        ///< source cube side, meters
  double max_translation = 2.0;
  Index feature_dim = 16;
};

/// Source cloud, a rigidly moved and jittered target with shuffled rows, and
/// descriptors that match exactly for the inlier fraction and are random otherwise.
RegistrationPair synthetic_registration_pair(const PairOptions& options, Rng& rng);

}  // namespace ptkit
