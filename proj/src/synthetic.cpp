#include "ptkit/synthetic.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

namespace ptkit {

PointCloud synthetic_scene(const SceneOptions& options, Rng& rng) {
  if (options.points < 0 || options.classes < 1) throw ParameterError("scene needs points >= 0 and classes >= 1");
  std::uniform_real_distribution<double> ux(0.0, options.extent), uz(0.0, options.height), u01(0.0, 1.0);
  std::vector<Vec3> anchors;
  for (Index c = 0; c < options.classes; ++c) anchors.emplace_back(ux(rng), ux(rng), uz(rng));

  PointCloud cloud;
  cloud.positions.resize(options.points, 3);
  cloud.features.resize(options.points, options.feature_dim);
  cloud.labels.resize(static_cast<std::size_t>(options.points));
  for (Index i = 0; i < options.points; ++i) {
    const Vec3 p(ux(rng), ux(rng), uz(rng));
    cloud.positions.row(i) = p;
    Label best = 0;
    double best_d = (p - anchors[0]).squaredNorm();
    for (Index c = 1; c < options.classes; ++c) {
      const double d = (p - anchors[static_cast<std::size_t>(c)]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<Label>(c);
      }
    }
    cloud.labels[static_cast<std::size_t>(i)] = best;
    for (Index f = 0; f < options.feature_dim; ++f) cloud.features(i, f) = u01(rng);
  }
  return cloud;
}

PredictionSet one_hot_predictions(const std::vector<SphereRegion>& regions, std::span<const Label> labels,
                                  Index num_classes) {
  PredictionSet preds;
  preds.num_points = static_cast<Index>(labels.size());
  preds.num_classes = num_classes;
  for (const SphereRegion& region : regions) {
    RegionPrediction rp;
    rp.members = region.members;
    rp.probs = Matrix::Zero(static_cast<Index>(region.members.size()), num_classes);
    for (std::size_t m = 0; m < region.members.size(); ++m) {
      const Label l = labels[static_cast<std::size_t>(region.members[m])];
      if (l < 0 || l >= num_classes) throw ParameterError("label out of range for one-hot predictions");
      rp.probs(static_cast<Index>(m), l) = 1.0;
    }
    preds.regions.push_back(std::move(rp));
  }
  return preds;
}

RegistrationPair synthetic_registration_pair(const PairOptions& options, Rng& rng) {
  const Index n = options.points;
  if (n < 3) throw ParameterError("a registration pair needs at least 3 points");
  if (!(options.outlier_fraction >= 0.0 && options.outlier_fraction <= 1.0))
    throw ParameterError("outlier fraction must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, options.extent);
  std::uniform_real_distribution<double> ut(-options.max_translation, options.max_translation);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vec3 axis;
  do axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
  while (axis.norm() < 1e-6);
  const RigidTransform truth = RigidTransform::from_axis_angle(axis, angle(rng), Vec3(ut(rng), ut(rng), ut(rng)));

  RegistrationPair pair;
  pair.truth = truth;
  pair.source.resize(n, 3);
  for (Index i = 0; i < n; ++i) pair.source.row(i) = Vec3(u(rng), u(rng), u(rng));

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  const Index d = options.feature_dim;
  pair.source_features.resize(n, d);
  pair.target_features.resize(n, d);
  pair.target.resize(n, 3);
  const auto outliers = static_cast<Index>(std::llround(options.outlier_fraction * static_cast<double>(n)));
  for (Index i = 0; i < n; ++i) {
    const Index row = perm[static_cast<std::size_t>(i)];
    const Vec3 moved = truth.apply(pair.source.row(i).transpose());
    pair.target.row(row) = moved + options.noise_sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
    for (Index f = 0; f < d; ++f) pair.source_features(i, f) = gauss(rng);
    // The first `outliers` source rows get unrelated target descriptors.
    if (i < outliers) {
      for (Index f = 0; f < d; ++f) pair.target_features(row, f) = gauss(rng);
    } else {
      pair.target_features.row(row) = pair.source_features.row(i);
    }
  }
  return pair;
}

}  // namespace ptkit
