#include "ptkit/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ptkit {
namespace {

void check_rows_normalized(const Matrix& m, const std::string& what) {
  for (Index r = 0; r < m.rows(); ++r)
    if ((m.row(r).array() < 0.0).any() || std::abs(m.row(r).sum() - 1.0) > 1e-6)
      throw ParameterError(what + ": row " + std::to_string(r) + " is not a probability distribution");
}

Index class_count(std::span<const Label> labels) {
  Label top = kIgnoreLabel;
  for (Label l : labels) top = std::max(top, l);
  return static_cast<Index>(top) + 1;
}

}  // namespace

std::vector<double> class_balanced_weights(std::span<const Label> labels, Index num_classes) {
  if (num_classes < 1) throw ParameterError("num_classes must be at least 1");
  std::vector<Index> counts(static_cast<std::size_t>(num_classes), 0);
  Index valid = 0;
  for (Label l : labels) {
    if (l == kIgnoreLabel) continue;
    if (l < 0 || l >= num_classes) throw ParameterError("label " + std::to_string(l) + " out of range");
    ++counts[static_cast<std::size_t>(l)];
    ++valid;
  }
  if (valid == 0) throw ParameterError("class_balanced_weights: every label is ignored");
  std::vector<double> out(labels.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    const double freq = static_cast<double>(counts[static_cast<std::size_t>(labels[i])]) / static_cast<double>(valid);
    out[i] = 1.0 / std::sqrt(freq);
  }
  return out;
}

SphereSampler::SphereSampler(const PointCloud& cloud, double radius)
    : cloud_(&cloud), radius_(radius), grid_(cloud.positions, radius > 0.0 ? radius : 1.0) {
  if (!(radius > 0.0)) throw ParameterError("sphere radius must be positive");
  if (!cloud.has_labels()) throw ParameterError("sphere sampling requires labels");
  weights_ = class_balanced_weights(cloud.labels, std::max<Index>(1, class_count(cloud.labels)));
  cumulative_.resize(weights_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) cumulative_[i] = (total += weights_[i]);
}

Index SphereSampler::draw_center(Rng& rng) const {
  const double total = cumulative_.back();
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) {
    // u rounded up to the total: take the last point with positive weight.
    do --it;
    while (weights_[static_cast<std::size_t>(it - cumulative_.begin())] == 0.0);
  }
  return static_cast<Index>(it - cumulative_.begin());
}

SphereRegion SphereSampler::region_at(Index center) const {
  SphereRegion region;
  region.center = cloud_->positions.row(center).transpose();
  region.radius = radius_;
  region.members = grid_.ball(region.center, radius_);
  return region;
}

SphereRegion SphereSampler::draw(Rng& rng) const { return region_at(draw_center(rng)); }

std::vector<SphereRegion> sample_training_spheres(const PointCloud& cloud, double radius, Index count,
                                                  Rng& rng) {
  if (count < 1) throw ParameterError("sphere count must be at least 1");
  const SphereSampler sampler(cloud, radius);
  std::vector<SphereRegion> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) out.push_back(sampler.draw(rng));
  return out;
}

std::vector<Vec3> inference_grid_centers(const Positions& positions, double radius, double spacing) {
  if (!(radius > 0.0) || !(spacing > 0.0)) throw ParameterError("radius and spacing must be positive");
  if (positions.rows() == 0) return {};
  const Vec3 lo = positions.colwise().minCoeff().transpose();
  const Vec3 hi = positions.colwise().maxCoeff().transpose();
  Eigen::Array3i steps;
  for (int a = 0; a < 3; ++a) steps[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing)) + 1;
  const HashGrid grid(positions, radius);
  std::vector<Vec3> out;
  for (int i = 0; i < steps[0]; ++i)
    for (int j = 0; j < steps[1]; ++j)
      for (int k = 0; k < steps[2]; ++k) {
        const Vec3 c = lo + spacing * Vec3(i, j, k);
        if (grid.any_within(c, radius)) out.push_back(c);
      }
  return out;
}

std::vector<SphereRegion> inference_regions(const Positions& positions, double radius, double spacing) {
  std::vector<SphereRegion> out;
  if (positions.rows() == 0) return out;
  const HashGrid grid(positions, radius);
  for (const Vec3& c : inference_grid_centers(positions, radius, spacing))
    out.push_back({c, radius, grid.ball(c, radius)});
  return out;
}

AggregatedPrediction aggregate_sphere_predictions(const PredictionSet& preds) {
  const Index n = preds.num_points;
  const Index c = preds.num_classes;
  if (n < 0 || c < 1) throw ParameterError("prediction set needs num_points >= 0 and num_classes >= 1");
  AggregatedPrediction out;
  out.probs = Matrix::Zero(n, c);
  std::vector<Index> hits(static_cast<std::size_t>(n), 0);
  for (std::size_t r = 0; r < preds.regions.size(); ++r) {
    const RegionPrediction& region = preds.regions[r];
    const std::string where = "region " + std::to_string(r);
    if (region.probs.rows() != static_cast<Index>(region.members.size()) ||
        (region.probs.rows() > 0 && region.probs.cols() != c))
      throw ParameterError(where + ": prediction shape does not match its members");
    check_rows_normalized(region.probs, where);
    for (std::size_t m = 0; m < region.members.size(); ++m) {
      const Index p = region.members[m];
      if (p < 0 || p >= n) throw ParameterError(where + ": member index out of range");
      out.probs.row(p) += region.probs.row(static_cast<Index>(m));
      ++hits[static_cast<std::size_t>(p)];
    }
  }
  out.covered.assign(static_cast<std::size_t>(n), 1);
  for (Index p = 0; p < n; ++p) {
    const Index h = hits[static_cast<std::size_t>(p)];
    if (h == 0) {
      out.probs.row(p).setConstant(1.0 / static_cast<double>(c));
      out.covered[static_cast<std::size_t>(p)] = 0;
      ++out.uncovered;
    } else {
      out.probs.row(p) /= static_cast<double>(h);
    }
  }
  return out;
}

AggregatedPrediction aggregate_sphere_predictions(const std::vector<SphereRegion>& regions,
                                                  const PredictionSet& preds) {
  if (regions.size() != preds.regions.size())
    throw ParameterError("expected " + std::to_string(regions.size()) + " region predictions, got " +
                         std::to_string(preds.regions.size()));
  for (std::size_t r = 0; r < regions.size(); ++r)
    if (regions[r].members != preds.regions[r].members)
      throw ParameterError("region " + std::to_string(r) + ": predicted members differ from the region");
  return aggregate_sphere_predictions(preds);
}

std::vector<Label> argmax_rows(const Matrix& probs) {
  std::vector<Label> out(static_cast<std::size_t>(probs.rows()));
  for (Index r = 0; r < probs.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<Label>(best);
  }
  return out;
}

std::vector<Label> project_full_resolution(const Positions& sub_positions, const Matrix& sub_probs,
                                           const Positions& full_positions, int workers) {
  if (sub_positions.rows() == 0) throw ParameterError("project_full_resolution requires a nonempty sub cloud");
  if (sub_probs.rows() != sub_positions.rows())
    throw ParameterError("sub cloud probabilities must have one row per point");
  const std::vector<Label> sub_labels = argmax_rows(sub_probs);
  const NeighborTable nn = knn_search(sub_positions, full_positions, 1, workers);
  std::vector<Label> out(static_cast<std::size_t>(full_positions.rows()));
  for (Index i = 0; i < full_positions.rows(); ++i)
    out[static_cast<std::size_t>(i)] = sub_labels[static_cast<std::size_t>(nn.row(i)[0])];
  return out;
}

Matrix vote_average(const std::vector<Matrix>& runs) {
  if (runs.empty()) throw ParameterError("vote_average needs at least one run");
  Matrix sum = runs.front();
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].rows() != sum.rows() || runs[k].cols() != sum.cols())
      throw ParameterError("run " + std::to_string(k) + " has a different shape");
    sum += runs[k];
  }
  for (std::size_t k = 0; k < runs.size(); ++k) check_rows_normalized(runs[k], "run " + std::to_string(k));
  return sum / static_cast<double>(runs.size());
}

}  // namespace ptkit
