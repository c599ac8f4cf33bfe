#include "ptkit/collate.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <tuple>

#include "ptkit/spatial.hpp"
#include "ptkit/transforms.hpp"

namespace ptkit {
namespace {

void check_consistent(const std::vector<PointCloud>& clouds) {
  if (clouds.empty()) throw ParameterError("cannot collate an empty list of clouds");
  const Index f = clouds.front().feature_dim();
  const auto first = std::find_if(clouds.begin(), clouds.end(), [](const PointCloud& c) { return !c.empty(); });
  const bool labeled = first != clouds.end() && first->has_labels();
  for (std::size_t b = 0; b < clouds.size(); ++b) {
    if (clouds[b].feature_dim() != f)
      throw ParameterError("instance " + std::to_string(b) + " has " + std::to_string(clouds[b].feature_dim()) +
                           " feature columns, expected " + std::to_string(f));
    if (clouds[b].has_labels() != labeled && clouds[b].size() > 0)
      throw ParameterError("instance " + std::to_string(b) + " disagrees on label presence");
  }
}

}  // namespace

DenseBatch collate_dense(const std::vector<PointCloud>& clouds, Index num_points, Rng& rng) {
  check_consistent(clouds);
  if (num_points < 1) throw ParameterError("collate_dense needs num_points >= 1");
  DenseBatch out;
  out.batch_size = static_cast<Index>(clouds.size());
  out.num_points = num_points;
  out.channels = 3 + clouds.front().feature_dim();
  out.data.resize(static_cast<std::size_t>(out.batch_size * num_points * out.channels));
  const bool labeled = std::any_of(clouds.begin(), clouds.end(), [](const auto& c) { return c.has_labels(); });
  if (labeled) out.labels.resize(static_cast<std::size_t>(out.batch_size * num_points));

  for (Index b = 0; b < out.batch_size; ++b) {
    const PointCloud sampled = fixed_points(clouds[static_cast<std::size_t>(b)], num_points, rng);
    for (Index n = 0; n < num_points; ++n) {
      double* row = out.data.data() + (b * num_points + n) * out.channels;
      for (int c = 0; c < 3; ++c) row[c] = sampled.positions(n, c);
      for (Index c = 0; c < sampled.feature_dim(); ++c) row[3 + c] = sampled.features(n, c);
      if (labeled) out.labels[static_cast<std::size_t>(b * num_points + n)] = sampled.labels[static_cast<std::size_t>(n)];
    }
  }
  return out;
}

PartialDenseBatch collate_partial_dense(const std::vector<PointCloud>& clouds) {
  check_consistent(clouds);
  PartialDenseBatch out;
  out.offsets.assign(clouds.size() + 1, 0);
  for (std::size_t b = 0; b < clouds.size(); ++b) out.offsets[b + 1] = out.offsets[b] + clouds[b].size();
  const Index total = out.offsets.back();
  const Index f = clouds.front().feature_dim();
  const bool labeled = std::any_of(clouds.begin(), clouds.end(), [](const auto& c) { return c.has_labels(); });

  PointCloud& pts = out.points;
  pts.positions.resize(total, 3);
  if (f > 0) pts.features.resize(total, f);
  if (labeled) pts.labels.reserve(static_cast<std::size_t>(total));
  out.batch.reserve(static_cast<std::size_t>(total));
  for (std::size_t b = 0; b < clouds.size(); ++b) {
    const PointCloud& c = clouds[b];
    if (c.size() == 0) continue;
    pts.positions.middleRows(out.offsets[b], c.size()) = c.positions;
    if (f > 0) pts.features.middleRows(out.offsets[b], c.size()) = c.features;
    if (labeled) pts.labels.insert(pts.labels.end(), c.labels.begin(), c.labels.end());
    out.batch.insert(out.batch.end(), static_cast<std::size_t>(c.size()), static_cast<Index>(b));
  }
  return out;
}

PointCloud PartialDenseBatch::slice(Index b) const {
  if (b < 0 || b >= batch_size()) throw ParameterError("batch index out of range");
  const Index begin = offsets[static_cast<std::size_t>(b)];
  const Index count = offsets[static_cast<std::size_t>(b) + 1] - begin;
  PointCloud out;
  out.positions = points.positions.middleRows(begin, count);
  if (points.has_features()) out.features = points.features.middleRows(begin, count);
  if (points.has_labels() && count > 0)
    out.labels.assign(points.labels.begin() + begin, points.labels.begin() + begin + count);
  return out;
}

SparseBatch collate_sparse(const std::vector<PointCloud>& clouds, double cell_size) {
  if (!(cell_size > 0.0)) throw ParameterError("cell_size must be positive");
  check_consistent(clouds);
  const Index f = clouds.front().feature_dim();
  const bool labeled = std::any_of(clouds.begin(), clouds.end(), [](const auto& c) { return c.has_labels(); });

  struct Row {
    Index batch;
    VoxelCoord coord;
    Eigen::RowVectorXd feature;
    Label label;
  };
  std::vector<Row> rows;
  for (std::size_t b = 0; b < clouds.size(); ++b) {
    const PointCloud& cloud = clouds[b];
    if (cloud.empty()) continue;
    const VoxelAssignment va = assign_voxels(cloud.positions, cell_size);
    std::vector<Index> counts(va.keys.size(), 0);
    Matrix pooled = Matrix::Zero(static_cast<Index>(va.keys.size()), f);
    std::vector<std::vector<Label>> members(labeled ? va.keys.size() : 0);
    for (Index i = 0; i < cloud.size(); ++i) {
      const auto v = static_cast<std::size_t>(va.mapping[static_cast<std::size_t>(i)]);
      ++counts[v];
      if (f > 0) pooled.row(static_cast<Index>(v)) += cloud.features.row(i);
      if (labeled) members[v].push_back(cloud.labels[static_cast<std::size_t>(i)]);
    }
    for (std::size_t v = 0; v < va.keys.size(); ++v) {
      Row row{static_cast<Index>(b), {va.keys[v].i, va.keys[v].j, va.keys[v].k}, {}, kIgnoreLabel};
      row.feature = pooled.row(static_cast<Index>(v)) / static_cast<double>(counts[v]);
      if (labeled) row.label = majority_label(members[v]);
      rows.push_back(std::move(row));
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.batch, a.coord) < std::tie(b.batch, b.coord);
  });

  SparseBatch out;
  const auto m = static_cast<Index>(rows.size());
  out.coords.reserve(rows.size());
  out.batch.reserve(rows.size());
  out.features.resize(m, f);
  if (labeled) out.labels.reserve(rows.size());
  for (Index r = 0; r < m; ++r) {
    const Row& row = rows[static_cast<std::size_t>(r)];
    out.coords.push_back(row.coord);
    out.batch.push_back(row.batch);
    if (f > 0) out.features.row(r) = row.feature;
    if (labeled) out.labels.push_back(row.label);
  }
  return out;
}

}  // namespace ptkit
