#include "ptkit/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "ptkit/parallel.hpp"
#include "ptkit/random.hpp"

namespace ptkit {
namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw ParameterError(std::string(name) + " must be positive and finite");
}

std::int64_t floor_key(double x) {
  const double f = std::floor(x);
  if (!(f >= -9.0e18 && f <= 9.0e18)) throw ParameterError("voxel key out of range");
  return static_cast<std::int64_t>(f);
}

// Widens a floored key range so that rounding in (q +- r) / cell never drops a cell.
std::pair<std::int64_t, std::int64_t> key_range(double q, double r, double cell) {
  const double lo = (q - r) / cell;
  const double hi = (q + r) / cell;
  return {floor_key(lo - 1e-9 * (1.0 + std::abs(lo))), floor_key(hi + 1e-9 * (1.0 + std::abs(hi)))};
}

}  // namespace

VoxelKey VoxelKey::of(const Vec3& p, double cell_size) {
  return {floor_key(p.x() / cell_size), floor_key(p.y() / cell_size), floor_key(p.z() / cell_size)};
}

std::size_t VoxelKeyHash::operator()(const VoxelKey& key) const noexcept {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(key.i));
  h = mix64(h ^ static_cast<std::uint64_t>(key.j));
  h = mix64(h ^ static_cast<std::uint64_t>(key.k));
  return static_cast<std::size_t>(h);
}

VoxelAssignment assign_voxels(const Positions& positions, double cell_size) {
  require_positive(cell_size, "cell_size");
  VoxelAssignment out;
  const Index n = positions.rows();
  out.mapping.resize(static_cast<std::size_t>(n));
  std::unordered_map<VoxelKey, Index, VoxelKeyHash> slot;
  slot.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const VoxelKey key = VoxelKey::of(positions.row(i).transpose(), cell_size);
    auto [it, inserted] = slot.try_emplace(key, static_cast<Index>(out.keys.size()));
    if (inserted) out.keys.push_back(key);
    out.mapping[static_cast<std::size_t>(i)] = it->second;
  }
  return out;
}

Label majority_label(std::span<const Label> labels) {
  std::map<Label, Index> counts;
  for (Label l : labels)
    if (l != kIgnoreLabel) ++counts[l];
  Label best = kIgnoreLabel;
  Index best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

GridSubsampleResult grid_subsample(const PointCloud& cloud, double cell_size, LabelMode mode) {
  require_positive(cell_size, "cell_size");
  GridSubsampleResult result;
  if (cloud.empty()) {
    result.cloud.features.resize(0, cloud.features.cols());
    return result;
  }
  VoxelAssignment va = assign_voxels(cloud.positions, cell_size);
  const auto m = static_cast<Index>(va.keys.size());
  const Index n = cloud.size();

  std::vector<Index> counts(static_cast<std::size_t>(m), 0);
  PointCloud& out = result.cloud;
  out.positions = Positions::Zero(m, 3);
  if (cloud.has_features()) out.features = Matrix::Zero(m, cloud.features.cols());
  const bool keep_probs = mode == LabelMode::kKeepProbs && cloud.has_prob();
  if (keep_probs) out.prob = Matrix::Zero(m, cloud.prob.cols());

  for (Index i = 0; i < n; ++i) {
    const Index v = va.mapping[static_cast<std::size_t>(i)];
    ++counts[static_cast<std::size_t>(v)];
    out.positions.row(v) += cloud.positions.row(i);
    if (cloud.has_features()) out.features.row(v) += cloud.features.row(i);
    if (keep_probs) out.prob.row(v) += cloud.prob.row(i);
  }
  for (Index v = 0; v < m; ++v) {
    const double c = static_cast<double>(counts[static_cast<std::size_t>(v)]);
    out.positions.row(v) /= c;
    if (cloud.has_features()) out.features.row(v) /= c;
    if (keep_probs) out.prob.row(v) /= c;
  }

  if (cloud.has_labels()) {
    // Bucket labels per voxel, preserving input order.
    std::vector<Index> offsets(static_cast<std::size_t>(m) + 1, 0);
    for (Index v = 0; v < m; ++v)
      offsets[static_cast<std::size_t>(v) + 1] = offsets[static_cast<std::size_t>(v)] + counts[static_cast<std::size_t>(v)];
    std::vector<Label> bucket(static_cast<std::size_t>(n));
    std::vector<Index> fill(offsets.begin(), offsets.end() - 1);
    for (Index i = 0; i < n; ++i) {
      const auto v = static_cast<std::size_t>(va.mapping[static_cast<std::size_t>(i)]);
      bucket[static_cast<std::size_t>(fill[v]++)] = cloud.labels[static_cast<std::size_t>(i)];
    }
    out.labels.resize(static_cast<std::size_t>(m));
    for (Index v = 0; v < m; ++v) {
      const auto b = static_cast<std::size_t>(offsets[static_cast<std::size_t>(v)]);
      const auto e = static_cast<std::size_t>(offsets[static_cast<std::size_t>(v) + 1]);
      out.labels[static_cast<std::size_t>(v)] = majority_label(std::span(bucket).subspan(b, e - b));
    }
  }
  result.mapping = std::move(va.mapping);
  return result;
}

// ---------------------------------------------------------------------------
// HashGrid

HashGrid::HashGrid(const Positions& points, double cell_size) : points_(&points), cell_size_(cell_size) {
  require_positive(cell_size, "cell_size");
  const Index n = points.rows();
  std::vector<std::uint32_t> cell(static_cast<std::size_t>(n));
  cell_of_key_.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const VoxelKey key = VoxelKey::of(points.row(i).transpose(), cell_size);
    auto [it, inserted] = cell_of_key_.try_emplace(key, static_cast<std::uint32_t>(cell_keys_.size()));
    if (inserted) cell_keys_.push_back(key);
    cell[static_cast<std::size_t>(i)] = it->second;
  }
  offsets_.assign(cell_keys_.size() + 1, 0);
  for (std::uint32_t c : cell) ++offsets_[c + 1];
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  members_.resize(static_cast<std::size_t>(n));
  std::vector<Index> fill(offsets_.begin(), offsets_.end() - 1);
  for (Index i = 0; i < n; ++i) members_[static_cast<std::size_t>(fill[cell[static_cast<std::size_t>(i)]]++)] = i;
}

template <typename Visit>
void HashGrid::visit_candidates(const Vec3& center, double r, Visit&& visit) const {
  const auto [i0, i1] = key_range(center.x(), r, cell_size_);
  const auto [j0, j1] = key_range(center.y(), r, cell_size_);
  const auto [k0, k1] = key_range(center.z(), r, cell_size_);
  const double span = static_cast<double>(i1 - i0 + 1) * static_cast<double>(j1 - j0 + 1) *
                      static_cast<double>(k1 - k0 + 1);
  auto visit_cell = [&](std::size_t c) {
    for (Index m = offsets_[c]; m < offsets_[c + 1]; ++m)
      if (!visit(members_[static_cast<std::size_t>(m)])) return false;
    return true;
  };
  if (span > static_cast<double>(cell_keys_.size())) {
    for (std::size_t c = 0; c < cell_keys_.size(); ++c) {
      const VoxelKey& key = cell_keys_[c];
      if (key.i < i0 || key.i > i1 || key.j < j0 || key.j > j1 || key.k < k0 || key.k > k1) continue;
      if (!visit_cell(c)) return;
    }
    return;
  }
  for (std::int64_t i = i0; i <= i1; ++i)
    for (std::int64_t j = j0; j <= j1; ++j)
      for (std::int64_t k = k0; k <= k1; ++k) {
        auto it = cell_of_key_.find({i, j, k});
        if (it != cell_of_key_.end() && !visit_cell(it->second)) return;
      }
}

void HashGrid::ball_with_distances(const Vec3& center, double r,
                                   std::vector<std::pair<double, Index>>& out) const {
  out.clear();
  const double r2 = r * r;
  visit_candidates(center, r, [&](Index idx) {
    const double d2 = squared_distance(*points_, idx, center);
    if (d2 <= r2) out.emplace_back(d2, idx);
    return true;
  });
}

std::vector<Index> HashGrid::ball(const Vec3& center, double r) const {
  std::vector<Index> out;
  const double r2 = r * r;
  visit_candidates(center, r, [&](Index idx) {
    if (squared_distance(*points_, idx, center) <= r2) out.push_back(idx);
    return true;
  });
  std::sort(out.begin(), out.end());
  return out;
}

bool HashGrid::any_within(const Vec3& center, double r) const {
  bool found = false;
  const double r2 = r * r;
  visit_candidates(center, r, [&](Index idx) {
    found = squared_distance(*points_, idx, center) <= r2;
    return !found;
  });
  return found;
}

// ---------------------------------------------------------------------------
// KdTree

namespace {
constexpr Index kLeafSize = 12;
}

KdTree::KdTree(const Positions& points) : points_(&points) {
  order_.resize(static_cast<std::size_t>(points.rows()));
  std::iota(order_.begin(), order_.end(), Index{0});
  if (!order_.empty()) {
    nodes_.reserve(static_cast<std::size_t>(2 * points.rows() / kLeafSize + 1));
    build(0, points.rows());
  }
}

std::int32_t KdTree::build(Index begin, Index end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (Index m = begin; m < end; ++m) {
    const Vec3 p = points_->row(order_[static_cast<std::size_t>(m)]).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident

  const Index mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    return (*points_)(a, axis) < (*points_)(b, axis);
  });
  const double split = (*points_)(order_[static_cast<std::size_t>(mid)], axis);
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void KdTree::knn(const Vec3& query, Index k, std::vector<std::pair<double, Index>>& out) const {
  out.clear();
  if (nodes_.empty() || k <= 0) return;
  const auto want = static_cast<std::size_t>(std::min<Index>(k, points_->rows()));
  // `out` is kept as a max-heap on (distance, index) while searching.
  auto consider = [&](Index idx) {
    const std::pair<double, Index> cand{squared_distance(*points_, idx, query), idx};
    if (out.size() < want) {
      out.push_back(cand);
      std::push_heap(out.begin(), out.end());
    } else if (cand < out.front()) {
      std::pop_heap(out.begin(), out.end());
      out.back() = cand;
      std::push_heap(out.begin(), out.end());
    }
  };
  // Left subtree holds coordinates <= split, right holds >= split.
  struct Pending {
    std::int32_t node;
    double bound;
  };
  std::vector<Pending> stack{{0, 0.0}};
  while (!stack.empty()) {
    const Pending top = stack.back();
    stack.pop_back();
    if (out.size() == want && top.bound > out.front().first) continue;
    const Node& node = nodes_[static_cast<std::size_t>(top.node)];
    if (node.axis < 0) {
      for (Index m = node.begin; m < node.end; ++m) consider(order_[static_cast<std::size_t>(m)]);
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const double plane = diff * diff;
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;
    stack.push_back({far, std::max(top.bound, plane)});
    stack.push_back({near, top.bound});
  }
  std::sort_heap(out.begin(), out.end());
}

// ---------------------------------------------------------------------------
// Kernels

NeighborTable radius_search(const Positions& support, const Positions& query, double radius,
                            Index max_k, int workers) {
  require_positive(radius, "radius");
  if (max_k < 1) throw ParameterError("max_k must be at least 1");
  NeighborTable table;
  table.num_queries = query.rows();
  table.width = max_k;
  table.sentinel = support.rows();
  table.indices.assign(static_cast<std::size_t>(query.rows() * max_k), support.rows());
  table.counts.assign(static_cast<std::size_t>(query.rows()), 0);
  if (support.rows() == 0 || query.rows() == 0) return table;

  const HashGrid grid(support, radius);
  parallel_for(query.rows(), workers, [&](Index begin, Index end) {
    std::vector<std::pair<double, Index>> found;
    for (Index q = begin; q < end; ++q) {
      grid.ball_with_distances(query.row(q).transpose(), radius, found);
      const auto keep = std::min<std::size_t>(found.size(), static_cast<std::size_t>(max_k));
      std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(keep), found.end());
      Index* row = table.indices.data() + q * max_k;
      for (std::size_t j = 0; j < keep; ++j) row[j] = found[j].second;
      table.counts[static_cast<std::size_t>(q)] = static_cast<Index>(keep);
    }
  });
  return table;
}

NeighborTable knn_search(const Positions& support, const Positions& query, Index k, int workers) {
  if (k < 1) throw ParameterError("k must be at least 1");
  if (support.rows() == 0) throw ParameterError("knn_search requires a nonempty support");
  NeighborTable table;
  table.num_queries = query.rows();
  table.width = k;
  table.sentinel = support.rows();
  table.indices.assign(static_cast<std::size_t>(query.rows() * k), support.rows());
  table.counts.assign(static_cast<std::size_t>(query.rows()), 0);

  const KdTree tree(support);
  parallel_for(query.rows(), workers, [&](Index begin, Index end) {
    std::vector<std::pair<double, Index>> found;
    for (Index q = begin; q < end; ++q) {
      tree.knn(query.row(q).transpose(), k, found);
      Index* row = table.indices.data() + q * k;
      for (std::size_t j = 0; j < found.size(); ++j) row[j] = found[j].second;
      table.counts[static_cast<std::size_t>(q)] = static_cast<Index>(found.size());
    }
  });
  return table;
}

std::vector<Index> farthest_point_sampling(const Positions& points, Index m, Index seed_index) {
  const Index n = points.rows();
  if (m < 1 || m > n) throw ParameterError("farthest_point_sampling needs 1 <= m <= N");
  if (seed_index < 0 || seed_index >= n) throw ParameterError("seed_index out of range");

  std::vector<double> min_d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<Index> selected;
  selected.reserve(static_cast<std::size_t>(m));
  Index current = seed_index;
  for (Index s = 0; s < m; ++s) {
    selected.push_back(current);
    taken[static_cast<std::size_t>(current)] = 1;
    if (s + 1 == m) break;
    const Vec3 c = points.row(current).transpose();
    Index best = -1;
    double best_d2 = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      double& d = min_d2[static_cast<std::size_t>(i)];
      d = std::min(d, squared_distance(points, i, c));
      if (d > best_d2) {
        best_d2 = d;
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

Matrix knn_interpolate(const Positions& source, const Matrix& source_features,
                       const Positions& targets, Index k, int workers) {
  if (source.rows() == 0) throw ParameterError("knn_interpolate requires a nonempty source");
  if (source_features.rows() != source.rows())
    throw ParameterError("source features must have one row per source point");
  constexpr double kEps = 1e-8;
  const NeighborTable nn = knn_search(source, targets, k, workers);
  Matrix out = Matrix::Zero(targets.rows(), source_features.cols());
  parallel_for(targets.rows(), workers, [&](Index begin, Index end) {
    for (Index t = begin; t < end; ++t) {
      const auto neighbors = nn.neighbors(t);
      const Vec3 q = targets.row(t).transpose();
      if (squared_distance(source, neighbors[0], q) == 0.0) {
        out.row(t) = source_features.row(neighbors[0]);
        continue;
      }
      double total = 0.0;
      for (Index j : neighbors) {
        const double w = 1.0 / (std::sqrt(squared_distance(source, j, q)) + kEps);
        out.row(t) += w * source_features.row(j);
        total += w;
      }
      out.row(t) /= total;
    }
  });
  return out;
}

std::vector<Index> sphere_query(const Positions& points, const Vec3& center, double radius) {
  require_positive(radius, "radius");
  std::vector<Index> out;
  const double r2 = radius * radius;
  for (Index i = 0; i < points.rows(); ++i)
    if (squared_distance(points, i, center) <= r2) out.push_back(i);
  return out;
}

}  // namespace ptkit
