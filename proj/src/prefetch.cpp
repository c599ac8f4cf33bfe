#include "ptkit/prefetch.hpp"

#include <span>
#include <string>

namespace ptkit {
namespace {

template <typename T>
std::uint64_t hash_span(std::span<const T> values, std::uint64_t h) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()), values.size_bytes()), h);
}

template <typename Derived>
std::uint64_t hash_matrix(const Eigen::DenseBase<Derived>& m, std::uint64_t h) {
  const auto dims = std::array<Index, 2>{m.rows(), m.cols()};
  h = hash_span(std::span<const Index>(dims), h);
  return hash_span(std::span<const double>(m.derived().data(), static_cast<std::size_t>(m.size())), h);
}

// Radius neighborhoods within each instance, offset into the concatenated level.
NeighborTable per_instance_radius_search(const Positions& points, const std::vector<Index>& offsets,
                                         double radius, Index max_k) {
  const Index total = points.rows();
  NeighborTable table;
  table.num_queries = total;
  table.width = max_k;
  table.sentinel = total;
  table.indices.assign(static_cast<std::size_t>(total * max_k), total);
  table.counts.assign(static_cast<std::size_t>(total), 0);
  for (std::size_t b = 0; b + 1 < offsets.size(); ++b) {
    const Index begin = offsets[b];
    const Index count = offsets[b + 1] - begin;
    if (count == 0) continue;
    const Positions inst = points.middleRows(begin, count);
    const NeighborTable local = radius_search(inst, inst, radius, max_k);
    for (Index q = 0; q < count; ++q) {
      const auto found = local.neighbors(q);
      Index* row = table.indices.data() + (begin + q) * max_k;
      for (std::size_t j = 0; j < found.size(); ++j) row[j] = found[j] + begin;
      table.counts[static_cast<std::size_t>(begin + q)] = static_cast<Index>(found.size());
    }
  }
  return table;
}

}  // namespace

std::uint64_t batch_digest(const PreparedBatch& batch) {
  std::uint64_t h = fnv1a64("batch");
  const std::array<Index, 2> ids{batch.epoch, batch.index};
  h = hash_span(std::span<const Index>(ids), h);
  h = hash_span(std::span<const Index>(batch.centers), h);
  h = hash_matrix(batch.batch.points.positions, h);
  h = hash_matrix(batch.batch.points.features, h);
  h = hash_span(std::span<const Label>(batch.batch.points.labels), h);
  h = hash_span(std::span<const Index>(batch.batch.batch), h);
  for (const LevelNeighbors& level : batch.levels) {
    h = hash_matrix(level.points, h);
    h = hash_span(std::span<const Index>(level.batch), h);
    h = hash_span(std::span<const Index>(level.neighbors.indices), h);
    h = hash_span(std::span<const Index>(level.neighbors.counts), h);
  }
  return h;
}

BatchPreparer::BatchPreparer(const RunConfig& config, const PointCloud& cloud)
    : protocol_(config.protocol),
      seed_(config.seed),
      train_(config.transforms.train),
      cloud_(&cloud),
      sampler_(cloud, config.protocol.sphere_radius) {
  config.validate();
}

Index BatchPreparer::batches_per_epoch() const {
  return (protocol_.sphere_count + protocol_.batch_size - 1) / protocol_.batch_size;
}

PreparedBatch BatchPreparer::prepare(Index epoch, Index index) const {
  if (index < 0 || index >= batches_per_epoch()) throw ParameterError("batch index out of range");
  Rng rng = make_rng(seed_, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(index)});
  const Index first = index * protocol_.batch_size;
  const Index count = std::min(protocol_.batch_size, protocol_.sphere_count - first);

  PreparedBatch out;
  out.epoch = epoch;
  out.index = index;
  std::vector<PointCloud> instances;
  instances.reserve(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) {
    const Index center = sampler_.draw_center(rng);
    out.centers.push_back(center);
    const SphereRegion region = sampler_.region_at(center);
    instances.push_back(train_.apply(cloud_->subset(region.members), rng));
  }
  out.batch = collate_partial_dense(instances);

  Positions level_points = out.batch.points.positions;
  std::vector<Index> offsets = out.batch.offsets;
  for (std::size_t l = 0; l < protocol_.neighbor_radii.size(); ++l) {
    const double cell = protocol_.level_cells[l];
    if (cell > 0.0) {
      std::vector<PointCloud> sub;
      for (std::size_t b = 0; b + 1 < offsets.size(); ++b)
        sub.push_back(grid_subsample(PointCloud(level_points.middleRows(offsets[b], offsets[b + 1] - offsets[b])), cell)
                          .cloud);
      const PartialDenseBatch merged = collate_partial_dense(sub);
      level_points = merged.points.positions;
      offsets = merged.offsets;
    }
    LevelNeighbors level;
    level.points = level_points;
    for (std::size_t b = 0; b + 1 < offsets.size(); ++b)
      level.batch.insert(level.batch.end(), static_cast<std::size_t>(offsets[b + 1] - offsets[b]), static_cast<Index>(b));
    level.neighbors =
        per_instance_radius_search(level_points, offsets, protocol_.neighbor_radii[l], protocol_.max_neighbors);
    out.levels.push_back(std::move(level));
  }
  return out;
}

BatchStream::BatchStream(const BatchPreparer& preparer, Index epoch, int workers, std::size_t capacity)
    : queue_(capacity) {
  const Index total = preparer.batches_per_epoch();
  const int n = std::max(1, workers);
  running_ = n;
  threads_.reserve(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) {
    threads_.emplace_back([this, &preparer, epoch, total] {
      try {
        for (;;) {
          const Index idx = next_index_.fetch_add(1);
          if (idx >= total) break;
          if (!queue_.push(idx, preparer.prepare(epoch, idx))) break;
        }
      } catch (...) {
        queue_.fail(std::current_exception());
      }
      if (running_.fetch_sub(1) == 1) queue_.close();
    });
  }
}

BatchStream::~BatchStream() {
  queue_.cancel();
  for (auto& t : threads_) t.join();
}

std::optional<PreparedBatch> BatchStream::next() { return queue_.pop(); }

void for_each_batch(const BatchPreparer& preparer, Index epoch, int workers, std::size_t capacity,
                    const std::function<void(PreparedBatch&&)>& consume) {
  BatchStream stream(preparer, epoch, workers, capacity);
  while (auto batch = stream.next()) consume(std::move(*batch));
}

}  // namespace ptkit
