#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "ptkit/batch_queue.hpp"
#include "ptkit/collate.hpp"
#include "ptkit/config.hpp"
#include "ptkit/protocol.hpp"
#include "ptkit/spatial.hpp"

namespace ptkit {

/// Points of one resolution level with their precomputed radius neighborhoods.
/// Neighbors never cross instances; the sentinel is the level's total point count.
struct LevelNeighbors {
  Positions points;
  std::vector<Index> batch;
  NeighborTable neighbors;
};

struct PreparedBatch {
  Index epoch = 0;
  Index index = 0;
  std::vector<Index> centers;  ///< sphere center rows in the source cloud
  PartialDenseBatch batch;
  std::vector<LevelNeighbors> levels;
};

/// Hash of every array in the batch, for bitwise comparisons.
std::uint64_t batch_digest(const PreparedBatch& batch);

/// Builds training batches: class-balanced spheres, train transforms,
/// partial-dense collation and per-level radius search. The content of batch
/// (epoch, index) depends only on the configured seed and those two numbers.
class BatchPreparer {
 public:
  /// `cloud` must outlive the preparer and carry labels.
  BatchPreparer(const RunConfig& config, const PointCloud& cloud);

  Index batches_per_epoch() const;
  PreparedBatch prepare(Index epoch, Index index) const;

 private:
  ProtocolConfig protocol_;
  std::uint64_t seed_;
  TransformPipeline train_;
  const PointCloud* cloud_;
  SphereSampler sampler_;
};

/// Background production of one epoch through a BatchQueue.
class BatchStream {
 public:
  BatchStream(const BatchPreparer& preparer, Index epoch, int workers, std::size_t capacity);
  ~BatchStream();
  BatchStream(const BatchStream&) = delete;
  BatchStream& operator=(const BatchStream&) = delete;

  /// Next batch in index order, nullopt at the end of the epoch. Rethrows the
  /// first worker failure.
  std::optional<PreparedBatch> next();

  std::size_t capacity() const { return queue_.capacity(); }
  std::size_t high_water_mark() const { return queue_.high_water_mark(); }

 private:
  BatchQueue<PreparedBatch> queue_;
  std::vector<std::thread> threads_;
  std::atomic<Index> next_index_{0};
  std::atomic<int> running_{0};
};

/// Runs a full epoch, handing batches to `consume` in index order.
void for_each_batch(const BatchPreparer& preparer, Index epoch, int workers, std::size_t capacity,
                    const std::function<void(PreparedBatch&&)>& consume);

}  // namespace ptkit
