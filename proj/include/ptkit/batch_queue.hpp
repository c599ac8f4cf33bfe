#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>

#include "ptkit/errors.hpp"

namespace ptkit {

/// Bounded FIFO fed by several producers that each own numbered items.
/// Item `seq` is accepted only after items 0..seq-1, so the consumer sees
/// production order no matter which worker finishes first.
template <typename T>
class BatchQueue {
 public:
  explicit BatchQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ParameterError("queue capacity must be at least 1");
  }

  BatchQueue(const BatchQueue&) = delete;
  BatchQueue& operator=(const BatchQueue&) = delete;

  /// Blocks until it is `seq`'s turn and there is room. Returns false when the
  /// queue was cancelled or failed; the item is dropped.
  bool push(std::int64_t seq, T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return stopped() || (seq == next_seq_ && items_.size() < capacity_); });
    if (stopped()) return false;
    items_.push_back(std::move(item));
    ++next_seq_;
    high_water_ = std::max(high_water_, items_.size());
    not_empty_.notify_one();
    not_full_.notify_all();
    return true;
  }

  /// Next item in sequence order; nullopt once closed and drained. Rethrows a
  /// producer failure.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_ || error_ || cancelled_; });
    if (error_) std::rethrow_exception(error_);
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_all();
    return item;
  }

  /// No more items will be pushed.
  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

  /// Records the first producer failure; the consumer sees it on its next pop.
  void fail(std::exception_ptr error) {
    std::lock_guard lock(mutex_);
    if (!error_) error_ = std::move(error);
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  /// Consumer is gone: wake and release every blocked producer.
  void cancel() {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }
  std::size_t high_water_mark() const {
    std::lock_guard lock(mutex_);
    return high_water_;
  }

 private:
  bool stopped() const { return cancelled_ || static_cast<bool>(error_); }

  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::int64_t next_seq_ = 0;
  std::size_t high_water_ = 0;
  bool closed_ = false;
  bool cancelled_ = false;
  std::exception_ptr error_;
};

}  // namespace ptkit
