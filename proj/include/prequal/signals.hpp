#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "prequal/types.hpp"

namespace prequal {

// One server's answer to a probe, as stored by the client that sent it.
struct ProbeResponse {
  ReplicaId replica{};
  int rif = 0;
  Duration latency_estimate{1};
  Timestamp received_at{};
};

struct LoadReport {
  int rif = 0;
  Duration latency_estimate{};
};

// Fixed-capacity FIFO that overwrites its oldest element when full.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : slots_(capacity) {}

  void push(const T& value) {
    slots_[head_] = value;
    head_ = (head_ + 1) % slots_.size();
    if (size_ < slots_.size()) ++size_;
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }

  // i = 0 is the oldest element.
  const T& operator[](std::size_t i) const {
    return slots_[(head_ + slots_.size() - size_ + i) % slots_.size()];
  }

 private:
  std::vector<T> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

// Server-side requests-in-flight counter plus recent latencies bucketed by
// the RIF each query saw on arrival. Not thread-safe; one writer per tracker.
class ServerLoadTracker {
 public:
  struct Options {
    std::size_t bucket_capacity = 32;
    Duration sample_window = std::chrono::seconds(1);
    std::size_t min_samples = 5;
    int max_radius = 3;
    // Reported until the first query completes; after that an empty window
    // reports the most recent completed latency.
    Duration default_latency = std::chrono::milliseconds(1);
  };

  struct Sample {
    Timestamp finish_time{};
    Duration latency{};
  };

  ServerLoadTracker() : ServerLoadTracker(Options{}) {}
  explicit ServerLoadTracker(Options options);

  // Returns the RIF including the arriving query; pass it back on finish.
  int on_query_arrive(Timestamp now);
  void on_query_finish(int arrival_rif, Duration latency, Timestamp now);
  // A query removed without completing (deadline exceeded): no sample.
  void on_query_abandon();

  LoadReport answer_probe(Timestamp now) const;

  int rif() const { return rif_; }
  const Options& options() const { return options_; }
  // Number of samples currently stored under the given arrival RIF.
  std::size_t bucket_size(int rif) const;
  const RingBuffer<Sample>* bucket(int rif) const;

  // Ring-buffer slots written since construction. Arrive/finish each touch
  // at most one slot.
  std::uint64_t slot_writes() const { return slot_writes_; }

 private:
  Options options_;
  int rif_ = 0;
  std::vector<RingBuffer<Sample>> buckets_;
  Timestamp last_event_{};
  std::optional<Duration> last_latency_;
  std::uint64_t slot_writes_ = 0;
  mutable std::vector<Duration> scratch_;
};

// Lower-of-middle median; `values` is reordered.
Duration lower_median(std::vector<Duration>& values);

}  // namespace prequal
