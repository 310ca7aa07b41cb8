#include "prequal/signals.hpp"

#include <algorithm>

namespace prequal {

ServerLoadTracker::ServerLoadTracker(Options options) : options_(options) {
  if (options_.bucket_capacity == 0) {
    throw ConfigError("bucket_capacity must be at least 1");
  }
  if (options_.default_latency <= Duration::zero()) {
    throw ConfigError("default_latency must be positive");
  }
}

int ServerLoadTracker::on_query_arrive(Timestamp now) {
  last_event_ = std::max(last_event_, now);
  return ++rif_;
}

void ServerLoadTracker::on_query_finish(int arrival_rif, Duration latency,
                                        Timestamp now) {
  PREQUAL_CHECK(rif_ >= 1, "query finished with no requests in flight");
  PREQUAL_CHECK(arrival_rif >= 1, "arrival RIF tag must be positive");
  PREQUAL_CHECK(now >= last_event_, "finish time moved backwards");
  --rif_;
  last_event_ = now;
  const auto tag = static_cast<std::size_t>(arrival_rif);
  if (buckets_.size() <= tag) {
    buckets_.resize(tag + 1, RingBuffer<Sample>(options_.bucket_capacity));
  }
  buckets_[tag].push(Sample{now, std::max(latency, Duration{1})});
  last_latency_ = std::max(latency, Duration{1});
  ++slot_writes_;
}

void ServerLoadTracker::on_query_abandon() {
  PREQUAL_CHECK(rif_ >= 1, "query abandoned with no requests in flight");
  --rif_;
}

std::size_t ServerLoadTracker::bucket_size(int rif) const {
  const auto* b = bucket(rif);
  return b == nullptr ? 0 : b->size();
}

const RingBuffer<ServerLoadTracker::Sample>* ServerLoadTracker::bucket(
    int rif) const {
  if (rif < 0 || static_cast<std::size_t>(rif) >= buckets_.size()) {
    return nullptr;
  }
  return &buckets_[static_cast<std::size_t>(rif)];
}

LoadReport ServerLoadTracker::answer_probe(Timestamp now) const {
  const Timestamp cutoff = now - options_.sample_window;
  scratch_.clear();
  auto gather = [&](long tag) {
    if (tag < 0 || static_cast<std::size_t>(tag) >= buckets_.size()) return;
    const auto& ring = buckets_[static_cast<std::size_t>(tag)];
    for (std::size_t i = 0; i < ring.size(); ++i) {
      if (ring[i].finish_time >= cutoff) scratch_.push_back(ring[i].latency);
    }
  };

  gather(rif_);
  for (int radius = 1;
       scratch_.size() < options_.min_samples && radius <= options_.max_radius;
       ++radius) {
    gather(static_cast<long>(rif_) - radius);
    gather(static_cast<long>(rif_) + radius);
  }
  if (scratch_.size() < options_.min_samples) {
    scratch_.clear();
    for (std::size_t tag = 0; tag < buckets_.size(); ++tag) {
      gather(static_cast<long>(tag));
    }
  }
  if (scratch_.empty()) {
    return LoadReport{rif_, last_latency_.value_or(options_.default_latency)};
  }
  return LoadReport{rif_, lower_median(scratch_)};
}

Duration lower_median(std::vector<Duration>& values) {
  PREQUAL_CHECK(!values.empty(), "median of empty set");
  const auto mid = values.begin() +
                   static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace prequal
