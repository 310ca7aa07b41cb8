#include "prequal/probe_pool.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace prequal {

namespace {

constexpr double kRoundingSlack = 1e-9;

void require(bool ok, const std::string& field, const std::string& bound) {
  if (!ok) throw ConfigError(field + " must satisfy " + bound);
}

}  // namespace

void PrequalConfig::validate() const {
  require(std::isfinite(r_probe) && r_probe > 0, "r_probe", "r_probe > 0");
  require(std::isfinite(r_remove) && r_remove >= 0, "r_remove",
          "r_remove >= 0");
  require(std::isfinite(delta) && delta > 0, "delta", "delta > 0");
  require(pool_size >= 1, "pool_size", "pool_size >= 1");
  require(num_replicas >= 1, "num_replicas", "num_replicas >= 1");
  require(q_rif >= 0.0 && q_rif <= 1.0, "q_rif", "0 <= q_rif <= 1");
  require(age_limit > Duration::zero(), "age_limit", "age_limit > 0");
  require(min_occupancy >= 0, "min_occupancy", "min_occupancy >= 0");
  require(rif_window >= 1, "rif_window", "rif_window >= 1");
  if (idle_probe_interval) {
    require(*idle_probe_interval > Duration::zero(), "idle_probe_interval",
            "idle_probe_interval > 0");
  }
}

double compute_reuse_budget(const PrequalConfig& cfg) {
  const double fill = static_cast<double>(cfg.pool_size) /
                      static_cast<double>(cfg.num_replicas);
  const double net_income = (1.0 - fill) * cfg.r_probe - cfg.r_remove;
  if (net_income <= 0.0) return kMaxReuseBudget;
  return std::min(kMaxReuseBudget,
                  std::max(1.0, (1.0 + cfg.delta) / net_income));
}

std::vector<ReplicaId> pick_probe_targets(int k,
                                          std::span<const ReplicaId> available,
                                          Rng& rng) {
  const std::size_t n = available.size();
  const std::size_t want =
      std::min(n, static_cast<std::size_t>(std::max(k, 0)));
  std::vector<ReplicaId> picked;
  picked.reserve(want);
  if (want == 0) return picked;

  if (want * 4 <= n) {
    // Sequential draws with rejection: every ordered k-tuple of distinct
    // replicas is equally likely.
    std::uniform_int_distribution<std::size_t> index(0, n - 1);
    while (picked.size() < want) {
      const ReplicaId candidate = available[index(rng)];
      if (std::find(picked.begin(), picked.end(), candidate) == picked.end()) {
        picked.push_back(candidate);
      }
    }
    return picked;
  }

  std::vector<ReplicaId> shuffled(available.begin(), available.end());
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> index(i, n - 1);
    std::swap(shuffled[i], shuffled[index(rng)]);
  }
  shuffled.resize(want);
  return shuffled;
}

RifThreshold nearest_rank_threshold(std::vector<int> samples, double q) {
  if (q >= 1.0) return RifThreshold::infinity();
  if (samples.empty()) return RifThreshold(0);
  const auto count = static_cast<double>(samples.size());
  const auto rank = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(q * count - kRoundingSlack)));
  const auto nth = samples.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(samples.begin(), nth, samples.end());
  return RifThreshold(*nth);
}

int ProbePool::probes_for_query(const PrequalConfig& cfg) {
  probe_accumulator_ += cfg.r_probe;
  const double whole = std::floor(probe_accumulator_ + kRoundingSlack);
  probe_accumulator_ = std::max(0.0, probe_accumulator_ - whole);
  return static_cast<int>(whole);
}

void ProbePool::add_probe(const ProbeResponse& response,
                          const PrequalConfig& cfg, double budget, Rng& rng) {
  PREQUAL_CHECK(budget >= 1.0, "reuse budget below 1");
  const double floor_budget = std::floor(budget);
  const bool round_up = uniform01(rng) < budget - floor_budget;
  PoolEntry entry{response, response.rif,
                  static_cast<int>(floor_budget) + (round_up ? 1 : 0)};

  record_rif(response.rif, cfg);

  auto same = std::find_if(entries_.begin(), entries_.end(),
                           [&](const PoolEntry& e) {
                             return e.response.replica == response.replica;
                           });
  if (same != entries_.end()) {
    *same = entry;
    return;
  }
  while (entries_.size() >= static_cast<std::size_t>(cfg.pool_size)) {
    remove_at(*oldest_index());
  }
  entries_.push_back(entry);
}

void ProbePool::expire_and_maintain(Timestamp now, const PrequalConfig& cfg) {
  std::erase_if(entries_, [&](const PoolEntry& e) {
    return now - e.response.received_at > cfg.age_limit;
  });
}

RifThreshold ProbePool::rif_threshold(const PrequalConfig& cfg) const {
  return nearest_rank_threshold(rif_history_, cfg.q_rif);
}

void ProbePool::on_query_sent(ReplicaId chosen, const PrequalConfig& cfg) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    if (e.response.replica != chosen) continue;
    ++e.effective_rif;
    if (--e.uses_remaining <= 0) remove_at(i);
    break;
  }

  removal_accumulator_ += cfg.r_remove;
  const double turns = std::floor(removal_accumulator_ + kRoundingSlack);
  removal_accumulator_ = std::max(0.0, removal_accumulator_ - turns);
  for (int t = 0; t < static_cast<int>(turns); ++t) {
    ++removal_turns_;
    if (entries_.empty()) continue;
    const auto victim = next_removal_ == RemovalKind::kOldest
                            ? oldest_index()
                            : worst_index(rif_threshold(cfg));
    remove_at(*victim);
    ++rate_removals_;
    next_removal_ = next_removal_ == RemovalKind::kOldest ? RemovalKind::kWorst
                                                          : RemovalKind::kOldest;
  }
}

const PoolEntry* ProbePool::find(ReplicaId replica) const {
  for (const auto& e : entries_) {
    if (e.response.replica == replica) return &e;
  }
  return nullptr;
}

void ProbePool::clear() {
  entries_.clear();
  rif_history_.clear();
  rif_history_next_ = 0;
  probe_accumulator_ = 0.0;
  removal_accumulator_ = 0.0;
  next_removal_ = RemovalKind::kOldest;
}

void ProbePool::remove_at(std::size_t i) {
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
}

std::optional<std::size_t> ProbePool::oldest_index() const {
  if (entries_.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    const auto& a = entries_[i].response;
    const auto& b = entries_[best].response;
    if (std::tie(a.received_at, a.replica) < std::tie(b.received_at, b.replica)) {
      best = i;
    }
  }
  return best;
}

std::optional<std::size_t> ProbePool::worst_index(RifThreshold theta) const {
  if (entries_.empty()) return std::nullopt;
  const bool any_hot = std::any_of(
      entries_.begin(), entries_.end(),
      [&](const PoolEntry& e) { return theta.is_hot(e.effective_rif); });
  // Reverse of the selection order: the hot entry with the highest RIF if any
  // entry is hot, otherwise the cold entry with the highest latency.
  auto key = [&](const PoolEntry& e) {
    const auto latency = e.response.latency_estimate.count();
    const auto id = static_cast<std::uint32_t>(e.response.replica);
    return any_hot ? std::make_tuple(std::int64_t{e.effective_rif}, latency, id)
                   : std::make_tuple(latency, std::int64_t{e.effective_rif}, id);
  };
  std::optional<std::size_t> worst;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (any_hot && !theta.is_hot(entries_[i].effective_rif)) continue;
    if (!worst || key(entries_[i]) > key(entries_[*worst])) worst = i;
  }
  return worst;
}

void ProbePool::record_rif(int rif, const PrequalConfig& cfg) {
  const auto window = static_cast<std::size_t>(cfg.rif_window);
  if (rif_history_.size() > window) {
    rif_history_.clear();
    rif_history_next_ = 0;
  }
  if (rif_history_.size() < window) {
    rif_history_.push_back(rif);
    rif_history_next_ = rif_history_.size() % window;
    return;
  }
  rif_history_[rif_history_next_] = rif;
  rif_history_next_ = (rif_history_next_ + 1) % window;
}

}  // namespace prequal
