#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prequal {

// Log-spaced histogram for positive values (latencies in microseconds).
// Values below `min` share one underflow bucket [0, min); values at or above
// `max` share one overflow bucket that reports `max`.
class LogHistogram {
 public:
  explicit LogHistogram(double min = 100.0, double max = 1e7,
                        int buckets_per_decade = 100);

  void record(double value, std::uint64_t times = 1);
  void merge(const LogHistogram& other);

  // Linear interpolation inside the bucket holding cumulative fraction q.
  std::optional<double> quantile(double q) const;

  std::uint64_t count() const { return total_; }
  double sum() const { return sum_; }

 private:
  std::size_t bucket_of(double value) const;
  double lower_edge(std::size_t bucket) const;
  double upper_edge(std::size_t bucket) const;

  double min_;
  double max_;
  int per_decade_;
  std::size_t regular_;  // buckets between min and max
  // [0] underflow, [1..regular_] regular, [regular_ + 1] overflow.
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  double sum_ = 0.0;
};

// Unit-width histogram of non-negative integers (RIF values).
class IntHistogram {
 public:
  void record(int value, std::uint64_t times = 1);
  void merge(const IntHistogram& other);

  // With smearing, each integer k is spread uniformly over [k - 1/2, k + 1/2)
  // and the result is interpolated; without it, the nearest-rank order
  // statistic is returned.
  std::optional<double> quantile(double q, bool smear = true) const;

  std::uint64_t count() const { return total_; }
  std::span<const std::uint64_t> counts() const { return counts_; }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Utilization (fraction of allocation) of consecutive, non-overlapping
// windows of `window_seconds` one-second core-second totals. A trailing
// partial window is dropped.
std::vector<double> cpu_windows(std::span<const double> core_seconds_per_second,
                                double allocation, int window_seconds);

// Interpolated sample quantile (linear between order statistics); values are
// reordered.
std::optional<double> sample_quantile(std::vector<double>& values, double q);

// Errors per second over a measured span, from integer counts.
double errors_per_second(std::uint64_t errors, std::int64_t measured_seconds);

// One CSV row. Column order: run_id, step, policy, metric,
// quantile_or_window, value, unit.
struct MetricRow {
  std::string run_id;
  int step = 0;
  std::string policy;
  std::string metric;
  std::string quantile_or_window;
  double value = 0.0;
  std::string unit;
};

std::string csv_header();
std::string to_csv_line(const MetricRow& row);
// Parses one line produced by to_csv_line.
MetricRow parse_csv_line(const std::string& line);

}  // namespace prequal
