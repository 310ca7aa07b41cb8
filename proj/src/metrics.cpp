#include "prequal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "prequal/types.hpp"

namespace prequal {

LogHistogram::LogHistogram(double min, double max, int buckets_per_decade)
    : min_(min), max_(max), per_decade_(buckets_per_decade) {
  PREQUAL_CHECK(min > 0 && max > min && buckets_per_decade > 0,
                "bad log histogram bounds");
  regular_ = static_cast<std::size_t>(
      std::ceil(std::log10(max / min) * buckets_per_decade - 1e-9));
  counts_.assign(regular_ + 2, 0);
}

std::size_t LogHistogram::bucket_of(double value) const {
  if (!(value >= min_)) return 0;
  if (value >= max_) return regular_ + 1;
  const auto i = static_cast<std::size_t>(
      std::floor(std::log10(value / min_) * per_decade_));
  return 1 + std::min(i, regular_ - 1);
}

double LogHistogram::lower_edge(std::size_t bucket) const {
  if (bucket == 0) return 0.0;
  if (bucket > regular_) return max_;
  return min_ * std::pow(10.0, static_cast<double>(bucket - 1) / per_decade_);
}

double LogHistogram::upper_edge(std::size_t bucket) const {
  if (bucket == 0) return min_;
  if (bucket > regular_) return max_;
  return std::min(max_,
                  min_ * std::pow(10.0, static_cast<double>(bucket) / per_decade_));
}

void LogHistogram::record(double value, std::uint64_t times) {
  counts_[bucket_of(value)] += times;
  total_ += times;
  sum_ += value * static_cast<double>(times);
}

void LogHistogram::merge(const LogHistogram& other) {
  PREQUAL_CHECK(other.counts_.size() == counts_.size() && other.min_ == min_ &&
                    other.per_decade_ == per_decade_,
                "merging histograms with different layouts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  sum_ += other.sum_;
}

std::optional<double> LogHistogram::quantile(double q) const {
  if (total_ == 0) return std::nullopt;
  q = std::clamp(q, 0.0, 1.0);
  const double target = q * static_cast<double>(total_);
  double cumulative = 0.0;
  for (std::size_t b = 0; b < counts_.size(); ++b) {
    if (counts_[b] == 0) continue;
    const auto c = static_cast<double>(counts_[b]);
    if (cumulative + c >= target) {
      const double frac = std::clamp((target - cumulative) / c, 0.0, 1.0);
      return lower_edge(b) + (upper_edge(b) - lower_edge(b)) * frac;
    }
    cumulative += c;
  }
  return upper_edge(counts_.size() - 1);
}

void IntHistogram::record(int value, std::uint64_t times) {
  PREQUAL_CHECK(value >= 0, "integer histogram takes non-negative values");
  const auto v = static_cast<std::size_t>(value);
  if (counts_.size() <= v) counts_.resize(v + 1, 0);
  counts_[v] += times;
  total_ += times;
}

void IntHistogram::merge(const IntHistogram& other) {
  if (counts_.size() < other.counts_.size()) {
    counts_.resize(other.counts_.size(), 0);
  }
  for (std::size_t i = 0; i < other.counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
  }
  total_ += other.total_;
}

std::optional<double> IntHistogram::quantile(double q, bool smear) const {
  if (total_ == 0) return std::nullopt;
  q = std::clamp(q, 0.0, 1.0);
  const double n = static_cast<double>(total_);
  if (!smear) {
    const auto rank = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(q * n - 1e-9)));
    std::uint64_t cumulative = 0;
    for (std::size_t k = 0; k < counts_.size(); ++k) {
      cumulative += counts_[k];
      if (cumulative >= rank) return static_cast<double>(k);
    }
    return static_cast<double>(counts_.size() - 1);
  }
  const double target = q * n;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    if (counts_[k] == 0) continue;
    const auto c = static_cast<double>(counts_[k]);
    if (cumulative + c >= target) {
      const double frac = std::clamp((target - cumulative) / c, 0.0, 1.0);
      return static_cast<double>(k) - 0.5 + frac;
    }
    cumulative += c;
  }
  return static_cast<double>(counts_.size() - 1) + 0.5;
}

std::vector<double> cpu_windows(std::span<const double> core_seconds_per_second,
                                double allocation, int window_seconds) {
  PREQUAL_CHECK(allocation > 0 && window_seconds > 0, "bad CPU window request");
  std::vector<double> out;
  const auto w = static_cast<std::size_t>(window_seconds);
  for (std::size_t start = 0; start + w <= core_seconds_per_second.size();
       start += w) {
    double used = 0.0;
    for (std::size_t i = start; i < start + w; ++i) {
      used += core_seconds_per_second[i];
    }
    out.push_back(used / (allocation * static_cast<double>(window_seconds)));
  }
  return out;
}

std::optional<double> sample_quantile(std::vector<double>& values, double q) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) *
                     static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

double errors_per_second(std::uint64_t errors, std::int64_t measured_seconds) {
  PREQUAL_CHECK(measured_seconds > 0, "error rate over an empty span");
  return static_cast<double>(errors) / static_cast<double>(measured_seconds);
}

std::string csv_header() {
  return "run_id,step,policy,metric,quantile_or_window,value,unit";
}

std::string to_csv_line(const MetricRow& row) {
  return fmt::format("{},{},{},{},{},{:.6g},{}", row.run_id, row.step,
                     row.policy, row.metric, row.quantile_or_window, row.value,
                     row.unit);
}

MetricRow parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (fields.size() != 7) {
    throw std::invalid_argument("metrics CSV line needs 7 fields: " + line);
  }
  return MetricRow{fields[0], std::stoi(fields[1]), fields[2], fields[3],
                   fields[4], std::stod(fields[5]), fields[6]};
}

}  // namespace prequal
