#include <gtest/gtest.h>

#include <algorithm>

#include "prequal/metrics.hpp"
#include "prequal/types.hpp"

namespace prequal {
namespace {

IntHistogram of(std::initializer_list<int> values) {
  IntHistogram h;
  for (int v : values) h.record(v);
  return h;
}

TEST(IntHistogram, SmearedMedian) {
  EXPECT_DOUBLE_EQ(*of({2, 2, 3}).quantile(0.5), 2.25);
  EXPECT_DOUBLE_EQ(*of({5}).quantile(0.5), 5.0);
}

TEST(IntHistogram, ExactMedianWithoutSmearing) {
  EXPECT_DOUBLE_EQ(*of({2, 2, 3}).quantile(0.5, false), 2.0);
}

TEST(IntHistogram, EmptyHasNoQuantile) {
  EXPECT_FALSE(IntHistogram{}.quantile(0.5).has_value());
  EXPECT_FALSE(LogHistogram{}.quantile(0.5).has_value());
}

TEST(IntHistogram, MergeAddsCounts) {
  auto a = of({1, 2});
  a.merge(of({2, 7}));
  EXPECT_EQ(a.count(), 4u);
  EXPECT_EQ(a.counts()[2], 2u);
  EXPECT_EQ(a.counts()[7], 1u);
}

TEST(LogHistogram, RelativeResolution) {
  LogHistogram h;
  for (double v : {150.0, 2'000.0, 37'000.0, 900'000.0, 4'000'000.0}) {
    LogHistogram one;
    one.record(v);
    EXPECT_NEAR(*one.quantile(0.5), v, v * 0.025);
    h.record(v);
  }
  EXPECT_NEAR(*h.quantile(0.5), 37'000.0, 37'000.0 * 0.025);
  EXPECT_EQ(h.count(), 5u);
}

TEST(LogHistogram, OverflowReportsMax) {
  LogHistogram h(100, 1e7);
  h.record(5e7);
  EXPECT_DOUBLE_EQ(*h.quantile(0.99), 1e7);
}

TEST(CpuWindows, FullAllocationIsOne) {
  const std::vector<double> s(60, 0.1);
  for (double u : cpu_windows(s, 0.1, 1)) EXPECT_DOUBLE_EQ(u, 1.0);
}

TEST(CpuWindows, Ratio) {
  const std::vector<double> s{0.15};
  EXPECT_NEAR(cpu_windows(s, 0.1, 1)[0], 1.5, 1e-12);
}

TEST(CpuWindows, MinuteAveragingMasksSeconds) {
  std::vector<double> s;
  for (int i = 0; i < 60; ++i) s.push_back(i % 2 == 0 ? 0.0 : 0.2);
  const auto minute = cpu_windows(s, 0.1, 60);
  ASSERT_EQ(minute.size(), 1u);
  EXPECT_NEAR(minute[0], 1.0, 1e-12);
  const auto secs = cpu_windows(s, 0.1, 1);
  EXPECT_DOUBLE_EQ(*std::min_element(secs.begin(), secs.end()), 0.0);
  EXPECT_NEAR(*std::max_element(secs.begin(), secs.end()), 2.0, 1e-12);
}

TEST(CpuWindows, DropsPartialWindow) {
  const std::vector<double> s(90, 0.1);
  EXPECT_EQ(cpu_windows(s, 0.1, 60).size(), 1u);
}

TEST(SampleQuantile, Interpolates) {
  std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(*sample_quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(*sample_quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(*sample_quantile(v, 1.0), 4.0);
}

TEST(ErrorRate, CountsOverSeconds) {
  EXPECT_DOUBLE_EQ(errors_per_second(300, 100), 3.0);
  EXPECT_THROW(errors_per_second(1, 0), InvariantViolation);
}

TEST(Csv, RoundTrip) {
  const MetricRow row{"load_ramp-seed7-rep0", 3, "prequal", "latency", "p99",
                      12.5, "ms"};
  const auto back = parse_csv_line(to_csv_line(row));
  EXPECT_EQ(back.run_id, row.run_id);
  EXPECT_EQ(back.step, 3);
  EXPECT_EQ(back.policy, "prequal");
  EXPECT_EQ(back.metric, "latency");
  EXPECT_EQ(back.quantile_or_window, "p99");
  EXPECT_DOUBLE_EQ(back.value, 12.5);
  EXPECT_EQ(back.unit, "ms");
  EXPECT_EQ(csv_header(), "run_id,step,policy,metric,quantile_or_window,value,unit");
  EXPECT_THROW(parse_csv_line("a,b"), std::invalid_argument);
}

}  // namespace
}  // namespace prequal
