#include <gtest/gtest.h>

#include "prequal/signals.hpp"

namespace prequal {
namespace {

using std::chrono::milliseconds;

TEST(Tracker, ArrivalTagIsPostIncrement) {
  ServerLoadTracker t;
  EXPECT_EQ(t.on_query_arrive(at(milliseconds(1))), 1);
  EXPECT_EQ(t.on_query_arrive(at(milliseconds(2))), 2);
}

TEST(Tracker, ArrivalFromFourGivesFive) {
  ServerLoadTracker t;
  for (int i = 0; i < 4; ++i) t.on_query_arrive(at(milliseconds(i)));
  EXPECT_EQ(t.on_query_arrive(at(milliseconds(5))), 5);
}

TEST(Tracker, ReplayedCounter) {
  ServerLoadTracker t;
  const int first = t.on_query_arrive(at(milliseconds(0)));
  t.on_query_arrive(at(milliseconds(0)));
  t.on_query_arrive(at(milliseconds(0)));
  t.on_query_finish(first, milliseconds(5), at(milliseconds(5)));
  EXPECT_EQ(t.on_query_arrive(at(milliseconds(6))), 3);
}

TEST(Tracker, FinishRecordsUnderArrivalTag) {
  ServerLoadTracker t;
  const int tag = t.on_query_arrive(at(milliseconds(0)));
  t.on_query_finish(tag, milliseconds(20), at(milliseconds(20)));
  EXPECT_EQ(t.rif(), 0);
  ASSERT_EQ(t.bucket_size(1), 1u);
  EXPECT_EQ((*t.bucket(1))[0].latency, milliseconds(20));
}

TEST(Tracker, FirstQueryTagSurvivesLaterArrivals) {
  ServerLoadTracker t;
  const int first = t.on_query_arrive(at(milliseconds(0)));
  t.on_query_arrive(at(milliseconds(1)));
  t.on_query_finish(first, milliseconds(40), at(milliseconds(40)));
  EXPECT_EQ(t.rif(), 1);
  EXPECT_EQ(t.bucket_size(1), 1u);
  EXPECT_EQ(t.bucket_size(2), 0u);
}

TEST(Tracker, FullBucketEvictsOldest) {
  ServerLoadTracker::Options opt;
  opt.bucket_capacity = 5;
  ServerLoadTracker t(opt);
  for (int i = 0; i < 2; ++i) t.on_query_arrive(at(milliseconds(0)));
  for (int i = 0; i < 6; ++i) {
    t.on_query_arrive(at(milliseconds(i)));
    t.on_query_finish(3, milliseconds(10 + i), at(milliseconds(i)));
  }
  ASSERT_EQ(t.bucket_size(3), 5u);
  EXPECT_EQ((*t.bucket(3))[0].latency, milliseconds(11));
}

TEST(Tracker, EmptyTrackerReportsDefault) {
  ServerLoadTracker t;
  const auto r = t.answer_probe(at(milliseconds(0)));
  EXPECT_EQ(r.rif, 0);
  EXPECT_EQ(r.latency_estimate, t.options().default_latency);
}

TEST(Tracker, MedianOfOwnBucket) {
  ServerLoadTracker::Options opt;
  opt.min_samples = 3;
  ServerLoadTracker t(opt);
  t.on_query_arrive(at(milliseconds(0)));
  for (int ms : {10, 30, 20}) {
    ASSERT_EQ(t.on_query_arrive(at(milliseconds(0))), 2);
    t.on_query_finish(2, milliseconds(ms), at(milliseconds(50)));
  }
  t.on_query_arrive(at(milliseconds(50)));
  const auto r = t.answer_probe(at(milliseconds(60)));
  EXPECT_EQ(r.rif, 2);
  EXPECT_EQ(r.latency_estimate, milliseconds(20));
}

TEST(Tracker, RadiusOneExpansion) {
  ServerLoadTracker t;
  for (int i = 0; i < 10; ++i) t.on_query_arrive(at(milliseconds(0)));
  for (int ms : {50, 60, 70, 80, 90}) {
    t.on_query_finish(4, milliseconds(ms), at(milliseconds(100)));
  }
  ASSERT_EQ(t.rif(), 5);
  const auto r = t.answer_probe(at(milliseconds(200)));
  EXPECT_EQ(r.rif, 5);
  EXPECT_EQ(r.latency_estimate, milliseconds(70));
}

TEST(Tracker, EvenCountTakesLowerMiddle) {
  std::vector<Duration> v{milliseconds(4), milliseconds(1), milliseconds(3),
                          milliseconds(2)};
  EXPECT_EQ(lower_median(v), milliseconds(2));
}

TEST(Tracker, FallsBackToAllBucketsWhenRadiusIsThin) {
  ServerLoadTracker t;
  for (int i = 0; i < 20; ++i) t.on_query_arrive(at(milliseconds(0)));
  for (int ms : {5, 6, 7, 8, 9}) t.on_query_finish(15, milliseconds(ms), at(milliseconds(10)));
  // rif is now 15; bucket 15 holds five samples and the radius finds them.
  EXPECT_EQ(t.answer_probe(at(milliseconds(10))).latency_estimate, milliseconds(7));
  for (int i = 0; i < 14; ++i) t.on_query_abandon();
  // rif 1: buckets 0..4 are empty, so every in-window sample is used.
  EXPECT_EQ(t.answer_probe(at(milliseconds(10))).latency_estimate, milliseconds(7));
}

TEST(Tracker, StaleWindowReportsLastLatency) {
  ServerLoadTracker t;
  const int tag = t.on_query_arrive(at(milliseconds(0)));
  t.on_query_finish(tag, milliseconds(42), at(milliseconds(42)));
  const auto r = t.answer_probe(at(std::chrono::seconds(10)));
  EXPECT_EQ(r.latency_estimate, milliseconds(42));
}

TEST(Tracker, RejectsFinishWithoutArrival) {
  ServerLoadTracker t;
  EXPECT_THROW(t.on_query_finish(1, milliseconds(1), at(milliseconds(1))),
               InvariantViolation);
  EXPECT_THROW(t.on_query_abandon(), InvariantViolation);
}

TEST(Tracker, RejectsBadOptions) {
  ServerLoadTracker::Options opt;
  opt.bucket_capacity = 0;
  EXPECT_THROW(ServerLoadTracker{opt}, ConfigError);
}

TEST(Tracker, UpdatesTouchAtMostOneSlot) {
  ServerLoadTracker t;
  const auto before = t.slot_writes();
  const int tag = t.on_query_arrive(at(milliseconds(0)));
  EXPECT_EQ(t.slot_writes(), before);
  t.on_query_finish(tag, milliseconds(1), at(milliseconds(1)));
  EXPECT_EQ(t.slot_writes(), before + 1);
}

}  // namespace
}  // namespace prequal
