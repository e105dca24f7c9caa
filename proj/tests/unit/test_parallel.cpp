#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "lyanet/parallel.hpp"

using namespace lyanet;

TEST(ParallelChunks, PartitionIndependentOfWorkers) {
  for (std::size_t workers : {1u, 2u, 4u, 8u}) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges(kReductionChunks);
    parallel_chunks(100, kReductionChunks, workers,
                    [&](std::size_t c, std::size_t b, std::size_t e) { ranges[c] = {b, e}; });
    std::size_t expected_begin = 0;
    for (std::size_t c = 0; c < kReductionChunks; ++c) {
      EXPECT_EQ(ranges[c].first, expected_begin);
      EXPECT_EQ(ranges[c].second, (c + 1) * 100 / kReductionChunks);
      expected_begin = ranges[c].second;
    }
    EXPECT_EQ(expected_begin, 100u);
  }
}

TEST(ParallelChunks, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(37);
  parallel_chunks(37, 5, 3, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) hits[i]++;
  });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelChunks, FewerItemsThanChunks) {
  std::atomic<int> total{0};
  parallel_chunks(3, 16, 4, [&](std::size_t, std::size_t b, std::size_t e) { total += static_cast<int>(e - b); });
  EXPECT_EQ(total.load(), 3);
}

TEST(ParallelChunks, RethrowsWorkerException) {
  EXPECT_THROW(parallel_chunks(10, 4, 4,
                               [](std::size_t c, std::size_t, std::size_t) {
                                 if (c == 2) throw std::runtime_error("boom");
                               }),
               std::runtime_error);
}

TEST(ResolveWorkers, ZeroMeansAllCores) {
  EXPECT_GE(resolve_workers(0), 1u);
  EXPECT_EQ(resolve_workers(3), 3u);
}
