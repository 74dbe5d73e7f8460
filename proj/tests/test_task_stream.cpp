#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "protocore/errors.hpp"
#include "protocore/task_stream.hpp"

using namespace protocore;

TEST(SplitGaussians, TenClassesFiveTasks) {
  GaussianStreamSpec spec;
  spec.seed = 4;
  const auto seq = make_split_gaussians(spec);
  ASSERT_EQ(seq.tasks.size(), 5u);
  std::set<int> all;
  for (std::size_t t = 0; t < 5; ++t) {
    const auto& task = seq.tasks[t];
    EXPECT_EQ(task.id, static_cast<int>(t) + 1);
    ASSERT_EQ(task.classes.size(), 2u);
    for (int c : task.classes) EXPECT_TRUE(all.insert(c).second) << "class in two tasks";
    std::map<int, int> train, test;
    for (const auto& s : task.train) ++train[s.y];
    for (const auto& s : task.test) ++test[s.y];
    for (int c : task.classes) {
      EXPECT_EQ(train[c], 40);
      EXPECT_EQ(test[c], 10);
    }
    EXPECT_EQ(train.size(), 2u);
    for (const auto& s : task.train) EXPECT_EQ(s.x.size(), spec.input_dim);
  }
  EXPECT_EQ(all.size(), 10u);
}

TEST(SplitGaussians, CentersRespectSeparation) {
  GaussianStreamSpec spec;
  spec.num_classes = 40;  // more than the 32 signed axes
  spec.num_tasks = 4;
  spec.separation = 3.0;
  const auto seq = make_split_gaussians(spec);
  for (std::size_t a = 0; a < seq.centers.size(); ++a)
    for (std::size_t b = a + 1; b < seq.centers.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < spec.input_dim; ++k) d2 += std::pow(seq.centers[a][k] - seq.centers[b][k], 2);
      EXPECT_GE(std::sqrt(d2), 3.0 - 1e-12);
    }
}

TEST(SplitGaussians, SameSeedIsByteIdentical) {
  GaussianStreamSpec spec;
  spec.seed = 17;
  EXPECT_EQ(sequence_to_json(make_split_gaussians(spec)).dump(), sequence_to_json(make_split_gaussians(spec)).dump());
  auto other = spec;
  other.seed = 18;
  EXPECT_NE(make_split_gaussians(spec), make_split_gaussians(other));
}

TEST(SplitGaussians, RejectsIndivisibleClassCount) {
  GaussianStreamSpec spec;
  spec.num_classes = 10;
  spec.num_tasks = 3;
  EXPECT_THROW(make_split_gaussians(spec), ValidationError);
  spec.num_tasks = 5;
  spec.separation = 0.0;
  EXPECT_THROW(make_split_gaussians(spec), ValidationError);
}

TEST(SplitGaussians, OracleAccuracyIsHighWhenWellSeparated) {
  GaussianStreamSpec spec;
  const auto seq = make_split_gaussians(spec);
  EXPECT_GT(seq.oracle_accuracy, 0.99);
}

TEST(SplitRings, RadiiIncreasePerClass) {
  const auto seq = make_split_rings(4, 2, 40, 3);
  ASSERT_EQ(seq.tasks.size(), 2u);
  ASSERT_EQ(seq.centers.size(), 4u);
  for (std::size_t c = 1; c < 4; ++c) EXPECT_GT(seq.centers[c][0], seq.centers[c - 1][0]);
  std::map<int, double> mean_r;
  std::map<int, int> n;
  for (const auto& t : seq.tasks)
    for (const auto& s : t.train) {
      ASSERT_EQ(s.x.size(), 2u);
      mean_r[s.y] += std::hypot(s.x[0], s.x[1]);
      ++n[s.y];
    }
  for (int c = 1; c < 4; ++c) EXPECT_GT(mean_r[c] / n[c], mean_r[c - 1] / n[c - 1]);
  EXPECT_EQ(make_split_rings(4, 2, 40, 3), seq);
  EXPECT_THROW(make_split_rings(5, 2, 40, 3), ValidationError);
}

TEST(Iterate, OnlineBatchSizes) {
  Task task;
  for (int i = 0; i < 100; ++i) task.train.push_back({{static_cast<double>(i)}, 0});
  const auto batches = iterate(task, StreamMode::online(), 32, 9);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches[0].size(), 32u);
  EXPECT_EQ(batches[1].size(), 32u);
  EXPECT_EQ(batches[2].size(), 32u);
  EXPECT_EQ(batches[3].size(), 4u);
  std::set<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Iterate, OfflineVisitsEverySampleOncePerEpoch) {
  Task task;
  for (int i = 0; i < 37; ++i) task.train.push_back({{static_cast<double>(i)}, 0});
  const auto batches = iterate(task, StreamMode::offline(2), 8, 1);
  std::map<std::size_t, int> count;
  for (const auto& b : batches)
    for (auto i : b) ++count[i];
  ASSERT_EQ(count.size(), 37u);
  for (const auto& [i, c] : count) EXPECT_EQ(c, 2) << i;
}

TEST(Iterate, FixedSeedFixedPermutation) {
  Task task;
  for (int i = 0; i < 20; ++i) task.train.push_back({{static_cast<double>(i)}, 0});
  EXPECT_EQ(iterate(task, StreamMode::offline(3), 5, 42), iterate(task, StreamMode::offline(3), 5, 42));
  EXPECT_NE(iterate(task, StreamMode::offline(1), 20, 42), iterate(task, StreamMode::offline(1), 20, 43));
}

TEST(Iterate, RejectsEmptyTask) {
  Task task;
  EXPECT_THROW(iterate(task, StreamMode::online(), 4, 0), ValidationError);
  task.train.push_back({{1.0}, 0});
  EXPECT_THROW(iterate(task, StreamMode::online(), 0, 0), ValidationError);
}

TEST(Stack, InputsAndLabels) {
  std::vector<Sample> s{{{1, 2}, 3}, {{4, 5}, 6}, {{7, 8}, 9}};
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(stack_inputs(s, idx), Tensor::matrix({{7, 8}, {1, 2}}));
  EXPECT_EQ(gather_labels(s, idx), (std::vector<int>{9, 3}));
  EXPECT_EQ(stack_inputs(s).rows(), 3u);
  s.push_back({{1.0}, 0});
  EXPECT_THROW(stack_inputs(s), ShapeError);
}

TEST(SequenceJson, RoundTrip) {
  const auto seq = make_split_rings(4, 2, 12, 8);
  EXPECT_EQ(sequence_from_json(nlohmann::json::parse(sequence_to_json(seq).dump())), seq);
  GaussianStreamSpec spec;
  spec.samples_per_class = 10;
  const auto g = make_split_gaussians(spec);
  EXPECT_EQ(sequence_from_json(nlohmann::json::parse(sequence_to_json(g).dump())), g);
  EXPECT_THROW(sequence_from_json(nlohmann::json{{"format", "x"}}), ValidationError);
}
