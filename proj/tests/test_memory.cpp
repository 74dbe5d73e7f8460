#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "protocore/errors.hpp"
#include "protocore/memory.hpp"

using namespace protocore;

namespace {

Sample item(int i) { return {{static_cast<double>(i), -static_cast<double>(i)}, i % 5}; }

SyntheticExemplar exemplar(int c, double v, int origin = 1) { return {c, {v, v}, {v, v, v}, origin}; }

}  // namespace

TEST(Reservoir, FillPhaseStoresEverything) {
  RealMemory m(10);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) m.reservoir_update(item(i), rng);
  ASSERT_EQ(m.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(m.items()[static_cast<std::size_t>(i)], item(i));
  EXPECT_EQ(m.seen_count(), 10u);
}

TEST(Reservoir, ZeroCapacityStaysEmpty) {
  RealMemory m(0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) m.reservoir_update(item(i), rng);
  EXPECT_TRUE(m.empty());
  EXPECT_EQ(m.seen_count(), 50u);
}

// Algorithm R written out independently, consuming the same random draws.
TEST(Reservoir, MatchesReferenceAlgorithm) {
  RealMemory m(7);
  Rng a(99), b(99);
  std::vector<Sample> ref;
  for (int i = 0; i < 200; ++i) {
    m.reservoir_update(item(i), a);
    if (ref.size() < 7) {
      ref.push_back(item(i));
    } else {
      std::uniform_int_distribution<std::uint64_t> u(0, static_cast<std::uint64_t>(i));
      const auto j = u(b);
      if (j < 7) ref[j] = item(i);
    }
  }
  EXPECT_EQ(m.items(), ref);
}

TEST(Reservoir, InclusionFrequencyIsUniform) {
  const int trials = 4000, n = 60;
  const std::size_t cap = 6;
  std::vector<int> count(n, 0);
  for (int t = 0; t < trials; ++t) {
    RealMemory m(cap);
    Rng rng(static_cast<std::uint64_t>(t) + 1000);
    for (int i = 0; i < n; ++i) m.reservoir_update({{static_cast<double>(i)}, 0}, rng);
    for (const auto& s : m.items()) ++count[static_cast<std::size_t>(s.x[0])];
  }
  const double p = static_cast<double>(cap) / n;
  const double mu = trials * p, sd = std::sqrt(trials * p * (1 - p));
  for (int i = 0; i < n; ++i) EXPECT_LE(std::abs(count[static_cast<std::size_t>(i)] - mu), 4 * sd) << i;
}

TEST(Reservoir, SampleBatch) {
  RealMemory m(10);
  Rng rng(2);
  for (int i = 0; i < 10; ++i) m.reservoir_update(item(i), rng);
  EXPECT_EQ(m.sample_batch(10, 1), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(m.sample_batch(50, 1).size(), 10u);
  const auto b = m.sample_batch(4, 3);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(std::set<std::size_t>(b.begin(), b.end()).size(), 4u);
  EXPECT_EQ(b, m.sample_batch(4, 3));
  EXPECT_TRUE(RealMemory(5).sample_batch(4, 1).empty());
}

TEST(SynthMemory, InsertAndReplace) {
  SynthMemory m(1);
  m.replace({exemplar(3, 1.0)});
  ASSERT_TRUE(m.contains(3));
  EXPECT_EQ(m.size(), 1u);
  m.replace({exemplar(3, 2.0, 2), exemplar(5, 0.5, 2)});
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at(3).front().z, (std::vector<double>{2.0, 2.0}));
  EXPECT_EQ(m.at(3).front().origin_task, 2);
  EXPECT_EQ(m.classes(), (std::vector<int>{3, 5}));
  EXPECT_THROW(m.at(4), ValidationError);
}

TEST(SynthMemory, PerClassLimit) {
  SynthMemory m(2);
  EXPECT_NO_THROW(m.replace({exemplar(1, 0.0), exemplar(1, 1.0), exemplar(0, 2.0)}));
  EXPECT_EQ(m.size(), 3u);
  EXPECT_THROW(m.replace({exemplar(1, 0.0), exemplar(1, 1.0), exemplar(1, 2.0)}), ValidationError);
  EXPECT_EQ(m.at(1).size(), 2u);
  const auto e = m.entries();
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].class_id, 0);
  EXPECT_EQ(e[2].s, (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_THROW(SynthMemory(0), ValidationError);
}

TEST(ProtoMemory, ReplaceValidates) {
  ProtoMemory m;
  m.replace({{0, {1, 2}, PrototypeSource::anchor}, {4, {3, 4}, PrototypeSource::anchor}});
  EXPECT_EQ(m.dim(), 2u);
  EXPECT_EQ(m.at(4), (std::vector<double>{3, 4}));
  m.replace({{0, {9, 9}, PrototypeSource::anchor}});
  EXPECT_EQ(m.at(0), (std::vector<double>{9, 9}));
  EXPECT_EQ(m.size(), 2u);
  EXPECT_THROW(m.replace({{1, {1, 2, 3}, PrototypeSource::anchor}}), ShapeError);
  EXPECT_THROW(m.replace({{1, {1, 2}, PrototypeSource::anchor}, {1, {1, 2}, PrototypeSource::anchor}}), ValidationError);
}

TEST(Footprint, SyntheticBudgetArithmetic) {
  MemoryPool pool;
  pool.synth = SynthMemory(1);
  std::vector<SyntheticExemplar> ex;
  for (int c = 0; c < 10; ++c) ex.push_back({c, std::vector<double>(16, 0.0), std::vector<double>(16, 1.0), 1});
  pool.synth.replace(ex);
  const auto f = memory_footprint(pool);
  EXPECT_EQ(f.synth_entries, 10u);
  EXPECT_EQ(f.synth_values, 160u);
  EXPECT_EQ(f.total_bytes, 160u * 8u);
  EXPECT_EQ(f.synth_per_class, 1u);
}

TEST(Footprint, EmptyIsZero) {
  const auto f = memory_footprint(MemoryPool{});
  EXPECT_EQ(f.total_values, 0u);
  EXPECT_EQ(f.total_bytes, 0u);
}

TEST(Footprint, RealAndSyntheticReportedSeparately) {
  // 20 real samples plus one synthetic exemplar per class.
  MemoryPool pool;
  pool.real = RealMemory(40);
  Rng rng(0);
  for (int i = 0; i < 40; ++i) pool.real.reservoir_update({std::vector<double>(16, 0.5), i % 2}, rng);
  pool.synth.replace({{0, std::vector<double>(16, 0.0), std::vector<double>(16, 0.0), 1},
                      {1, std::vector<double>(16, 0.0), std::vector<double>(16, 0.0), 1}});
  const auto f = memory_footprint(pool);
  EXPECT_EQ(f.real_items, 40u);
  EXPECT_DOUBLE_EQ(f.real_per_class, 20.0);
  EXPECT_EQ(f.real_values, 640u);
  EXPECT_EQ(f.synth_values, 32u);
  EXPECT_EQ(f.total_values, 672u);
  const auto j = footprint_to_json(f);
  EXPECT_EQ(j.at("real").at("values"), 640);
  EXPECT_EQ(j.at("synthetic").at("values"), 32);
}

TEST(Snapshot, RoundTripIsExact) {
  MemoryPool pool;
  pool.real = RealMemory(4);
  Rng rng(5);
  for (int i = 0; i < 9; ++i) pool.real.reservoir_update({{0.1 * i, 1.0 / (i + 1)}, i % 3}, rng);
  pool.synth = SynthMemory(2);
  pool.synth.replace({exemplar(0, 1.0 / 3.0), exemplar(0, -2.5), exemplar(7, 1e-17, 3)});
  pool.protos.replace({{0, {0.25, 1.0 / 7.0}, PrototypeSource::anchor}});
  pool.perturbation_variance = 0.0123456789;
  const auto text = memory_to_json(pool).dump();
  const auto back = memory_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, pool);
  EXPECT_EQ(memory_to_json(back).dump(), text);
}

TEST(Snapshot, RejectsForeignFormat) {
  EXPECT_THROW(memory_from_json(nlohmann::json{{"format", "nope"}, {"version", 1}}), ValidationError);
  auto j = memory_to_json(MemoryPool{});
  j["version"] = 99;
  EXPECT_THROW(memory_from_json(j), ValidationError);
}
