#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "protocore/errors.hpp"
#include "protocore/exemplar.hpp"
#include "protocore/trainer.hpp"

using namespace protocore;

namespace {

std::vector<Sample> two_class_data() {
  return {{{1, 2, 3}, 0}, {{3, 2, 1}, 0}, {{-1, -1, -1}, 1}, {{5, 5, 5}, 0}};
}

// One class of a 64-d split Gaussian stream seen through a frozen random encoder.
struct OneClassSetup {
  TaskSequence seq;
  Task task;
  Encoder encoder;
  Classifier classifier;
  Decoder decoder;
  MemoryPool memory;

  explicit OneClassSetup(std::uint64_t seed)
      : seq([&] {
          GaussianStreamSpec g;
          g.num_classes = 2;
          g.num_tasks = 1;
          g.input_dim = 64;
          g.separation = 4.0;
          g.noise_sd = 0.25;
          g.seed = seed;
          return make_split_gaussians(g);
        }()),
        encoder([&] {
          Rng rng(seed + 1);
          return Encoder(EncoderConfig{64, 64, 2, 8}, rng);
        }()),
        classifier(8, 2),
        decoder(Decoder::identity(64)) {
    task = seq.tasks[0];
    task.classes = {task.classes[0]};
    std::erase_if(task.train, [&](const Sample& s) { return s.y != task.classes[0]; });
  }

  SynthInputs inputs() const { return {&task, &encoder, &classifier, &decoder, &memory, {true, true}}; }
};

}  // namespace

TEST(InitExemplar, GaussianStartsNearOrigin) {
  const auto d = Decoder::identity(3);
  const auto e = init_exemplar(1, InitStrategy::gaussian, two_class_data(), d, 1e-4, 7, 2);
  EXPECT_EQ(e.class_id, 1);
  EXPECT_EQ(e.origin_task, 2);
  ASSERT_EQ(e.z.size(), 3u);
  for (double v : e.z) EXPECT_LT(std::abs(v), 1e-3);
  EXPECT_EQ(e.s, e.z);
  EXPECT_EQ(init_exemplar(1, InitStrategy::gaussian, two_class_data(), d, 1e-4, 7, 2), e);
  EXPECT_NE(init_exemplar(1, InitStrategy::gaussian, two_class_data(), d, 1e-4, 8, 2).z, e.z);
}

TEST(InitExemplar, ClassInputMean) {
  const auto e = init_exemplar(0, InitStrategy::class_input_mean, two_class_data(), Decoder::identity(3), 1e-4, 0, 1);
  EXPECT_EQ(e.s, (std::vector<double>{3, 3, 3}));
}

TEST(InitExemplar, UnknownClassRejected) {
  const auto d = Decoder::identity(3);
  EXPECT_THROW(init_exemplar(4, InitStrategy::class_input_mean, two_class_data(), d, 1e-4, 0, 1), ValidationError);
  EXPECT_THROW(init_exemplar(4, InitStrategy::gaussian, two_class_data(), d, 1e-4, 0, 1), ValidationError);
}

TEST(SynthLosses, CurSyn) {
  Tape tape;
  auto e = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(loss_cur_syn(e, Tensor::matrix({{1, 2}, {3, 4}})).value, 0.0);
  auto one = tape.constant(Tensor::matrix({{1, 2, 3}}));
  // Offset e = (0.5, -1, 2): mean(e^2) = 5.25 / 3.
  EXPECT_NEAR(loss_cur_syn(one, Tensor::matrix({{0.5, 3, 1}})).value, 5.25 / 3.0, 1e-15);
  // Sum over rows.
  EXPECT_NEAR(loss_cur_syn(e, Tensor::matrix({{0, 2}, {3, 2}})).value, 0.5 + 2.0, 1e-15);
  EXPECT_THROW(loss_cur_syn(e, Tensor::matrix({{1, 2}})), ShapeError);
}

TEST(SynthLosses, PreSynAndShift) {
  Tape tape;
  EXPECT_EQ(loss_pre_syn(std::nullopt, Tensor()).value, 0.0);
  EXPECT_EQ(loss_shift(std::nullopt, Tensor()).value, 0.0);
  auto e = tape.constant(Tensor::matrix({{0.5, 0.25}}));
  EXPECT_EQ(loss_pre_syn(e, Tensor::matrix({{0.5, 0.25}})).value, 0.0);
  EXPECT_EQ(loss_shift(e, Tensor::matrix({{0.5, 0.25}})).value, 0.0);
  EXPECT_EQ(loss_shift(e, Tensor::matrix({{0.5, 0.25}})).terms.front().name, "shift");
}

TEST(SynthConfig, Validation) {
  SynthConfig c;
  EXPECT_NO_THROW(validate(c));
  c.iterations = 0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.alpha = 1.5;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.step_size = -1;
  EXPECT_THROW(validate(c), ValidationError);
}

TEST(Kmeans, SeparatesBlobs) {
  const auto rows = Tensor::matrix({{0, 0}, {10, 10}, {0.1, 0}, {10, 9.9}, {0, 0.2}, {-10, 5}});
  const auto g = kmeans_groups(rows, 3);
  EXPECT_EQ(g, (std::vector<std::size_t>{0, 1, 0, 1, 0, 2}));
  EXPECT_EQ(kmeans_groups(rows, 1), std::vector<std::size_t>(6, 0));
  EXPECT_EQ(kmeans_groups(rows, 10).size(), 6u);
  EXPECT_THROW(kmeans_groups(rows, 0), ValidationError);
}

TEST(OptimizeExemplars, ConvergesOnFrozenRandomEncoder) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    OneClassSetup s(seed);
    SynthConfig c;
    c.init = InitStrategy::gaussian;
    const auto r = optimize_exemplars(s.inputs(), c, seed);
    ASSERT_EQ(r.exemplars.size(), 1u);
    ASSERT_EQ(r.traces.size(), 1u);
    EXPECT_EQ(r.steps_taken, 50u);
    EXPECT_FALSE(r.aborted);
    const auto& t = r.traces.front();
    EXPECT_LT(t.final_distance * t.final_distance, 0.01 * t.initial_distance * t.initial_distance) << seed;
    EXPECT_EQ(r.loss_history.size(), 51u);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
  }
}

TEST(OptimizeExemplars, TargetIsSurvivorPrototype) {
  OneClassSetup s(4);
  const auto r = optimize_exemplars(s.inputs(), SynthConfig{}, 4);
  ASSERT_EQ(r.prototypes.size(), 1u);
  const auto e = s.encoder.encode(stack_inputs(s.task.train));
  for (std::size_t k = 0; k < 8; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < e.rows(); ++i) m += e.at(i, k);
    EXPECT_NEAR(r.prototypes[0].vector[k], m / static_cast<double>(e.rows()), 1e-12);
  }
  EXPECT_GT(r.embedding_variance, 0.0);
  EXPECT_TRUE(r.fallback_classes.empty());
}

TEST(OptimizeExemplars, Deterministic) {
  OneClassSetup s(5);
  SynthConfig c;
  c.init = InitStrategy::gaussian;
  const auto a = optimize_exemplars(s.inputs(), c, 11);
  const auto b = optimize_exemplars(s.inputs(), c, 11);
  EXPECT_EQ(a.exemplars, b.exemplars);
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(OptimizeExemplars, ZeroWeightsReduceToCurSyn) {
  // Two tasks so that pre_syn and shift have targets.
  GaussianStreamSpec g;
  g.num_classes = 4;
  g.num_tasks = 2;
  g.seed = 3;
  const auto seq = make_split_gaussians(g);
  RunConfig rc;
  rc.seed = 2;
  rc.epochs = 3;
  TaskSequence first = seq;
  first.tasks.resize(1);
  auto run = run_sequence(first, rc);
  ASSERT_FALSE(run.memory.synth.empty());
  ASSERT_FALSE(run.memory.protos.empty());

  SynthInputs in{&seq.tasks[1], &run.model.encoder, &run.model.classifier, &run.model.decoder, &run.memory,
                 seen_mask(seq, 1)};
  SynthConfig zero;
  zero.alpha1 = 0.0;
  zero.alpha2 = 0.0;
  SynthConfig off;
  off.use_pre_syn = false;
  off.use_shift = false;
  const auto a = optimize_exemplars(in, zero, 9);
  const auto b = optimize_exemplars(in, off, 9);
  EXPECT_EQ(a.exemplars, b.exemplars);
  for (const auto& t : a.final_terms)
    if (t.name != "cur_syn") EXPECT_EQ(t.weight, 0.0) << t.name;

  // With the terms on, previous-class exemplars move differently.
  const auto full = optimize_exemplars(in, SynthConfig{}, 9);
  EXPECT_NE(full.exemplars, a.exemplars);
  std::set<int> classes;
  for (const auto& e : full.exemplars) classes.insert(e.class_id);
  EXPECT_EQ(classes.size(), 4u);
}

TEST(OptimizeExemplars, DivergenceKeepsLastFiniteIterate) {
  OneClassSetup s(6);
  SynthConfig c;
  c.init = InitStrategy::gaussian;
  c.step_size = 1e306;
  c.cosine_schedule = false;
  const auto r = optimize_exemplars(s.inputs(), c, 1);
  EXPECT_TRUE(r.aborted);
  ASSERT_EQ(r.exemplars.size(), 1u);
  for (double v : r.exemplars[0].s) EXPECT_TRUE(std::isfinite(v));
  for (double v : r.loss_history) EXPECT_TRUE(std::isfinite(v));
}

TEST(OptimizeExemplars, SeveralPerClass) {
  OneClassSetup s(7);
  SynthConfig c;
  c.per_class = 3;
  const auto r = optimize_exemplars(s.inputs(), c, 1);
  EXPECT_EQ(r.exemplars.size(), 3u);
  for (const auto& e : r.exemplars) EXPECT_EQ(e.class_id, s.task.classes[0]);
}

TEST(ExemplarDump, Fields) {
  OneClassSetup s(8);
  const auto r = optimize_exemplars(s.inputs(), SynthConfig{}, 1);
  const auto j = exemplar_dump(r.exemplars, s.encoder);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0].at("class_id"), s.task.classes[0]);
  EXPECT_EQ(j[0].at("s").get<std::vector<double>>(), r.exemplars[0].s);
  EXPECT_EQ(j[0].at("embedding").get<std::vector<double>>(), s.encoder.encode(Tensor::row(r.exemplars[0].s)).values);
}
