#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "protocore/errors.hpp"
#include "protocore/trainer.hpp"

using namespace protocore;

namespace {

// Direct re-implementation of the four metrics.
MetricsReport oracle_metrics(const std::vector<std::vector<double>>& a) {
  const double T = static_cast<double>(a.size());
  MetricsReport m;
  for (double v : a.back()) m.last_accuracy += v / T;
  for (const auto& row : a) {
    double s = 0.0;
    for (double v : row) s += v;
    m.average_accuracy += s / static_cast<double>(row.size()) / T;
  }
  for (std::size_t i = 0; i < a.size(); ++i) m.learning_accuracy += a[i][i] / T;
  if (a.size() > 1) {
    for (std::size_t j = 0; j + 1 < a.size(); ++j) {
      double best = 0.0;
      for (std::size_t i = j; i < a.size(); ++i) best = std::max(best, a[i][j]);
      m.forgetting += (best - a.back()[j]) / (T - 1);
    }
  }
  return m;
}

TaskSequence small_stream(std::size_t classes, std::size_t tasks, std::uint64_t seed) {
  GaussianStreamSpec g;
  g.num_classes = classes;
  g.num_tasks = tasks;
  g.samples_per_class = 30;
  g.seed = seed;
  return make_split_gaussians(g);
}

bool same_parameters(const ModelState& a, const ModelState& b) {
  const auto pa = model_parameters(a), pb = model_parameters(b);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].name != pb[i].name || !(pa[i].tensor == pb[i].tensor)) return false;
  return true;
}

}  // namespace

TEST(Metrics, HandComputedTwoTaskMatrix) {
  const auto m = compute_metrics({{{1.0}, {0.5, 1.0}}});
  EXPECT_EQ(m.last_accuracy, 0.75);
  EXPECT_EQ(m.learning_accuracy, 1.0);
  EXPECT_EQ(m.forgetting, 0.5);
  EXPECT_EQ(m.average_accuracy, 0.875);
}

TEST(Metrics, ConstantMatrix) {
  const auto m = compute_metrics({{{0.8}, {0.8, 0.8}, {0.8, 0.8, 0.8}}});
  EXPECT_NEAR(m.last_accuracy, 0.8, 1e-15);
  EXPECT_NEAR(m.average_accuracy, 0.8, 1e-15);
  EXPECT_NEAR(m.learning_accuracy, 0.8, 1e-15);
  EXPECT_EQ(m.forgetting, 0.0);
}

TEST(Metrics, SingleTask) {
  const auto m = compute_metrics({{{0.625}}});
  EXPECT_EQ(m.last_accuracy, m.average_accuracy);
  EXPECT_EQ(m.last_accuracy, m.learning_accuracy);
  EXPECT_EQ(m.forgetting, 0.0);
}

TEST(Metrics, RandomMatricesMatchOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 1 + trial % 7;
    std::vector<std::vector<double>> a(T);
    for (std::size_t i = 0; i < T; ++i) {
      a[i].resize(i + 1);
      for (auto& v : a[i]) v = u(rng);
      // Non-increasing columns on some trials.
      if (trial % 3 == 0 && i > 0)
        for (std::size_t j = 0; j < i; ++j) a[i][j] = std::min(a[i][j], a[i - 1][j]);
    }
    const auto got = compute_metrics({a});
    const auto want = oracle_metrics(a);
    EXPECT_NEAR(got.last_accuracy, want.last_accuracy, 1e-12);
    EXPECT_NEAR(got.average_accuracy, want.average_accuracy, 1e-12);
    EXPECT_NEAR(got.learning_accuracy, want.learning_accuracy, 1e-12);
    EXPECT_NEAR(got.forgetting, want.forgetting, 1e-12);
    EXPECT_GE(got.forgetting, 0.0);
  }
}

TEST(Metrics, RejectsMalformed) {
  EXPECT_THROW(compute_metrics({}), ValidationError);
  EXPECT_THROW(compute_metrics({{{1.0}, {0.5}}}), ValidationError);
  EXPECT_THROW(compute_metrics({{{1.5}}}), ValidationError);
}

TEST(LossSelection, Flags) {
  EXPECT_TRUE(LossSelection{}.full());
  EXPECT_EQ(LossSelection{}.label(), "full");
  const std::vector<int> one{1};
  const auto a = LossSelection::from_flags(one);
  EXPECT_TRUE(a.cur_syn);
  EXPECT_FALSE(a.pre_syn);
  EXPECT_FALSE(a.shift);
  EXPECT_FALSE(a.cur_pro);
  EXPECT_FALSE(a.pre_pro);
  EXPECT_TRUE(a.task_cur);
  EXPECT_TRUE(a.task_pre);
  EXPECT_EQ(a.label(), "(1)+(6)+(7)");
  const std::vector<int> train{4, 6};
  const auto b = LossSelection::from_flags(train);
  EXPECT_TRUE(b.cur_syn && b.pre_syn && b.shift && b.cur_pro && b.task_cur);
  EXPECT_FALSE(b.pre_pro || b.task_pre);
  const std::vector<int> all{1, 2, 3, 4, 5, 6, 7};
  EXPECT_TRUE(LossSelection::from_flags(all).full());
  EXPECT_EQ(LossSelection::from_flags(a.flags()), a);
  EXPECT_THROW(LossSelection::from_flags(std::vector<int>{}), ValidationError);
  EXPECT_THROW(LossSelection::from_flags(std::vector<int>{8}), ValidationError);
}

TEST(Methods, NamesRoundTrip) {
  for (auto m : {Method::protocore, Method::protocore_synth_only, Method::finetune, Method::reservoir_er, Method::joint})
    EXPECT_EQ(method_from_name(method_name(m)), m);
  EXPECT_THROW(method_from_name("icarl"), ValidationError);
}

TEST(TaskCur, UniformLogitsOverFourSeenClasses) {
  Tape tape;
  auto logits = tape.constant(Tensor::matrix({{0, 0, 0, 0, 7, 9}, {0, 0, 0, 0, -3, 2}}));
  const std::vector<int> labels{1, 3};
  const std::vector<bool> seen{true, true, true, true, false, false};
  EXPECT_NEAR(loss_task_cur(logits, labels, seen).value, std::log(4.0), 1e-12);
  EXPECT_THROW(loss_task_cur(logits, std::vector<int>{4, 0}, seen), ValidationError);
  auto sure = tape.constant(Tensor::matrix({{60, 0, 0, 0, 0, 0}}));
  const double v = loss_task_cur(sure, std::vector<int>{0}, seen).value;
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-20);
}

TEST(TaskPre, EmptyAndZeroNoise) {
  Rng rng(1);
  Classifier cls(3, 4, rng);
  Tape tape;
  auto params = cls.bind(tape, false);
  EXPECT_EQ(loss_task_pre(std::nullopt, {}, cls, params, 0.1, 3, 0).value, 0.0);

  auto e = tape.constant(Tensor::matrix({{0.3, -1, 2}, {1, 1, 0}}));
  const std::vector<int> labels{0, 2};
  const double three = loss_task_pre(e, labels, cls, params, 0.0, 3, 4).value;
  const double clean = softmax_cross_entropy(cls.classify(params, e), labels).item();
  EXPECT_NEAR(three, clean, 1e-14);
  EXPECT_THROW(loss_task_pre(e, labels, cls, params, -1.0, 3, 4), ValidationError);
}

// Brute-force expansion: for every draw, row and coordinate add N(0, var), then
// average the cross-entropy of W^T e + b over all perturbed rows.
TEST(TaskPre, MatchesExpansionOracle) {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Rng init(static_cast<std::uint64_t>(trial));
    Classifier cls(3, 5, init);
    const std::size_t n = 1 + trial % 4;
    std::vector<double> flat(n * 3);
    for (auto& v : flat) v = g(gen);
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>((i + trial) % 3));
    const std::vector<bool> seen{true, true, true, false, false};
    const double var = 0.05 * (1 + trial % 5);
    const std::size_t draws = 1 + trial % 4;
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(trial);

    Tape tape;
    auto params = cls.bind(tape, false);
    const double got =
        loss_task_pre(tape.constant(Tensor::matrix(n, 3, flat)), labels, cls, params, var, draws, seed, seen).value;

    Rng rng(seed);
    std::normal_distribution<double> zeta(0.0, std::sqrt(var));
    const auto& W = cls.weight();
    const auto& b = cls.bias();
    double total = 0.0;
    for (std::size_t d = 0; d < draws; ++d)
      for (std::size_t i = 0; i < n; ++i) {
        double e[3];
        for (std::size_t k = 0; k < 3; ++k) e[k] = flat[i * 3 + k] + zeta(rng);
        double logit[3], z = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          logit[c] = b.values[c];
          for (std::size_t k = 0; k < 3; ++k) logit[c] += e[k] * W.values[k * 5 + c];
          z += std::exp(logit[c]);
        }
        total += -(logit[labels[i]] - std::log(z));
      }
    EXPECT_NEAR(got, total / static_cast<double>(draws * n), 1e-10);
  }
}

TEST(TotalLoss, Weights) {
  Tape tape;
  auto mk = [&](double v, const char* name) { return LossValue::from(sum(tape.constant(Tensor::row({v}))), name); };
  const auto a = mk(0.7, "cur_pro"), b = mk(1.0, "pre_pro"), c = mk(1.0, "task_pre"), d = mk(1.0, "task_cur");
  EXPECT_NEAR(total_loss(a, b, c, d, 0, 0, 0).value, 0.7, 1e-15);
  const auto one = mk(1.0, "cur_pro");
  EXPECT_EQ(total_loss(one, b, c, d, 1, 1, 1).value, 4.0);
  const auto nan = LossValue::from(sum(tape.constant(Tensor::row({std::nan("")}))), "pre_pro");
  EXPECT_THROW(total_loss(a, nan, c, d, 1, 1, 1), NumericalError);
  EXPECT_THROW(total_loss(a, b, c, d, -1, 1, 1), ValidationError);
  const auto z = total_loss(a, LossValue::zero("pre_pro", "no previous classes"), c, d, 1, 1, 1);
  EXPECT_NEAR(z.value, 2.7, 1e-15);
}

TEST(TotalLoss, MatchesExpansionAndIsLinearInWeights) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    double v[4], w[3];
    for (auto& x : v) x = u(rng);
    for (auto& x : w) x = trial % 5 == 0 ? 0.0 : u(rng);
    auto mk = [&](double x) { return LossValue::from(sum(tape.constant(Tensor::row({x}))), "part"); };
    const auto t = total_loss(mk(v[0]), mk(v[1]), mk(v[2]), mk(v[3]), w[0], w[1], w[2]);
    EXPECT_NEAR(t.value, v[0] + w[0] * v[1] + w[1] * v[2] + w[2] * v[3], 1e-10);
    ASSERT_EQ(t.terms.size(), 4u);
    // Finite difference in alpha1 recovers the pre_pro value.
    const double h = 1e-4;
    const auto up = total_loss(mk(v[0]), mk(v[1]), mk(v[2]), mk(v[3]), w[0] + h, w[1], w[2]);
    const auto dn = total_loss(mk(v[0]), mk(v[1]), mk(v[2]), mk(v[3]), w[0] + 2 * h, w[1], w[2]);
    EXPECT_NEAR((dn.value - up.value) / h, v[1], 1e-8);
  }
}

TEST(TotalLoss, GradientIsWeightedSum) {
  Tensor x = Tensor::row({0.4, -0.3});
  Tape tape;
  auto v = tape.leaf(x);
  const auto a = LossValue::from(sum(mul(v, v)), "cur_pro");
  const auto b = LossValue::from(sum(v), "pre_pro");
  const auto t = total_loss(a, b, LossValue::zero("task_pre", ""), LossValue::zero("task_cur", ""), 0.5, 1, 1);
  tape.backward(t.var);
  EXPECT_NEAR(x.grad[0], 2 * 0.4 + 0.5, 1e-15);
  EXPECT_NEAR(x.grad[1], 2 * -0.3 + 0.5, 1e-15);
}

TEST(RunConfig, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(validate(c));
  c.temperature = 0.0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.alpha2 = -0.1;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(validate(c), ValidationError);
}

TEST(Run, SingleTaskProtocoreEqualsFinetuneWithoutPrototypeTerms) {
  const auto seq = small_stream(2, 1, 5);
  RunConfig ft;
  ft.method = Method::finetune;
  ft.seed = 9;
  ft.epochs = 3;
  RunConfig pc = ft;
  pc.method = Method::protocore;
  pc.alpha1 = 0.0;
  pc.alpha2 = 0.0;
  pc.losses = LossSelection::from_flags(std::vector<int>{1, 2, 3, 6});
  const auto a = run_sequence(seq, ft);
  const auto b = run_sequence(seq, pc);
  const auto pa = model_parameters(a.model), pb = model_parameters(b.model);
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].name.rfind("decoder", 0) != 0) EXPECT_EQ(pa[i].tensor, pb[i].tensor) << pa[i].name;
  const auto m = a.metrics;
  EXPECT_EQ(m.last_accuracy, m.average_accuracy);
  EXPECT_EQ(m.last_accuracy, m.learning_accuracy);
}

TEST(Run, ReservoirWithZeroReplayWeightEqualsFinetune) {
  const auto seq = small_stream(6, 3, 2);
  RunConfig ft;
  ft.method = Method::finetune;
  ft.seed = 4;
  ft.epochs = 2;
  RunConfig er = ft;
  er.method = Method::reservoir_er;
  er.replay_weight = 0.0;
  er.real_per_class = 5;
  const auto a = run_sequence(seq, ft);
  const auto b = run_sequence(seq, er);
  EXPECT_TRUE(same_parameters(a.model, b.model));
  EXPECT_EQ(b.memory.real.size(), 30u);
  EXPECT_TRUE(a.memory.real.empty());
}

TEST(Run, Deterministic) {
  const auto seq = small_stream(4, 2, 1);
  RunConfig c;
  c.seed = 3;
  c.epochs = 2;
  const auto a = run_sequence(seq, c);
  const auto b = run_sequence(seq, c);
  EXPECT_EQ(metrics_to_json(a, c).dump(), metrics_to_json(b, c).dump());
  EXPECT_EQ(memory_to_json(a.memory).dump(), memory_to_json(b.memory).dump());
  EXPECT_TRUE(same_parameters(a.model, b.model));
  c.seed = 4;
  const auto d = run_sequence(seq, c);
  EXPECT_FALSE(same_parameters(a.model, d.model));
}

TEST(Run, TwoTaskMemoryHoldsEveryClassOnce) {
  const auto seq = small_stream(4, 2, 6);
  RunConfig c;
  c.seed = 1;
  c.epochs = 2;
  const auto r = run_sequence(seq, c);
  EXPECT_EQ(r.memory.synth.size(), 4u);
  EXPECT_EQ(r.memory.synth.classes(), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(r.memory.protos.size(), 4u);
  EXPECT_GT(r.memory.perturbation_variance, 0.0);
  ASSERT_EQ(r.checkpoints.size(), 2u);
  EXPECT_EQ(r.checkpoints[0].memory.synth.size(), 2u);
  EXPECT_EQ(r.synthesis.size(), 2u);
  ASSERT_EQ(r.accuracy.tasks(), 2u);
  EXPECT_EQ(r.accuracy.rows[1].size(), 2u);
}

TEST(Run, SyntheticPerClassBudget) {
  const auto seq = small_stream(4, 2, 6);
  RunConfig c;
  c.seed = 1;
  c.epochs = 1;
  c.synthesis.per_class = 3;
  const auto r = run_sequence(seq, c);
  EXPECT_EQ(r.memory.synth.size(), 12u);
  for (int k : r.memory.synth.classes()) EXPECT_EQ(r.memory.synth.at(k).size(), 3u);
}

TEST(Run, FinetuneForgetsAndProtocoreRetains) {
  GaussianStreamSpec g;
  g.seed = 100;
  const auto seq = make_split_gaussians(g);
  RunConfig ft;
  ft.method = Method::finetune;
  ft.seed = 0;
  RunConfig pc = ft;
  pc.method = Method::protocore;
  const auto a = run_sequence(seq, ft);
  const auto b = run_sequence(seq, pc);
  EXPECT_GT(a.accuracy.at(4, 4), 0.9);
  EXPECT_LE(std::abs(a.accuracy.at(4, 0) - 0.1), 0.1);
  EXPECT_GT(b.accuracy.at(4, 0) - a.accuracy.at(4, 0), 0.15);
  EXPECT_GT(a.metrics.forgetting, 0.5);
}

TEST(Run, JointOracleUpperBoundsAverageAccuracy) {
  GaussianStreamSpec g;
  g.seed = 104;
  g.separation = 5.0;
  g.noise_sd = 1.0;
  const auto seq = make_split_gaussians(g);
  RunConfig c;
  c.seed = 4;
  c.method = Method::joint;
  const double joint = run_sequence(seq, c).metrics.average_accuracy;
  for (auto m : {Method::finetune, Method::reservoir_er, Method::protocore, Method::protocore_synth_only}) {
    c.method = m;
    c.real_per_class = m == Method::reservoir_er ? 5 : 0;
    EXPECT_GE(joint, run_sequence(seq, c).metrics.average_accuracy) << method_name(m);
  }
}

TEST(Run, OnlineModeSinglePass) {
  const auto seq = small_stream(4, 2, 8);
  RunConfig c;
  c.online = true;
  c.epochs = 5;
  c.batch_size = 8;
  const auto r = run_sequence(seq, c);
  // One log row per task; 24 train samples per class in batches of 8.
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(r.log[0].batches, 6u);
}

TEST(Run, DivergenceAbortsWithDiagnostic) {
  const auto seq = small_stream(4, 2, 8);
  RunConfig c;
  c.optimizer.step_size = 1e200;
  c.optimizer.kind = OptimizerKind::gradient_descent;
  try {
    run_sequence(seq, c);
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_TRUE(e.diagnostic().contains("task"));
    EXPECT_TRUE(e.diagnostic().contains("terms"));
  }
}

TEST(Outputs, CsvAndJsonShapes) {
  const auto seq = small_stream(4, 2, 3);
  RunConfig c;
  c.epochs = 2;
  const auto r = run_sequence(seq, c);
  const auto csv = accuracy_csv(r.accuracy);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "after_task,task_1,task_2");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const auto log = loss_log_csv(r.log);
  EXPECT_EQ(log.substr(0, log.find('\n')), "task,epoch,batches,cur_pro,pre_pro,task_pre,task_cur,replay,total");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 5);
  const auto j = metrics_to_json(r, c);
  EXPECT_EQ(j.at("format"), "protocore-metrics");
  EXPECT_FALSE(j.contains("seconds"));
  EXPECT_EQ(j.at("accuracy_matrix").size(), 2u);
}
