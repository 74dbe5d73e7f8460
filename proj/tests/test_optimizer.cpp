#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "protocore/checkpoint.hpp"
#include "protocore/errors.hpp"
#include "protocore/optimizer.hpp"
#include "protocore/rng.hpp"

using namespace protocore;

TEST(Optimizer, PlainStep) {
  Tensor p = Tensor::row({1.0});
  OptimizerConfig c{OptimizerKind::gradient_descent, 0.1};
  Optimizer opt(c, {&p});
  p.ensure_grad()[0] = 2.0;
  ASSERT_TRUE(opt.step());
  EXPECT_NEAR(p.values[0], 0.8, 1e-15);
}

TEST(Optimizer, AdamZeroGradientLeavesParameter) {
  Tensor p = Tensor::row({1.0, -3.0});
  Optimizer opt(OptimizerConfig{OptimizerKind::adam, 0.1}, {&p});
  for (int k = 0; k < 10; ++k) {
    opt.zero_grad();
    p.ensure_grad();
    ASSERT_TRUE(opt.step());
  }
  EXPECT_EQ(p.values, (std::vector<double>{1.0, -3.0}));
}

TEST(Optimizer, AdamFirstStepIsStepSizeTimesSign) {
  Tensor p = Tensor::row({0.0, 0.0});
  Optimizer opt(OptimizerConfig{OptimizerKind::adam, 0.01}, {&p});
  p.ensure_grad()[0] = 5.0;
  p.grad[1] = -0.002;
  ASSERT_TRUE(opt.step());
  // m_hat = g and v_hat = g^2 after bias correction.
  EXPECT_NEAR(p.values[0], -0.01, 1e-9);
  EXPECT_NEAR(p.values[1], 0.01, 1e-7);
}

TEST(Optimizer, AdamTwoStepsMatchHandComputation) {
  Tensor p = Tensor::row({1.0});
  OptimizerConfig c{OptimizerKind::adam, 0.1};
  Optimizer opt(c, {&p});
  const double g1 = 0.5, g2 = -1.0;
  p.ensure_grad()[0] = g1;
  opt.step();
  p.grad[0] = g2;
  opt.step();
  double m = 0.0, v = 0.0, x = 1.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p.values[0], x, 1e-14);
}

TEST(Optimizer, NanGradientAbortsStep) {
  Tensor p = Tensor::row({1.0, 2.0});
  Optimizer opt(OptimizerConfig{OptimizerKind::adam, 0.1}, {&p});
  p.ensure_grad()[0] = 1.0;
  p.grad[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(opt.step());
  EXPECT_EQ(p.values, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(opt.steps_taken(), 0u);
  EXPECT_EQ(opt.first_moments()[0].values, (std::vector<double>{0.0, 0.0}));
}

TEST(Optimizer, WeightDecayIsDecoupled) {
  Tensor p = Tensor::row({2.0});
  OptimizerConfig c{OptimizerKind::gradient_descent, 0.1};
  c.weight_decay = 0.5;
  Optimizer opt(c, {&p});
  p.ensure_grad()[0] = 0.0;
  opt.step();
  EXPECT_NEAR(p.values[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
}

TEST(Optimizer, RejectsBadConfig) {
  Tensor p = Tensor::row({1.0});
  EXPECT_THROW(Optimizer(OptimizerConfig{OptimizerKind::adam, 0.0}, {&p}), ValidationError);
  OptimizerConfig c;
  c.weight_decay = -1.0;
  EXPECT_THROW(Optimizer(c, {&p}), ValidationError);
}

TEST(Schedule, CosineAnnealing) {
  OptimizerConfig c{OptimizerKind::adam, 0.1, ScheduleKind::cosine, 50};
  EXPECT_DOUBLE_EQ(scheduled_step_size(c, 0), 0.1);
  EXPECT_NEAR(scheduled_step_size(c, 25), 0.05, 1e-15);
  EXPECT_LE(scheduled_step_size(c, 50), scheduled_step_size(c, 0));
  EXPECT_NEAR(scheduled_step_size(c, 50), 0.0, 1e-15);
  double prev = scheduled_step_size(c, 0);
  for (std::size_t k = 1; k <= 80; ++k) {
    const double s = scheduled_step_size(c, k);
    EXPECT_LE(s, prev);
    EXPECT_GE(s, 0.0);
    prev = s;
  }
  c.schedule = ScheduleKind::constant;
  EXPECT_EQ(scheduled_step_size(c, 40), 0.1);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, "data"), derive_seed(1, "data"));
  EXPECT_NE(derive_seed(1, "data"), derive_seed(2, "data"));
  EXPECT_NE(derive_seed(1, "data"), derive_seed(1, "init"));
  EXPECT_NE(derive_seed(1, "data", 0), derive_seed(1, "data", 1));
  auto a = make_rng(5, "x");
  auto b = make_rng(5, "x");
  EXPECT_EQ(a(), b());
}

TEST(Checkpoint, ParametersRoundTripBitExact) {
  std::vector<NamedTensor> params{{"w", Tensor::matrix({{0.1, 1.0 / 3.0}, {-2e-300, 12345.678901234567}})},
                                  {"b", Tensor::row({std::nextafter(1.0, 2.0)})}};
  const auto back = parameters_from_json(nlohmann::json::parse(parameters_to_json(params).dump()));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].name, params[i].name);
    EXPECT_EQ(back[i].tensor, params[i].tensor);
  }
  EXPECT_THROW(parameters_from_json(nlohmann::json{{"format", "other"}}), ValidationError);
}
