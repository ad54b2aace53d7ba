#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/nn/checkpoint.hpp"
#include "hmgdyn/nn/graph.hpp"
#include "hmgdyn/nn/optim.hpp"

using namespace hmgdyn;
using namespace hmgdyn::nn;

namespace {

Tensor<double> filled(Shape s, std::initializer_list<double> v) {
  Tensor<double> t(s);
  std::copy(v.begin(), v.end(), t.data.begin());
  return t;
}

}  // namespace

class GradCheck : public ::testing::TestWithParam<gradcheck::OpCase> {};

TEST_P(GradCheck, TwentySeededCases) {
  const auto s = gradcheck::run_op(GetParam(), 20);
  EXPECT_EQ(s.cases, 20);
  EXPECT_LT(s.worst, s.tolerance) << s.name;
}

INSTANTIATE_TEST_SUITE_P(Ops, GradCheck, ::testing::ValuesIn(gradcheck::op_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  Graph<double> g;
  const auto x = gradcheck::random_tensor({2, 3, 4, 5}, rng);
  Tensor<double> k({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) k.at(c, c, 0, 0) = 1.0;
  const Var y = g.conv2d(g.constant(x), g.constant(k), g.constant(Tensor<double>({1, 3, 1, 1})));
  EXPECT_EQ(g.value(y).data, x.data);
}

TEST(Conv2d, AveragingKernelPadding) {
  Graph<double> g;
  const Var y = g.conv2d(g.constant(Tensor<double>({1, 1, 5, 5}, 1.0)), g.constant(Tensor<double>({1, 1, 3, 3}, 1.0 / 9)),
                         g.constant(Tensor<double>({1, 1, 1, 1})));
  const auto& t = g.value(y);
  EXPECT_NEAR(t.at(0, 0, 2, 2), 1.0, 1e-15);
  EXPECT_NEAR(t.at(0, 0, 0, 2), 6.0 / 9, 1e-15);
  EXPECT_NEAR(t.at(0, 0, 0, 0), 4.0 / 9, 1e-15);
}

TEST(Conv2d, ShapeMismatch) {
  Graph<double> g;
  EXPECT_THROW(g.conv2d(g.constant(Tensor<double>({1, 2, 4, 4})), g.constant(Tensor<double>({1, 3, 3, 3})),
                        g.constant(Tensor<double>({1, 1, 1, 1}))),
               Error);
}

TEST(BatchNorm, TrainNormalizes) {
  Rng rng(2);
  Graph<double> g;
  BatchNormStats<double> stats(3);
  const Var y = g.batch_norm(g.constant(gradcheck::random_tensor({4, 3, 5, 5}, rng, -2, 5)),
                             g.constant(Tensor<double>({1, 3, 1, 1}, 1.0)), g.constant(Tensor<double>({1, 3, 1, 1})),
                             stats, Mode::Train);
  const auto& t = g.value(y);
  for (int c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    int n = 0;
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 25; ++i) {
        const double v = t.plane(b, c)[i];
        s += v;
        s2 += v * v;
        ++n;
      }
    EXPECT_NEAR(s / n, 0.0, 1e-5);
    EXPECT_NEAR(s2 / n, 1.0, 1e-5);
  }
  // Running statistics moved toward the batch statistics.
  EXPECT_NE(stats.mean[0], 0.0);
}

TEST(BatchNorm, NormalizedInputPassesThrough) {
  Rng rng(3);
  Graph<double> g0;
  BatchNormStats<double> s0(2);
  const Var n0 = g0.batch_norm(g0.constant(gradcheck::random_tensor({3, 2, 4, 4}, rng)),
                               g0.constant(Tensor<double>({1, 2, 1, 1}, 1.0)), g0.constant(Tensor<double>({1, 2, 1, 1})),
                               s0, Mode::Train);
  Graph<double> g;
  BatchNormStats<double> stats(2);
  const Var y = g.batch_norm(g.constant(g0.value(n0)), g.constant(Tensor<double>({1, 2, 1, 1}, 1.0)),
                             g.constant(Tensor<double>({1, 2, 1, 1})), stats, Mode::Train);
  for (size_t i = 0; i < g.value(y).data.size(); ++i) EXPECT_NEAR(g.value(y).data[i], g0.value(n0).data[i], 1e-4);
}

TEST(BatchNorm, BatchOfOneRejectedInTrain) {
  Graph<double> g;
  BatchNormStats<double> stats(1);
  EXPECT_THROW(g.batch_norm(g.constant(Tensor<double>({1, 1, 2, 2})), g.constant(Tensor<double>({1, 1, 1, 1}, 1.0)),
                            g.constant(Tensor<double>({1, 1, 1, 1})), stats, Mode::Train),
               Error);
}

TEST(Activations, Values) {
  Graph<double> g;
  const Var r = g.relu(g.constant(filled({1, 1, 1, 3}, {-1, 0, 2})));
  EXPECT_EQ(g.value(r).data, (std::vector<double>{0, 0, 2}));
  const Var s = g.sigmoid(g.constant(Tensor<double>({1, 1, 1, 1})));
  EXPECT_EQ(g.value(s).data[0], 0.5);
}

TEST(Pooling, Values) {
  Graph<double> g;
  const Var x = g.constant(filled({1, 1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(g.value(g.max_pool2(x)).data[0], 4);
  EXPECT_EQ(g.value(g.avg_pool_global(x)).data[0], 2.5);
  const Var c = g.constant(Tensor<double>({2, 2, 4, 4}, 0.3));
  for (double v : g.value(g.max_pool2(c)).data) EXPECT_EQ(v, 0.3);
  for (double v : g.value(g.avg_pool_global(c)).data) EXPECT_NEAR(v, 0.3, 1e-15);
  EXPECT_THROW(g.max_pool2(g.constant(Tensor<double>({1, 1, 3, 4}))), Error);
}

TEST(Dropout, ModesAndStatistics) {
  Rng rng(4);
  Graph<double> g;
  const Var x = g.constant(Tensor<double>({1, 1, 400, 500}, 1.0));
  EXPECT_EQ(g.dropout(x, 1.0, Mode::Train, rng).id, x.id);
  EXPECT_EQ(g.dropout(x, 0.5, Mode::Infer, rng).id, x.id);
  const auto& y = g.value(g.dropout(x, 0.8, Mode::Train, rng)).data;
  double kept = 0, sum = 0;
  for (double v : y) {
    kept += v != 0.0;
    sum += v;
  }
  EXPECT_NEAR(kept / y.size(), 0.8, 0.02);
  EXPECT_NEAR(sum / y.size(), 1.0, 0.02);
  EXPECT_THROW(g.dropout(x, 0.0, Mode::Train, rng), Error);
}

TEST(ShapeOps, UpsampleConcatAdd) {
  Graph<double> g;
  const Var c = g.constant(Tensor<double>({2, 3, 3, 4}, 0.6));
  const auto& up = g.value(g.upsample2x(c));
  EXPECT_EQ(up.shape, (Shape{2, 3, 6, 8}));
  for (double v : up.data) EXPECT_NEAR(v, 0.6, 1e-15);
  const Var cat = g.concat_channels(c, g.constant(Tensor<double>({2, 2, 3, 4})));
  EXPECT_EQ(g.value(cat).shape.c, 5);
  EXPECT_THROW(g.concat_channels(c, g.constant(Tensor<double>({2, 2, 3, 5}))), Error);
  EXPECT_THROW(g.add(c, g.constant(Tensor<double>({2, 2, 3, 4}))), Error);
}

TEST(Forward, FiniteAndDeterministic) {
  Rng rng(5);
  auto x = gradcheck::random_tensor({2, 2, 8, 8}, rng, -50, 50);
  Rng wr(6);
  auto k = xavier_init<double>("k", {4, 2, 3, 3}, wr);
  auto run = [&]() {
    Graph<double> g;
    BatchNormStats<double> st(4);
    Rng drop(9);
    const Var y = g.dropout(
        g.relu(g.batch_norm(g.conv2d(g.constant(x), g.parameter(k), g.constant(Tensor<double>({1, 4, 1, 1}))),
                            g.constant(Tensor<double>({1, 4, 1, 1}, 1.0)), g.constant(Tensor<double>({1, 4, 1, 1})), st,
                            Mode::Train)),
        0.8, Mode::Train, drop);
    return g.value(g.sigmoid(g.upsample2x(g.max_pool2(y)))).data;
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  for (double v : a) EXPECT_TRUE(std::isfinite(v));
}

TEST(Xavier, BoundsVarianceDeterminism) {
  Rng rng(7);
  const Shape s{50, 40, 3, 3};  // 90000 draws
  auto p = xavier_init<double>("w", s, rng);
  const double fan = 40 * 9 + 50 * 9;
  const double limit = std::sqrt(6.0 / fan);
  double s2 = 0;
  for (double v : p.value.data) {
    ASSERT_LE(std::abs(v), limit);
    s2 += v * v;
  }
  EXPECT_NEAR(s2 / p.value.data.size(), 2.0 / fan, 0.05 * 2.0 / fan);
  Rng a(8), b(8);
  EXPECT_EQ(xavier_init<float>("a", {3, 2, 3, 3}, a).value.data, xavier_init<float>("b", {3, 2, 3, 3}, b).value.data);
  for (float v : zeros_init<float>("bias", {1, 8, 1, 1}).value.data) EXPECT_EQ(v, 0.0f);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto p = constant_init<double>("w", {1, 1, 1, 3}, 0.7);
  std::vector<Parameter<double>*> ps{&p};
  for (long i = 1; i <= 5; ++i) adam_step<double>(ps, LearningSchedule{}, i);
  for (double v : p.value.data) EXPECT_EQ(v, 0.7);
}

TEST(Adam, ScheduleRate) {
  const LearningSchedule s{1e-4, 100000, 0.96};
  EXPECT_NEAR(s.rate_at(100000), 9.6e-5, 1e-18);
  EXPECT_NEAR(s.rate_at(50000), 1e-4 * std::sqrt(0.96), 1e-18);
  EXPECT_THROW((LearningSchedule{0.0, 10, 0.9}.validate()), Error);
  EXPECT_THROW((LearningSchedule{1e-3, 10, 1.5}.validate()), Error);
}

TEST(Adam, ConvexDescent) {
  auto p = constant_init<double>("w", {1, 1, 1, 2}, 1.0);
  std::vector<Parameter<double>*> ps{&p};
  const LearningSchedule s{1e-2, 100000, 0.96};
  double prev = std::hypot(p.value.data[0], p.value.data[1]);
  for (long i = 1; i <= 200; ++i) {
    for (int j = 0; j < 2; ++j) p.grad.data[j] = 2.0 * p.value.data[j];
    adam_step<double>(ps, s, i);
    const double norm = std::hypot(p.value.data[0], p.value.data[1]);
    ASSERT_LT(norm, prev) << "step " << i;
    prev = norm;
  }
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto path = std::filesystem::temp_directory_path() / "hmgdyn_test_ckpt.bin";
  Checkpoint c;
  c.iteration = 1234;
  c.config_json = R"({"a": 1})";
  c.tensors.push_back({"w", {2, 3}, {1, 2, 3, 4, 5, 6}});
  c.tensors.push_back({"b", {1}, {-0.5f}});
  write_checkpoint(path, c);
  const Checkpoint r = read_checkpoint(path);
  EXPECT_EQ(r.version, Checkpoint::kVersion);
  EXPECT_EQ(r.iteration, 1234);
  EXPECT_EQ(r.config_json, c.config_json);
  ASSERT_NE(r.find("w"), nullptr);
  EXPECT_EQ(r.find("w")->values, c.tensors[0].values);
  EXPECT_EQ(r.find("missing"), nullptr);
  std::filesystem::resize_file(path, 20);
  EXPECT_THROW(read_checkpoint(path), Error);
}
