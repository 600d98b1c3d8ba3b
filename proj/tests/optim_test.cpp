#include <gtest/gtest.h>

#include <cmath>

#include "testing.hpp"

using namespace mvs;

namespace {

ParamSet single(double w, Var& out) {
  ParamSet set;
  out = Var::parameter(Tensor::scalar(w), "w");
  set.add("w", out);
  return set;
}

}  // namespace

TEST(Adam, FirstStepClosedForm) {
  Var w;
  ParamSet set = single(0.5, w);
  Var loss = sum(w);  // g = 1
  backward(loss);
  AdamState state;
  adam_step(set, state, OptimizerConfig{});
  const double delta = 0.5 - w.value().item();
  EXPECT_LE(std::abs(delta - 1e-4), 1e-8);
  EXPECT_NEAR(delta, 1e-4 * 1.0 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Var w;
  ParamSet set = single(0.5, w);
  Var loss = scale(sum(w), 0.0);
  backward(loss);
  AdamState state;
  adam_step(set, state, OptimizerConfig{});
  EXPECT_EQ(w.value().item(), 0.5);
  adam_step(set, state, OptimizerConfig{});  // missing gradient counts as zero
  EXPECT_EQ(w.value().item(), 0.5);
}

TEST(Adam, DescendsOnQuadratic) {
  Var w;
  ParamSet set = single(1.0, w);
  AdamState state;
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  // Momentum overshoots the minimum, so f is not monotone step to step;
  // the first steps and the end point are.
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    set.zero_grad();
    Var f = sum(hadamard(w, w));
    backward(f);
    adam_step(set, state, cfg);
    const double now = w.value().item() * w.value().item();
    if (i < 5) {
      EXPECT_LT(now, prev) << "step " << i;
    }
    prev = now;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Adam, NonFiniteGradientIsRejected) {
  Var w;
  ParamSet set = single(1.0, w);
  Var loss = sum(w);
  backward(loss);
  w.node().grad[0] = std::nan("");
  AdamState state;
  try {
    adam_step(set, state, OptimizerConfig{});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("w"), std::string::npos);
  }
  EXPECT_EQ(w.value().item(), 1.0);
}

TEST(GradCheck, LinearFunctionPasses) {
  ParamSet set;
  Initializer init(3, 1.0);
  Var a = init.gaussian(set, "a", {3, 2});
  Var b = init.gaussian(set, "b", {4});
  auto f = [&] { return add(sum(a), sum(b)); };
  GradCheckReport rep = grad_check(f, set, 1e-9);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.worst, 1e-9);
  EXPECT_EQ(rep.max_relative_error.size(), 2u);
  EXPECT_EQ(a.grad().size(), 0u) << "gradients are cleared afterwards";
}

TEST(GradCheck, CorruptedGradientFails) {
  ParamSet set;
  Initializer init(4, 1.0);
  Var a = init.gaussian(set, "a", {3});
  // Backward deliberately doubles the true gradient.
  auto f = [&] {
    Var s = sum(hadamard(a, a));
    return Var::make(s.value(), {s}, [](Node& self) { self.parents[0]->grad_buffer()[0] += 2 * self.grad[0]; });
  };
  GradCheckReport rep = grad_check(f, set, 1e-4);
  EXPECT_FALSE(rep.pass);
  EXPECT_NEAR(rep.worst, 0.5, 1e-6);
  EXPECT_EQ(rep.worst_parameter, "a");
}

TEST(GradCheck, RestoresParameterValues) {
  ParamSet set;
  Initializer init(5, 1.0);
  Var a = init.gaussian(set, "a", {4});
  const Tensor before = a.value();
  grad_check([&] { return sum(gelu(a)); }, set, 1e-4);
  EXPECT_EQ(a.value(), before);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-10, 0.0), 1e-2);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

TEST(GradCheck, ToyModelEndToEnd) {
  GradCheckProblem prob = make_gradcheck_problem("toy", 0);
  EXPECT_EQ(prob.frames.features.rows(), 199u);
  EXPECT_EQ(prob.tokens.ids.size(), 4u);
  GradCheckReport rep = run_gradcheck(prob, 1e-4);
  EXPECT_TRUE(rep.pass) << rep.worst << " in " << rep.worst_parameter;
}

TEST(Params, SnapshotRestoreChecksShape) {
  ParamSet set;
  Initializer init(6);
  Var a = init.gaussian(set, "a", {2, 2});
  auto snap = set.snapshot();
  a.mutable_value().fill(9.0);
  set.restore(snap);
  EXPECT_EQ(a.value(), snap.at("a"));
  snap["a"] = Tensor({3});
  EXPECT_ANY_THROW(set.restore(snap));
  EXPECT_ANY_THROW(set.add("a", a));
}

TEST(Params, InitializerIsSeeded) {
  ParamSet s1, s2;
  Initializer i1(11), i2(11);
  EXPECT_EQ(i1.gaussian(s1, "w", {5}).value(), i2.gaussian(s2, "w", {5}).value());
  ParamSet s3;
  Initializer i3(12);
  EXPECT_NE(i3.gaussian(s3, "w", {5}).value(), s1.at("w").value());
}
