#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "testing.hpp"

using namespace mvs;

namespace {

struct TrainEnv {
  SyntheticDataset ds = mvs::testing::small_synthetic(6, 3);
  std::vector<std::string> ids = ds.data.ids();

  Model model(std::uint64_t seed = 0) const {
    return Model(mvs::testing::small_model_config(ds.data.vocabulary.size(), 8, seed));
  }
};

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.optimizer.learning_rate = 1e-2;
  c.batch_size = 2;
  return c;
}

}  // namespace

TEST(Train, SameSeedSameTrajectory) {
  TrainEnv s;
  Model a = s.model(), b = s.model();
  TrainResult ra = train(a, s.ds.data, s.ids, {}, quick(4));
  TrainResult rb = train(b, s.ds.data, s.ids, {}, quick(4));
  ASSERT_EQ(ra.trajectory.size(), 4u);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(ra.trajectory[e].train_loss, rb.trajectory[e].train_loss);
    EXPECT_EQ(ra.trajectory[e].val_accuracy, rb.trajectory[e].val_accuracy);
  }
  EXPECT_EQ(a.params().snapshot(), b.params().snapshot());
}

TEST(Train, ZeroEpochsLeavesParameters) {
  TrainEnv s;
  Model m = s.model();
  const auto before = m.params().snapshot();
  TrainResult r = train(m, s.ds.data, s.ids, {}, quick(0));
  EXPECT_TRUE(r.trajectory.empty());
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_EQ(m.params().snapshot(), before);
}

TEST(Train, LossFallsOverWindow) {
  TrainEnv s;
  Model m = s.model();
  TrainResult r = train(m, s.ds.data, s.ids, {}, quick(30));
  const auto& t = r.trajectory;
  double first = 0, last = 0;
  for (std::size_t e = 0; e < 5; ++e) first += t[e].train_loss;
  for (std::size_t e = t.size() - 5; e < t.size(); ++e) last += t[e].train_loss;
  EXPECT_LT(last, first);
  for (const auto& rec : t) {
    EXPECT_TRUE(std::isfinite(rec.train_loss));
    EXPECT_GE(rec.val_accuracy, 0.0);
    EXPECT_LE(rec.val_accuracy, 1.0);
  }
}

TEST(Train, OverfitLossRarelyRisesOverTwentyEpochs) {
  const SyntheticDataset ds = mvs::testing::small_synthetic(8, 7);
  Model m(mvs::testing::small_model_config(ds.data.vocabulary.size(), 8, 0));
  TrainConfig c;
  c.epochs = 300;
  c.optimizer.learning_rate = 1e-3;
  const auto& t = train(m, ds.data, ds.data.ids(), {}, c).trajectory;
  ASSERT_EQ(t.size(), 300u);
  std::size_t rising = 0;
  for (std::size_t e = 0; e + 20 < t.size(); ++e) rising += t[e + 20].train_loss > t[e].train_loss;
  EXPECT_LE(rising, (t.size() - 20) / 20);
  EXPECT_LT(t.back().train_loss, 0.1);
}

TEST(Train, RestoresBestValidationEpoch) {
  TrainEnv s;
  Model m = s.model();
  std::vector<std::string> train_ids(s.ids.begin(), s.ids.begin() + 4);
  std::vector<std::string> val_ids(s.ids.begin() + 4, s.ids.end());
  TrainResult r = train(m, s.ds.data, train_ids, val_ids, quick(6));
  ASSERT_GE(r.best_epoch, 1u);
  double best = -1;
  for (const auto& rec : r.trajectory) best = std::max(best, rec.val_accuracy);
  EXPECT_EQ(r.best_val_accuracy, best);
  EXPECT_EQ(r.trajectory[r.best_epoch - 1].val_accuracy, best);
  EXPECT_DOUBLE_EQ(evaluate(m, s.ds.data.select(val_ids)).accuracy, best);
}

TEST(Train, NonFiniteLossAbortsWithContext) {
  TrainEnv s;
  Model m = s.model();
  m.params().at("fusion.b_cls").mutable_value()[0] = std::nan("");
  try {
    train(m, s.ds.data, s.ids, {}, quick(1));
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch 0"), std::string::npos) << msg;
  }
}

TEST(Train, InputValidation) {
  TrainEnv s;
  Model m = s.model();
  EXPECT_THROW(train(m, s.ds.data, {}, {}, quick(1)), TrainingError);
  TrainConfig bad = quick(1);
  bad.batch_size = 0;
  EXPECT_THROW(train(m, s.ds.data, s.ids, {}, bad), ConfigError);
  EXPECT_THROW(train(m, s.ds.data, {"nope"}, {}, quick(1)), DataError);
}

TEST(Evaluate, ReportFieldsAndPurity) {
  TrainEnv s;
  Model m = s.model();
  const auto before = m.params().snapshot();
  EvalReport r = evaluate(m, s.ds.data.select(s.ids), MaskMode::original_only, 2, 1.0);
  EXPECT_EQ(m.params().snapshot(), before);
  EXPECT_EQ(r.pairs, 6u);
  EXPECT_EQ(r.precision.size(), 6u);
  EXPECT_EQ(r.recall.size(), 6u);
  EXPECT_GE(r.accuracy, 0.0);
  EXPECT_LE(r.accuracy, 1.0);
  EXPECT_GT(r.loss, 0.0);
  EXPECT_THROW(evaluate(m, {}), EvaluationError);

  double loss = 0;
  for (const auto* p : s.ds.data.select(s.ids)) loss += pair_loss(m, *p).value().item();
  EXPECT_NEAR(r.loss, loss / 6, 1e-12);
}

TEST(Trajectory, CsvLayout) {
  mvs::testing::TempDir dir("traj");
  write_trajectory_csv(dir / "t.csv", {{1, 0.5, 0.25}, {2, 0.125, 1.0}});
  std::ifstream is(dir / "t.csv");
  std::string header, l1, l2;
  std::getline(is, header);
  std::getline(is, l1);
  std::getline(is, l2);
  EXPECT_EQ(header, "epoch,train_loss,val_accuracy");
  EXPECT_EQ(l1, "1,0.5,0.25");
  EXPECT_EQ(l2, "2,0.125,1");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
