#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mvs/metrics.hpp"
#include "mvs/model.hpp"
#include "mvs/optim.hpp"

namespace mvs {

struct TrainConfig {
  std::size_t epochs = 10;
  OptimizerConfig optimizer;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  MaskMode mask = MaskMode::all_frames;
  int threshold = kDefaultSummaryThreshold;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trajectory;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_accuracy = -1.0;
};

inline Var pair_loss(const Model& model, const QueryVideoPair& pair) {
  return cross_entropy(model.logits(pair.tokens, pair.frames), pair.labels.labels);
}

// Inference-only pass over a set of pairs; parameters are never touched.
inline EvalReport evaluate(const Model& model, const std::vector<const QueryVideoPair*>& pairs,
                           MaskMode mask = MaskMode::all_frames,
                           int threshold = kDefaultSummaryThreshold, double beta = 1.0) {
  if (pairs.empty()) throw EvaluationError("nothing to evaluate");
  EvalReport rep;
  rep.beta = beta;
  rep.mask = mask;
  rep.threshold = threshold;
  rep.pairs = pairs.size();
  std::size_t correct = 0, total = 0;
  std::vector<PrecisionRecall> prs;
  double loss = 0.0;
  for (const auto* p : pairs) {
    Var logits = model.logits(p->tokens, p->frames);
    loss += cross_entropy(logits, p->labels.labels).value().item();
    SummaryResult s = select_summary(logits.value(), threshold);
    const auto c = count_correct(s.predicted_labels, p->labels, mask);
    correct += c.correct;
    total += c.total;
    const std::size_t scored = scored_frames(p->labels, mask);
    SelectionPair sel;
    for (std::size_t f : s.selected_frames) {
      if (f < scored) sel.predicted.push_back(f);
    }
    sel.ground_truth = frames_at_or_above(std::span<const int>(p->labels.labels.data(), scored), threshold);
    prs.push_back(precision_recall(sel));
    rep.precision.push_back(prs.back().precision);
    rep.recall.push_back(prs.back().recall);
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  rep.f_beta = f_beta(std::span<const PrecisionRecall>(prs), beta);
  rep.loss = loss / static_cast<double>(pairs.size());
  return rep;
}

// Mini-batch Adam on the mean per-frame cross-entropy. Keeps the parameters
// of the (latest) epoch with the best validation accuracy (training accuracy when
// there is no validation set) and leaves them in the model.
inline TrainResult train(Model& model, const Dataset& data, const std::vector<std::string>& train_ids,
                         const std::vector<std::string>& val_ids, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_ids.empty()) throw TrainingError("empty training split");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  auto train_pairs = data.select(train_ids);
  auto val_pairs = val_ids.empty() ? train_pairs : data.select(val_ids);

  TrainResult result;
  if (cfg.epochs == 0) return result;

  std::mt19937_64 rng(cfg.seed);
  AdamState adam;
  ParamSet& params = model.params();
  std::map<std::string, Tensor> best;
  std::vector<std::size_t> order(train_pairs.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<Var> losses;
      for (std::size_t i = start; i < stop; ++i) losses.push_back(pair_loss(model, *train_pairs[order[i]]));
      Var loss = mean(losses);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite loss " << value << " at epoch " << epoch << ", batch " << batch_index;
        throw TrainingError(msg.str());
      }
      loss_sum += value * static_cast<double>(stop - start);
      params.zero_grad();
      backward(loss);
      adam_step(params, adam, cfg.optimizer);
    }
    params.zero_grad();

    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()),
                    evaluate(model, val_pairs, cfg.mask, cfg.threshold).accuracy};
    result.trajectory.push_back(rec);
    if (rec.val_accuracy >= result.best_val_accuracy) {  // ties go to the later epoch
      result.best_val_accuracy = rec.val_accuracy;
      result.best_epoch = epoch;
      best = params.snapshot();
    }
    if (on_epoch) on_epoch(rec);
  }
  params.restore(best);
  return result;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void write_trajectory_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& traj) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "epoch,train_loss,val_accuracy\n";
  for (const auto& r : traj) {
    os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_accuracy) << '\n';
  }
}

}  // namespace mvs
