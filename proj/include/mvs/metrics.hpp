#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "mvs/data.hpp"

namespace mvs {

enum class MaskMode { all_frames, original_only };

inline std::string to_string(MaskMode m) { return m == MaskMode::all_frames ? "all_199" : "original_only"; }

inline MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "all_199" || s == "all") return MaskMode::all_frames;
  if (s == "original_only" || s == "original") return MaskMode::original_only;
  throw ConfigError("unknown mask mode " + s);
}

inline std::size_t scored_frames(const RelevanceLabels& gt, MaskMode mode) {
  return mode == MaskMode::all_frames ? gt.labels.size() : gt.original_length;
}

struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t total = 0;
};

inline AccuracyCount count_correct(std::span<const int> predicted, const RelevanceLabels& gt, MaskMode mode) {
  if (predicted.size() != gt.labels.size()) {
    throw DataError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(gt.labels.size()) + " labels");
  }
  AccuracyCount c;
  c.total = scored_frames(gt, mode);
  for (std::size_t i = 0; i < c.total; ++i) c.correct += predicted[i] == gt.labels[i];
  return c;
}

// Fraction of scored frames whose predicted level equals the ground truth.
inline double accuracy(std::span<const int> predicted, const RelevanceLabels& gt,
                       MaskMode mode = MaskMode::all_frames) {
  const auto c = count_correct(predicted, gt, mode);
  return static_cast<double>(c.correct) / static_cast<double>(c.total);
}

struct SelectionPair {
  std::vector<std::size_t> predicted;  // sorted frame indices
  std::vector<std::size_t> ground_truth;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Empty prediction has precision 0; empty ground truth has recall 1 when the
// prediction is empty too and 0 otherwise.
inline PrecisionRecall precision_recall(const SelectionPair& s) {
  std::vector<std::size_t> common;
  std::set_intersection(s.predicted.begin(), s.predicted.end(), s.ground_truth.begin(),
                        s.ground_truth.end(), std::back_inserter(common));
  const double hit = static_cast<double>(common.size());
  PrecisionRecall pr;
  pr.precision = s.predicted.empty() ? 0.0 : hit / static_cast<double>(s.predicted.size());
  if (s.ground_truth.empty()) {
    pr.recall = s.predicted.empty() ? 1.0 : 0.0;
  } else {
    pr.recall = hit / static_cast<double>(s.ground_truth.size());
  }
  return pr;
}

inline double f_beta_term(const PrecisionRecall& pr, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * pr.precision + pr.recall;
  if (pr.precision + pr.recall == 0.0 || denom == 0.0) return 0.0;
  return (1.0 + b2) * pr.precision * pr.recall / denom;
}

// Mean over pairs of (1 + b^2) p r / (b^2 p + r).
inline double f_beta(std::span<const PrecisionRecall> prs, double beta = 1.0) {
  if (prs.empty()) throw EvaluationError("F-beta over zero pairs");
  if (!(beta > 0.0)) throw EvaluationError("beta must be positive");
  double s = 0.0;
  for (const auto& pr : prs) s += f_beta_term(pr, beta);
  return s / static_cast<double>(prs.size());
}

inline double f_beta(std::span<const SelectionPair> results, double beta = 1.0) {
  std::vector<PrecisionRecall> prs;
  prs.reserve(results.size());
  for (const auto& r : results) prs.push_back(precision_recall(r));
  return f_beta(std::span<const PrecisionRecall>(prs), beta);
}

struct EvalReport {
  double accuracy = 0.0;
  double f_beta = 0.0;
  double beta = 1.0;
  double loss = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t pairs = 0;
  MaskMode mask = MaskMode::all_frames;
  int threshold = kDefaultSummaryThreshold;
};

}  // namespace mvs
