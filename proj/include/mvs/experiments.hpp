#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mvs/train.hpp"

namespace mvs {

struct ExperimentSetup {
  ModelConfig model;
  TrainConfig train;
  DatasetSplit split;
  double beta = 1.0;
};

inline EvalReport train_and_evaluate(const Dataset& data, const ExperimentSetup& setup,
                                     const ModelConfig& model_cfg) {
  Model model(model_cfg);
  train(model, data, setup.split.train, setup.split.val, setup.train);
  const auto& eval_ids = setup.split.test.empty() ? setup.split.train : setup.split.test;
  return evaluate(model, data.select(eval_ids), setup.train.mask, setup.train.threshold, setup.beta);
}

// ---------------------------------------------------------------------------
// Output-dimension sweep

// nullopt stands for the model's default width, i.e. output_dim = embed_dim.
using SweepDim = std::optional<std::size_t>;

inline std::vector<SweepDim> parse_sweep_dims(const std::string& list) {
  std::vector<SweepDim> dims;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "default") {
      dims.emplace_back(std::nullopt);
      continue;
    }
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v <= 0) throw ConfigError("bad sweep dimension '" + item + "'");
    dims.emplace_back(static_cast<std::size_t>(v));
  }
  if (dims.empty()) throw ConfigError("no sweep dimensions given");
  return dims;
}

struct SweepRow {
  std::string label;
  std::size_t output_dim = 0;
  EvalReport report;
};

inline std::vector<SweepRow> run_dimension_sweep(const Dataset& data, const ExperimentSetup& setup,
                                                 const std::vector<SweepDim>& dims) {
  std::vector<SweepRow> rows;
  for (const auto& d : dims) {
    ModelConfig cfg = setup.model;
    cfg.controller.output_dim = d.value_or(cfg.controller.embed_dim);
    SweepRow row;
    row.label = d ? std::to_string(*d) + " dimensions" : "Default output dimensions";
    row.output_dim = cfg.controller.output_dim;
    row.report = train_and_evaluate(data, setup, cfg);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Attention ablation

struct AblationCondition {
  std::string name;
  AttentionFlags flags;
};

// The all-off baseline followed by the five attention groups.
inline const std::vector<AblationCondition>& ablation_conditions() {
  static const std::vector<AblationCondition> conditions{
      {"baseline", {false, false, false}},
      {"Visual Attention", {false, true, false}},
      {"Textual Attention", {true, false, false}},
      {"Visual-Textual Attention", {true, true, false}},
      {"Interactive Attention", {false, false, true}},
      {"Interactive-Visual-Textual Attention", {true, true, true}},
  };
  return conditions;
}

struct AblationGroup {
  std::string name;
  AttentionFlags flags;
  EvalReport without;  // the shared all-off baseline
  EvalReport with;
};

struct AblationReport {
  EvalReport baseline;
  std::vector<AblationGroup> groups;
};

inline AblationReport run_ablation(const Dataset& data, const ExperimentSetup& setup) {
  const auto& conds = ablation_conditions();
  std::vector<EvalReport> reports;
  for (const auto& c : conds) {
    ModelConfig cfg = setup.model;
    cfg.attention = c.flags;
    reports.push_back(train_and_evaluate(data, setup, cfg));
  }
  AblationReport rep;
  rep.baseline = reports.front();
  for (std::size_t i = 1; i < conds.size(); ++i) {
    rep.groups.push_back({conds[i].name, conds[i].flags, reports.front(), reports[i]});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Text tables

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s | %-8s | %-8s\n", "Word Embedding Dimension", "Accuracy", "F1");
  os << line << std::string(52, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-28s | %-8s | %-8s\n", r.label.c_str(),
                  fixed4(r.report.accuracy).c_str(), fixed4(r.report.f_beta).c_str());
    os << line;
  }
  return os.str();
}

inline std::string format_ablation_table(const AblationReport& rep) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-38s | %-4s | %-8s | %-8s\n", "Attention", "", "F1", "Accuracy");
  os << line << std::string(68, '-') << '\n';
  for (const auto& g : rep.groups) {
    std::snprintf(line, sizeof line, "%-38s | %-4s | %-8s | %-8s\n", g.name.c_str(), "w/o",
                  fixed4(g.without.f_beta).c_str(), fixed4(g.without.accuracy).c_str());
    os << line;
    std::snprintf(line, sizeof line, "%-38s | %-4s | %-8s | %-8s\n", "", "w/",
                  fixed4(g.with.f_beta).c_str(), fixed4(g.with.accuracy).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace mvs
