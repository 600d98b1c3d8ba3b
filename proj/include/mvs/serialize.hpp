#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mvs/experiments.hpp"
#include "mvs/fusion.hpp"
#include "mvs/metrics.hpp"

namespace mvs {

inline nlohmann::json to_json(const SummaryResult& s) {
  nlohmann::json logits = nlohmann::json::array();
  for (std::size_t r = 0; r < s.logits.rows(); ++r) {
    auto row = s.logits.row(r);
    logits.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"logits", std::move(logits)},
          {"predicted_labels", s.predicted_labels},
          {"selected_frames", s.selected_frames},
          {"threshold", s.threshold}};
}

inline SummaryResult summary_from_json(const nlohmann::json& j) {
  try {
    SummaryResult s;
    const auto rows = j.at("logits").get<std::vector<std::vector<double>>>();
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != kNumRelevanceLevels) throw FormatError("logit rows must have 4 entries");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    if (rows.empty()) throw FormatError("summary has no frames");
    s.logits = Tensor({rows.size(), kNumRelevanceLevels}, std::move(flat));
    s.predicted_labels = j.at("predicted_labels").get<std::vector<int>>();
    s.selected_frames = j.at("selected_frames").get<std::vector<std::size_t>>();
    s.threshold = j.at("threshold").get<int>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad summary document: ") + e.what());
  }
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"accuracy", r.accuracy},   {"f_beta", r.f_beta},       {"beta", r.beta},
          {"loss", r.loss},           {"precision", r.precision}, {"recall", r.recall},
          {"pairs", r.pairs},         {"mask", to_string(r.mask)}, {"threshold", r.threshold}};
}

inline nlohmann::json to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json out{{"table", "dimension_sweep"}, {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) {
    out["rows"].push_back({{"label", r.label}, {"output_dim", r.output_dim}, {"report", to_json(r.report)}});
  }
  return out;
}

inline nlohmann::json to_json(const AttentionFlags& f) {
  return {{"textual", f.textual}, {"visual", f.visual}, {"interactive", f.interactive}};
}

inline nlohmann::json to_json(const AblationReport& rep) {
  nlohmann::json out{{"table", "attention_ablation"},
                     {"baseline", to_json(rep.baseline)},
                     {"groups", nlohmann::json::array()}};
  for (const auto& g : rep.groups) {
    out["groups"].push_back({{"name", g.name},
                             {"flags", to_json(g.flags)},
                             {"without", to_json(g.without)},
                             {"with", to_json(g.with)}});
  }
  return out;
}

}  // namespace mvs
