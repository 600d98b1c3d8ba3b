#pragma once

#include <filesystem>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "mvs/data.hpp"
#include "mvs/model.hpp"
#include "mvs/serialize.hpp"

namespace mvs {

// Request-level failure with an HTTP status and a stable machine-readable
// code.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

inline nlohmann::json error_document(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

// Shared by the CLI `summarize` command and POST /summarize.
inline nlohmann::json summarize_document(const Model& model, const Dataset& data, const std::string& query,
                                         const std::string& video_id, int threshold) {
  const QueryVideoPair* pair = data.find(video_id);
  if (!pair) throw ServiceError(404, "unknown_video", "no video '" + video_id + "' in manifest");
  if (threshold < 1 || threshold > 3) {
    throw ServiceError(400, "invalid_threshold", "threshold must be 1, 2 or 3");
  }
  TokenSequence tokens;
  try {
    tokens = data.vocabulary.tokenize(query, model.config().controller.max_tokens);
  } catch (const VocabularyError& e) {
    throw ServiceError(400, "invalid_query", e.what());
  }
  return to_json(model.summarize(tokens, pair->frames, threshold));
}

inline nlohmann::json video_list_document(const Dataset& data) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : data.pairs) {
    out.push_back({{"video_id", p.id}, {"original_length", p.frames.original_length}, {"query_hint", p.query}});
  }
  return out;
}

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  int threshold = kDefaultSummaryThreshold;

  void validate() const {
    if (port < 1 || port > 65535) throw ConfigError("port must be in 1..65535");
    if (!std::filesystem::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint.string());
    if (!std::filesystem::exists(manifest)) throw ConfigError("manifest not found: " + manifest.string());
    if (threshold < 1 || threshold > 3) throw ConfigError("threshold must be 1, 2 or 3");
  }
};

// Read-only inference over one checkpoint and one manifest. Handlers only
// read the model, so requests may run concurrently.
class InferenceService {
 public:
  InferenceService(Model model, Dataset data, int default_threshold = kDefaultSummaryThreshold)
      : model_(std::move(model)), data_(std::move(data)), threshold_(default_threshold) {
    if (data_.feature_dim && data_.feature_dim != model_.config().feature_dim && !data_.pairs.empty()) {
      throw ConfigError("manifest feature_dim does not match checkpoint");
    }
  }

  static InferenceService from_config(const ServiceConfig& cfg) {
    cfg.validate();
    return InferenceService(Model::load(cfg.checkpoint), load_dataset(cfg.manifest), cfg.threshold);
  }

  nlohmann::json summarize(const std::string& query, const std::string& video_id,
                           std::optional<int> threshold = std::nullopt) const {
    return summarize_document(model_, data_, query, video_id, threshold.value_or(threshold_));
  }

  nlohmann::json list_videos() const { return video_list_document(data_); }

  void mount(httplib::Server& server) const {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"status", "ok"}}.dump(), "application/json");
    });
    server.Get("/videos", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(list_videos().dump(), "application/json");
    });
    server.Post("/summarize", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(handle_summarize(req.body).dump(), "application/json");
      } catch (const ServiceError& e) {
        res.status = e.status();
        res.set_content(error_document(e.code(), e.what()).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_document("internal_error", e.what()).dump(), "application/json");
      }
    });
  }

  nlohmann::json handle_summarize(const std::string& body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw ServiceError(400, "malformed_request", "request body is not JSON");
    }
    if (!req.is_object() || !req.contains("query") || !req["query"].is_string() ||
        !req.contains("video_id") || !req["video_id"].is_string()) {
      throw ServiceError(400, "malformed_request", "expected {\"query\": string, \"video_id\": string}");
    }
    std::optional<int> threshold;
    if (req.contains("threshold")) {
      if (!req["threshold"].is_number_integer()) {
        throw ServiceError(400, "malformed_request", "threshold must be an integer");
      }
      threshold = req["threshold"].get<int>();
    }
    return summarize(req["query"].get<std::string>(), req["video_id"].get<std::string>(), threshold);
  }

  const Model& model() const noexcept { return model_; }
  const Dataset& dataset() const noexcept { return data_; }

 private:
  Model model_;
  Dataset data_;
  int threshold_;
};

}  // namespace mvs
