#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvs/fusion.hpp"
#include "mvs/tokenizer.hpp"
#include "mvs/visual.hpp"

namespace mvs {

// Relevance levels: 0 Bad, 1 Not Good, 2 Good, 3 Very Good. Stored at the
// padded length, repeated cyclically like the frames.
struct RelevanceLabels {
  std::vector<int> labels;
  std::size_t original_length = 0;

  std::span<const int> original() const { return {labels.data(), original_length}; }
};

inline void check_levels(std::span<const int> labels) {
  for (int l : labels) {
    if (l < 0 || l >= static_cast<int>(kNumRelevanceLevels)) {
      throw DataError("relevance level " + std::to_string(l) + " outside 0..3");
    }
  }
}

inline RelevanceLabels repeat_labels(std::span<const int> raw, std::size_t t_max = kDefaultMaxFrames) {
  if (raw.empty()) throw LengthError("no labels");
  if (raw.size() > t_max) {
    throw LengthError(std::to_string(raw.size()) + " labels exceed limit " + std::to_string(t_max));
  }
  check_levels(raw);
  RelevanceLabels out{std::vector<int>(t_max), raw.size()};
  for (std::size_t i = 0; i < t_max; ++i) out.labels[i] = raw[i % raw.size()];
  return out;
}

enum class TieBreak { higher, lower };

// Per-frame mode of the annotators' labels.
inline RelevanceLabels merge_annotations(const std::vector<std::vector<int>>& per_annotator,
                                         std::size_t t_max = kDefaultMaxFrames,
                                         TieBreak tie = TieBreak::higher) {
  if (per_annotator.empty()) throw DataError("no annotators to merge");
  const std::size_t T = per_annotator.front().size();
  for (const auto& a : per_annotator) {
    if (a.size() != T) throw DataError("annotator label sequences differ in length");
    check_levels(a);
  }
  std::vector<int> merged(T);
  for (std::size_t f = 0; f < T; ++f) {
    std::array<int, kNumRelevanceLevels> votes{};
    for (const auto& a : per_annotator) ++votes[static_cast<std::size_t>(a[f])];
    int best = tie == TieBreak::higher ? 0 : static_cast<int>(kNumRelevanceLevels) - 1;
    for (int l = 0; l < static_cast<int>(kNumRelevanceLevels); ++l) {
      const int v = votes[static_cast<std::size_t>(l)];
      const int b = votes[static_cast<std::size_t>(best)];
      if (v > b || (v == b && (tie == TieBreak::higher ? l > best : l < best))) best = l;
    }
    merged[f] = best;
  }
  return repeat_labels(merged, t_max);
}

struct QueryVideoPair {
  std::string id;
  std::string query;
  TokenSequence tokens;
  FrameFeatureMatrix frames;
  RelevanceLabels labels;
  std::vector<std::vector<int>> annotators;  // optional, original length
};

struct Dataset {
  Vocabulary vocabulary;
  std::size_t feature_dim = 0;
  std::size_t t_max = kDefaultMaxFrames;
  std::vector<QueryVideoPair> pairs;

  const QueryVideoPair* find(const std::string& id) const {
    for (const auto& p : pairs) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& p : pairs) out.push_back(p.id);
    return out;
  }

  std::vector<const QueryVideoPair*> select(const std::vector<std::string>& ids) const {
    std::vector<const QueryVideoPair*> out;
    for (const auto& id : ids) {
      const auto* p = find(id);
      if (!p) throw DataError("unknown pair id " + id);
      out.push_back(p);
    }
    return out;
  }
};

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

// Seeded shuffle, then 60/20/20 by count: validation and test get
// round(0.2 n) each, training takes the rest.
inline DatasetSplit split_dataset(std::vector<std::string> ids, std::uint64_t seed) {
  if (ids.size() < 5) throw DataError("need at least 5 pairs to split, got " + std::to_string(ids.size()));
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto fifth = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(ids.size())));
  DatasetSplit s;
  s.val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(fifth));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(fifth),
                ids.begin() + static_cast<std::ptrdiff_t>(2 * fifth));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(2 * fifth), ids.end());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic data
//
// Channels come in blocks of four, block b belonging to topic b % num_topics.
// Within a block, channel l is lit (amplitude) when the topic's level at
// that frame is l, so every frame carries a one-hot level code per topic,
// plus Gaussian noise. A query names one topic word and its labels are that
// topic's levels: gating the frame down to the query's blocks makes the
// label linearly readable, and other queries read other blocks.

inline const std::vector<std::string>& synthetic_topic_words() {
  static const std::vector<std::string> words{"snowboarding", "skiing",  "surfing", "cooking",
                                              "cycling",      "skating", "hiking",  "dancing"};
  return words;
}

inline const std::vector<std::string>& synthetic_filler_words() {
  static const std::vector<std::string> words{"sport", "of",  "the",  "a",     "video",   "people", "outdoor",
                                              "in",    "with", "best", "moments", "doing", "fun",    "clips"};
  return words;
}

struct SyntheticConfig {
  std::size_t feature_dim = 32;
  std::size_t num_topics = 4;
  std::size_t t_max = kDefaultMaxFrames;
  std::size_t min_frames = 100;
  std::size_t max_filler_words = 4;
  std::size_t annotators = 3;
  double amplitude = 0.5;
  double noise = 0.05;
};

struct SyntheticDataset {
  Dataset data;
  std::vector<std::size_t> topic_of_pair;
  // topic_levels[pair][topic] = per-frame level at original length.
  std::vector<std::vector<std::vector<int>>> topic_levels;

  std::string query_for_topic(std::size_t topic) const {
    return "sport of " + synthetic_topic_words().at(topic);
  }
};

inline Vocabulary synthetic_vocabulary() {
  Vocabulary v(synthetic_filler_words());
  for (const auto& w : synthetic_topic_words()) v.add(w);
  return v;
}

namespace detail {

inline SyntheticDataset generate_once(std::size_t num_pairs, std::uint64_t seed, const SyntheticConfig& cfg) {
  std::mt19937_64 rng(seed);
  const auto& topics = synthetic_topic_words();
  const auto& fillers = synthetic_filler_words();
  const std::size_t K = cfg.num_topics, D = cfg.feature_dim;

  SyntheticDataset out;
  out.data.vocabulary = synthetic_vocabulary();
  out.data.feature_dim = D;
  out.data.t_max = cfg.t_max;

  std::uniform_int_distribution<std::size_t> length_dist(cfg.min_frames, cfg.t_max);
  std::uniform_int_distribution<std::size_t> segment_dist(5, 20);
  std::uniform_int_distribution<int> level_dist(0, static_cast<int>(kNumRelevanceLevels) - 1);
  std::uniform_int_distribution<std::size_t> filler_count(1, cfg.max_filler_words);
  std::uniform_int_distribution<std::size_t> filler_pick(0, fillers.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise);

  for (std::size_t p = 0; p < num_pairs; ++p) {
    const std::size_t topic = p % K;
    const std::size_t T = length_dist(rng);

    std::vector<std::vector<int>> levels(K, std::vector<int>(T));
    for (auto& seq : levels) {
      std::size_t t = 0;
      while (t < T) {
        const std::size_t len = segment_dist(rng);
        const int lvl = level_dist(rng);
        for (std::size_t i = 0; i < len && t < T; ++i, ++t) seq[t] = lvl;
      }
    }

    Tensor raw({T, D});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < D; ++c)
        raw.at(t, c) = (levels[(c / kNumRelevanceLevels) % K][t] == static_cast<int>(c % kNumRelevanceLevels)
                            ? cfg.amplitude
                            : 0.0) +
                       noise(rng);

    std::vector<std::string> words;
    const std::size_t n_fill = filler_count(rng);
    for (std::size_t i = 0; i < n_fill; ++i) words.push_back(fillers[filler_pick(rng)]);
    std::uniform_int_distribution<std::size_t> pos(0, words.size());
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos(rng)), topics[topic]);
    std::string query;
    for (const auto& w : words) query += (query.empty() ? "" : " ") + w;

    // Two faithful annotators and one that sometimes drifts by a level, so
    // the majority always recovers the true level.
    std::vector<std::vector<int>> annotators;
    for (std::size_t a = 0; a < cfg.annotators; ++a) {
      std::vector<int> ann = levels[topic];
      if (a >= 2) {
        for (auto& l : ann) {
          if (unit(rng) < 0.3) l = std::clamp(l + (unit(rng) < 0.5 ? -1 : 1), 0, 3);
        }
      }
      annotators.push_back(std::move(ann));
    }

    QueryVideoPair pair;
    pair.id = (p + 1 < 10 ? "v0" : "v") + std::to_string(p + 1);
    pair.query = query;
    pair.tokens = out.data.vocabulary.tokenize(query, 16);
    pair.frames = preprocess_frames(raw, cfg.t_max);
    pair.labels = cfg.annotators ? merge_annotations(annotators, cfg.t_max)
                                 : repeat_labels(levels[topic], cfg.t_max);
    pair.annotators = std::move(annotators);
    out.data.pairs.push_back(std::move(pair));
    out.topic_of_pair.push_back(topic);
    out.topic_levels.push_back(std::move(levels));
  }
  return out;
}

inline bool label_distribution_ok(const Dataset& data) {
  std::array<std::size_t, kNumRelevanceLevels> counts{};
  std::size_t total = 0;
  for (const auto& p : data.pairs) {
    for (int l : p.labels.original()) ++counts[static_cast<std::size_t>(l)];
    total += p.labels.original_length;
  }
  for (std::size_t c : counts) {
    if (static_cast<double>(c) < 0.01 * static_cast<double>(total)) return false;
  }
  return true;
}

}  // namespace detail

// Deterministic in (num_pairs, seed, cfg). Regenerates from a derived seed
// if some relevance level would cover less than 1% of frames.
inline SyntheticDataset generate_synthetic(std::size_t num_pairs, std::uint64_t seed,
                                           const SyntheticConfig& cfg = {}) {
  if (num_pairs == 0) throw DataError("num_pairs must be at least 1");
  if (cfg.num_topics == 0 || cfg.num_topics > synthetic_topic_words().size()) {
    throw ConfigError("num_topics must be in 1.." + std::to_string(synthetic_topic_words().size()));
  }
  if (cfg.feature_dim < kNumRelevanceLevels * cfg.num_topics) {
    throw ConfigError("feature_dim must be at least 4 * num_topics");
  }
  if (cfg.min_frames == 0 || cfg.min_frames > cfg.t_max) throw ConfigError("min_frames must be in 1..t_max");
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    auto ds = detail::generate_once(num_pairs, seed + attempt * 0x9E3779B97F4A7C15ull, cfg);
    if (detail::label_distribution_ok(ds.data)) return ds;
  }
  throw DataError("could not generate a non-degenerate label distribution");
}

// ---------------------------------------------------------------------------
// Manifest

inline constexpr int kManifestVersion = 1;

// Writes manifest.json, the vocabulary and one feature file per pair
// under dir. Feature paths in the manifest are relative to dir.
inline std::filesystem::path write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  data.vocabulary.save(dir / "vocab.txt");
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : data.pairs) {
    const std::size_t T = p.frames.original_length;
    Tensor raw({T, p.frames.feature_dim()});
    for (std::size_t t = 0; t < T; ++t) {
      auto src = p.frames.features.row(t);
      std::copy(src.begin(), src.end(), raw.row(t).begin());
    }
    const fs::path rel = fs::path("features") / (p.id + ".bin");
    write_frame_features(dir / rel, raw);
    auto labels = p.labels.original();
    nlohmann::json entry{{"id", p.id},
                         {"query", p.query},
                         {"features", rel.generic_string()},
                         {"labels", std::vector<int>(labels.begin(), labels.end())}};
    if (!p.annotators.empty()) entry["annotators"] = p.annotators;
    pairs.push_back(std::move(entry));
  }
  nlohmann::json manifest{{"format", "mvs-manifest"},
                          {"version", kManifestVersion},
                          {"vocabulary", "vocab.txt"},
                          {"feature_dim", data.feature_dim},
                          {"t_max", data.t_max},
                          {"max_tokens", 16},
                          {"pairs", std::move(pairs)}};
  const fs::path path = dir / "manifest.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << manifest.dump(2) << '\n';
  return path;
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream is(manifest_path);
  if (!is) throw FormatError("cannot open manifest " + manifest_path.string());
  const fs::path base = manifest_path.parent_path();
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (m.at("format").get<std::string>() != "mvs-manifest" || m.at("version").get<int>() != kManifestVersion) {
      throw FormatError("unsupported manifest format/version");
    }
    Dataset data;
    data.vocabulary = Vocabulary::load(base / m.at("vocabulary").get<std::string>());
    data.feature_dim = m.at("feature_dim").get<std::size_t>();
    data.t_max = m.value("t_max", kDefaultMaxFrames);
    const std::size_t max_tokens = m.value("max_tokens", std::size_t{16});
    for (const auto& e : m.at("pairs")) {
      QueryVideoPair p;
      p.id = e.at("id").get<std::string>();
      if (data.find(p.id)) throw DataError("duplicate pair id " + p.id);
      p.query = e.at("query").get<std::string>();
      p.tokens = data.vocabulary.tokenize(p.query, max_tokens);
      const Tensor raw = read_frame_features(base / e.at("features").get<std::string>());
      if (raw.cols() != data.feature_dim) {
        throw DataError(p.id + ": feature dim " + std::to_string(raw.cols()) + " != manifest " +
                        std::to_string(data.feature_dim));
      }
      p.frames = preprocess_frames(raw, data.t_max);
      if (e.contains("annotators")) p.annotators = e.at("annotators").get<std::vector<std::vector<int>>>();
      if (e.contains("labels")) {
        p.labels = repeat_labels(e.at("labels").get<std::vector<int>>(), data.t_max);
      } else if (!p.annotators.empty()) {
        p.labels = merge_annotations(p.annotators, data.t_max);
      } else {
        throw DataError(p.id + ": neither labels nor annotators given");
      }
      if (p.labels.original_length != p.frames.original_length) {
        throw DataError(p.id + ": " + std::to_string(p.labels.original_length) + " labels for " +
                        std::to_string(p.frames.original_length) + " frames");
      }
      data.pairs.push_back(std::move(p));
    }
    return data;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest: " + std::string(e.what()));
  }
}

}  // namespace mvs
