#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvs/errors.hpp"

namespace mvs {

inline constexpr std::size_t kUnknownToken = 0;
inline constexpr const char* kUnknownWord = "<unk>";

struct TokenSequence {
  std::vector<std::size_t> ids;

  std::size_t length() const noexcept { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline void validate_tokens(const TokenSequence& tokens, std::size_t vocab_size,
                            std::size_t max_tokens) {
  if (tokens.ids.empty()) throw VocabularyError("empty token sequence");
  if (tokens.ids.size() > max_tokens) {
    throw VocabularyError("token sequence of length " + std::to_string(tokens.ids.size()) +
                          " exceeds max_tokens " + std::to_string(max_tokens));
  }
  for (std::size_t id : tokens.ids) {
    if (id >= vocab_size) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab_size));
    }
  }
}

// Whitespace + lowercasing tokenizer over a line-per-token vocabulary file.
// Line index is the id; id 0 is reserved for unknown words.
class Vocabulary {
 public:
  Vocabulary() : words_{kUnknownWord} { index_.emplace(kUnknownWord, 0); }

  explicit Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
    for (const auto& w : words) add(w);
  }

  std::size_t add(const std::string& word) {
    const std::string w = normalize_word(word);
    if (w.empty() || w.find_first_of(" \t\r\n") != std::string::npos) {
      throw VocabularyError("invalid vocabulary entry '" + word + "'");
    }
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    index_.emplace(w, words_.size());
    words_.push_back(w);
    return words_.size() - 1;
  }

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(std::size_t id) const {
    if (id >= words_.size()) throw VocabularyError("token id " + std::to_string(id) + " out of range");
    return words_[id];
  }

  std::size_t id(const std::string& word) const {
    auto it = index_.find(normalize_word(word));
    return it == index_.end() ? kUnknownToken : it->second;
  }

  TokenSequence tokenize(const std::string& query, std::size_t max_tokens) const {
    TokenSequence out;
    std::istringstream is(query);
    std::string w;
    while (is >> w) out.ids.push_back(id(w));
    validate_tokens(out, size(), max_tokens);
    return out;
  }

  std::string detokenize(const TokenSequence& tokens) const {
    std::string out;
    for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
      if (i) out += ' ';
      out += word(tokens.ids[i]);
    }
    return out;
  }

  static std::string normalize_word(const std::string& word) {
    std::string w = word;
    std::transform(w.begin(), w.end(), w.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return w;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot write vocabulary " + path.string());
    for (const auto& w : words_) os << w << '\n';
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open vocabulary " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != kUnknownWord) {
      throw FormatError("vocabulary must start with " + std::string(kUnknownWord));
    }
    Vocabulary v;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (v.index_.count(normalize_word(line))) throw FormatError("duplicate vocabulary entry " + line);
      v.add(line);
    }
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mvs
