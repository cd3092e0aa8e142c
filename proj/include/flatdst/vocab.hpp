// Copyright 2026 The flatdst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLATDST_VOCAB_HPP_
#define FLATDST_VOCAB_HPP_

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flatdst/error.hpp"

namespace flatdst {

namespace tokens {
inline constexpr int kPad = 0;
inline constexpr int kCls = 1;
inline constexpr int kSep = 2;
inline constexpr int kSlot = 3;
inline constexpr int kBos = 4;
inline constexpr int kEos = 5;
inline constexpr int kUnk = 6;
inline constexpr int kDash = 7;
inline constexpr int kNull = 8;
inline constexpr int kDontCare = 9;

inline constexpr std::array<std::string_view, 10> kReserved{
    "[PAD]", "[CLS]", "[SEP]", "[SLOT]", "[BOS]", "[EOS]", "[UNK]", "-", "null", "dontcare"};
}  // namespace tokens

// Lowercase word-level tokenization: whitespace separates words, every
// punctuation character is its own token, and bracketed reserved markers
// such as "[SLOT]" stay whole.
inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '[') {
      const auto close = text.find(']', i);
      if (close != std::string_view::npos) {
        std::string candidate(text.substr(i, close - i + 1));
        for (auto& ch : candidate) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (std::find(tokens::kReserved.begin(), tokens::kReserved.end(), candidate) !=
            tokens::kReserved.end()) {
          flush();
          out.push_back(std::move(candidate));
          i = close;
          continue;
        }
      }
    }
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

class Vocab {
 public:
  // Reserved tokens only.
  Vocab() {
    for (auto t : tokens::kReserved) insert(std::string(t));
  }

  // Reserved tokens followed by the sorted distinct words of `texts`.
  template <class Range>
  static Vocab build(const Range& texts) {
    std::set<std::string> words;
    for (const auto& text : texts) {
      for (auto& w : split_tokens(text)) words.insert(std::move(w));
    }
    Vocab v;
    for (const auto& w : words) {
      if (!v.contains(w)) v.insert(w);
    }
    return v;
  }

  // One token per line; line number is the id. The reserved prefix must
  // match exactly.
  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open vocabulary file " + path);
    Vocab v;
    v.id_to_token_.clear();
    v.token_to_id_.clear();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (v.contains(line)) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": duplicate token '" + line + "'");
      }
      v.insert(line);
    }
    v.check_reserved(path);
    return v;
  }

  static Vocab from_tokens(const std::vector<std::string>& list) {
    Vocab v;
    v.id_to_token_.clear();
    v.token_to_id_.clear();
    for (const auto& t : list) {
      if (v.contains(t)) throw ParseError("duplicate vocabulary token '" + t + "'");
      v.insert(t);
    }
    v.check_reserved("vocabulary");
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write vocabulary file " + path);
    for (const auto& t : id_to_token_) out << t << '\n';
  }

  std::size_t size() const { return id_to_token_.size(); }
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? tokens::kUnk : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(id_to_token_.size()));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& w : split_tokens(text)) ids.push_back(id(w));
    return ids;
  }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void insert(const std::string& t) {
    token_to_id_.emplace(t, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(t);
  }

  void check_reserved(const std::string& where) const {
    for (std::size_t i = 0; i < tokens::kReserved.size(); ++i) {
      if (i >= id_to_token_.size() || id_to_token_[i] != tokens::kReserved[i]) {
        throw ParseError(where + ": reserved token '" + std::string(tokens::kReserved[i]) +
                         "' must have id " + std::to_string(i));
      }
    }
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

inline std::vector<int> tokenize(std::string_view text, const Vocab& vocab) {
  return vocab.encode(text);
}

// Space-joined surface form of a token id sequence.
inline std::string detokenize(std::span<const int> ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace flatdst

#endif  // FLATDST_VOCAB_HPP_
