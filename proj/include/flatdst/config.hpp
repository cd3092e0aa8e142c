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

// Flat "key = value" configuration files. '#' starts a comment; blank lines
// are ignored. Keys are documented in docs/formats.md.

#ifndef FLATDST_CONFIG_HPP_
#define FLATDST_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flatdst/error.hpp"
#include "flatdst/reuse.hpp"
#include "flatdst/transformer.hpp"

namespace flatdst {

class ConfigError : public Error {
 public:
  using Error::Error;
};

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& where = "config") {
    KeyValueConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(where + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(where + ":" + std::to_string(lineno) + ": empty key");
      if (c.values_.count(key)) {
        throw ConfigError(where + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      }
      c.values_[key] = value;
      c.order_.push_back(key);
    }
    c.where_ = where;
    return c;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(where_ + ": missing config key '" + key + "'");
    return it->second;
  }

  int require_int(const std::string& key) const { return to_int(key, require(key)); }
  double require_double(const std::string& key) const { return to_double(key, require(key)); }

  int get_int(const std::string& key, int fallback) const {
    return has(key) ? to_int(key, values_.at(key)) : fallback;
  }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? to_double(key, values_.at(key)) : fallback;
  }
  std::string get(const std::string& key, const std::string& fallback) const {
    return has(key) ? values_.at(key) : fallback;
  }

  // Canonical "key=value" lines in file order.
  std::string dump() const {
    std::string out;
    for (const auto& k : order_) out += k + "=" + values_.at(k) + "\n";
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  int to_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return static_cast<int>(x);
    } catch (const std::exception&) {
      throw ConfigError(where_ + ": key '" + key + "' expects an integer, got '" + v + "'");
    }
  }

  double to_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(where_ + ": key '" + key + "' expects a number, got '" + v + "'");
    }
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  std::string where_ = "config";
};

inline ModelConfig model_config_from(const KeyValueConfig& c) {
  ModelConfig m;
  m.num_layers = c.require_int("num_layers");
  m.num_heads = c.require_int("num_heads");
  m.hidden_dim = c.require_int("hidden_dim");
  m.ffn_dim = c.get_int("ffn_dim", 4 * m.hidden_dim);
  m.max_positions = c.require_int("max_positions");
  m.init_std = c.get_double("init_std", 0.02);
  m.vocab_size = 1;  // replaced by the vocabulary size when a model is built
  try {
    m.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return m;
}

enum class EvalMode { kGoldPrevState, kPredictedPrevState };

inline std::string to_string(EvalMode m) {
  return m == EvalMode::kGoldPrevState ? "gold" : "predicted";
}

inline EvalMode parse_eval_mode(const std::string& s) {
  if (s == "gold" || s == "gold_prev_state") return EvalMode::kGoldPrevState;
  if (s == "predicted" || s == "predicted_prev_state") return EvalMode::kPredictedPrevState;
  throw ConfigError("unknown evaluation mode '" + s + "' (expected gold or predicted)");
}

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  double warmup_proportion = 0.1;
  int batch_size = 16;
  int epochs = 1;
  std::uint64_t seed = 42;
  ReuseSpec reuse_spec = default_reuse_spec();
  std::optional<double> clip_norm = 1.0;
  int max_value_len = 8;
  EvalMode eval_mode = EvalMode::kPredictedPrevState;
  // Stop once training joint accuracy reaches this value (disabled when
  // unset).
  std::optional<double> stop_train_jga;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (warmup_proportion < 0 || warmup_proportion > 1) {
      throw ConfigError("warmup_proportion must lie in [0, 1]");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (max_value_len < 1) throw ConfigError("max_value_len must be >= 1");
    if (clip_norm && !(*clip_norm > 0)) throw ConfigError("clip_norm must be > 0 or none");
  }
};

inline TrainConfig train_config_from(const KeyValueConfig& c) {
  TrainConfig t;
  t.model = model_config_from(c);
  t.learning_rate = c.require_double("learning_rate");
  t.warmup_proportion = c.require_double("warmup_proportion");
  t.batch_size = c.require_int("batch_size");
  t.epochs = c.require_int("epochs");
  t.seed = static_cast<std::uint64_t>(c.require_int("seed"));
  try {
    t.reuse_spec = ReuseSpec::parse(c.require("reuse_spec"));
  } catch (const InvalidSpecError& e) {
    throw ConfigError(e.what());
  }
  const std::string clip = c.get("clip_norm", "1.0");
  if (clip == "none") {
    t.clip_norm.reset();
  } else {
    t.clip_norm = c.get_double("clip_norm", 1.0);
  }
  t.max_value_len = c.get_int("max_value_len", 8);
  t.eval_mode = parse_eval_mode(c.get("eval_mode", "predicted"));
  if (c.has("stop_train_jga")) t.stop_train_jga = c.get_double("stop_train_jga", 1.0);
  t.validate();
  return t;
}

}  // namespace flatdst

#endif  // FLATDST_CONFIG_HPP_
