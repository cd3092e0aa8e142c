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

// Checkpoint container (all integers little-endian):
//
//   magic   "FLATDST\0"
//   u32     format version (1)
//   u32 n, n bytes   header: "key=value\n" lines (model config, reserved
//                    token ids, reuse spec, run manifest)
//   u32 n, n bytes   schema as JSON
//   u32 count, then per token: u32 n, n bytes       vocabulary in id order
//   u32 count, then per parameter:
//       u32 n, n bytes name; u32 rank; u64 dims[rank];
//       u8 scalar width (4 or 8); raw little-endian IEEE values
//
// Loading rebuilds the model from the header and requires every stored
// parameter to match a model parameter by name and shape.

#ifndef FLATDST_CHECKPOINT_HPP_
#define FLATDST_CHECKPOINT_HPP_

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flatdst/dataset.hpp"
#include "flatdst/dst_model.hpp"
#include "flatdst/error.hpp"
#include "flatdst/vocab.hpp"

namespace flatdst {

inline constexpr char kCheckpointMagic[8] = {'F', 'L', 'A', 'T', 'D', 'S', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Ordered key/value provenance record carried by every artifact.
using Manifest = std::vector<std::pair<std::string, std::string>>;

namespace ckpt_detail {

template <class U>
void write_le(std::ostream& out, U v) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <class U>
U read_le(std::istream& in, const std::string& path) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw ParseError(path + ": truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  U v;
  std::memcpy(&v, bytes, sizeof(U));
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const std::string& path) {
  const auto n = read_le<std::uint32_t>(in, path);
  if (n > (1u << 28)) throw ParseError(path + ": implausible string length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw ParseError(path + ": truncated checkpoint");
  return s;
}

}  // namespace ckpt_detail

inline std::map<std::string, std::string> parse_header(const std::string& text,
                                                       const std::string& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path + ": bad header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline std::vector<std::pair<std::string, std::string>> model_header(
    const ModelConfig& c, const ReuseSpec& reuse, std::size_t max_value_len) {
  std::vector<std::pair<std::string, std::string>> h{
      {"model.num_layers", std::to_string(c.num_layers)},
      {"model.num_heads", std::to_string(c.num_heads)},
      {"model.hidden_dim", std::to_string(c.hidden_dim)},
      {"model.ffn_dim", std::to_string(c.ffn_dim)},
      {"model.vocab_size", std::to_string(c.vocab_size)},
      {"model.max_positions", std::to_string(c.max_positions)},
      {"model.num_types", std::to_string(c.num_types)},
      {"model.reuse_spec", reuse.name()},
      {"model.max_value_len", std::to_string(max_value_len)},
  };
  for (std::size_t i = 0; i < tokens::kReserved.size(); ++i) {
    h.emplace_back("reserved." + std::string(tokens::kReserved[i]), std::to_string(i));
  }
  return h;
}

template <Real T>
void save_checkpoint(const DstModel<T>& model, const std::string& path,
                     const Manifest& manifest = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  ckpt_detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  std::string header;
  for (const auto& [k, v] : model_header(model.config(), model.reuse_spec(), model.max_value_len())) {
    header += k + "=" + v + "\n";
  }
  for (const auto& [k, v] : manifest) header += "manifest." + k + "=" + v + "\n";
  ckpt_detail::write_string(out, header);
  ckpt_detail::write_string(out, schema_to_json(*model.schema()).dump());
  const auto& toks = model.vocab().tokens();
  ckpt_detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(toks.size()));
  for (const auto& t : toks) ckpt_detail::write_string(out, t);
  ckpt_detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    ckpt_detail::write_string(out, p.name);
    const auto& shape = p.var.shape();
    ckpt_detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) ckpt_detail::write_le<std::uint64_t>(out, d);
    ckpt_detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(sizeof(T)));
    for (T v : p.var.value().data()) ckpt_detail::write_le<T>(out, v);
  }
  if (!out) throw ParseError("failed writing checkpoint " + path);
}

template <Real T>
struct LoadedCheckpoint {
  DstModel<T> model;
  std::map<std::string, std::string> header;
  Manifest manifest;
};

template <Real T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw ParseError(path + ": not a flatdst checkpoint");
  }
  const auto version = ckpt_detail::read_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::string header_text = ckpt_detail::read_string(in, path);
  auto header = parse_header(header_text, path);
  Manifest manifest;
  {
    std::istringstream hs(header_text);
    std::string line;
    while (std::getline(hs, line)) {
      if (line.rfind("manifest.", 0) != 0) continue;
      const auto eq = line.find('=');
      manifest.emplace_back(line.substr(9, eq - 9), line.substr(eq + 1));
    }
  }
  auto get_int = [&](const std::string& key) {
    auto it = header.find(key);
    if (it == header.end()) throw ParseError(path + ": header lacks " + key);
    try {
      return std::stoi(it->second);
    } catch (const std::exception&) {
      throw ParseError(path + ": header " + key + " is not an integer");
    }
  };
  for (std::size_t i = 0; i < tokens::kReserved.size(); ++i) {
    if (get_int("reserved." + std::string(tokens::kReserved[i])) != static_cast<int>(i)) {
      throw ParseError(path + ": reserved token ids differ from this build");
    }
  }
  ModelConfig config;
  config.num_layers = get_int("model.num_layers");
  config.num_heads = get_int("model.num_heads");
  config.hidden_dim = get_int("model.hidden_dim");
  config.ffn_dim = get_int("model.ffn_dim");
  config.vocab_size = get_int("model.vocab_size");
  config.max_positions = get_int("model.max_positions");
  config.num_types = get_int("model.num_types");
  const ReuseSpec reuse = ReuseSpec::parse(header.at("model.reuse_spec"));
  const auto max_value_len = static_cast<std::size_t>(get_int("model.max_value_len"));

  const std::string schema_text = ckpt_detail::read_string(in, path);
  nlohmann::json schema_json;
  try {
    schema_json = nlohmann::json::parse(schema_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad schema block: " + e.what());
  }
  auto schema = std::make_shared<const Schema>(schema_from_json(schema_json, path));

  const auto vocab_count = ckpt_detail::read_le<std::uint32_t>(in, path);
  std::vector<std::string> toks;
  toks.reserve(vocab_count);
  for (std::uint32_t i = 0; i < vocab_count; ++i) toks.push_back(ckpt_detail::read_string(in, path));
  Vocab vocab = Vocab::from_tokens(toks);
  if (static_cast<int>(vocab.size()) != config.vocab_size) {
    throw ParseError(path + ": vocabulary has " + std::to_string(vocab.size()) +
                     " tokens, header says " + std::to_string(config.vocab_size));
  }

  DstModel<T> model(config, std::move(vocab), schema, reuse, 0, max_value_len);
  const auto count = ckpt_detail::read_le<std::uint32_t>(in, path);
  if (count != model.params().size()) {
    throw ParseError(path + ": " + std::to_string(count) + " parameters stored, model has " +
                     std::to_string(model.params().size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = ckpt_detail::read_string(in, path);
    if (!model.params().contains(name)) {
      throw ParseError(path + ": unknown parameter '" + name + "'");
    }
    Var<T> var = model.params().get(name).var;
    const auto rank = ckpt_detail::read_le<std::uint32_t>(in, path);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(ckpt_detail::read_le<std::uint64_t>(in, path)));
    }
    if (shape != var.shape()) {
      throw ParseError(path + ": parameter '" + name + "' has shape " + shape_string(shape) +
                       ", config expects " + shape_string(var.shape()));
    }
    const auto width = ckpt_detail::read_le<std::uint8_t>(in, path);
    auto values = var.mutable_value().data();
    for (auto& v : values) {
      if (width == 4) {
        v = static_cast<T>(ckpt_detail::read_le<float>(in, path));
      } else if (width == 8) {
        v = static_cast<T>(ckpt_detail::read_le<double>(in, path));
      } else {
        throw ParseError(path + ": unsupported scalar width " + std::to_string(width));
      }
    }
  }
  return LoadedCheckpoint<T>{std::move(model), std::move(header), std::move(manifest)};
}

}  // namespace flatdst

#endif  // FLATDST_CHECKPOINT_HPP_
