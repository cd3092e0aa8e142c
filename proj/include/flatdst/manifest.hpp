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

#ifndef FLATDST_MANIFEST_HPP_
#define FLATDST_MANIFEST_HPP_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flatdst/error.hpp"

#ifndef FLATDST_BUILD_REV
#define FLATDST_BUILD_REV "unknown"
#endif

namespace flatdst {

inline constexpr const char* kVersion = "0.1.0";

inline std::string build_version() { return std::string(kVersion) + "+" + FLATDST_BUILD_REV; }

// 64-bit FNV-1a over raw bytes, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a_hex(bytes);
}

// Provenance of one command invocation. Everything here is a pure function
// of the inputs so that repeated runs produce identical manifests.
struct RunManifest {
  std::string command;
  std::string version = build_version();
  std::uint64_t seed = 0;
  std::string config;  // canonical key=value dump
  std::vector<std::pair<std::string, std::string>> inputs;     // name -> checksum
  std::vector<std::pair<std::string, std::string>> outputs;    // role -> file name
  std::vector<std::pair<std::string, std::string>> settings;   // extra flags

  void add_input(const std::string& path) {
    inputs.emplace_back(std::filesystem::path(path).filename().string(), file_checksum(path));
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["version"] = version;
    j["seed"] = seed;
    j["config"] = config;
    nlohmann::ordered_json in = nlohmann::ordered_json::object();
    for (const auto& [k, v] : inputs) in[k] = v;
    j["input_checksums"] = in;
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& [k, v] : outputs) out[k] = v;
    j["outputs"] = out;
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& [k, v] : settings) s[k] = v;
    j["settings"] = s;
    return j;
  }

  // Flat form embedded in checkpoint headers.
  std::vector<std::pair<std::string, std::string>> flatten() const {
    std::vector<std::pair<std::string, std::string>> kv{
        {"command", command}, {"version", version}, {"seed", std::to_string(seed)}};
    for (const auto& [k, v] : inputs) kv.emplace_back("input." + k, v);
    for (const auto& [k, v] : settings) kv.emplace_back("setting." + k, v);
    std::string cfg;
    for (char c : config) cfg += c == '\n' ? ';' : c;
    kv.emplace_back("config", cfg);
    return kv;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace flatdst

#endif  // FLATDST_MANIFEST_HPP_
