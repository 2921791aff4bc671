// Copyright 2026 The PLDM Authors
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

// Dataset container and on-disk format.
//
//   magic "PLDMDS" | u16 version | u32 meta_len | meta ("key=value\n" lines)
//   u32 episode_count
//   per episode: u32 record_len | u32 T | u8 channels | u8 state_dim |
//                u8 has_velocity | images u8[(T+1)*C*64*64] |
//                actions f32[T*2] | (velocities f32[(T+1)*2]) |
//                raw_states f32[(T+1)*state_dim]
//   u64 fnv-1a checksum over everything before it
//
// Images are stored quantized to u8 (value*255 rounded); velocities,
// actions and diagnostic raw states stay f32. Round-trip of the quantized
// content is bit-exact.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pldm/nn/checkpoint.hpp"  // fnv1a64

namespace pldm::data {

constexpr char kDatasetMagic[6] = {'P', 'L', 'D', 'M', 'D', 'S'};
constexpr uint16_t kDatasetVersion = 1;
constexpr int kObsSide = 64;

struct EpisodeData {
  int T = 0;
  int channels = 0;   // 2 two-rooms, 3 pointmaze
  int state_dim = 0;  // 2 two-rooms, 4 pointmaze
  bool has_velocity = false;
  std::vector<uint8_t> images;    // (T+1) * channels * 64 * 64
  std::vector<float> actions;     // T * 2
  std::vector<float> velocities;  // (T+1) * 2 when has_velocity
  std::vector<float> raw_states;  // (T+1) * state_dim, diagnostics only

  bool operator==(const EpisodeData&) const = default;
};

struct Dataset {
  // ordered so serialization is deterministic
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<EpisodeData> episodes;

  const std::string* find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }
  std::string meta_or(const std::string& key, const std::string& dflt) const {
    const std::string* v = find_meta(key);
    return v ? *v : dflt;
  }
};

inline uint8_t quantize_u8(float v) {
  const float s = v * 255.0f + 0.5f;
  return static_cast<uint8_t>(s < 0 ? 0 : (s > 255 ? 255 : s));
}

namespace detail {

inline std::string encode_meta(
    const std::vector<std::pair<std::string, std::string>>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> decode_meta(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> meta;
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return meta;
}

inline std::vector<uint8_t> episode_record(const EpisodeData& e) {
  std::vector<uint8_t> buf;
  auto raw = [&buf](const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  };
  const uint32_t t = static_cast<uint32_t>(e.T);
  raw(&t, 4);
  const uint8_t c = static_cast<uint8_t>(e.channels);
  const uint8_t sd = static_cast<uint8_t>(e.state_dim);
  const uint8_t hv = e.has_velocity ? 1 : 0;
  raw(&c, 1);
  raw(&sd, 1);
  raw(&hv, 1);
  raw(e.images.data(), e.images.size());
  raw(e.actions.data(), e.actions.size() * sizeof(float));
  if (e.has_velocity) raw(e.velocities.data(), e.velocities.size() * sizeof(float));
  raw(e.raw_states.data(), e.raw_states.size() * sizeof(float));
  return buf;
}

}  // namespace detail

// Streams episodes to disk with an incrementally updated checksum; episode
// count and metadata must be known at begin() time.
class DatasetFileWriter {
 public:
  explicit DatasetFileWriter(const std::string& path)
      : path_(path), f_(path, std::ios::binary | std::ios::trunc) {
    if (!f_) throw std::runtime_error("dataset: cannot open for write: " + path);
  }

  void begin(const std::vector<std::pair<std::string, std::string>>& meta,
             uint32_t episode_count) {
    write(kDatasetMagic, 6);
    const uint16_t v = kDatasetVersion;
    write(&v, 2);
    const std::string m = detail::encode_meta(meta);
    const uint32_t ml = static_cast<uint32_t>(m.size());
    write(&ml, 4);
    write(m.data(), m.size());
    write(&episode_count, 4);
  }

  void write_episode(const EpisodeData& e) {
    const auto rec = detail::episode_record(e);
    const uint32_t len = static_cast<uint32_t>(rec.size());
    write(&len, 4);
    write(rec.data(), rec.size());
  }

  void finish() {
    f_.write(reinterpret_cast<const char*>(&hash_), 8);
    f_.flush();
    if (!f_) throw std::runtime_error("dataset: write failed: " + path_);
    f_.close();
  }

 private:
  void write(const void* p, size_t n) {
    hash_ = nn::fnv1a64(static_cast<const uint8_t*>(p), n, hash_);
    f_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

  std::string path_;
  std::ofstream f_;
  uint64_t hash_ = 1469598103934665603ull;
};

inline void save_dataset(const Dataset& ds, const std::string& path) {
  DatasetFileWriter w(path);
  w.begin(ds.meta, static_cast<uint32_t>(ds.episodes.size()));
  for (const auto& e : ds.episodes) w.write_episode(e);
  w.finish();
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dataset: cannot open: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 6 + 2 + 4 + 4 + 8)
    throw std::runtime_error("dataset: truncated file: " + path);
  if (std::memcmp(buf.data(), kDatasetMagic, 6) != 0)
    throw std::runtime_error("dataset: bad magic: " + path);
  size_t pos = 6;
  auto read = [&](void* out, size_t n) {
    if (pos + n + 8 > buf.size())
      throw std::runtime_error("dataset: truncated file: " + path);
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  };
  uint16_t version;
  read(&version, 2);
  if (version != kDatasetVersion)
    throw std::runtime_error("dataset: unsupported format version " +
                             std::to_string(version));
  Dataset ds;
  uint32_t ml;
  read(&ml, 4);
  std::string meta(ml, '\0');
  read(meta.data(), ml);
  ds.meta = detail::decode_meta(meta);
  uint32_t count;
  read(&count, 4);
  ds.episodes.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len;
    read(&len, 4);
    EpisodeData e;
    uint32_t t;
    read(&t, 4);
    e.T = static_cast<int>(t);
    uint8_t c, sd, hv;
    read(&c, 1);
    read(&sd, 1);
    read(&hv, 1);
    e.channels = c;
    e.state_dim = sd;
    e.has_velocity = hv != 0;
    const size_t frames = static_cast<size_t>(e.T + 1);
    e.images.resize(frames * e.channels * kObsSide * kObsSide);
    read(e.images.data(), e.images.size());
    e.actions.resize(static_cast<size_t>(e.T) * 2);
    read(e.actions.data(), e.actions.size() * sizeof(float));
    if (e.has_velocity) {
      e.velocities.resize(frames * 2);
      read(e.velocities.data(), e.velocities.size() * sizeof(float));
    }
    e.raw_states.resize(frames * e.state_dim);
    read(e.raw_states.data(), e.raw_states.size() * sizeof(float));
    const size_t want_len = 4 + 3 + e.images.size() +
                            sizeof(float) * (e.actions.size() +
                                             e.velocities.size() +
                                             e.raw_states.size());
    if (len != want_len)
      throw std::runtime_error("dataset: corrupt episode record");
    ds.episodes.push_back(std::move(e));
  }
  // structure is sound; now attribute any remaining damage to corruption
  const uint64_t want = nn::fnv1a64(buf.data(), buf.size() - 8);
  uint64_t got;
  std::memcpy(&got, buf.data() + buf.size() - 8, 8);
  if (want != got)
    throw std::runtime_error("dataset: checksum mismatch: " + path);
  return ds;
}

}  // namespace pldm::data
