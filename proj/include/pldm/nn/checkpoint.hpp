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

// Checkpoint container: little-endian binary, versioned.
//
//   magic "PLDMCKPT" | u16 version | u32 meta_len | meta (UTF-8 JSON-ish text)
//   u32 tensor_count
//   per tensor: u16 name_len | name | u8 ndim | i32 dims[] | f32 data[]
//               (three copies per parameter: value, adam m, adam v)
//   u64 fnv-1a checksum over everything before it
//
// Round-trips bit-exactly: raw f32 bit patterns are written as-is.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pldm/nn/graph.hpp"

namespace pldm::nn {

constexpr char kCkptMagic[8] = {'P', 'L', 'D', 'M', 'C', 'K', 'P', 'T'};
constexpr uint16_t kCkptVersion = 1;

inline uint64_t fnv1a64(const uint8_t* p, size_t n, uint64_t h = 1469598103934665603ull) {
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace detail {

struct ByteSink {
  std::vector<uint8_t> buf;
  void raw(const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  }
  void u8(uint8_t v) { raw(&v, 1); }
  void u16(uint16_t v) { raw(&v, 2); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void str(const std::string& s) { raw(s.data(), s.size()); }
};

struct ByteSource {
  const uint8_t* p;
  size_t n;
  size_t pos = 0;
  void raw(void* out, size_t len) {
    if (pos + len > n) throw std::runtime_error("checkpoint: truncated file");
    std::memcpy(out, p + pos, len);
    pos += len;
  }
  uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
  uint16_t u16() { uint16_t v; raw(&v, 2); return v; }
  uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
  uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
  int32_t i32() { int32_t v; raw(&v, 4); return v; }
};

inline void put_tensor(ByteSink& s, const std::string& name, const Tensor& t) {
  s.u16(static_cast<uint16_t>(name.size()));
  s.str(name);
  s.u8(static_cast<uint8_t>(t.shape.size()));
  for (int d : t.shape) s.i32(d);
  s.raw(t.data.data(), t.data.size() * sizeof(float));
}

inline void get_tensor(ByteSource& s, std::string& name, Tensor& t) {
  const uint16_t nl = s.u16();
  name.resize(nl);
  s.raw(name.data(), nl);
  const uint8_t nd = s.u8();
  t.shape.resize(nd);
  long count = 1;
  for (int i = 0; i < nd; ++i) {
    t.shape[i] = s.i32();
    count *= t.shape[i];
  }
  if (count < 0) throw std::runtime_error("checkpoint: bad tensor shape");
  t.data.resize(count);
  s.raw(t.data.data(), t.data.size() * sizeof(float));
}

}  // namespace detail

// `meta` is free-form text (we store a JSON blob with architecture
// descriptor, loss weights, dataset fingerprint, optimizer settings).
inline void save_checkpoint(const std::string& path, const ParamStore& ps,
                            const std::string& meta) {
  detail::ByteSink s;
  s.raw(kCkptMagic, 8);
  s.u16(kCkptVersion);
  s.u32(static_cast<uint32_t>(meta.size()));
  s.str(meta);
  s.u32(static_cast<uint32_t>(ps.entries.size()));
  for (const auto& e : ps.entries) {
    detail::put_tensor(s, e.name, e.value);
    detail::put_tensor(s, e.name, e.m);
    detail::put_tensor(s, e.name, e.v);
  }
  s.u64(fnv1a64(s.buf.data(), s.buf.size()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(s.buf.data()),
          static_cast<std::streamsize>(s.buf.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

// Loads into a fresh store; returns the meta blob.
inline std::string load_checkpoint(const std::string& path, ParamStore& ps) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 8 + 2 + 4 + 4 + 8)
    throw std::runtime_error("checkpoint: file too small: " + path);
  detail::ByteSource s{buf.data(), buf.size()};
  char magic[8];
  s.raw(magic, 8);
  if (std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic: " + path);
  const uint16_t ver = s.u16();
  if (ver != kCkptVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(ver));
  const uint64_t want = fnv1a64(buf.data(), buf.size() - 8);
  uint64_t got;
  std::memcpy(&got, buf.data() + buf.size() - 8, 8);
  if (want != got) throw std::runtime_error("checkpoint: checksum mismatch: " + path);
  const uint32_t ml = s.u32();
  std::string meta(ml, '\0');
  s.raw(meta.data(), ml);
  const uint32_t count = s.u32();
  ps.entries.clear();
  ps.index.clear();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name, n2, n3;
    Tensor value, m, v;
    detail::get_tensor(s, name, value);
    detail::get_tensor(s, n2, m);
    detail::get_tensor(s, n3, v);
    if (n2 != name || n3 != name)
      throw std::runtime_error("checkpoint: tensor record out of order");
    int idx = ps.add(name, std::move(value));
    ps.entries[idx].m = std::move(m);
    ps.entries[idx].v = std::move(v);
  }
  return meta;
}

}  // namespace pldm::nn
