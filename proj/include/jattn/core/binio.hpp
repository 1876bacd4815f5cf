/*
 * Copyright 2026 The jattn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "jattn/core/errors.hpp"
#include "jattn/core/tensor.hpp"

namespace jattn {

// Little-endian binary stream writer/reader used by checkpoints, clip
// archives, and the token cache. Doubles are stored as raw IEEE-754 bits so
// round trips are bit exact.

class BinWriter {
 public:
  explicit BinWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary), path_(path.string()) {
    if (!out_) throw DataError("cannot open for write: " + path_);
  }

  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }

  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }

  void bytes(const std::vector<std::uint8_t>& v) {
    u64(v.size());
    raw(v.data(), v.size());
  }

  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) u64(d);
    raw(t.data.data(), t.data.size() * sizeof(double));
  }

  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw DataError("short write: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class BinReader {
 public:
  explicit BinReader(const std::filesystem::path& path)
      : in_(path, std::ios::binary), path_(path.string()) {
    if (!in_) throw DataError("cannot open: " + path_);
  }

  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }

  std::string str() {
    std::string s(u64(), '\0');
    raw(s.data(), s.size());
    return s;
  }

  std::vector<std::uint8_t> bytes() {
    std::vector<std::uint8_t> v(u64());
    raw(v.data(), v.size());
    return v;
  }

  Tensor tensor() {
    const std::uint32_t rank = u32();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(u64());
    Tensor t(shape);
    raw(t.data.data(), t.data.size() * sizeof(double));
    return t;
  }

  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw ParseError("truncated file: " + path_);
  }

  bool at_eof() {
    return in_.peek() == std::ifstream::traits_type::eof();
  }

 private:
  std::ifstream in_;
  std::string path_;
};

// FNV-1a, used for content hashes (determinism checks, cache keys).
inline std::uint64_t fnv1a(const void* p, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_str(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace jattn
