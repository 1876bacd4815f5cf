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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "jattn/core/errors.hpp"

namespace jattn {

// Interleaved 8-bit RGB image, row-major.
struct Image8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  Image8() = default;
  Image8(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

// Binary PPM (P6), the exchange format for materialized frames.
inline void write_ppm(const std::filesystem::path& path, const Image8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for write: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw DataError("short write: " + path.string());
}

inline Image8 read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw ParseError("not a P6 ppm: " + path.string());
  auto next_int = [&in, &path]() {
    // skips whitespace and '#' comment lines
    int ch = in.get();
    while (ch == '#' || std::isspace(ch)) {
      if (ch == '#')
        while (ch != '\n' && ch != EOF) ch = in.get();
      ch = in.get();
    }
    if (ch == EOF) throw ParseError("truncated ppm header: " + path.string());
    in.unget();
    long v = 0;
    in >> v;
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxv = next_int();
  if (w <= 0 || h <= 0 || maxv != 255)
    throw ParseError("unsupported ppm geometry in " + path.string());
  in.get();  // single whitespace after maxval
  Image8 img(static_cast<int>(h), static_cast<int>(w));
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw ParseError("truncated ppm payload: " + path.string());
  return img;
}

// Bilinear sample of one channel at real-valued (x, y); clamps at borders.
inline double bilinear_sample(const Image8& img, double x, double y, int c) {
  const double fx = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const double fy = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  const double top = (1.0 - ax) * img.at(y0, x0, c) + ax * img.at(y0, x1, c);
  const double bot = (1.0 - ax) * img.at(y1, x0, c) + ax * img.at(y1, x1, c);
  return (1.0 - ay) * top + ay * bot;
}

inline Image8 bilinear_resize(const Image8& img, int oh, int ow) {
  Image8 out(oh, ow);
  const double sy = static_cast<double>(img.height) / oh;
  const double sx = static_cast<double>(img.width) / ow;
  for (int y = 0; y < oh; ++y) {
    const double srcy = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < ow; ++x) {
      const double srcx = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < 3; ++c) {
        const double v = bilinear_sample(img, srcx, srcy, c);
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace jattn
