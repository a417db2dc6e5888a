// Copyright 2026 the vcx authors
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

#pragma once

// Procedural binary textures: multi-octave value noise, thresholding, and
// disk morphology. Masks are single-channel ImageU8 with foreground 255 and
// background 0. Morphology clamps neighborhoods at the image border (only
// in-bounds pixels vote), so a full frame erodes to a full frame and an empty
// frame dilates to an empty frame.

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vcx/io/png.hpp"
#include "vcx/util/rng.hpp"

namespace vcx::synskin {

using Mask = vcx::io::ImageU8;  // channels == 1, values 0 or 255

inline constexpr std::uint8_t kFg = 255;

inline Mask make_mask(int width, int height, std::uint8_t fill = 0) {
  Mask m;
  m.width = width;
  m.height = height;
  m.channels = 1;
  m.pixels.assign(static_cast<std::size_t>(width) * height, fill);
  return m;
}

inline bool is_fg(const Mask& m, int y, int x) { return m.at(y, x, 0) != 0; }

inline std::size_t mask_area(const Mask& m) {
  std::size_t n = 0;
  for (std::uint8_t v : m.pixels) n += v != 0 ? 1 : 0;
  return n;
}

namespace detail {

// Smoothstep-interpolated lattice noise in [0,1). One octave. Lattice values
// are drawn row by row so the field is a pure function of the rng state.
inline std::vector<double> value_noise_octave(vcx::Rng& rng, int width, int height,
                                              double cell) {
  const int gw = static_cast<int>(width / cell) + 2;
  const int gh = static_cast<int>(height / cell) + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = rng.uniform();

  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const double fy = y / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    const double sy = ty * ty * (3 - 2 * ty);
    for (int x = 0; x < width; ++x) {
      const double fx = x / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      const double sx = tx * tx * (3 - 2 * tx);
      const double v00 = lattice[static_cast<std::size_t>(y0) * gw + x0];
      const double v01 = lattice[static_cast<std::size_t>(y0) * gw + x0 + 1];
      const double v10 = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0];
      const double v11 = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
      const double top = v00 + (v01 - v00) * sx;
      const double bot = v10 + (v11 - v10) * sx;
      out[static_cast<std::size_t>(y) * width + x] = top + (bot - top) * sy;
    }
  }
  return out;
}

inline std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> off;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) off.emplace_back(dy, dx);
  return off;
}

// erode=true keeps a pixel only if its whole disk neighborhood is foreground;
// erode=false sets a pixel if any neighbor is foreground. Out-of-bounds
// neighbors count as foreground for erosion when outside_is_fg (border-clamp
// semantics, so a full frame erodes to itself) and as background otherwise
// (zero padding, so erosion eats the frame edge).
inline Mask morph(const Mask& m, int radius, bool erode, bool outside_is_fg) {
  if (radius <= 0) return m;
  const auto off = disk_offsets(radius);
  Mask out = make_mask(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool all = true, any = false;
      for (const auto& [dy, dx] : off) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width) {
          if (!outside_is_fg) all = false;
          continue;
        }
        if (is_fg(m, ny, nx)) any = true;
        else all = false;
        if (!all && any) break;
      }
      out.at(y, x, 0) = (erode ? all : any) ? kFg : 0;
    }
  }
  return out;
}

}  // namespace detail

inline Mask dilate(const Mask& m, int radius) { return detail::morph(m, radius, false, true); }
inline Mask erode(const Mask& m, int radius, bool outside_is_fg = true) {
  return detail::morph(m, radius, true, outside_is_fg);
}
inline Mask morph_open(const Mask& m, int radius) { return dilate(erode(m, radius), radius); }
inline Mask morph_close(const Mask& m, int radius) { return erode(dilate(m, radius), radius); }

// Multi-octave value noise field in [0,1): amplitude halves and frequency
// doubles per octave, base cell size noise_scale pixels.
inline std::vector<double> value_noise(vcx::Rng& rng, int width, int height,
                                       double noise_scale, int octaves = 3) {
  if (noise_scale < 2) noise_scale = 2;
  std::vector<double> field(static_cast<std::size_t>(width) * height, 0.0);
  double amp = 1.0, total = 0.0, cell = noise_scale;
  for (int o = 0; o < octaves; ++o) {
    const auto oct = detail::value_noise_octave(rng, width, height, cell);
    for (std::size_t i = 0; i < field.size(); ++i) field[i] += amp * oct[i];
    total += amp;
    amp *= 0.5;
    cell = cell / 2 < 2 ? 2 : cell / 2;
  }
  for (auto& v : field) v /= total;
  return field;
}

// Thresholded noise with open+close cleanup. threshold 0 keeps every pixel,
// threshold 1 keeps none.
inline Mask noise_texture(vcx::Rng& rng, int width, int height, double threshold,
                          int morph_radius, double noise_scale = 12.0, int octaves = 3) {
  if (threshold < 0 || threshold > 1)
    throw std::invalid_argument("noise_texture: threshold must lie in [0,1]");
  const auto field = value_noise(rng, width, height, noise_scale, octaves);
  Mask m = make_mask(width, height);
  for (std::size_t i = 0; i < field.size(); ++i)
    m.pixels[i] = field[i] >= threshold ? kFg : 0;
  m = morph_open(m, morph_radius);
  m = morph_close(m, morph_radius);
  return m;
}

// Keeps only the largest 4-connected foreground component. Empty in, empty out.
inline Mask largest_component(const Mask& m) {
  const int w = m.width, h = m.height;
  std::vector<int> comp(static_cast<std::size_t>(w) * h, -1);
  int best_id = -1;
  std::size_t best_size = 0;
  int next_id = 0;
  std::vector<std::pair<int, int>> stack;
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      if (!is_fg(m, sy, sx) || comp[static_cast<std::size_t>(sy) * w + sx] != -1) continue;
      const int id = next_id++;
      std::size_t size = 0;
      stack.push_back({sy, sx});
      comp[static_cast<std::size_t>(sy) * w + sx] = id;
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        ++size;
        const int ns[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (const auto& n : ns) {
          const int ny = n[0], nx = n[1];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (!is_fg(m, ny, nx)) continue;
          int& c = comp[static_cast<std::size_t>(ny) * w + nx];
          if (c != -1) continue;
          c = id;
          stack.push_back({ny, nx});
        }
      }
      if (size > best_size) {
        best_size = size;
        best_id = id;
      }
    }
  }
  Mask out = make_mask(w, h);
  if (best_id >= 0)
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
      out.pixels[i] = comp[i] == best_id ? kFg : 0;
  return out;
}

// Fills background regions not 4-connected to the image border.
inline Mask fill_holes(const Mask& m) {
  const int w = m.width, h = m.height;
  std::vector<std::uint8_t> outside(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  const auto push = [&](int y, int x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    std::uint8_t& o = outside[static_cast<std::size_t>(y) * w + x];
    if (o != 0 || is_fg(m, y, x)) return;
    o = 1;
    stack.push_back({y, x});
  };
  for (int x = 0; x < w; ++x) {
    push(0, x);
    push(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    push(y, 0);
    push(y, w - 1);
  }
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    push(y - 1, x);
    push(y + 1, x);
    push(y, x - 1);
    push(y, x + 1);
  }
  Mask out = m;
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    if (out.pixels[i] == 0 && outside[i] == 0) out.pixels[i] = kFg;
  return out;
}

inline Mask mask_and(const Mask& a, const Mask& b) {
  Mask out = make_mask(a.width, a.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = (a.pixels[i] != 0 && b.pixels[i] != 0) ? kFg : 0;
  return out;
}

inline Mask mask_or(const Mask& a, const Mask& b) {
  Mask out = make_mask(a.width, a.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = (a.pixels[i] != 0 || b.pixels[i] != 0) ? kFg : 0;
  return out;
}

inline Mask mask_xor(const Mask& a, const Mask& b) {
  Mask out = make_mask(a.width, a.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = ((a.pixels[i] != 0) != (b.pixels[i] != 0)) ? kFg : 0;
  return out;
}

// Removes b's foreground from a.
inline Mask mask_minus(const Mask& a, const Mask& b) {
  Mask out = make_mask(a.width, a.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = (a.pixels[i] != 0 && b.pixels[i] == 0) ? kFg : 0;
  return out;
}

}  // namespace vcx::synskin
