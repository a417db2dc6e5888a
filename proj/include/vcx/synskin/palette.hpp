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

// Skin-tone palette and lesion color bank for the synthetic dermoscopy
// generator. The palette is a 29-step luminance ramp between two endpoint
// RGBs. The color bank holds six named lesion colors with jitter ranges and a
// weighted list of color combinations; combination weights are calibrated so
// the implied per-color marginals approximate the reference distribution of
// a 10k-image dermoscopy corpus.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcx/util/rng.hpp"

namespace vcx::synskin {

using Rgb = std::array<std::uint8_t, 3>;

inline double luminance(const Rgb& c) {
  return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2];
}

inline constexpr int kPaletteSize = 29;

struct SkinTonePalette {
  std::vector<Rgb> tones;  // light to dark, strictly decreasing luminance

  void validate() const {
    if (tones.size() != kPaletteSize)
      throw std::invalid_argument("palette: expected " + std::to_string(kPaletteSize) +
                                  " tones, got " + std::to_string(tones.size()));
    for (std::size_t i = 1; i < tones.size(); ++i)
      if (luminance(tones[i]) >= luminance(tones[i - 1]))
        throw std::invalid_argument("palette: luminance not strictly decreasing at index " +
                                    std::to_string(i));
  }
};

// Linear ramp from light to dark endpoint, inclusive on both ends.
inline SkinTonePalette make_palette(const Rgb& light = {246, 209, 176},
                                    const Rgb& dark = {70, 46, 34}) {
  SkinTonePalette p;
  p.tones.resize(kPaletteSize);
  for (int i = 0; i < kPaletteSize; ++i) {
    const double t = static_cast<double>(i) / (kPaletteSize - 1);
    for (int c = 0; c < 3; ++c) {
      const double v = (1.0 - t) * light[c] + t * dark[c];
      p.tones[i][c] = static_cast<std::uint8_t>(v + 0.5);
    }
  }
  p.validate();
  return p;
}

inline constexpr int kColorCount = 6;

// Canonical color order, matching the label column order everywhere.
inline const std::array<std::string, kColorCount>& color_names() {
  static const std::array<std::string, kColorCount> kNames = {
      "light_brown", "dark_brown", "black", "blue_gray", "red", "white"};
  return kNames;
}

inline int color_index(const std::string& name) {
  const auto& names = color_names();
  for (int i = 0; i < kColorCount; ++i)
    if (names[i] == name) return i;
  throw std::invalid_argument("color bank: unknown color: " + name);
}

struct ColorDef {
  Rgb anchor{};
  int jitter = 12;  // per-channel uniform jitter, inclusive
};

struct ColorCombo {
  std::vector<int> colors;  // ordered, non-empty, unique indices into the bank
  double weight = 0;
};

struct ColorBank {
  std::array<ColorDef, kColorCount> colors{};
  std::vector<ColorCombo> combos;

  void validate() const {
    if (combos.empty()) throw std::invalid_argument("color bank: no combinations");
    double sum = 0;
    for (const auto& cb : combos) {
      if (cb.colors.empty())
        throw std::invalid_argument("color bank: empty combination");
      if (cb.weight < 0) throw std::invalid_argument("color bank: negative weight");
      std::array<bool, kColorCount> seen{};
      for (int c : cb.colors) {
        if (c < 0 || c >= kColorCount)
          throw std::invalid_argument("color bank: combination references unknown color index " +
                                      std::to_string(c));
        if (seen[static_cast<std::size_t>(c)])
          throw std::invalid_argument("color bank: duplicate color in combination");
        seen[static_cast<std::size_t>(c)] = true;
      }
      sum += cb.weight;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("color bank: weights sum to " + std::to_string(sum) +
                                  ", expected 1");
  }

  // Weighted draw over combos. Exactly one uniform consumed per call.
  int sample_combo(vcx::Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0;
    for (std::size_t k = 0; k < combos.size(); ++k) {
      acc += combos[k].weight;
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(combos.size()) - 1;
  }

  // Per-color marginal probabilities implied by the combination weights.
  std::array<double, kColorCount> implied_marginals() const {
    std::array<double, kColorCount> m{};
    for (const auto& cb : combos)
      for (int c : cb.colors) m[static_cast<std::size_t>(c)] += cb.weight;
    return m;
  }

  Rgb jittered(int color, vcx::Rng& rng) const {
    const ColorDef& def = colors[static_cast<std::size_t>(color)];
    Rgb out{};
    for (int c = 0; c < 3; ++c) {
      const int lo = def.anchor[c] - def.jitter;
      const int hi = def.anchor[c] + def.jitter;
      const int v = lo + static_cast<int>(rng.uniform_index(
                             static_cast<std::uint64_t>(hi - lo + 1)));
      out[c] = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
    return out;
  }
};

// Default bank: visually plausible anchors and a 20-combination list whose
// weights were fit so the implied marginals land on the reference ratios
// (light_brown .500, dark_brown .602, black .384, blue_gray .536, red .214,
// white .327).
inline ColorBank default_color_bank() {
  ColorBank bank;
  bank.colors[0] = {{192, 144, 96}, 12};   // light_brown
  bank.colors[1] = {{101, 67, 33}, 12};    // dark_brown
  bank.colors[2] = {{25, 20, 18}, 12};     // black
  bank.colors[3] = {{102, 123, 142}, 12};  // blue_gray
  bank.colors[4] = {{180, 50, 50}, 12};    // red
  bank.colors[5] = {{235, 230, 225}, 12};  // white

  const auto combo = [](std::vector<int> cs, double w) {
    return ColorCombo{std::move(cs), w};
  };
  // Indices follow color_names() order.
  bank.combos = {
      combo({0}, 0.0397),          combo({1}, 0.0203),
      combo({0, 1}, 0.0397),       combo({1, 2}, 0.0443),
      combo({0, 1, 2}, 0.0636),    combo({1, 3}, 0.0369),
      combo({0, 3}, 0.0562),       combo({3, 5}, 0.0508),
      combo({1, 2, 3}, 0.0608),    combo({0, 4}, 0.0483),
      combo({4, 5}, 0.0429),       combo({1, 4}, 0.0290),
      combo({0, 1, 3, 5}, 0.0702), combo({2, 3}, 0.0608),
      combo({0, 5}, 0.0536),       combo({1, 2, 3, 5}, 0.0748),
      combo({0, 1, 4}, 0.0483),    combo({3, 4}, 0.0455),
      combo({0, 1, 2, 3}, 0.0800), combo({1, 5}, 0.0343),
  };
  bank.validate();
  return bank;
}

}  // namespace vcx::synskin
