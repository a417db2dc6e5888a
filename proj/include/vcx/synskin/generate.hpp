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

// Synthetic dermoscopy sample pipeline: lesion shape from thresholded noise,
// two-tone skin background, color-bank region painting, and derived masks.
// Every sample is a pure function of its 64-bit seed, so generation
// parallelizes over samples and regenerating with the same master seed yields
// byte-identical output.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <utility>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcx/io/csv.hpp"
#include "vcx/io/png.hpp"
#include "vcx/synskin/palette.hpp"
#include "vcx/synskin/texture.hpp"
#include "vcx/util/parallel.hpp"
#include "vcx/util/rng.hpp"

namespace vcx::synskin {

struct LesionPrior {
  enum class Source { kProcedural, kMaskDir };
  Source source = Source::kProcedural;
  std::string mask_dir;     // used when source == kMaskDir
  double noise_scale = 28;  // base noise cell in pixels
  double threshold = 0.55;
  int morph_radius = 2;
  double area_min = 0.05;  // accepted blob area as fraction of image
  double area_max = 0.45;
  int retries = 16;
};

struct GenConfig {
  int image_size = 64;
  SkinTonePalette palette = make_palette();
  ColorBank bank = default_color_bank();
  LesionPrior prior;

  double bg_threshold = 0.5;  // background two-tone texture
  double bg_scale = 8;
  int bg_morph_radius = 1;
  int bg_jitter = 4;  // per-pixel, per-channel

  bool use_attr_mask = true;  // noise blob standing in for a real attribute mask
  double attr_threshold = 0.35;
  double attr_scale = 16;

  double sub_threshold = 0.55;  // per-color sub-region texture
  double sub_scale = 10;
  int sub_morph_radius = 1;
  int sub_retries = 8;

  int border_radius = 2;

  void validate() const {
    if (image_size < 8) throw std::invalid_argument("gen: image_size too small");
    palette.validate();
    bank.validate();
    if (prior.area_min <= 0 || prior.area_max <= prior.area_min || prior.area_max > 1)
      throw std::invalid_argument("gen: bad lesion area bounds");
  }
};

struct SynSample {
  vcx::io::ImageU8 image;  // H x W x 3
  Mask lesion_mask;
  Mask border_mask;
  std::array<Mask, kColorCount> color_masks;
  std::array<int, kColorCount> labels{};
  std::uint64_t seed = 0;
  int combo = -1;
};

// Procedural blob: thresholded noise, largest component, hole fill, area
// check with retry. Directory mode picks a mask file uniformly.
inline Mask sample_lesion_mask(vcx::Rng& rng, const LesionPrior& prior, int width,
                               int height) {
  if (prior.source == LesionPrior::Source::kMaskDir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (fs::exists(prior.mask_dir))
      for (const auto& e : fs::directory_iterator(prior.mask_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
          files.push_back(e.path().string());
    if (files.empty())
      throw std::runtime_error("lesion prior: no .png masks in " + prior.mask_dir);
    std::sort(files.begin(), files.end());
    const auto& pick = files[rng.uniform_index(files.size())];
    const vcx::io::ImageU8 img = vcx::io::read_png(pick);
    Mask m = make_mask(img.width, img.height);
    for (std::size_t i = 0; i < m.pixels.size(); ++i)
      m.pixels[i] = img.pixels[i * static_cast<std::size_t>(img.channels)] >= 128 ? kFg : 0;
    return m;
  }

  const auto total = static_cast<double>(width) * height;
  for (int attempt = 0; attempt < prior.retries; ++attempt) {
    Mask m = noise_texture(rng, width, height, prior.threshold, prior.morph_radius,
                           prior.noise_scale);
    m = largest_component(m);
    m = fill_holes(m);
    const double frac = static_cast<double>(mask_area(m)) / total;
    if (frac >= prior.area_min && frac <= prior.area_max) return m;
  }
  throw std::runtime_error("lesion prior: no blob within area bounds after " +
                           std::to_string(prior.retries) + " attempts");
}

// Two consecutive palette tones: base fill with tone i, noise regions
// recolored with tone i+1, then mild per-pixel jitter.
inline vcx::io::ImageU8 gen_background(vcx::Rng& rng, const GenConfig& cfg) {
  const int n = cfg.image_size;
  const auto i = static_cast<int>(rng.uniform_index(kPaletteSize - 1));
  const Rgb& tone_a = cfg.palette.tones[static_cast<std::size_t>(i)];
  const Rgb& tone_b = cfg.palette.tones[static_cast<std::size_t>(i) + 1];
  const Mask tex =
      noise_texture(rng, n, n, cfg.bg_threshold, cfg.bg_morph_radius, cfg.bg_scale);

  vcx::io::ImageU8 img;
  img.width = n;
  img.height = n;
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(n) * n * 3);
  const int j = cfg.bg_jitter;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Rgb& tone = is_fg(tex, y, x) ? tone_b : tone_a;
      for (int c = 0; c < 3; ++c) {
        int v = tone[c];
        if (j > 0)
          v += static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(2 * j + 1))) - j;
        img.at(y, x, c) = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
      }
    }
  }
  return img;
}

// Paints the combo onto the lesion. The first color fills the whole lesion;
// each later color claims a noise sub-region of the still-unclaimed lesion
// area (intersected with attr when given), so final masks are disjoint and
// their union is the lesion. A color whose sub-region stays empty after the
// configured retries is dropped along with its label.
inline std::array<Mask, kColorCount> apply_lesion_colors(
    vcx::io::ImageU8& image, const Mask& lesion, const Mask* attr,
    const std::vector<int>& combo, const GenConfig& cfg, vcx::Rng& rng) {
  if (combo.empty()) throw std::invalid_argument("apply_lesion_colors: empty combo");
  for (int c : combo)
    if (c < 0 || c >= kColorCount)
      throw std::invalid_argument("apply_lesion_colors: unknown color index " +
                                  std::to_string(c));

  const int n = image.width;
  std::array<Mask, kColorCount> masks;
  for (auto& m : masks) m = make_mask(n, n);

  const auto paint = [&](const Mask& region, const Rgb& rgb) {
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (is_fg(region, y, x))
          for (int c = 0; c < 3; ++c) image.at(y, x, c) = rgb[c];
  };

  const int base = combo[0];
  masks[static_cast<std::size_t>(base)] = lesion;
  paint(lesion, cfg.bank.jittered(base, rng));

  Mask remaining = lesion;  // lesion area not yet claimed by a later color
  for (std::size_t k = 1; k < combo.size(); ++k) {
    const int color = combo[k];
    Mask sub = make_mask(n, n);
    for (int attempt = 0; attempt < cfg.sub_retries; ++attempt) {
      sub = noise_texture(rng, n, n, cfg.sub_threshold, cfg.sub_morph_radius, cfg.sub_scale);
      sub = mask_and(sub, remaining);
      if (attr != nullptr) sub = mask_and(sub, *attr);
      if (mask_area(sub) > 0) break;
    }
    if (mask_area(sub) == 0) continue;  // drop the color and its label
    masks[static_cast<std::size_t>(color)] = sub;
    masks[static_cast<std::size_t>(base)] =
        mask_minus(masks[static_cast<std::size_t>(base)], sub);
    remaining = mask_minus(remaining, sub);
    paint(sub, cfg.bank.jittered(color, rng));
  }
  return masks;
}

// lesion = union of color masks, border = morphological gradient. The
// gradient erodes with zero padding so a lesion touching the frame still gets
// a border band along the frame edge.
inline std::pair<Mask, Mask> derive_masks(const std::array<Mask, kColorCount>& color_masks,
                                          int border_radius) {
  Mask lesion = color_masks[0];
  for (int c = 1; c < kColorCount; ++c) lesion = mask_or(lesion, color_masks[static_cast<std::size_t>(c)]);
  const Mask border = mask_xor(dilate(lesion, border_radius),
                               erode(lesion, border_radius, /*outside_is_fg=*/false));
  return {lesion, border};
}

inline SynSample generate_sample(const GenConfig& cfg, std::uint64_t seed) {
  vcx::Rng rng(seed);
  const int n = cfg.image_size;

  const Mask lesion = sample_lesion_mask(rng, cfg.prior, n, n);
  vcx::io::ImageU8 image = gen_background(rng, cfg);
  Mask attr;
  if (cfg.use_attr_mask)
    attr = noise_texture(rng, n, n, cfg.attr_threshold, cfg.sub_morph_radius, cfg.attr_scale);

  SynSample s;
  s.seed = seed;
  s.combo = cfg.bank.sample_combo(rng);
  s.color_masks = apply_lesion_colors(image, lesion, cfg.use_attr_mask ? &attr : nullptr,
                                      cfg.bank.combos[static_cast<std::size_t>(s.combo)].colors,
                                      cfg, rng);
  s.image = std::move(image);
  auto [les, border] = derive_masks(s.color_masks, cfg.border_radius);
  s.lesion_mask = std::move(les);
  s.border_mask = std::move(border);
  for (int c = 0; c < kColorCount; ++c)
    s.labels[static_cast<std::size_t>(c)] = mask_area(s.color_masks[static_cast<std::size_t>(c)]) > 0 ? 1 : 0;
  return s;
}

inline std::string sample_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

// Writes the full dataset layout and returns the manifest. Per-sample seed is
// mix_seed(master_seed, index); samples are generated in parallel and the
// manifest assembled in index order afterwards.
inline nlohmann::json generate_dataset(const GenConfig& cfg, int count,
                                       std::uint64_t master_seed, const std::string& out_dir,
                                       int num_threads = 0) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "masks" / "lesion", ec);
  fs::create_directories(root / "masks" / "border", ec);
  for (const auto& name : color_names()) fs::create_directories(root / "masks" / "color" / name, ec);
  if (!fs::exists(root / "images"))
    throw std::runtime_error("generate_dataset: cannot create " + (root / "images").string());

  struct Row {
    std::array<int, kColorCount> labels{};
    int combo = -1;
    std::uint64_t seed = 0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(count));
  if (num_threads <= 0) num_threads = vcx::default_threads();

  vcx::parallel_for(static_cast<std::size_t>(count), num_threads, [&](std::size_t i) {
    const std::uint64_t seed = vcx::mix_seed(master_seed, static_cast<std::uint64_t>(i));
    const SynSample s = generate_sample(cfg, seed);
    const std::string name = sample_name(static_cast<int>(i));
    vcx::io::write_png((root / "images" / (name + ".png")).string(), s.image);
    vcx::io::write_png((root / "masks" / "lesion" / (name + ".png")).string(), s.lesion_mask);
    vcx::io::write_png((root / "masks" / "border" / (name + ".png")).string(), s.border_mask);
    for (int c = 0; c < kColorCount; ++c)
      vcx::io::write_png(
          (root / "masks" / "color" / color_names()[static_cast<std::size_t>(c)] / (name + ".png")).string(),
          s.color_masks[static_cast<std::size_t>(c)]);
    rows[i] = Row{s.labels, s.combo, s.seed};
  });

  std::vector<std::vector<std::string>> csv;
  csv.push_back({"index", "light_brown", "dark_brown", "black", "blue_gray", "red", "white",
                 "combo", "seed"});
  std::array<long, kColorCount> counts{};
  nlohmann::json samples = nlohmann::json::array();
  for (int i = 0; i < count; ++i) {
    const Row& r = rows[static_cast<std::size_t>(i)];
    std::vector<std::string> line = {std::to_string(i)};
    for (int c = 0; c < kColorCount; ++c) {
      line.push_back(std::to_string(r.labels[static_cast<std::size_t>(c)]));
      counts[static_cast<std::size_t>(c)] += r.labels[static_cast<std::size_t>(c)];
    }
    line.push_back(std::to_string(r.combo));
    line.push_back(std::to_string(r.seed));
    csv.push_back(std::move(line));
    samples.push_back({{"index", i},
                       {"labels", r.labels},
                       {"combo", r.combo},
                       {"seed", r.seed}});
  }
  vcx::io::write_csv((root / "labels.csv").string(), csv);

  nlohmann::json combos = nlohmann::json::array();
  for (const auto& cb : cfg.bank.combos) {
    std::vector<std::string> names;
    for (int c : cb.colors) names.push_back(color_names()[static_cast<std::size_t>(c)]);
    combos.push_back({{"colors", names}, {"weight", cb.weight}});
  }
  nlohmann::json color_counts;
  for (int c = 0; c < kColorCount; ++c)
    color_counts[color_names()[static_cast<std::size_t>(c)]] = counts[static_cast<std::size_t>(c)];

  nlohmann::json manifest = {
      {"format_version", 1},
      {"master_seed", master_seed},
      {"count", count},
      {"image_size", cfg.image_size},
      {"color_names", color_names()},
      {"color_counts", color_counts},
      {"combos", combos},
      {"config",
       {{"palette_light", cfg.palette.tones.front()},
        {"palette_dark", cfg.palette.tones.back()},
        {"palette_size", kPaletteSize},
        {"lesion",
         {{"source", cfg.prior.source == LesionPrior::Source::kProcedural ? "procedural" : "mask_dir"},
          {"noise_scale", cfg.prior.noise_scale},
          {"threshold", cfg.prior.threshold},
          {"morph_radius", cfg.prior.morph_radius},
          {"area_min", cfg.prior.area_min},
          {"area_max", cfg.prior.area_max}}},
        {"background",
         {{"threshold", cfg.bg_threshold},
          {"scale", cfg.bg_scale},
          {"morph_radius", cfg.bg_morph_radius},
          {"jitter", cfg.bg_jitter}}},
        {"attr", {{"enabled", cfg.use_attr_mask}, {"threshold", cfg.attr_threshold}, {"scale", cfg.attr_scale}}},
        {"sub",
         {{"threshold", cfg.sub_threshold},
          {"scale", cfg.sub_scale},
          {"morph_radius", cfg.sub_morph_radius},
          {"retries", cfg.sub_retries}}},
        {"border_radius", cfg.border_radius}}},
      {"samples", samples},
  };

  std::ofstream mf(root / "manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("generate_dataset: cannot write manifest.json");
  mf << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace vcx::synskin
