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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "vcx/io/csv.hpp"
#include "vcx/io/png.hpp"
#include "vcx/synskin/generate.hpp"
#include "vcx/synskin/palette.hpp"
#include "vcx/synskin/texture.hpp"
#include "vcx/util/rng.hpp"

using namespace vcx::synskin;

namespace {

Mask disk_mask(int n, int cy, int cx, int r) {
  Mask m = make_mask(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m.at(y, x, 0) = kFg;
  return m;
}

GenConfig small_config(int size, double lesion_scale) {
  GenConfig cfg;
  cfg.image_size = size;
  cfg.prior.noise_scale = lesion_scale;
  return cfg;
}

bool masks_equal(const Mask& a, const Mask& b) { return a.pixels == b.pixels; }

void check_sample_invariants(const SynSample& s) {
  const std::size_t npix = s.lesion_mask.pixels.size();
  // Union of color masks equals the lesion; masks are pairwise disjoint and
  // contained in the lesion; labels mirror mask emptiness.
  for (std::size_t i = 0; i < npix; ++i) {
    int claims = 0;
    for (const auto& cm : s.color_masks) claims += cm.pixels[i] != 0 ? 1 : 0;
    const bool lesion = s.lesion_mask.pixels[i] != 0;
    REQUIRE(claims == (lesion ? 1 : 0));
  }
  for (int c = 0; c < kColorCount; ++c) {
    const bool has = mask_area(s.color_masks[static_cast<std::size_t>(c)]) > 0;
    REQUIRE(s.labels[static_cast<std::size_t>(c)] == (has ? 1 : 0));
  }
}

}  // namespace

TEST_CASE("palette is a strict luminance ramp") {
  const SkinTonePalette p = make_palette();
  REQUIRE(p.tones.size() == 29);
  CHECK(p.tones.front() == Rgb{246, 209, 176});
  CHECK(p.tones.back() == Rgb{70, 46, 34});
  for (std::size_t i = 1; i < p.tones.size(); ++i)
    CHECK(luminance(p.tones[i]) < luminance(p.tones[i - 1]));

  SkinTonePalette bad = p;
  std::swap(bad.tones[3], bad.tones[4]);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.tones.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("color bank defaults, marginals, and validation") {
  const ColorBank bank = default_color_bank();
  bank.validate();

  const auto m = bank.implied_marginals();
  const double want[6] = {0.4998, 0.6022, 0.3843, 0.5360, 0.2140, 0.3266};
  for (int c = 0; c < 6; ++c) CHECK(std::abs(m[static_cast<std::size_t>(c)] - want[c]) < 0.002);

  SUBCASE("combo sampling tracks weights") {
    vcx::Rng rng(17);
    std::vector<int> hits(bank.combos.size(), 0);
    const int n = 40000;
    for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(bank.sample_combo(rng))];
    for (std::size_t k = 0; k < bank.combos.size(); ++k) {
      const double w = bank.combos[k].weight;
      const double freq = static_cast<double>(hits[k]) / n;
      const double sigma = std::sqrt(w * (1 - w) / n);
      CHECK(std::abs(freq - w) < 4 * sigma + 1e-12);
    }
  }

  SUBCASE("validation rejects malformed banks") {
    ColorBank bad = bank;
    bad.combos[0].weight += 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = bank;
    bad.combos.push_back({{}, 0.0});
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = bank;
    bad.combos[0].colors = {1, 1};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = bank;
    bad.combos[0].colors = {6};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(color_index("magenta"), std::invalid_argument);
  }
}

TEST_CASE("noise texture endpoints and determinism") {
  vcx::Rng a(5);
  const Mask all_fg = noise_texture(a, 24, 24, 0.0, 2);
  CHECK(mask_area(all_fg) == 24u * 24u);
  const Mask all_bg = noise_texture(a, 24, 24, 1.0, 2);
  CHECK(mask_area(all_bg) == 0u);

  vcx::Rng r1(42), r2(42), r3(43);
  const Mask m1 = noise_texture(r1, 32, 32, 0.5, 1);
  const Mask m2 = noise_texture(r2, 32, 32, 0.5, 1);
  const Mask m3 = noise_texture(r3, 32, 32, 0.5, 1);
  CHECK(masks_equal(m1, m2));
  CHECK_FALSE(masks_equal(m1, m3));

  vcx::Rng r4(1);
  CHECK_THROWS_AS(noise_texture(r4, 8, 8, -0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(noise_texture(r4, 8, 8, 1.1, 1), std::invalid_argument);
}

TEST_CASE("morphology oracles") {
  SUBCASE("dilate single pixel to a radius-1 disk") {
    Mask m = make_mask(5, 5);
    m.at(2, 2, 0) = kFg;
    const Mask d = dilate(m, 1);
    CHECK(mask_area(d) == 5u);
    CHECK(is_fg(d, 2, 2));
    CHECK(is_fg(d, 1, 2));
    CHECK(is_fg(d, 3, 2));
    CHECK(is_fg(d, 2, 1));
    CHECK(is_fg(d, 2, 3));
  }
  SUBCASE("erode block to its center") {
    Mask m = make_mask(5, 5);
    for (int y = 1; y <= 3; ++y)
      for (int x = 1; x <= 3; ++x) m.at(y, x, 0) = kFg;
    const Mask e = erode(m, 1);
    CHECK(mask_area(e) == 1u);
    CHECK(is_fg(e, 2, 2));
  }
  SUBCASE("border conventions") {
    Mask full = make_mask(8, 8, kFg);
    CHECK(mask_area(erode(full, 1)) == 64u);  // clamped: full stays full
    const Mask inset = erode(full, 1, false);  // zero padded: edge eaten
    CHECK(mask_area(inset) == 36u);
    CHECK_FALSE(is_fg(inset, 0, 3));
    CHECK(is_fg(inset, 1, 1));
    const Mask empty = make_mask(8, 8);
    CHECK(mask_area(dilate(empty, 3)) == 0u);
  }
  SUBCASE("radius zero is identity") {
    vcx::Rng rng(3);
    const Mask m = noise_texture(rng, 16, 16, 0.5, 0);
    CHECK(masks_equal(morph_open(m, 0), m));
    CHECK(masks_equal(morph_close(m, 0), m));
  }
}

TEST_CASE("largest component and hole fill") {
  Mask m = make_mask(10, 10);
  for (int x = 0; x < 3; ++x) m.at(1, 1 + x, 0) = kFg;  // 3-pixel bar
  for (int y = 5; y < 8; ++y)
    for (int x = 5; x < 7; ++x) m.at(y, x, 0) = kFg;  // 6-pixel block
  const Mask lcc = largest_component(m);
  CHECK(mask_area(lcc) == 6u);
  CHECK(is_fg(lcc, 6, 5));
  CHECK_FALSE(is_fg(lcc, 1, 1));
  CHECK(mask_area(largest_component(make_mask(4, 4))) == 0u);

  Mask ring = make_mask(7, 7);
  for (int i = 1; i <= 5; ++i) {
    ring.at(1, i, 0) = kFg;
    ring.at(5, i, 0) = kFg;
    ring.at(i, 1, 0) = kFg;
    ring.at(i, 5, 0) = kFg;
  }
  const Mask filled = fill_holes(ring);
  CHECK(mask_area(filled) == 25u);  // 5x5 solid block
  CHECK(is_fg(filled, 3, 3));
  CHECK_FALSE(is_fg(filled, 0, 0));
}

TEST_CASE("lesion sampling") {
  SUBCASE("procedural blobs stay within area bounds") {
    const LesionPrior prior;  // defaults target 64 px images
    for (int i = 0; i < 300; ++i) {
      vcx::Rng rng(1000 + static_cast<std::uint64_t>(i));
      const Mask m = sample_lesion_mask(rng, prior, 64, 64);
      const double frac = static_cast<double>(mask_area(m)) / (64.0 * 64.0);
      REQUIRE(frac >= prior.area_min);
      REQUIRE(frac <= prior.area_max);
      REQUIRE(masks_equal(largest_component(m), m));  // single component
      REQUIRE(masks_equal(fill_holes(m), m));         // no holes
    }
  }
  SUBCASE("directory mode with one file always returns it") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "vcx_lesion_masks";
    fs::create_directories(dir);
    const Mask want = disk_mask(32, 16, 16, 9);
    vcx::io::write_png((dir / "only.png").string(), want);

    LesionPrior prior;
    prior.source = LesionPrior::Source::kMaskDir;
    prior.mask_dir = dir.string();
    for (int i = 0; i < 5; ++i) {
      vcx::Rng rng(static_cast<std::uint64_t>(i));
      CHECK(masks_equal(sample_lesion_mask(rng, prior, 32, 32), want));
    }
    fs::remove_all(dir);

    prior.mask_dir = (dir / "nope").string();
    vcx::Rng rng(0);
    CHECK_THROWS_AS(sample_lesion_mask(rng, prior, 32, 32), std::runtime_error);
  }
}

TEST_CASE("background uses two consecutive tones plus jitter") {
  GenConfig cfg = small_config(64, 28);
  vcx::Rng rng(77);
  const vcx::io::ImageU8 img = gen_background(rng, cfg);

  const auto pixel_near = [&](int y, int x, const Rgb& tone) {
    for (int c = 0; c < 3; ++c) {
      const int d = static_cast<int>(img.at(y, x, c)) - tone[c];
      if (d < -cfg.bg_jitter || d > cfg.bg_jitter) return false;
    }
    return true;
  };
  bool some_pair_covers = false;
  for (int i = 0; i + 1 < kPaletteSize && !some_pair_covers; ++i) {
    bool all = true;
    for (int y = 0; y < img.height && all; ++y)
      for (int x = 0; x < img.width && all; ++x)
        all = pixel_near(y, x, cfg.palette.tones[static_cast<std::size_t>(i)]) ||
              pixel_near(y, x, cfg.palette.tones[static_cast<std::size_t>(i) + 1]);
    some_pair_covers = all;
  }
  CHECK(some_pair_covers);

  vcx::Rng r1(9), r2(9);
  CHECK(gen_background(r1, cfg).pixels == gen_background(r2, cfg).pixels);
}

TEST_CASE("lesion painting") {
  GenConfig cfg = small_config(48, 20);
  const Mask lesion = disk_mask(48, 24, 24, 12);

  SUBCASE("single color combo claims the whole lesion") {
    vcx::Rng rng(5);
    vcx::io::ImageU8 img = gen_background(rng, cfg);
    const auto masks = apply_lesion_colors(img, lesion, nullptr, {2}, cfg, rng);
    CHECK(masks_equal(masks[2], lesion));
    for (int c = 0; c < kColorCount; ++c)
      if (c != 2) CHECK(mask_area(masks[static_cast<std::size_t>(c)]) == 0u);
    // Painted pixels sit within the jitter box of the black anchor.
    const Rgb anchor = cfg.bank.colors[2].anchor;
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x)
        if (is_fg(lesion, y, x))
          for (int c = 0; c < 3; ++c) {
            const int d = static_cast<int>(img.at(y, x, c)) - anchor[c];
            REQUIRE(d >= -cfg.bank.colors[2].jitter);
            REQUIRE(d <= cfg.bank.colors[2].jitter);
          }
  }

  SUBCASE("invalid combos throw") {
    vcx::Rng rng(6);
    vcx::io::ImageU8 img = gen_background(rng, cfg);
    CHECK_THROWS_AS(apply_lesion_colors(img, lesion, nullptr, {}, cfg, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_lesion_colors(img, lesion, nullptr, {0, 6}, cfg, rng),
                    std::invalid_argument);
  }

  SUBCASE("two color combos rarely drop the second color") {
    int both = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      vcx::Rng rng(40000 + static_cast<std::uint64_t>(i));
      const Mask blob = sample_lesion_mask(rng, GenConfig{}.prior, 48, 48);
      vcx::io::ImageU8 img = gen_background(rng, cfg);
      const auto masks = apply_lesion_colors(img, blob, nullptr, {1, 3}, cfg, rng);
      if (mask_area(masks[1]) > 0 && mask_area(masks[3]) > 0) ++both;
    }
    CHECK(both >= 981);  // 0.99 success, minus 3 binomial sigma at n=1000
  }
}

TEST_CASE("derived masks") {
  SUBCASE("empty in, empty out") {
    std::array<Mask, kColorCount> empty;
    for (auto& m : empty) m = make_mask(16, 16);
    const auto [lesion, border] = derive_masks(empty, 2);
    CHECK(mask_area(lesion) == 0u);
    CHECK(mask_area(border) == 0u);
  }
  SUBCASE("full frame border is the frame edge band") {
    std::array<Mask, kColorCount> masks;
    for (auto& m : masks) m = make_mask(16, 16);
    masks[0] = make_mask(16, 16, kFg);
    const auto [lesion, border] = derive_masks(masks, 2);
    CHECK(mask_area(lesion) == 256u);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const int edge = std::min(std::min(y, x), std::min(15 - y, 15 - x));
        CHECK(is_fg(border, y, x) == (edge < 2));
      }
  }
  SUBCASE("disk border area matches the ring estimate") {
    std::array<Mask, kColorCount> masks;
    for (auto& m : masks) m = make_mask(40, 40);
    masks[0] = disk_mask(40, 20, 20, 10);
    const auto [lesion, border] = derive_masks(masks, 1);
    (void)lesion;
    const double want = 2.0 * 3.14159265 * 10.0 * 2.0;  // circumference times band width
    const auto got = static_cast<double>(mask_area(border));
    CHECK(got > want * 0.8);
    CHECK(got < want * 1.2);
  }
}

TEST_CASE("sample invariants hold across seeds") {
  const GenConfig cfg = small_config(32, 14);
  for (int i = 0; i < 300; ++i) {
    const SynSample s = generate_sample(cfg, vcx::mix_seed(7, static_cast<std::uint64_t>(i)));
    check_sample_invariants(s);
    REQUIRE(mask_area(s.lesion_mask) > 0u);
    REQUIRE(mask_area(s.border_mask) > 0u);
    REQUIRE(s.combo >= 0);
    REQUIRE(s.combo < static_cast<int>(cfg.bank.combos.size()));
  }

  const SynSample a = generate_sample(cfg, 12345);
  const SynSample b = generate_sample(cfg, 12345);
  CHECK(a.image.pixels == b.image.pixels);
  CHECK(masks_equal(a.lesion_mask, b.lesion_mask));
  for (int c = 0; c < kColorCount; ++c)
    CHECK(masks_equal(a.color_masks[static_cast<std::size_t>(c)], b.color_masks[static_cast<std::size_t>(c)]));
}

TEST_CASE("empirical marginals track configured weights") {
  const GenConfig cfg = small_config(32, 14);
  const auto implied = cfg.bank.implied_marginals();
  const int n = 1200;
  std::array<int, kColorCount> counts{};
  for (int i = 0; i < n; ++i) {
    const SynSample s = generate_sample(cfg, vcx::mix_seed(2024, static_cast<std::uint64_t>(i)));
    for (int c = 0; c < kColorCount; ++c) counts[static_cast<std::size_t>(c)] += s.labels[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < kColorCount; ++c) {
    const double p = implied[static_cast<std::size_t>(c)];
    const double freq = static_cast<double>(counts[static_cast<std::size_t>(c)]) / n;
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(freq - p) < 3 * sigma + 1e-12);
  }
}

TEST_CASE("dataset generation layout and determinism") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "vcx_synskin_ds";
  fs::remove_all(base);
  const GenConfig cfg = small_config(32, 14);

  SUBCASE("count zero writes an empty dataset") {
    const auto manifest = generate_dataset(cfg, 0, 1, (base / "empty").string());
    CHECK(manifest["count"] == 0);
    CHECK(manifest["samples"].empty());
    const auto csv = vcx::io::read_csv((base / "empty" / "labels.csv").string());
    REQUIRE(csv.size() == 1u);
  }

  SUBCASE("layout, labels, and byte-identical regeneration") {
    const int count = 10;
    const std::uint64_t master = 99;
    const auto manifest = generate_dataset(cfg, count, master, (base / "a").string());
    CHECK(manifest["count"] == count);
    CHECK(manifest["master_seed"] == master);

    const auto csv = vcx::io::read_csv((base / "a" / "labels.csv").string());
    REQUIRE(csv.size() == static_cast<std::size_t>(count) + 1);
    CHECK(csv[0] == std::vector<std::string>{"index", "light_brown", "dark_brown", "black",
                                             "blue_gray", "red", "white", "combo", "seed"});
    for (int i = 0; i < count; ++i)
      CHECK(csv[static_cast<std::size_t>(i) + 1][8] ==
            std::to_string(vcx::mix_seed(master, static_cast<std::uint64_t>(i))));

    // A stored mask matches the sample regenerated from its seed, and mask
    // PNGs are strictly binary.
    const SynSample s3 = generate_sample(cfg, vcx::mix_seed(master, 3));
    const auto stored =
        vcx::io::read_png((base / "a" / "masks" / "color" / "dark_brown" / "000003.png").string());
    CHECK(stored.pixels == s3.color_masks[1].pixels);
    for (std::uint8_t v : stored.pixels) REQUIRE((v == 0 || v == 255));

    generate_dataset(cfg, count, master, (base / "b").string());
    int compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), base / "a");
      std::ifstream fa(e.path(), std::ios::binary);
      std::ifstream fb(base / "b" / rel, std::ios::binary);
      REQUIRE(fb.good());
      const std::string da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
      const std::string db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
      REQUIRE(da == db);
      ++compared;
    }
    CHECK(compared == count * 9 + 2);  // image + 8 masks per sample, labels.csv, manifest
  }

  fs::remove_all(base);
}
