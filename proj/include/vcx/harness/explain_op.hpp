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

#ifndef VCX_HARNESS_EXPLAIN_OP_HPP_
#define VCX_HARNESS_EXPLAIN_OP_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vcx/harness/config.hpp"
#include "vcx/harness/dataset.hpp"
#include "vcx/harness/errors.hpp"
#include "vcx/io/png.hpp"
#include "vcx/model/model.hpp"
#include "vcx/xmap/explain.hpp"

namespace vcx::harness {

struct ExplainOptions {
  double decision_tau = 0.5;  // maps are emitted for concepts at or above this
  int affinity_layers = 0;
};

namespace detail {

// Fixed two-stop heat ramp (black to red to yellow), alpha-blended over the
// input with opacity proportional to the map value, so cold regions keep the
// original pixels.
inline io::ImageU8 heat_overlay(const io::ImageU8& image, const nn::TensorT<float>& map2d) {
  io::ImageU8 out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const float t = std::clamp(map2d.at2(y, x), 0.0f, 1.0f);
      const float heat[3] = {std::min(1.0f, 2.0f * t), std::max(0.0f, 2.0f * t - 1.0f), 0.0f};
      const float a = 0.6f * t;
      for (int ch = 0; ch < 3; ++ch) {
        const float base = static_cast<float>(image.at(y, x, ch));
        out.at(y, x, ch) = static_cast<std::uint8_t>(
            std::lround((1.0f - a) * base + a * 255.0f * heat[ch]));
      }
    }
  return out;
}

}  // namespace detail

/// Emits per-concept map and overlay PNGs for one RGB image into out_dir,
/// only for concepts the model predicts. Returns the manifest entry.
inline json explain_image(model::Model& net, const io::ImageU8& image,
                          const std::vector<std::string>& concepts,
                          const std::string& out_dir, const std::string& stem,
                          const ExplainOptions& opts = {}) {
  namespace fs = std::filesystem;
  const auto& mc = net.config();
  if (image.channels != 3 || image.width != mc.image_size || image.height != mc.image_size)
    throw DataError("explain: image must be RGB " + std::to_string(mc.image_size) + "x" +
                    std::to_string(mc.image_size) + ": " + stem);
  if (static_cast<int>(concepts.size()) != mc.concepts)
    throw DataError("explain: concept name count does not match model");
  fs::create_directories(out_dir);

  nn::TapeT<float> tape;
  const auto fwd = net.forward(tape, to_float_image(image), /*record_trace=*/true);
  const auto maps = xmap::build_maps(fwd.trace, fwd.f_out_p.value(), fwd.has_text,
                                     mc.grid(), mc.image_size, opts.affinity_layers);

  json entry;
  entry["image"] = stem;
  json probs = json::object();
  std::vector<std::string> predicted;
  json files = json::array();
  for (int j = 0; j < mc.concepts; ++j) {
    const float p = fwd.probs.value()[static_cast<size_t>(j)];
    probs[concepts[static_cast<size_t>(j)]] = p;
    if (p < static_cast<float>(opts.decision_tau)) continue;
    predicted.push_back(concepts[static_cast<size_t>(j)]);
    const std::string map_name = stem + "." + concepts[static_cast<size_t>(j)] + ".map.png";
    const std::string ov_name = stem + "." + concepts[static_cast<size_t>(j)] + ".overlay.png";
    io::write_png(out_dir + "/" + map_name, xmap::map_channel_to_gray(maps, j));
    nn::TensorT<float> ch({mc.image_size, mc.image_size});
    for (int y = 0; y < mc.image_size; ++y)
      for (int x = 0; x < mc.image_size; ++x) ch.at2(y, x) = maps.values.at3(y, x, j);
    io::write_png(out_dir + "/" + ov_name, detail::heat_overlay(image, ch));
    files.push_back(map_name);
    files.push_back(ov_name);
  }
  entry["probs"] = probs;
  entry["predicted"] = predicted;
  entry["empty"] = predicted.empty();
  entry["files"] = files;
  return entry;
}

/// Single image file mode. The manifest records one entry.
inline json explain_file(model::Model& net, const std::vector<std::string>& concepts,
                         const std::string& image_path, const std::string& out_dir,
                         const ExplainOptions& opts = {}) {
  io::ImageU8 img;
  try {
    img = io::read_png(image_path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const std::string stem = std::filesystem::path(image_path).stem().string();
  json manifest;
  manifest["entries"] = json::array({explain_image(net, img, concepts, out_dir, stem, opts)});
  std::ofstream f(out_dir + "/manifest.json");
  if (!f) throw DataError("cannot write manifest: " + out_dir + "/manifest.json");
  f << manifest.dump(2) << "\n";
  return manifest;
}

/// Dataset mode: one entry per sample.
inline json explain_dataset(model::Model& net, const Dataset& ds, const std::string& out_dir,
                            const ExplainOptions& opts = {}) {
  if (ds.size() == 0) throw DataError("empty dataset for explain: " + ds.root);
  json manifest;
  json entries = json::array();
  for (size_t i = 0; i < ds.size(); ++i)
    entries.push_back(
        explain_image(net, ds.images[i], ds.concepts, out_dir, ds.names[i], opts));
  manifest["entries"] = entries;
  std::ofstream f(out_dir + "/manifest.json");
  if (!f) throw DataError("cannot write manifest: " + out_dir + "/manifest.json");
  f << manifest.dump(2) << "\n";
  return manifest;
}

}  // namespace vcx::harness

#endif  // VCX_HARNESS_EXPLAIN_OP_HPP_
