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

#ifndef VCX_HARNESS_DATASET_HPP_
#define VCX_HARNESS_DATASET_HPP_

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vcx/harness/errors.hpp"
#include "vcx/io/csv.hpp"
#include "vcx/io/png.hpp"
#include "vcx/nn/tensor.hpp"

namespace vcx::harness {

/// A generated dataset directory loaded into memory: RGB images stay as bytes
/// (converted to float per use), labels come from labels.csv, segmentation
/// masks are loaded on demand. Concept names and order come from the label
/// header, columns between `index` and `combo`.
struct Dataset {
  std::string root;
  int image_size = 0;
  std::vector<std::string> concepts;
  std::vector<std::string> names;         // per-sample file stem, e.g. "000013"
  std::vector<std::vector<int>> labels;   // n rows of concepts.size() 0/1 flags
  std::vector<io::ImageU8> images;        // n RGB images, all image_size square

  size_t size() const { return names.size(); }

  std::string image_path(size_t i) const {
    return root + "/images/" + names[i] + ".png";
  }
  std::string lesion_mask_path(size_t i) const {
    return root + "/masks/lesion/" + names[i] + ".png";
  }
  std::string color_mask_path(size_t i, const std::string& concept_name) const {
    return root + "/masks/color/" + concept_name + "/" + names[i] + ".png";
  }
};

/// Image bytes to float HWC in [0, 1].
inline nn::TensorT<float> to_float_image(const io::ImageU8& img) {
  nn::TensorT<float> out({img.height, img.width, img.channels});
  for (size_t i = 0; i < img.pixels.size(); ++i)
    out[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  return out;
}

/// Horizontal mirror of an HWC float image.
inline nn::TensorT<float> flip_horizontal(const nn::TensorT<float>& img) {
  const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
  nn::TensorT<float> out(img.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) out.at3(y, x, k) = img.at3(y, w - 1 - x, k);
  return out;
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir);
  const std::string csv_path = dir + "/labels.csv";
  std::vector<std::vector<std::string>> rows;
  try {
    rows = io::read_csv(csv_path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  if (rows.empty()) throw DataError("labels file has no header: " + csv_path);
  const auto& header = rows[0];
  if (header.size() < 4 || header[0] != "index" ||
      header[header.size() - 2] != "combo" || header.back() != "seed")
    throw DataError("labels header must be index,<concepts...>,combo,seed: " + csv_path);

  Dataset ds;
  ds.root = dir;
  ds.concepts.assign(header.begin() + 1, header.end() - 2);
  const size_t c = ds.concepts.size();
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw DataError("labels row " + std::to_string(r) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(header.size()) + ": " + csv_path);
    std::vector<int> lab(c);
    for (size_t j = 0; j < c; ++j) {
      const std::string& f = row[j + 1];
      if (f != "0" && f != "1")
        throw DataError("labels row " + std::to_string(r) + " column " +
                        ds.concepts[j] + " is not 0/1: " + csv_path);
      lab[j] = f == "1" ? 1 : 0;
    }
    char stem[16];
    std::snprintf(stem, sizeof(stem), "%06d", std::stoi(row[0]));
    ds.names.push_back(stem);
    ds.labels.push_back(std::move(lab));
  }

  ds.images.reserve(ds.names.size());
  for (size_t i = 0; i < ds.names.size(); ++i) {
    io::ImageU8 img;
    try {
      img = io::read_png(ds.image_path(i));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    if (img.channels != 3 || img.width != img.height)
      throw DataError("dataset image must be square RGB: " + ds.image_path(i));
    if (ds.image_size == 0) ds.image_size = img.width;
    if (img.width != ds.image_size)
      throw DataError("dataset images disagree on size: " + ds.image_path(i));
    ds.images.push_back(std::move(img));
  }
  return ds;
}

/// Label matrix as floats, for the classification metrics.
inline nn::TensorT<float> label_matrix(const Dataset& ds) {
  const int n = static_cast<int>(ds.size());
  const int c = static_cast<int>(ds.concepts.size());
  nn::TensorT<float> out({n, c});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) out.at2(i, j) = static_cast<float>(ds.labels[i][j]);
  return out;
}

inline bool has_color_masks(const Dataset& ds) {
  return std::filesystem::is_directory(ds.root + "/masks/color");
}

/// Binary ground-truth mask for one (sample, concept) pair.
inline io::ImageU8 load_color_mask(const Dataset& ds, size_t i,
                                   const std::string& concept_name) {
  try {
    return io::read_png(ds.color_mask_path(i, concept_name));
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

inline io::ImageU8 load_lesion_mask(const Dataset& ds, size_t i) {
  try {
    return io::read_png(ds.lesion_mask_path(i));
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

}  // namespace vcx::harness

#endif  // VCX_HARNESS_DATASET_HPP_
