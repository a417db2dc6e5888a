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

// Per-concept localization maps assembled from a recorded attention trace:
// concept-to-patch attention averaged over heads and layers, fused across the
// visual and text branches by elementwise sum, gated by the rectified patch
// CAM by elementwise product, smoothed by row-normalized patch-to-patch
// attention, then bilinearly upsampled and min-max normalized per concept.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcx/io/png.hpp"
#include "vcx/model/model.hpp"
#include "vcx/nn/tensor.hpp"

namespace vcx::xmap {

using nn::TensorT;

enum class Branch { kVisual, kText };

// Maps carried through the pipeline are N x N x C tensors. The normalized
// flag flips once upsample_normalize has mapped each channel to [0,1].
struct ConceptMaps {
  TensorT<float> values;  // H x W x C
  bool normalized = false;
};

namespace detail {

inline void check_same_shape(const TensorT<float>& a, const TensorT<float>& b,
                             const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                TensorT<float>::shape_str(a.shape()) + " vs " +
                                TensorT<float>::shape_str(b.shape()));
}

}  // namespace detail

// Concept-to-patch attention averaged over heads and over the branch's
// layers, reshaped C x M to N x N x C. Each trace entry is heads x C x M.
inline TensorT<float> extract_concept_attention(
    const model::AttentionTraceT<float>& trace, Branch branch, int grid) {
  const auto& layers = branch == Branch::kVisual ? trace.visual_attn : trace.text_attn;
  if (layers.empty())
    throw std::invalid_argument(
        "extract_concept_attention: trace has no layers for this branch");
  const int heads = static_cast<int>(layers[0].dim(0));
  const int concepts = static_cast<int>(layers[0].dim(1));
  const int patches = static_cast<int>(layers[0].dim(2));
  if (patches != grid * grid)
    throw std::invalid_argument("extract_concept_attention: patch count " +
                                std::to_string(patches) + " is not grid " +
                                std::to_string(grid) + " squared");

  TensorT<float> out({grid, grid, concepts});
  out.fill(0.0f);
  const float inv = 1.0f / (static_cast<float>(layers.size()) * heads);
  for (const auto& layer : layers)
    for (int h = 0; h < heads; ++h)
      for (int c = 0; c < concepts; ++c)
        for (int m = 0; m < patches; ++m)
          out.at3(m / grid, m % grid, c) += inv * layer.at3(h, c, m);
  return out;
}

// Elementwise sum of the two branch maps. A missing text map passes the
// visual map through unchanged.
inline TensorT<float> fuse_vtc(const TensorT<float>& a_vc, const TensorT<float>* a_tc) {
  if (a_tc == nullptr) return a_vc;
  detail::check_same_shape(a_vc, *a_tc, "fuse_vtc");
  TensorT<float> out = a_vc;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] += a_tc->data()[i];
  return out;
}

// Rectifies the raw patch-CAM tensor. CAM logits can be negative; a negative
// factor inside the fusion product would invert saliency.
inline TensorT<float> rectified_cam(const TensorT<float>& f_out_p) {
  TensorT<float> out = f_out_p;
  for (std::size_t i = 0; i < out.numel(); ++i)
    if (out.data()[i] < 0) out.data()[i] = 0;
  return out;
}

// Elementwise product of the rectified CAM and the fused attention map.
inline TensorT<float> fuse_pcam(const TensorT<float>& a_pcam, const TensorT<float>& a_vtc) {
  detail::check_same_shape(a_pcam, a_vtc, "fuse_pcam");
  TensorT<float> out = a_pcam;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] *= a_vtc.data()[i];
  return out;
}

// Head-averaged patch-to-patch attention averaged over the last `use_layers`
// self-attention layers (0 selects ceil(total/2)), then row-normalized.
inline TensorT<float> affinity_from_trace(const model::AttentionTraceT<float>& trace,
                                          int use_layers = 0) {
  if (trace.patch_attn.empty())
    throw std::invalid_argument("affinity_from_trace: trace has no self-attention layers");
  const int total = static_cast<int>(trace.patch_attn.size());
  if (use_layers <= 0) use_layers = (total + 1) / 2;
  if (use_layers > total)
    throw std::invalid_argument("affinity_from_trace: requested " +
                                std::to_string(use_layers) + " layers, trace has " +
                                std::to_string(total));
  const int heads = trace.patch_attn[0].dim(0);
  const int m = trace.patch_attn[0].dim(1);

  TensorT<float> out({m, m});
  out.fill(0.0f);
  const float inv = 1.0f / (static_cast<float>(use_layers) * heads);
  for (int l = total - use_layers; l < total; ++l) {
    const auto& layer = trace.patch_attn[static_cast<std::size_t>(l)];
    for (int h = 0; h < heads; ++h)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) out.at2(i, j) += inv * layer.at3(h, i, j);
  }
  for (int i = 0; i < m; ++i) {
    double sum = 0;
    for (int j = 0; j < m; ++j) sum += out.at2(i, j);
    if (sum > 0)
      for (int j = 0; j < m; ++j) out.at2(i, j) = static_cast<float>(out.at2(i, j) / sum);
  }
  return out;
}

// Left-multiplies each flattened concept channel by the affinity matrix:
// out(i,j,c) = sum over (k,l) of affinity[(i,j),(k,l)] * maps(k,l,c).
inline TensorT<float> refine_affinity(const TensorT<float>& affinity,
                                      const TensorT<float>& maps) {
  const int n = maps.dim(0);
  const int c = maps.dim(2);
  const std::size_t m = static_cast<std::size_t>(n) * n;
  if (affinity.rank() != 2 || static_cast<std::size_t>(affinity.dim(0)) != m ||
      static_cast<std::size_t>(affinity.dim(1)) != m)
    throw std::invalid_argument("refine_affinity: affinity is " +
                                TensorT<float>::shape_str(affinity.shape()) +
                                ", maps need " + std::to_string(m) + " patches");
  TensorT<float> out(maps.shape());
  const std::size_t cc = static_cast<std::size_t>(c);
  // Each output accumulates m products; double accumulation leaves only the
  // final cast's rounding, independent of the patch count.
  std::vector<double> acc(cc);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double w = affinity.data()[i * m + k];
      for (std::size_t ch = 0; ch < cc; ++ch)
        acc[ch] += w * static_cast<double>(maps.data()[k * cc + ch]);
    }
    for (std::size_t ch = 0; ch < cc; ++ch)
      out.data()[i * cc + ch] = static_cast<float>(acc[ch]);
  }
  return out;
}

// Bilinear upsampling (corner-aligned) followed by per-concept min-max
// normalization to [0,1]. A constant channel normalizes to all zeros.
inline ConceptMaps upsample_normalize(const TensorT<float>& maps, int out_h, int out_w) {
  const int n_h = maps.dim(0);
  const int n_w = maps.dim(1);
  const int c = maps.dim(2);
  if (out_h < n_h || out_w < n_w)
    throw std::invalid_argument("upsample_normalize: target smaller than source");

  TensorT<float> up({out_h, out_w, c});
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = out_h == 1 || n_h == 1
                          ? 0.0
                          : static_cast<double>(oy) * (n_h - 1) / (out_h - 1);
    int y0 = static_cast<int>(sy);
    if (y0 > n_h - 2) y0 = n_h >= 2 ? n_h - 2 : 0;
    const double ty = n_h == 1 ? 0.0 : sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = out_w == 1 || n_w == 1
                            ? 0.0
                            : static_cast<double>(ox) * (n_w - 1) / (out_w - 1);
      int x0 = static_cast<int>(sx);
      if (x0 > n_w - 2) x0 = n_w >= 2 ? n_w - 2 : 0;
      const double tx = n_w == 1 ? 0.0 : sx - x0;
      const int y1 = n_h == 1 ? y0 : y0 + 1;
      const int x1 = n_w == 1 ? x0 : x0 + 1;
      for (int ch = 0; ch < c; ++ch) {
        const double v00 = maps.at3(y0, x0, ch);
        const double v01 = maps.at3(y0, x1, ch);
        const double v10 = maps.at3(y1, x0, ch);
        const double v11 = maps.at3(y1, x1, ch);
        const double top = v00 + (v01 - v00) * tx;
        const double bot = v10 + (v11 - v10) * tx;
        up.at3(oy, ox, ch) = static_cast<float>(top + (bot - top) * ty);
      }
    }
  }

  for (int ch = 0; ch < c; ++ch) {
    float lo = up.at3(0, 0, ch), hi = lo;
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        const float v = up.at3(y, x, ch);
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    const float span = hi - lo;
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x)
        up.at3(y, x, ch) = span > 0 ? (up.at3(y, x, ch) - lo) / span : 0.0f;
  }
  return ConceptMaps{std::move(up), true};
}

// Binary mask per concept at map >= tau, only for concepts predicted present
// (probability >= 0.5); absent concepts yield nullopt.
inline std::vector<std::optional<vcx::io::ImageU8>> threshold_maps(
    const ConceptMaps& maps, const std::vector<float>& probs, double tau) {
  if (!maps.normalized)
    throw std::invalid_argument("threshold_maps: maps must be normalized first");
  if (tau <= 0 || tau >= 1)
    throw std::invalid_argument("threshold_maps: tau must lie in (0,1)");
  const int h = maps.values.dim(0);
  const int w = maps.values.dim(1);
  const int c = maps.values.dim(2);
  if (static_cast<int>(probs.size()) != c)
    throw std::invalid_argument("threshold_maps: probability count mismatch");

  std::vector<std::optional<vcx::io::ImageU8>> out(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    if (probs[static_cast<std::size_t>(ch)] < 0.5f) continue;
    vcx::io::ImageU8 mask;
    mask.width = w;
    mask.height = h;
    mask.channels = 1;
    mask.pixels.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        mask.pixels[static_cast<std::size_t>(y) * w + x] =
            maps.values.at3(y, x, ch) >= tau ? 255 : 0;
    out[static_cast<std::size_t>(ch)] = std::move(mask);
  }
  return out;
}

// One concept channel as an 8-bit grayscale image, values round(255 * map).
inline vcx::io::ImageU8 map_channel_to_gray(const ConceptMaps& maps, int channel) {
  if (!maps.normalized)
    throw std::invalid_argument("map_channel_to_gray: maps must be normalized first");
  const int h = maps.values.dim(0);
  const int w = maps.values.dim(1);
  vcx::io::ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = maps.values.at3(y, x, channel);
      const int g = static_cast<int>(std::lround(255.0 * (v < 0 ? 0 : (v > 1 ? 1 : v))));
      img.pixels[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(g);
    }
  return img;
}

// Full per-image pipeline from a recorded forward trace. f_out_p is the raw
// patch-CAM tensor from the forward pass; has_text selects branch fusion.
inline ConceptMaps build_maps(const model::AttentionTraceT<float>& trace,
                              const TensorT<float>& f_out_p, bool has_text, int grid,
                              int image_size, int affinity_layers = 0) {
  const TensorT<float> a_vc = extract_concept_attention(trace, Branch::kVisual, grid);
  TensorT<float> a_vtc;
  if (has_text) {
    const TensorT<float> a_tc = extract_concept_attention(trace, Branch::kText, grid);
    a_vtc = fuse_vtc(a_vc, &a_tc);
  } else {
    a_vtc = fuse_vtc(a_vc, nullptr);
  }
  const TensorT<float> fused = fuse_pcam(rectified_cam(f_out_p), a_vtc);
  const TensorT<float> affinity = affinity_from_trace(trace, affinity_layers);
  const TensorT<float> refined = refine_affinity(affinity, fused);
  return upsample_normalize(refined, image_size, image_size);
}

}  // namespace vcx::xmap
