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

#ifndef VCX_MODEL_CONFIG_HPP_
#define VCX_MODEL_CONFIG_HPP_

#include <stdexcept>
#include <string>

#include "vcx/nn/tape.hpp"

namespace vcx::model {

enum class Variant { kBaseline, kTokenFusion, kTextGuided, kHybrid };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kTokenFusion: return "token-fusion";
    case Variant::kTextGuided: return "text-guided";
    case Variant::kHybrid: return "hybrid";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "baseline") return Variant::kBaseline;
  if (s == "token-fusion") return Variant::kTokenFusion;
  if (s == "text-guided") return Variant::kTextGuided;
  if (s == "hybrid") return Variant::kHybrid;
  throw std::invalid_argument("unknown model variant: " + s);
}

/// Whether the variant runs the text cross-attention stage (and so produces a
/// text logit branch).
inline bool uses_text_stage(Variant v) {
  return v == Variant::kTextGuided || v == Variant::kHybrid;
}

/// Whether the visual concept tokens are enriched with the projected text
/// tokens before the concept-attention stage.
inline bool uses_token_fusion(Variant v) {
  return v == Variant::kTokenFusion || v == Variant::kHybrid;
}

inline bool uses_text_bank(Variant v) {
  return uses_text_stage(v) || uses_token_fusion(v);
}

struct ModelConfig {
  int image_size = 64;   // square input, pixels
  int patch_size = 8;
  int concepts = 6;      // C
  int dim = 128;         // token embedding width D
  int heads = 4;
  int layers_patch = 6;  // self-attention stage depth
  int layers_text = 2;   // text cross-attention stage depth
  int layers_visual = 2; // visual concept attention stage depth
  int text_dim = 64;     // raw text-embedding width fed to the projection
  Variant variant = Variant::kHybrid;
  nn::PoolKind pooling = nn::PoolKind::kGmp;
  float pool_decay = 0.9f;
  int cam_kernel = 3;
  float layer_scale_init = 1e-4f;
  // When set, the text projection receives gradients and the projected text
  // tokens are recomputed from it every forward; when clear they are frozen at
  // bank construction.
  bool train_text_projection = true;

  int grid() const { return image_size / patch_size; }
  int patch_count() const { return grid() * grid(); }
  int total_layers() const { return layers_patch + layers_text + layers_visual; }
  int seq_len() const { return 2 * concepts + patch_count(); }

  void validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
      throw std::invalid_argument("model config: image size must be a positive multiple of patch size");
    if (dim <= 0 || heads <= 0 || dim % heads != 0)
      throw std::invalid_argument("model config: embedding dim must be a positive multiple of heads");
    if (concepts < 1) throw std::invalid_argument("model config: concepts must be >= 1");
    if (layers_patch < 1 || layers_visual < 1 || layers_text < 0)
      throw std::invalid_argument("model config: needs >= 1 patch layer and >= 1 visual layer");
    if (uses_text_stage(variant) && layers_text < 1)
      throw std::invalid_argument("model config: text-guided variants need text layers");
    if (text_dim < 1) throw std::invalid_argument("model config: text_dim must be >= 1");
    if (cam_kernel < 1 || cam_kernel % 2 == 0)
      throw std::invalid_argument("model config: cam kernel must be odd");
    if (!(pool_decay > 0.f && pool_decay <= 1.f))
      throw std::invalid_argument("model config: pool decay must lie in (0,1]");
  }
};

/// Index ranges of the output token sequence.
struct TokenLayout {
  int visual_begin = 0, visual_end = 0;
  int text_begin = 0, text_end = 0;
  int patch_begin = 0, patch_end = 0;

  static TokenLayout of(const ModelConfig& cfg) {
    TokenLayout l;
    l.visual_begin = 0;
    l.visual_end = cfg.concepts;
    l.text_begin = cfg.concepts;
    l.text_end = 2 * cfg.concepts;
    l.patch_begin = 2 * cfg.concepts;
    l.patch_end = 2 * cfg.concepts + cfg.patch_count();
    return l;
  }
};

}  // namespace vcx::model

#endif  // VCX_MODEL_CONFIG_HPP_
