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

#ifndef VCX_MODEL_MODEL_HPP_
#define VCX_MODEL_MODEL_HPP_

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vcx/model/config.hpp"
#include "vcx/model/params.hpp"
#include "vcx/model/text_bank.hpp"
#include "vcx/nn/tape.hpp"
#include "vcx/util/rng.hpp"

namespace vcx::model {

template <typename S>
nn::TensorT<S> cast_tensor(const nn::TensorT<float>& x) {
  nn::TensorT<S> out(x.shape());
  for (size_t i = 0; i < x.numel(); ++i) out[i] = static_cast<S>(x[i]);
  return out;
}

/// Attention weights captured during a forward pass, one tensor per layer with
/// shape [heads, queries, keys]. Rows are post-softmax and sum to 1.
template <typename S>
struct AttentionTraceT {
  std::vector<nn::TensorT<S>> patch_attn;   // [heads, M, M] per self-attention layer
  std::vector<nn::TensorT<S>> text_attn;    // [heads, C, M] per text cross-attention layer
  std::vector<nn::TensorT<S>> visual_attn;  // [heads, C, M] per concept attention layer
};

template <typename S>
struct ForwardT {
  nn::ValT<S> y_vc;         // [C] visual-token branch logits
  nn::ValT<S> y_p;          // [C] patch CAM branch logits
  nn::ValT<S> y_tc;         // [C] text branch logits; valid iff has_text
  nn::ValT<S> mean_logits;  // [C] mean of present branches
  nn::ValT<S> probs;        // [C] sigmoid(mean_logits)
  nn::ValT<S> t_out;        // [(2C+M) x D] normalized output sequence
  nn::ValT<S> f_out_p;      // [N, N, C] CAM map before pooling
  std::vector<nn::ValT<S>> visual_layer_tokens;  // [C x D] after each concept layer
  AttentionTraceT<S> trace;
  bool has_text = false;
};

/// The multi-concept token transformer. Three decoupled stages over a tape:
/// patch self-attention, text-token cross-attention (text reads patches, patch
/// tokens unchanged), and visual concept attention (concept tokens read
/// patches). Concept logits come from channel-wise means of the normalized
/// output tokens and from a convolutional head over the patch grid.
template <typename S>
class ModelT {
 public:
  ModelT(ModelConfig cfg, TextConceptBank bank, uint64_t init_seed)
      : cfg_(cfg), bank_(std::move(bank)) {
    cfg_.validate();
    if (uses_text_bank(cfg_.variant)) {
      if (bank_.concepts() != cfg_.concepts)
        throw std::invalid_argument("text bank rows do not match model concepts");
      if (bank_.text_dim() != cfg_.text_dim)
        throw std::invalid_argument("text bank width does not match model text_dim");
    }
    init_params(init_seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStoreT<S>& params() { return params_; }
  const ParamStoreT<S>& params() const { return params_; }
  const TextConceptBank& bank() const { return bank_; }

  /// Row-major patch matrix [M x patch_size^2*3] feeding the embedding.
  static nn::TensorT<S> extract_patches(const nn::TensorT<S>& image, const ModelConfig& cfg) {
    if (image.rank() != 3 || image.dim(0) != cfg.image_size ||
        image.dim(1) != cfg.image_size || image.dim(2) != 3)
      throw std::invalid_argument("image shape does not match model config: got " +
                                  nn::TensorT<S>::shape_str(image.shape()));
    const int n = cfg.grid(), ps = cfg.patch_size;
    nn::TensorT<S> out({n * n, ps * ps * 3});
    for (int pi = 0; pi < n; ++pi)
      for (int pj = 0; pj < n; ++pj) {
        S* row = out.data() + static_cast<size_t>(pi * n + pj) * out.cols();
        size_t k = 0;
        for (int y = 0; y < ps; ++y)
          for (int x = 0; x < ps; ++x)
            for (int c = 0; c < 3; ++c)
              row[k++] = image.at3(pi * ps + y, pj * ps + x, c);
      }
    return out;
  }

  ForwardT<S> forward(nn::TapeT<S>& tape, const nn::TensorT<S>& image,
                      bool record_trace = false) {
    leaf_cache_.clear();
    tape_ = &tape;
    ForwardT<S> out;
    out.has_text = uses_text_stage(cfg_.variant);
    const int c = cfg_.concepts, m = cfg_.patch_count();

    // Patch embedding plus learnable positional embedding.
    auto patches = tape.constant(extract_patches(image, cfg_));
    auto x_p = add(add_rowvec(matmul(patches, leaf("patch_embed.w")), leaf("patch_embed.b")),
                   leaf("pos_embed"));

    for (int i = 0; i < cfg_.layers_patch; ++i)
      x_p = self_block(x_p, "s1." + std::to_string(i),
                       record_trace ? &out.trace.patch_attn : nullptr);

    // Projected text tokens; shared by the text stage and token fusion.
    nn::ValT<S> t_tc;
    if (uses_text_bank(cfg_.variant)) {
      auto raw = tape.constant(cast_tensor<S>(bank_.raw));
      t_tc = cfg_.train_text_projection
                 ? matmul(raw, leaf("text.wp"))
                 : tape.constant(cast_tensor<S>(bank_.projected_frozen));
    }

    nn::ValT<S> text_out;
    if (out.has_text) {
      text_out = t_tc;
      for (int i = 0; i < cfg_.layers_text; ++i)
        text_out = cross_block(text_out, x_p, "s2." + std::to_string(i),
                               record_trace ? &out.trace.text_attn : nullptr);
    } else {
      text_out = tape.constant(nn::TensorT<S>({c, cfg_.dim}));
    }

    auto v = leaf("visual_tokens");
    if (uses_token_fusion(cfg_.variant)) v = add(v, t_tc);
    for (int i = 0; i < cfg_.layers_visual; ++i) {
      v = cross_block(v, x_p, "s3." + std::to_string(i),
                      record_trace ? &out.trace.visual_attn : nullptr);
      out.visual_layer_tokens.push_back(v);
    }

    out.t_out = layer_norm(nn::concat_rows<S>({v, text_out, x_p}), leaf("out_ln.g"),
                           leaf("out_ln.b"));
    out.y_vc = row_mean(slice_rows(out.t_out, 0, c));
    if (out.has_text) out.y_tc = row_mean(slice_rows(out.t_out, c, 2 * c));
    auto patch_norm = slice_rows(out.t_out, 2 * c, 2 * c + m);

    const int n = cfg_.grid();
    out.f_out_p = conv2d_same(reshape(patch_norm, {n, n, cfg_.dim}), leaf("cam.w"),
                              leaf("cam.b"));
    out.y_p = pool_spatial(out.f_out_p, cfg_.pooling, static_cast<S>(cfg_.pool_decay));

    if (out.has_text) {
      out.mean_logits = scale(add(add(out.y_vc, out.y_p), out.y_tc), S(1) / S(3));
    } else {
      out.mean_logits = scale(add(out.y_vc, out.y_p), S(1) / S(2));
    }
    out.probs = sigmoid(out.mean_logits);
    tape_ = nullptr;
    return out;
  }

 private:
  nn::ValT<S> leaf(const std::string& name) {
    auto it = leaf_cache_.find(name);
    if (it != leaf_cache_.end()) return it->second;
    auto v = tape_->leaf(params_.value(name), params_.grad(name).data());
    leaf_cache_.emplace(name, v);
    return v;
  }

  // Pre-norm residual block with per-channel residual scaling on both the
  // attention branch and the MLP branch.
  nn::ValT<S> self_block(nn::ValT<S> x, const std::string& p,
                         std::vector<nn::TensorT<S>>* trace_out) {
    auto xn = layer_norm(x, leaf(p + ".ln1.g"), leaf(p + ".ln1.b"));
    auto qkv = add_rowvec(matmul(xn, leaf(p + ".qkv.w")), leaf(p + ".qkv.b"));
    const int d = cfg_.dim;
    auto attn = multihead(qkv, qkv, 0, d, 2 * d, trace_out);
    auto proj = add_rowvec(matmul(attn, leaf(p + ".proj.w")), leaf(p + ".proj.b"));
    x = add(x, mul_rowvec(proj, leaf(p + ".ls1")));
    x = add(x, mul_rowvec(mlp(x, p), leaf(p + ".ls2")));
    return x;
  }

  // Cross-attention block: queries from x_q, keys/values from x_kv, which is
  // left untouched. Each block normalizes both inputs with its own params.
  nn::ValT<S> cross_block(nn::ValT<S> x_q, nn::ValT<S> x_kv, const std::string& p,
                          std::vector<nn::TensorT<S>>* trace_out) {
    auto qn = layer_norm(x_q, leaf(p + ".lnq.g"), leaf(p + ".lnq.b"));
    auto kvn = layer_norm(x_kv, leaf(p + ".lnkv.g"), leaf(p + ".lnkv.b"));
    auto q = add_rowvec(matmul(qn, leaf(p + ".q.w")), leaf(p + ".q.b"));
    auto kv = add_rowvec(matmul(kvn, leaf(p + ".kv.w")), leaf(p + ".kv.b"));
    auto attn = multihead(q, kv, 0, 0, cfg_.dim, trace_out);
    auto proj = add_rowvec(matmul(attn, leaf(p + ".proj.w")), leaf(p + ".proj.b"));
    x_q = add(x_q, mul_rowvec(proj, leaf(p + ".ls1")));
    x_q = add(x_q, mul_rowvec(mlp(x_q, p), leaf(p + ".ls2")));
    return x_q;
  }

  // Shared multi-head attention core. Queries come from columns
  // [q_off, q_off+D) of q_src; keys and values from columns k_off / v_off of
  // kv_src. Records one [heads x Tq x Tk] tensor per call when requested.
  nn::ValT<S> multihead(nn::ValT<S> q_src, nn::ValT<S> kv_src, int q_off, int k_off,
                        int v_off, std::vector<nn::TensorT<S>>* trace_out) {
    const int h = cfg_.heads, dh = cfg_.dim / cfg_.heads;
    const int tq = q_src.value().rows(), tk = kv_src.value().rows();
    const S inv_sqrt = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));
    std::vector<nn::ValT<S>> heads;
    nn::TensorT<S> rec({h, tq, tk});
    for (int hd = 0; hd < h; ++hd) {
      auto qh = slice_cols(q_src, q_off + hd * dh, q_off + (hd + 1) * dh);
      auto kh = slice_cols(kv_src, k_off + hd * dh, k_off + (hd + 1) * dh);
      auto vh = slice_cols(kv_src, v_off + hd * dh, v_off + (hd + 1) * dh);
      auto a = softmax_rows(scale(matmul(qh, transpose2d(kh)), inv_sqrt));
      if (trace_out) {
        const auto& av = a.value();
        std::copy(av.data(), av.data() + av.numel(),
                  rec.data() + static_cast<size_t>(hd) * tq * tk);
      }
      heads.push_back(matmul(a, vh));
    }
    if (trace_out) trace_out->push_back(std::move(rec));
    return concat_cols(heads);
  }

  nn::ValT<S> mlp(nn::ValT<S> x, const std::string& p) {
    auto xn = layer_norm(x, leaf(p + ".ln2.g"), leaf(p + ".ln2.b"));
    auto h = gelu(add_rowvec(matmul(xn, leaf(p + ".fc1.w")), leaf(p + ".fc1.b")));
    return add_rowvec(matmul(h, leaf(p + ".fc2.w")), leaf(p + ".fc2.b"));
  }

  void init_params(uint64_t seed) {
    Rng rng(seed);
    const int d = cfg_.dim, c = cfg_.concepts, m = cfg_.patch_count();
    const int hidden = 4 * d, pdim = cfg_.patch_size * cfg_.patch_size * 3;
    auto normal = [&](nn::TensorT<S>& t) {
      for (size_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<S>(rng.trunc_normal(0.02));
    };
    auto ones = [](nn::TensorT<S>& t) { t.fill(S(1)); };

    normal(params_.create("patch_embed.w", {pdim, d}));
    params_.create("patch_embed.b", {d});
    normal(params_.create("pos_embed", {m, d}));
    normal(params_.create("visual_tokens", {c, d}));
    if (uses_text_bank(cfg_.variant)) {
      auto& wp = params_.create("text.wp", {cfg_.text_dim, d});
      for (size_t i = 0; i < wp.numel(); ++i)
        wp[i] = static_cast<S>(bank_.projection_init[i]);
    }
    auto make_common = [&](const std::string& p) {
      params_.create(p + ".ls1", {d}).fill(static_cast<S>(cfg_.layer_scale_init));
      ones(params_.create(p + ".ln2.g", {d}));
      params_.create(p + ".ln2.b", {d});
      normal(params_.create(p + ".fc1.w", {d, hidden}));
      params_.create(p + ".fc1.b", {hidden});
      normal(params_.create(p + ".fc2.w", {hidden, d}));
      params_.create(p + ".fc2.b", {d});
      params_.create(p + ".ls2", {d}).fill(static_cast<S>(cfg_.layer_scale_init));
    };
    for (int i = 0; i < cfg_.layers_patch; ++i) {
      const std::string p = "s1." + std::to_string(i);
      ones(params_.create(p + ".ln1.g", {d}));
      params_.create(p + ".ln1.b", {d});
      normal(params_.create(p + ".qkv.w", {d, 3 * d}));
      params_.create(p + ".qkv.b", {3 * d});
      normal(params_.create(p + ".proj.w", {d, d}));
      params_.create(p + ".proj.b", {d});
      make_common(p);
    }
    auto make_cross = [&](const std::string& p) {
      ones(params_.create(p + ".lnq.g", {d}));
      params_.create(p + ".lnq.b", {d});
      ones(params_.create(p + ".lnkv.g", {d}));
      params_.create(p + ".lnkv.b", {d});
      normal(params_.create(p + ".q.w", {d, d}));
      params_.create(p + ".q.b", {d});
      normal(params_.create(p + ".kv.w", {d, 2 * d}));
      params_.create(p + ".kv.b", {2 * d});
      normal(params_.create(p + ".proj.w", {d, d}));
      params_.create(p + ".proj.b", {d});
      make_common(p);
    };
    if (uses_text_stage(cfg_.variant))
      for (int i = 0; i < cfg_.layers_text; ++i) make_cross("s2." + std::to_string(i));
    for (int i = 0; i < cfg_.layers_visual; ++i) make_cross("s3." + std::to_string(i));
    ones(params_.create("out_ln.g", {d}));
    params_.create("out_ln.b", {d});
    normal(params_.create("cam.w", {cfg_.cam_kernel, cfg_.cam_kernel, d, c}));
    params_.create("cam.b", {c});
  }

  ModelConfig cfg_;
  TextConceptBank bank_;
  ParamStoreT<S> params_;
  nn::TapeT<S>* tape_ = nullptr;
  std::map<std::string, nn::ValT<S>> leaf_cache_;
};

using Model = ModelT<float>;

}  // namespace vcx::model

#endif  // VCX_MODEL_MODEL_HPP_
