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

#ifndef VCX_LOSS_OBJECTIVES_HPP_
#define VCX_LOSS_OBJECTIVES_HPP_

#include <stdexcept>
#include <vector>

#include "vcx/model/model.hpp"
#include "vcx/nn/tape.hpp"

namespace vcx::loss {

struct LossWeights {
  double alpha = 1.0;  // visual branch
  double beta = 1.0;   // patch branch
  double gamma = 1.0;  // text branch
  double delta = 1.0;  // separation term

  void validate() const {
    for (double v : {alpha, beta, gamma, delta})
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("loss weights must be finite and >= 0");
  }
};

/// Which classification terms are active: per-branch losses, the mean-logit
/// loss, or both. The separation term is controlled by its weight alone.
struct LossFlags {
  bool separate = true;
  bool mean = false;
};

struct LossReport {
  double visual = 0, patch = 0, text = 0, separation = 0, mean = 0, total = 0;
  bool has_visual = false, has_patch = false, has_text = false;
  bool has_separation = false, has_mean = false;
};

namespace detail {
template <typename S>
void check_targets(const std::vector<int>& targets, size_t c) {
  if (targets.size() != c)
    throw std::invalid_argument("target count does not match logit count");
  for (int t : targets)
    if (t != 0 && t != 1) throw std::invalid_argument("targets must be 0 or 1");
}
}  // namespace detail

/// Multilabel soft margin loss over one logit vector:
/// (1/C) sum_i [ y_i softplus(-z_i) + (1-y_i) softplus(z_i) ], the stable form
/// of the negative log likelihood of independent sigmoids.
template <typename S>
nn::ValT<S> mlsm(nn::TapeT<S>& tape, nn::ValT<S> logits, const std::vector<int>& targets) {
  detail::check_targets<S>(targets, logits.value().numel());
  const size_t c = targets.size();
  nn::TensorT<S> y({static_cast<int>(c)}), ny({static_cast<int>(c)});
  for (size_t i = 0; i < c; ++i) {
    y[i] = static_cast<S>(targets[i]);
    ny[i] = static_cast<S>(1 - targets[i]);
  }
  auto pos = mul(tape.constant(std::move(y)), softplus(neg(logits)));
  auto neg_part = mul(tape.constant(std::move(ny)), softplus(logits));
  return mean_all(add(pos, neg_part));
}

/// Token-distinctiveness regularizer. Per layer: L2-normalize token rows, form
/// the token-similarity matrix, and take the mean over rows of cross-entropy
/// between each row's softmax and the identity target (its own index). The
/// layer values are averaged.
template <typename S>
nn::ValT<S> separation_loss(nn::TapeT<S>& tape, const std::vector<nn::ValT<S>>& layers) {
  if (layers.empty()) throw std::invalid_argument("separation loss needs at least one layer");
  nn::ValT<S> acc;
  for (const auto& tokens : layers) {
    if (tokens.value().rank() != 2 || tokens.value().rows() < 2)
      throw std::invalid_argument("separation loss needs >= 2 concept tokens per layer");
    auto t = l2_normalize_rows(tokens);
    auto sim = matmul(t, transpose2d(t));
    auto per_layer = neg(mean_all(diag(log_softmax_rows(sim))));
    acc = acc.valid() ? add(acc, per_layer) : per_layer;
  }
  (void)tape;
  return scale(acc, S(1) / static_cast<S>(layers.size()));
}

/// MLSM on the arithmetic mean of the given branch logit vectors.
template <typename S>
nn::ValT<S> mean_logit_loss(nn::TapeT<S>& tape, const std::vector<nn::ValT<S>>& branches,
                            const std::vector<int>& targets) {
  if (branches.empty()) throw std::invalid_argument("mean logit loss needs >= 1 branch");
  nn::ValT<S> sum = branches[0];
  for (size_t i = 1; i < branches.size(); ++i) sum = add(sum, branches[i]);
  return mlsm(tape, scale(sum, S(1) / static_cast<S>(branches.size())), targets);
}

template <typename S>
struct LossGraphT {
  nn::ValT<S> total;
  LossReport report;
};

/// Assembles the weighted training objective for one forward pass. Branch
/// terms carry their own weights; the mean-logit term, when enabled, shares
/// the visual-branch weight since both are concept-classification terms.
template <typename S>
LossGraphT<S> total_loss(nn::TapeT<S>& tape, const model::ForwardT<S>& fwd,
                         const std::vector<int>& targets, const LossWeights& w,
                         const LossFlags& flags) {
  w.validate();
  if (w.alpha == 0 && w.beta == 0 && w.gamma == 0 && w.delta == 0)
    throw std::invalid_argument("all loss weights are zero");
  LossGraphT<S> out;
  nn::ValT<S> total;
  auto push = [&](nn::ValT<S> term, double weight, double& slot, bool& flag) {
    slot = static_cast<double>(term.value()[0]);
    flag = true;
    if (weight == 0) return;
    auto scaled = scale(term, static_cast<S>(weight));
    total = total.valid() ? add(total, scaled) : scaled;
  };
  if (flags.separate) {
    push(mlsm(tape, fwd.y_vc, targets), w.alpha, out.report.visual, out.report.has_visual);
    push(mlsm(tape, fwd.y_p, targets), w.beta, out.report.patch, out.report.has_patch);
    if (fwd.has_text)
      push(mlsm(tape, fwd.y_tc, targets), w.gamma, out.report.text, out.report.has_text);
  }
  if (flags.mean) {
    std::vector<nn::ValT<S>> branches{fwd.y_vc, fwd.y_p};
    if (fwd.has_text) branches.push_back(fwd.y_tc);
    push(mean_logit_loss(tape, branches, targets), w.alpha, out.report.mean,
         out.report.has_mean);
  }
  if (!flags.separate && !flags.mean)
    throw std::invalid_argument("loss flags enable no classification term");
  push(separation_loss(tape, fwd.visual_layer_tokens), w.delta, out.report.separation,
       out.report.has_separation);
  if (!total.valid()) throw std::invalid_argument("active loss weights are all zero");
  out.total = total;
  out.report.total = static_cast<double>(total.value()[0]);
  return out;
}

}  // namespace vcx::loss

#endif  // VCX_LOSS_OBJECTIVES_HPP_
