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

// Classification, localization, and explanation-quality metrics. Pure
// functions over scores, masks, and maps; the model-dependent metrics take
// closures so they stay testable against toy models. Undefined cases (AUC on
// a single class, sparseness of an all-zero map, pointing game with an empty
// ground truth) return nullopt and are excluded from aggregates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcx/io/png.hpp"
#include "vcx/nn/tensor.hpp"

namespace vcx::metrics {

using nn::TensorT;

struct MultilabelStats {
  double acc = 0;
  double f1 = 0;  // macro average
  std::vector<double> per_concept_f1;
};

// Elementwise accuracy over all n*C decisions and macro F1 at threshold tau.
// A concept with no positives and no predicted positives scores F1 = 1; with
// positives but no correct predictions, 0.
inline MultilabelStats multilabel_stats(const TensorT<float>& scores,
                                        const TensorT<float>& labels, double tau = 0.5) {
  if (!scores.same_shape(labels))
    throw std::invalid_argument("multilabel_stats: shape mismatch " +
                                TensorT<float>::shape_str(scores.shape()) + " vs " +
                                TensorT<float>::shape_str(labels.shape()));
  const int n = scores.rows();
  const int c = scores.cols();
  if (n == 0) throw std::invalid_argument("multilabel_stats: no samples");

  MultilabelStats out;
  std::size_t correct = 0;
  double f1_sum = 0;
  for (int j = 0; j < c; ++j) {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < n; ++i) {
      const bool pred = scores.at2(i, j) >= tau;
      const bool pos = labels.at2(i, j) != 0.0f;
      if (pred && pos) ++tp;
      else if (pred && !pos) ++fp;
      else if (!pred && pos) ++fn;
      else ++tn;
    }
    correct += static_cast<std::size_t>(tp + tn);
    double f1;
    if (tp + fp + fn == 0) f1 = 1.0;  // nothing to find, nothing claimed
    else f1 = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    out.per_concept_f1.push_back(f1);
    f1_sum += f1;
  }
  out.acc = static_cast<double>(correct) / (static_cast<double>(n) * c);
  out.f1 = f1_sum / c;
  return out;
}

// Mann-Whitney AUC: probability that a random positive outranks a random
// negative, ties counting one half. Computed from tie-averaged ranks.
// nullopt when only one class is present.
inline std::optional<double> auc(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: score and label counts differ");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0 ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks across tie groups, accumulate positive ranks.
  double pos_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) pos_rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(neg));
}

struct MacroAuc {
  double mean = 0;
  std::vector<std::optional<double>> per_concept;
  int defined = 0;
};

// Per-concept AUC over an n x C score matrix, macro-averaged across concepts
// where AUC is defined.
inline MacroAuc macro_auc(const TensorT<float>& scores, const TensorT<float>& labels) {
  if (!scores.same_shape(labels))
    throw std::invalid_argument("macro_auc: shape mismatch");
  const int n = scores.rows();
  const int c = scores.cols();
  MacroAuc out;
  double sum = 0;
  for (int j = 0; j < c; ++j) {
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> l(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = scores.at2(i, j);
      l[static_cast<std::size_t>(i)] = labels.at2(i, j) != 0.0f ? 1 : 0;
    }
    const auto a = auc(s, l);
    out.per_concept.push_back(a);
    if (a.has_value()) {
      sum += *a;
      ++out.defined;
    }
  }
  out.mean = out.defined > 0 ? sum / out.defined : 0.0;
  return out;
}

// Dice overlap 2|A∩B| / (|A|+|B|); two empty masks count as a perfect match.
inline double dice(const vcx::io::ImageU8& a, const vcx::io::ImageU8& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("dice: mask shapes differ");
  std::size_t na = 0, nb = 0, inter = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const bool fa = a.pixels[i] != 0;
    const bool fb = b.pixels[i] != 0;
    na += fa ? 1 : 0;
    nb += fb ? 1 : 0;
    inter += (fa && fb) ? 1 : 0;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

inline double cl_score(double f1, double dice_value) {
  if (f1 < 0 || f1 > 1 || dice_value < 0 || dice_value > 1)
    throw std::invalid_argument("cl_score: inputs must lie in [0,1]");
  return std::sqrt(f1 * dice_value);
}

// Gini index of the absolute values, sorted form:
// G = sum_i (2i - n - 1) v_i / (n sum v), v ascending, i starting at 1.
// nullopt for an all-zero input.
inline std::optional<double> sparseness(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sparseness: empty input");
  std::vector<double> v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[i] = std::abs(values[i]);
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  if (sum == 0) return std::nullopt;
  const double n = static_cast<double>(v.size());
  double g = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    g += (2.0 * (static_cast<double>(i) + 1) - n - 1) * v[i];
  return g / (n * sum);
}

inline std::optional<double> sparseness(const TensorT<float>& map) {
  std::vector<double> v(map.numel());
  for (std::size_t i = 0; i < map.numel(); ++i) v[i] = map.data()[i];
  return sparseness(v);
}

// 1 when the first row-major argmax pixel of the map lies inside the ground
// truth, 0 when outside, nullopt when the ground truth is empty.
inline std::optional<int> pointing_game(const TensorT<float>& map,
                                        const vcx::io::ImageU8& gt) {
  if (map.rank() != 2 || map.dim(0) != gt.height || map.dim(1) != gt.width)
    throw std::invalid_argument("pointing_game: map and mask shapes differ");
  bool any_fg = false;
  for (std::uint8_t p : gt.pixels) any_fg = any_fg || p != 0;
  if (!any_fg) return std::nullopt;

  std::size_t best = 0;
  for (std::size_t i = 1; i < map.numel(); ++i)
    if (map.data()[i] > map.data()[best]) best = i;
  return gt.pixels[best] != 0 ? 1 : 0;
}

// Faithfulness by deletion: patches ranked by summed map value are replaced
// with a baseline patch, step_count patches at a time, and the concept score
// is re-queried after each step. Returns the trapezoidal area under the
// (fraction removed, score) curve; x spans [0,1] so the value stays in [0,1]
// for scores in [0,1]. Lower means the map found the evidence.
//
// score_fn receives the (progressively deleted) image and returns the
// concept's probability.
inline double selectivity(
    const std::function<double(const TensorT<float>&)>& score_fn,
    const TensorT<float>& image, const TensorT<float>& map2d, int patch_size,
    const TensorT<float>& baseline_patch, double step_fraction = 1.0 / 16.0) {
  if (map2d.rank() != 2) throw std::invalid_argument("selectivity: map must be 2-D");
  const int h = image.dim(0), w = image.dim(1), ch = image.dim(2);
  if (h % patch_size != 0 || w % patch_size != 0)
    throw std::invalid_argument("selectivity: patch size does not tile the image");
  if (map2d.dim(0) != h || map2d.dim(1) != w)
    throw std::invalid_argument("selectivity: map and image sizes differ");
  if (baseline_patch.dim(0) != patch_size || baseline_patch.dim(1) != patch_size ||
      baseline_patch.dim(2) != ch)
    throw std::invalid_argument("selectivity: baseline patch shape mismatch");
  if (step_fraction <= 0 || step_fraction > 1)
    throw std::invalid_argument("selectivity: step fraction must lie in (0,1]");

  const int grid_h = h / patch_size, grid_w = w / patch_size;
  const int patches = grid_h * grid_w;
  struct Ranked {
    double value;
    int index;
  };
  std::vector<Ranked> ranked(static_cast<std::size_t>(patches));
  for (int p = 0; p < patches; ++p) {
    const int py = (p / grid_w) * patch_size, px = (p % grid_w) * patch_size;
    double sum = 0;
    for (int y = 0; y < patch_size; ++y)
      for (int x = 0; x < patch_size; ++x) sum += map2d.at2(py + y, px + x);
    ranked[static_cast<std::size_t>(p)] = {sum, p};
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return a.value > b.value;  // ties keep patch order, so ranking is deterministic
  });

  int step = static_cast<int>(std::lround(step_fraction * patches));
  if (step < 1) step = 1;

  TensorT<float> work = image;
  std::vector<double> xs = {0.0};
  std::vector<double> ys = {score_fn(work)};
  int removed = 0;
  while (removed < patches) {
    const int take = std::min(step, patches - removed);
    for (int k = 0; k < take; ++k) {
      const int p = ranked[static_cast<std::size_t>(removed + k)].index;
      const int py = (p / grid_w) * patch_size, px = (p % grid_w) * patch_size;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int cc = 0; cc < ch; ++cc)
            work.at3(py + y, px + x, cc) = baseline_patch.at3(y, x, cc);
    }
    removed += take;
    xs.push_back(static_cast<double>(removed) / patches);
    ys.push_back(score_fn(work));
  }
  double area = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    area += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
  return area;
}

// Explanation stability: re-explain circularly shifted copies of the image,
// shift each map back, and average the mean absolute deviation from the
// original map, scaled by 255. Shifts cycle through +x, -x, +y, -y, growing
// in magnitude every full cycle. Deterministic and seedless.
inline double continuity(
    const std::function<TensorT<float>(const TensorT<float>&)>& explain_fn,
    const TensorT<float>& image, int perturbation_count = 4, int shift_px = 2) {
  if (perturbation_count < 1)
    throw std::invalid_argument("continuity: need at least one perturbation");
  if (shift_px < 0) throw std::invalid_argument("continuity: negative shift");
  const int h = image.dim(0), w = image.dim(1), ch = image.dim(2);

  const auto shift_image = [&](const TensorT<float>& src, int dy, int dx) {
    TensorT<float> out(src.shape());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int sy = ((y - dy) % h + h) % h;
        const int sx = ((x - dx) % w + w) % w;
        for (int cc = 0; cc < ch; ++cc) out.at3(y, x, cc) = src.at3(sy, sx, cc);
      }
    return out;
  };
  const auto shift_map = [&](const TensorT<float>& src, int dy, int dx) {
    TensorT<float> out(src.shape());
    const int mh = src.dim(0), mw = src.dim(1);
    for (int y = 0; y < mh; ++y)
      for (int x = 0; x < mw; ++x) {
        const int sy = ((y - dy) % mh + mh) % mh;
        const int sx = ((x - dx) % mw + mw) % mw;
        out.at2(y, x) = src.at2(sy, sx);
      }
    return out;
  };

  const TensorT<float> base = explain_fn(image);
  double total = 0;
  for (int k = 0; k < perturbation_count; ++k) {
    const int mag = shift_px * (1 + k / 4);
    const int dirs[4][2] = {{0, mag}, {0, -mag}, {mag, 0}, {-mag, 0}};
    const int dy = dirs[k % 4][0], dx = dirs[k % 4][1];
    const TensorT<float> shifted = explain_fn(shift_image(image, dy, dx));
    const TensorT<float> back = shift_map(shifted, -dy, -dx);
    double mad = 0;
    for (std::size_t i = 0; i < base.numel(); ++i)
      mad += std::abs(back.data()[i] - base.data()[i]);
    total += mad / static_cast<double>(base.numel());
  }
  return 255.0 * total / perturbation_count;
}

}  // namespace vcx::metrics
