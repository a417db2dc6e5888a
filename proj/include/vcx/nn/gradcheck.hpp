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

#ifndef VCX_NN_GRADCHECK_HPP_
#define VCX_NN_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "vcx/util/rng.hpp"

namespace vcx::nn {

/// One flat parameter block under test: values and their gradient slots.
template <typename S>
struct ParamBlockT {
  S* value = nullptr;
  S* grad = nullptr;
  size_t size = 0;
};

/// Central-difference gradient verification.
///
/// `loss_fn` evaluates the scalar loss at the current parameter values without
/// touching gradients. `grad_fn` zeroes the gradient slots, then runs forward
/// and backward once, filling them. Up to `max_coords` coordinates are sampled
/// (all of them when the total count is smaller). Returns the worst error:
/// relative |a-f|/max(|a|,|f|) where that max exceeds 1e-4, absolute |a-f|
/// below it. The switch point sits above the ~1e-11 absolute noise floor of
/// double central differences; a relative ratio on coordinates at that scale
/// would measure the oracle's own roundoff rather than the gradient.
template <typename S>
double check_gradients(const std::function<double()>& loss_fn,
                       const std::function<void()>& grad_fn,
                       const std::vector<ParamBlockT<S>>& blocks, double eps,
                       size_t max_coords, vcx::Rng& rng) {
  grad_fn();
  size_t total = 0;
  for (const auto& b : blocks) total += b.size;
  std::vector<size_t> coords;
  if (total <= max_coords) {
    coords.resize(total);
    for (size_t i = 0; i < total; ++i) coords[i] = i;
  } else {
    // Sample without replacement via partial Fisher-Yates on indices.
    std::vector<size_t> all(total);
    for (size_t i = 0; i < total; ++i) all[i] = i;
    for (size_t i = 0; i < max_coords; ++i) {
      const size_t j = i + rng.uniform_index(total - i);
      std::swap(all[i], all[j]);
    }
    coords.assign(all.begin(), all.begin() + static_cast<long>(max_coords));
    std::sort(coords.begin(), coords.end());
  }

  auto locate = [&blocks](size_t flat) {
    for (const auto& b : blocks) {
      if (flat < b.size) return std::pair<const ParamBlockT<S>*, size_t>(&b, flat);
      flat -= b.size;
    }
    return std::pair<const ParamBlockT<S>*, size_t>(nullptr, 0);
  };

  double worst = 0.0;
  for (size_t flat : coords) {
    auto [blk, off] = locate(flat);
    const double analytic = static_cast<double>(blk->grad[off]);
    const S saved = blk->value[off];
    blk->value[off] = saved + static_cast<S>(eps);
    const double lp = loss_fn();
    blk->value[off] = saved - static_cast<S>(eps);
    const double lm = loss_fn();
    blk->value[off] = saved;
    const double fd = (lp - lm) / (2.0 * eps);
    const double denom = std::max(std::abs(analytic), std::abs(fd));
    const double err = denom < 1e-4 ? std::abs(analytic - fd)
                                    : std::abs(analytic - fd) / denom;
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace vcx::nn

#endif  // VCX_NN_GRADCHECK_HPP_
