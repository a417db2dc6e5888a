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

#ifndef VCX_HARNESS_OPTIMIZER_HPP_
#define VCX_HARNESS_OPTIMIZER_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vcx/model/params.hpp"
#include "vcx/nn/tensor.hpp"

namespace vcx::harness {

struct OptimConfig {
  double lr = 4e-5;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // lr = 0 is allowed here so a frozen run can verify that nothing else
  // mutates parameters; the config loader rejects it for real runs.
  void validate() const {
    if (!(lr >= 0) || !std::isfinite(lr))
      throw std::invalid_argument("optimizer: lr must be finite and >= 0");
    if (!(weight_decay >= 0)) throw std::invalid_argument("optimizer: weight decay must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw std::invalid_argument("optimizer: betas must lie in [0,1)");
    if (!(eps > 0)) throw std::invalid_argument("optimizer: eps must be > 0");
  }
};

/// Adaptive moment estimation with decoupled weight decay and constant
/// learning rate. Moment buffers mirror the parameter store entry for entry;
/// element math runs in double and is stored back as float, so a step is
/// bit-reproducible for identical gradients.
class AdamW {
 public:
  explicit AdamW(const OptimConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

  const OptimConfig& config() const { return cfg_; }
  long long step_count() const { return step_; }

  const std::vector<nn::TensorT<float>>& moment1() const { return m_; }
  const std::vector<nn::TensorT<float>>& moment2() const { return v_; }

  /// Restores optimizer state from a checkpoint. Buffers must match the store
  /// this optimizer will subsequently step.
  void restore(long long step, std::vector<nn::TensorT<float>> m,
               std::vector<nn::TensorT<float>> v) {
    if (step < 0) throw std::invalid_argument("optimizer: negative step count");
    if (m.size() != v.size())
      throw std::invalid_argument("optimizer: moment buffer counts differ");
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  /// One update over every entry, in store order, consuming the current
  /// gradients. Gradients are left untouched; the caller zeroes them.
  void step(model::ParamStoreT<float>& store) {
    auto& entries = store.entries();
    if (m_.empty()) {
      for (const auto& e : entries) {
        m_.emplace_back(e.value.shape());
        v_.emplace_back(e.value.shape());
      }
    }
    if (m_.size() != entries.size())
      throw std::invalid_argument("optimizer: moment buffers do not match parameter store");
    step_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t k = 0; k < entries.size(); ++k) {
      auto& e = entries[k];
      if (!m_[k].same_shape(e.value))
        throw std::invalid_argument("optimizer: moment shape mismatch at " + e.name);
      float* p = e.value.data();
      const float* g = e.grad.data();
      float* m = m_[k].data();
      float* v = v_[k].data();
      for (size_t i = 0; i < e.value.numel(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps) +
                              cfg_.weight_decay * static_cast<double>(p[i]);
        p[i] = static_cast<float>(static_cast<double>(p[i]) - cfg_.lr * update);
      }
    }
  }

 private:
  OptimConfig cfg_;
  long long step_ = 0;
  std::vector<nn::TensorT<float>> m_;
  std::vector<nn::TensorT<float>> v_;
};

}  // namespace vcx::harness

#endif  // VCX_HARNESS_OPTIMIZER_HPP_
