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

#ifndef VCX_MODEL_PARAMS_HPP_
#define VCX_MODEL_PARAMS_HPP_

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vcx/nn/gradcheck.hpp"
#include "vcx/nn/tensor.hpp"

namespace vcx::model {

/// Named parameter tensors with paired gradient buffers. Creation order is
/// stable and defines the flat coordinate space used by the optimizer, the
/// checkpoint format, and gradient checking.
template <typename S>
class ParamStoreT {
 public:
  struct Entry {
    std::string name;
    nn::TensorT<S> value;
    nn::TensorT<S> grad;
  };

  nn::TensorT<S>& create(const std::string& name, std::vector<int> shape) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, nn::TensorT<S>(shape), nn::TensorT<S>(shape)});
    return entries_.back().value;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  nn::TensorT<S>& value(const std::string& name) { return entry(name).value; }
  const nn::TensorT<S>& value(const std::string& name) const { return entry(name).value; }
  nn::TensorT<S>& grad(const std::string& name) { return entry(name).grad; }

  void zero_grads() {
    for (auto& e : entries_) e.grad.fill(S(0));
  }

  size_t count() const { return entries_.size(); }
  size_t numel() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  std::vector<nn::ParamBlockT<S>> blocks() {
    std::vector<nn::ParamBlockT<S>> out;
    for (auto& e : entries_)
      out.push_back({e.value.data(), e.grad.data(), e.value.numel()});
    return out;
  }

  /// Copy with element type conversion; used to lift float parameters into a
  /// double model for gradient checking.
  template <typename S2>
  ParamStoreT<S2> cast() const {
    ParamStoreT<S2> out;
    for (const auto& e : entries_) {
      auto& v = out.create(e.name, e.value.shape());
      for (size_t i = 0; i < v.numel(); ++i) v[i] = static_cast<S2>(e.value[i]);
    }
    return out;
  }

 private:
  Entry& entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return entries_[it->second];
  }
  const Entry& entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return entries_[it->second];
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace vcx::model

#endif  // VCX_MODEL_PARAMS_HPP_
