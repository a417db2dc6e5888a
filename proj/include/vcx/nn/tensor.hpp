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

#ifndef VCX_NN_TENSOR_HPP_
#define VCX_NN_TENSOR_HPP_

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcx::nn {

/// Dense row-major tensor. Training runs in float; the same code instantiates
/// with double for finite-difference gradient checks.
template <typename S>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel_of(shape_), S(0));
  }

  TensorT(std::vector<int> shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel_of(shape_))
      throw std::invalid_argument("tensor data length does not match shape");
  }

  static size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("negative dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  size_t numel() const { return data_.size(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }

  // 2-D helpers; most of the model lives in [rows x cols] land.
  int rows() const { assert(rank() == 2); return shape_[0]; }
  int cols() const { assert(rank() == 2); return shape_[1]; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](size_t i) { return data_[i]; }
  const S& operator[](size_t i) const { return data_[i]; }

  S& at2(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  const S& at2(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  // [H x W x C] accessor.
  S& at3(int i, int j, int c) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + c];
  }
  const S& at3(int i, int j, int c) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + c];
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  static std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
      if (i) out += "x";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }

 private:
  std::vector<int> shape_;
  std::vector<S> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace vcx::nn

#endif  // VCX_NN_TENSOR_HPP_
