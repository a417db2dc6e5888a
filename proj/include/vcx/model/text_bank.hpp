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

#ifndef VCX_MODEL_TEXT_BANK_HPP_
#define VCX_MODEL_TEXT_BANK_HPP_

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcx/nn/tensor.hpp"
#include "vcx/util/rng.hpp"

namespace vcx::model {

/// Frozen text-side concept embeddings plus the state needed to project them
/// into the model width. The raw rows E_c never change; the projection matrix
/// lives in the parameter store (name "text.wp") so it can train, and
/// `projected_frozen` keeps the construction-time projection for the frozen
/// mode.
struct TextConceptBank {
  std::vector<std::string> descriptions;  // provenance only, may be tags
  nn::TensorT<float> raw;                 // C x D_k
  nn::TensorT<float> projection_init;     // D_k x D, initial W_p
  nn::TensorT<float> projected_frozen;    // C x D, raw * W_p at build time

  int concepts() const { return raw.rows(); }
  int text_dim() const { return raw.cols(); }
};

namespace detail {

inline nn::TensorT<float> project_rows(const nn::TensorT<float>& raw,
                                       const nn::TensorT<float>& wp) {
  nn::TensorT<float> out({raw.rows(), wp.cols()});
  for (int i = 0; i < raw.rows(); ++i)
    for (int k = 0; k < raw.cols(); ++k) {
      const float a = raw.at2(i, k);
      for (int j = 0; j < wp.cols(); ++j) out.at2(i, j) += a * wp.at2(k, j);
    }
  return out;
}

inline nn::TensorT<float> init_projection(int text_dim, int dim, uint64_t seed) {
  nn::TensorT<float> wp({text_dim, dim});
  Rng rng(seed);
  for (size_t i = 0; i < wp.numel(); ++i)
    wp[i] = static_cast<float>(rng.trunc_normal(0.02));
  return wp;
}

}  // namespace detail

/// Reads the embedding file: a header line "C D_k" followed by C lines of D_k
/// space-separated floats.
inline TextConceptBank load_text_bank(const std::string& path, int concepts, int text_dim,
                                      int dim, uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open text-embedding file: " + path);
  int c = 0, dk = 0;
  if (!(in >> c >> dk))
    throw std::runtime_error("text-embedding file has no 'C D_k' header: " + path);
  if (c != concepts)
    throw std::runtime_error("text-embedding file row count " + std::to_string(c) +
                             " does not match configured concepts " + std::to_string(concepts));
  if (dk != text_dim)
    throw std::runtime_error("text-embedding file dimension " + std::to_string(dk) +
                             " does not match configured text_dim " + std::to_string(text_dim));
  TextConceptBank bank;
  bank.raw = nn::TensorT<float>({c, dk});
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < dk; ++j) {
      double v;
      if (!(in >> v))
        throw std::runtime_error("text-embedding file truncated at row " + std::to_string(i));
      bank.raw.at2(i, j) = static_cast<float>(v);
    }
  bank.descriptions.assign(static_cast<size_t>(c), "file:" + path);
  bank.projection_init = detail::init_projection(text_dim, dim, seed);
  bank.projected_frozen = detail::project_rows(bank.raw, bank.projection_init);
  return bank;
}

/// Desk mode: synthesizes C mutually orthogonal unit rows in D_k dimensions by
/// Gram-Schmidt on seeded Gaussian draws, standing in for a real text encoder.
inline TextConceptBank make_desk_text_bank(int concepts, int text_dim, int dim, uint64_t seed) {
  if (concepts > text_dim)
    throw std::invalid_argument("desk text bank needs text_dim >= concepts for orthogonal rows");
  TextConceptBank bank;
  bank.raw = nn::TensorT<float>({concepts, text_dim});
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  while (static_cast<int>(rows.size()) < concepts) {
    std::vector<double> v(static_cast<size_t>(text_dim));
    for (auto& x : v) x = rng.normal();
    for (const auto& u : rows) {
      double dot = 0;
      for (int j = 0; j < text_dim; ++j) dot += v[static_cast<size_t>(j)] * u[static_cast<size_t>(j)];
      for (int j = 0; j < text_dim; ++j) v[static_cast<size_t>(j)] -= dot * u[static_cast<size_t>(j)];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;  // degenerate draw, resample
    for (auto& x : v) x /= norm;
    rows.push_back(std::move(v));
  }
  for (int i = 0; i < concepts; ++i)
    for (int j = 0; j < text_dim; ++j)
      bank.raw.at2(i, j) = static_cast<float>(rows[static_cast<size_t>(i)][static_cast<size_t>(j)]);
  bank.descriptions.assign(static_cast<size_t>(concepts), "desk:orthogonal");
  bank.projection_init = detail::init_projection(text_dim, dim, seed ^ 0xabcdef12345678ull);
  bank.projected_frozen = detail::project_rows(bank.raw, bank.projection_init);
  return bank;
}

}  // namespace vcx::model

#endif  // VCX_MODEL_TEXT_BANK_HPP_
