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

#ifndef VCX_HARNESS_CHECKPOINT_HPP_
#define VCX_HARNESS_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "vcx/harness/config.hpp"
#include "vcx/harness/errors.hpp"
#include "vcx/model/model.hpp"
#include "vcx/nn/tensor.hpp"

namespace vcx::harness {

// Checkpoint file layout, all integers little endian:
//   "VCXM" | u32 version | u64 metadata length | metadata JSON (UTF-8)
//   | u32 tensor count | tensors
// Each tensor: u32 name length | name | u32 rank | i32 dims | float32 data.
// Model parameters use their store names; text bank tensors are "bank.*" and
// optimizer moments "opt.m:<name>" / "opt.v:<name>".
inline constexpr char kCheckpointMagic[4] = {'V', 'C', 'X', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::ModelConfig model_cfg;
  json train_cfg = json::object();       // echo of the run that wrote it
  int epoch = 0;                         // next epoch to run on resume
  double best_val_f1 = -1.0;
  long long opt_step = 0;
  std::string rng_state;                 // training loop engine, serialized
  std::vector<std::string> concepts;
  std::vector<std::pair<std::string, nn::TensorT<float>>> tensors;

  const nn::TensorT<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

namespace detail {

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<size_t>(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void floats(float* out, size_t count) {
    need(count * 4);
    for (size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b)
        v |= static_cast<std::uint32_t>(bytes_[pos_ + i * 4 + static_cast<size_t>(b)]) << (8 * b);
      out[i] = std::bit_cast<float>(v);
    }
    pos_ += count * 4;
  }

  size_t pos() const { return pos_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("truncated checkpoint file: " + path_);
  }
  const std::vector<std::uint8_t>& bytes_;
  std::string path_;
  size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  const size_t n = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (n != bytes.size()) throw std::runtime_error("short write on checkpoint: " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::fseek(f, 0, SEEK_END);
  const long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<std::uint8_t> bytes(size > 0 ? static_cast<size_t>(size) : 0);
  const size_t n = std::fread(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (n != bytes.size()) throw std::runtime_error("short read on checkpoint: " + path);
  return bytes;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["model"] = model_config_to_json(ck.model_cfg);
  meta["train"] = ck.train_cfg;
  meta["epoch"] = ck.epoch;
  meta["best_val_f1"] = ck.best_val_f1;
  meta["opt_step"] = ck.opt_step;
  meta["rng_state"] = ck.rng_state;
  meta["concepts"] = ck.concepts;
  const std::string meta_str = meta.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  detail::put_u32_le(out, kCheckpointVersion);
  detail::put_u64_le(out, meta_str.size());
  out.insert(out.end(), meta_str.begin(), meta_str.end());
  detail::put_u32_le(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    detail::put_u32_le(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u32_le(out, static_cast<std::uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d)
      detail::put_u32_le(out, static_cast<std::uint32_t>(t.dim(d)));
    for (size_t i = 0; i < t.numel(); ++i) {
      const std::uint32_t v = std::bit_cast<std::uint32_t>(t.data()[i]);
      detail::put_u32_le(out, v);
    }
  }
  detail::write_file(path, out);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  detail::ByteReader r(bytes, path);
  const std::string magic = r.str(4);
  if (magic != std::string(kCheckpointMagic, 4))
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             ": " + path);
  const std::uint64_t meta_len = r.u64();
  const std::string meta_str = r.str(meta_len);
  json meta = json::parse(meta_str, nullptr, false);
  if (meta.is_discarded())
    throw std::runtime_error("checkpoint metadata is not valid JSON: " + path);

  Checkpoint ck;
  try {
    ck.model_cfg = model_config_from_json(meta.at("model"));
    ck.train_cfg = meta.value("train", json::object());
    ck.epoch = meta.at("epoch").get<int>();
    ck.best_val_f1 = meta.at("best_val_f1").get<double>();
    ck.opt_step = meta.at("opt_step").get<long long>();
    ck.rng_state = meta.at("rng_state").get<std::string>();
    ck.concepts = meta.at("concepts").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint metadata is incomplete: " + path + ": " + e.what());
  }

  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw std::runtime_error("corrupt tensor rank in checkpoint: " + path);
    std::vector<int> shape;
    size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    nn::TensorT<float> t(shape);
    r.floats(t.data(), numel);
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

/// Snapshot of a live model plus training state, ready to write.
inline Checkpoint make_checkpoint(const model::Model& m, const json& train_cfg, int epoch,
                                  double best_val_f1, const std::string& rng_state,
                                  const std::vector<std::string>& concepts,
                                  const AdamW* opt = nullptr) {
  Checkpoint ck;
  ck.model_cfg = m.config();
  ck.train_cfg = train_cfg;
  ck.epoch = epoch;
  ck.best_val_f1 = best_val_f1;
  ck.rng_state = rng_state;
  ck.concepts = concepts;
  for (const auto& e : m.params().entries()) ck.tensors.emplace_back(e.name, e.value);
  const auto& bank = m.bank();
  ck.tensors.emplace_back("bank.raw", bank.raw);
  ck.tensors.emplace_back("bank.projection_init", bank.projection_init);
  ck.tensors.emplace_back("bank.projected_frozen", bank.projected_frozen);
  if (opt && opt->step_count() > 0) {
    ck.opt_step = opt->step_count();
    const auto& entries = m.params().entries();
    for (size_t k = 0; k < entries.size(); ++k) {
      ck.tensors.emplace_back("opt.m:" + entries[k].name, opt->moment1()[k]);
      ck.tensors.emplace_back("opt.v:" + entries[k].name, opt->moment2()[k]);
    }
  }
  return ck;
}

/// Rebuilds the model a checkpoint describes. Parameters come from the tensor
/// table, the text bank from the "bank.*" tensors, so the result is
/// independent of any seed.
inline model::Model restore_model(const Checkpoint& ck) {
  model::TextConceptBank bank;
  const auto* raw = ck.find("bank.raw");
  const auto* pinit = ck.find("bank.projection_init");
  const auto* pfrozen = ck.find("bank.projected_frozen");
  if (!raw || !pinit || !pfrozen)
    throw std::runtime_error("checkpoint is missing text bank tensors");
  bank.raw = *raw;
  bank.projection_init = *pinit;
  bank.projected_frozen = *pfrozen;
  bank.descriptions.assign(static_cast<size_t>(bank.concepts()), "checkpoint");
  model::Model m(ck.model_cfg, std::move(bank), /*init_seed=*/0);
  for (auto& e : m.params().entries()) {
    const auto* t = ck.find(e.name);
    if (!t) throw std::runtime_error("checkpoint is missing parameter: " + e.name);
    if (!t->same_shape(e.value))
      throw std::runtime_error("checkpoint parameter shape mismatch: " + e.name);
    e.value = *t;
  }
  return m;
}

/// Restores optimizer moments when the checkpoint carries them.
inline void restore_optimizer(const Checkpoint& ck, const model::Model& m, AdamW& opt) {
  if (ck.opt_step <= 0) return;
  std::vector<nn::TensorT<float>> mom1, mom2;
  for (const auto& e : m.params().entries()) {
    const auto* mt = ck.find("opt.m:" + e.name);
    const auto* vt = ck.find("opt.v:" + e.name);
    if (!mt || !vt)
      throw std::runtime_error("checkpoint is missing optimizer state for: " + e.name);
    mom1.push_back(*mt);
    mom2.push_back(*vt);
  }
  opt.restore(ck.opt_step, std::move(mom1), std::move(mom2));
}

}  // namespace vcx::harness

#endif  // VCX_HARNESS_CHECKPOINT_HPP_
