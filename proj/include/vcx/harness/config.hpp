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

#ifndef VCX_HARNESS_CONFIG_HPP_
#define VCX_HARNESS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcx/harness/errors.hpp"
#include "vcx/harness/optimizer.hpp"
#include "vcx/loss/objectives.hpp"
#include "vcx/model/config.hpp"
#include "vcx/synskin/generate.hpp"

namespace vcx::harness {

using json = nlohmann::ordered_json;

/// Full description of one training run. Serialized as a JSON tree with
/// sections model / optimizer / loss / data / train; every field has a
/// default, so a config file only states what it changes.
struct TrainConfig {
  model::ModelConfig model;
  OptimConfig optim;
  loss::LossWeights weights;
  loss::LossFlags flags;

  std::string train_dir;
  std::string val_dir;
  std::string test_dir;
  std::vector<std::string> aug_dirs;     // extra sources mixed into each epoch
  std::vector<double> aug_weights;       // per-source inclusion probability
  std::string text_bank_path;            // empty: synthesized orthogonal bank

  int batch_size = 16;
  int epochs = 30;
  std::uint64_t seed = 1;
  double flip_prob = 0.5;
  std::string resume_from;               // checkpoint path, empty: fresh start

  // `strict` is the run-start contract (positive lr, existing paths); the
  // relaxed form keeps lr = 0 constructible for freeze tests.
  void validate(bool strict = true) const {
    model.validate();
    optim.validate();
    weights.validate();
    if (strict && !(optim.lr > 0)) throw ConfigError("train config: lr must be > 0");
    if (batch_size < 1) throw ConfigError("train config: batch size must be >= 1");
    if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
    if (!(flip_prob >= 0 && flip_prob <= 1))
      throw ConfigError("train config: flip probability must lie in [0,1]");
    if (aug_weights.size() != aug_dirs.size())
      throw ConfigError("train config: one weight per augmentation source required");
    for (double w : aug_weights)
      if (!(w >= 0 && w <= 1))
        throw ConfigError("train config: augmentation weights must lie in [0,1]");
    if (strict) {
      namespace fs = std::filesystem;
      for (const std::string& d : {train_dir, val_dir})
        if (d.empty() || !fs::is_directory(d))
          throw ConfigError("train config: dataset directory not found: " +
                            (d.empty() ? std::string("(unset)") : d));
      if (!test_dir.empty() && !fs::is_directory(test_dir))
        throw ConfigError("train config: dataset directory not found: " + test_dir);
      for (const std::string& d : aug_dirs)
        if (!fs::is_directory(d))
          throw ConfigError("train config: augmentation directory not found: " + d);
      if (!text_bank_path.empty() && !fs::is_regular_file(text_bank_path))
        throw ConfigError("train config: text bank file not found: " + text_bank_path);
      if (!resume_from.empty() && !fs::is_regular_file(resume_from))
        throw ConfigError("train config: resume checkpoint not found: " + resume_from);
    }
  }

  // Derived seeds; one master seed determines init, bank synthesis, and the
  // epoch stream independently.
  std::uint64_t init_seed() const { return mix_seed(seed, 1); }
  std::uint64_t bank_seed() const { return mix_seed(seed, 2); }
  std::uint64_t loop_seed() const { return mix_seed(seed, 3); }
};

namespace detail {

inline void check_keys(const json& j, const std::vector<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("config: unknown key " + where + "." + it.key());
  }
}

template <typename T>
void get_to(const json& j, const std::string& key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for " + where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline json model_config_to_json(const model::ModelConfig& m) {
  return json{{"image_size", m.image_size},
              {"patch_size", m.patch_size},
              {"concepts", m.concepts},
              {"dim", m.dim},
              {"heads", m.heads},
              {"layers_patch", m.layers_patch},
              {"layers_text", m.layers_text},
              {"layers_visual", m.layers_visual},
              {"text_dim", m.text_dim},
              {"variant", model::variant_name(m.variant)},
              {"pooling", nn::pool_name(m.pooling)},
              {"pool_decay", m.pool_decay},
              {"cam_kernel", m.cam_kernel},
              {"layer_scale_init", m.layer_scale_init},
              {"train_text_projection", m.train_text_projection}};
}

inline model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig m;
  detail::check_keys(j, {"image_size", "patch_size", "concepts", "dim", "heads",
                         "layers_patch", "layers_text", "layers_visual", "text_dim",
                         "variant", "pooling", "pool_decay", "cam_kernel",
                         "layer_scale_init", "train_text_projection"},
                     "model");
  detail::get_to(j, "image_size", m.image_size, "model");
  detail::get_to(j, "patch_size", m.patch_size, "model");
  detail::get_to(j, "concepts", m.concepts, "model");
  detail::get_to(j, "dim", m.dim, "model");
  detail::get_to(j, "heads", m.heads, "model");
  detail::get_to(j, "layers_patch", m.layers_patch, "model");
  detail::get_to(j, "layers_text", m.layers_text, "model");
  detail::get_to(j, "layers_visual", m.layers_visual, "model");
  detail::get_to(j, "text_dim", m.text_dim, "model");
  detail::get_to(j, "pool_decay", m.pool_decay, "model");
  detail::get_to(j, "cam_kernel", m.cam_kernel, "model");
  detail::get_to(j, "layer_scale_init", m.layer_scale_init, "model");
  detail::get_to(j, "train_text_projection", m.train_text_projection, "model");
  try {
    if (j.contains("variant"))
      m.variant = model::variant_from_name(j.at("variant").get<std::string>());
    if (j.contains("pooling"))
      m.pooling = nn::pool_from_name(j.at("pooling").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: model variant/pooling must be strings: ") +
                      e.what());
  }
  return m;
}

inline json train_config_to_json(const TrainConfig& c) {
  json j;
  j["model"] = model_config_to_json(c.model);
  j["optimizer"] = {{"lr", c.optim.lr},
                    {"weight_decay", c.optim.weight_decay},
                    {"beta1", c.optim.beta1},
                    {"beta2", c.optim.beta2},
                    {"eps", c.optim.eps}};
  j["loss"] = {{"alpha", c.weights.alpha}, {"beta", c.weights.beta},
               {"gamma", c.weights.gamma}, {"delta", c.weights.delta},
               {"separate", c.flags.separate}, {"mean", c.flags.mean}};
  j["data"] = {{"train", c.train_dir},
               {"val", c.val_dir},
               {"test", c.test_dir},
               {"aug", c.aug_dirs},
               {"aug_weights", c.aug_weights},
               {"text_bank", c.text_bank_path}};
  j["train"] = {{"batch_size", c.batch_size}, {"epochs", c.epochs},
                {"seed", c.seed},           {"flip_prob", c.flip_prob},
                {"resume_from", c.resume_from}};
  return j;
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  detail::check_keys(j, {"model", "optimizer", "loss", "data", "train"}, "(root)");
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    detail::check_keys(o, {"lr", "weight_decay", "beta1", "beta2", "eps"}, "optimizer");
    detail::get_to(o, "lr", c.optim.lr, "optimizer");
    detail::get_to(o, "weight_decay", c.optim.weight_decay, "optimizer");
    detail::get_to(o, "beta1", c.optim.beta1, "optimizer");
    detail::get_to(o, "beta2", c.optim.beta2, "optimizer");
    detail::get_to(o, "eps", c.optim.eps, "optimizer");
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    detail::check_keys(l, {"alpha", "beta", "gamma", "delta", "separate", "mean"}, "loss");
    detail::get_to(l, "alpha", c.weights.alpha, "loss");
    detail::get_to(l, "beta", c.weights.beta, "loss");
    detail::get_to(l, "gamma", c.weights.gamma, "loss");
    detail::get_to(l, "delta", c.weights.delta, "loss");
    detail::get_to(l, "separate", c.flags.separate, "loss");
    detail::get_to(l, "mean", c.flags.mean, "loss");
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    detail::check_keys(d, {"train", "val", "test", "aug", "aug_weights", "text_bank"},
                       "data");
    detail::get_to(d, "train", c.train_dir, "data");
    detail::get_to(d, "val", c.val_dir, "data");
    detail::get_to(d, "test", c.test_dir, "data");
    detail::get_to(d, "aug", c.aug_dirs, "data");
    detail::get_to(d, "aug_weights", c.aug_weights, "data");
    detail::get_to(d, "text_bank", c.text_bank_path, "data");
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t, {"batch_size", "epochs", "seed", "flip_prob", "resume_from"},
                       "train");
    detail::get_to(t, "batch_size", c.batch_size, "train");
    detail::get_to(t, "epochs", c.epochs, "train");
    detail::get_to(t, "seed", c.seed, "train");
    detail::get_to(t, "flip_prob", c.flip_prob, "train");
    detail::get_to(t, "resume_from", c.resume_from, "train");
  }
  return c;
}

/// Dataset generator settings as a JSON tree. The color bank and its mixture
/// weights are fixed; the tree exposes geometry and texture knobs.
inline json gen_config_to_json(const synskin::GenConfig& g) {
  json j;
  j["image_size"] = g.image_size;
  j["palette"] = {{"light", {g.palette.tones.front()[0], g.palette.tones.front()[1],
                             g.palette.tones.front()[2]}},
                  {"dark", {g.palette.tones.back()[0], g.palette.tones.back()[1],
                            g.palette.tones.back()[2]}}};
  j["lesion"] = {{"source", g.prior.source == synskin::LesionPrior::Source::kMaskDir
                                ? "masks"
                                : "procedural"},
                 {"mask_dir", g.prior.mask_dir},
                 {"noise_scale", g.prior.noise_scale},
                 {"threshold", g.prior.threshold},
                 {"morph_radius", g.prior.morph_radius},
                 {"area_min", g.prior.area_min},
                 {"area_max", g.prior.area_max},
                 {"retries", g.prior.retries}};
  j["background"] = {{"threshold", g.bg_threshold},
                     {"scale", g.bg_scale},
                     {"morph_radius", g.bg_morph_radius},
                     {"jitter", g.bg_jitter}};
  j["attr"] = {{"use", g.use_attr_mask},
               {"threshold", g.attr_threshold},
               {"scale", g.attr_scale}};
  j["sub"] = {{"threshold", g.sub_threshold},
              {"scale", g.sub_scale},
              {"morph_radius", g.sub_morph_radius},
              {"retries", g.sub_retries}};
  j["border_radius"] = g.border_radius;
  return j;
}

inline synskin::GenConfig gen_config_from_json(const json& j) {
  synskin::GenConfig g;
  detail::check_keys(
      j, {"image_size", "palette", "lesion", "background", "attr", "sub", "border_radius"},
      "(root)");
  detail::get_to(j, "image_size", g.image_size, "(root)");
  detail::get_to(j, "border_radius", g.border_radius, "(root)");
  if (j.contains("palette")) {
    const json& p = j.at("palette");
    detail::check_keys(p, {"light", "dark"}, "palette");
    std::vector<int> light{246, 209, 176}, dark{70, 46, 34};
    detail::get_to(p, "light", light, "palette");
    detail::get_to(p, "dark", dark, "palette");
    if (light.size() != 3 || dark.size() != 3)
      throw ConfigError("config: palette endpoints must be [r,g,b]");
    auto to_rgb = [](const std::vector<int>& v) {
      synskin::Rgb c;
      for (int i = 0; i < 3; ++i) {
        if (v[static_cast<size_t>(i)] < 0 || v[static_cast<size_t>(i)] > 255)
          throw ConfigError("config: palette channels must lie in [0,255]");
        c[static_cast<size_t>(i)] = static_cast<std::uint8_t>(v[static_cast<size_t>(i)]);
      }
      return c;
    };
    g.palette = synskin::make_palette(to_rgb(light), to_rgb(dark));
  }
  if (j.contains("lesion")) {
    const json& l = j.at("lesion");
    detail::check_keys(l, {"source", "mask_dir", "noise_scale", "threshold", "morph_radius",
                           "area_min", "area_max", "retries"},
                       "lesion");
    std::string source = "procedural";
    detail::get_to(l, "source", source, "lesion");
    if (source == "masks")
      g.prior.source = synskin::LesionPrior::Source::kMaskDir;
    else if (source != "procedural")
      throw ConfigError("config: lesion.source must be procedural or masks");
    detail::get_to(l, "mask_dir", g.prior.mask_dir, "lesion");
    detail::get_to(l, "noise_scale", g.prior.noise_scale, "lesion");
    detail::get_to(l, "threshold", g.prior.threshold, "lesion");
    detail::get_to(l, "morph_radius", g.prior.morph_radius, "lesion");
    detail::get_to(l, "area_min", g.prior.area_min, "lesion");
    detail::get_to(l, "area_max", g.prior.area_max, "lesion");
    detail::get_to(l, "retries", g.prior.retries, "lesion");
  }
  if (j.contains("background")) {
    const json& b = j.at("background");
    detail::check_keys(b, {"threshold", "scale", "morph_radius", "jitter"}, "background");
    detail::get_to(b, "threshold", g.bg_threshold, "background");
    detail::get_to(b, "scale", g.bg_scale, "background");
    detail::get_to(b, "morph_radius", g.bg_morph_radius, "background");
    detail::get_to(b, "jitter", g.bg_jitter, "background");
  }
  if (j.contains("attr")) {
    const json& a = j.at("attr");
    detail::check_keys(a, {"use", "threshold", "scale"}, "attr");
    detail::get_to(a, "use", g.use_attr_mask, "attr");
    detail::get_to(a, "threshold", g.attr_threshold, "attr");
    detail::get_to(a, "scale", g.attr_scale, "attr");
  }
  if (j.contains("sub")) {
    const json& s = j.at("sub");
    detail::check_keys(s, {"threshold", "scale", "morph_radius", "retries"}, "sub");
    detail::get_to(s, "threshold", g.sub_threshold, "sub");
    detail::get_to(s, "scale", g.sub_scale, "sub");
    detail::get_to(s, "morph_radius", g.sub_morph_radius, "sub");
    detail::get_to(s, "retries", g.sub_retries, "sub");
  }
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return g;
}

/// Applies `key.path=value` overrides onto a JSON tree. The value is parsed
/// as JSON when possible and taken as a string otherwise, so `--set
/// optimizer.lr=3e-4` and `--set model.variant=baseline` both work.
inline void apply_overrides(json& tree, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like key.path=value: " + ov);
    const std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &tree;
    size_t begin = 0;
    while (true) {
      const size_t dot = path.find('.', begin);
      const std::string key = path.substr(begin, dot == std::string::npos
                                                     ? std::string::npos
                                                     : dot - begin);
      if (key.empty()) throw ConfigError("override has an empty key segment: " + ov);
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
      node = &(*node)[key];
      begin = dot + 1;
    }
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return j;
}

/// File + overrides to a validated TrainConfig plus the resolved JSON echo.
/// An empty path starts from defaults, which lets `--set` alone define a run.
inline TrainConfig load_train_config(const std::string& path,
                                     const std::vector<std::string>& overrides,
                                     json* resolved = nullptr) {
  json j = path.empty() ? json::object() : load_json_file(path);
  apply_overrides(j, overrides);
  TrainConfig c = train_config_from_json(j);
  try {
    c.validate(true);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (resolved) *resolved = train_config_to_json(c);
  return c;
}

inline synskin::GenConfig load_gen_config(const std::string& path,
                                          const std::vector<std::string>& overrides,
                                          json* resolved = nullptr) {
  json j = path.empty() ? json::object() : load_json_file(path);
  apply_overrides(j, overrides);
  synskin::GenConfig g = gen_config_from_json(j);
  if (resolved) *resolved = gen_config_to_json(g);
  return g;
}

}  // namespace vcx::harness

#endif  // VCX_HARNESS_CONFIG_HPP_
