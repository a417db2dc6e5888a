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

#ifndef VCX_HARNESS_TRAINER_HPP_
#define VCX_HARNESS_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vcx/harness/checkpoint.hpp"
#include "vcx/harness/config.hpp"
#include "vcx/harness/dataset.hpp"
#include "vcx/harness/errors.hpp"
#include "vcx/harness/optimizer.hpp"
#include "vcx/loss/objectives.hpp"
#include "vcx/metrics/metrics.hpp"
#include "vcx/model/model.hpp"
#include "vcx/util/rng.hpp"

namespace vcx::harness {

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;  // mean of step totals
  double val_acc = 0, val_f1 = 0, val_auc = 0;
};

struct TrainResult {
  std::string best_path;   // empty when no epoch ran
  std::string last_path;
  double best_val_f1 = -1.0;
  int epochs_run = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();  // last step total
  std::vector<EpochStats> epochs;
};

namespace detail {

inline void require_compatible(const Dataset& ds, const model::ModelConfig& m,
                               const char* role) {
  if (ds.size() == 0) throw DataError(std::string("empty ") + role + " set: " + ds.root);
  if (static_cast<int>(ds.concepts.size()) != m.concepts)
    throw DataError(std::string(role) + " set has " + std::to_string(ds.concepts.size()) +
                    " concepts, model expects " + std::to_string(m.concepts) + ": " + ds.root);
  if (ds.image_size != m.image_size)
    throw DataError(std::string(role) + " set image size " + std::to_string(ds.image_size) +
                    " does not match model input " + std::to_string(m.image_size) + ": " +
                    ds.root);
}

/// Classification metrics over a whole dataset; probabilities come from the
/// mean-logit head.
inline void classify_dataset(model::Model& m, const Dataset& ds, nn::TensorT<float>* scores) {
  const int n = static_cast<int>(ds.size());
  const int c = static_cast<int>(ds.concepts.size());
  *scores = nn::TensorT<float>({n, c});
  for (int i = 0; i < n; ++i) {
    nn::TapeT<float> tape;
    const auto img = to_float_image(ds.images[static_cast<size_t>(i)]);
    const auto fwd = m.forward(tape, img, /*record_trace=*/false);
    for (int j = 0; j < c; ++j) scores->at2(i, j) = fwd.probs.value()[static_cast<size_t>(j)];
  }
}

inline model::TextConceptBank build_bank(const TrainConfig& cfg) {
  if (!cfg.text_bank_path.empty()) {
    try {
      return model::load_text_bank(cfg.text_bank_path, cfg.model.concepts,
                                   cfg.model.text_dim, cfg.model.dim, cfg.bank_seed());
    } catch (const std::runtime_error& e) {
      throw DataError(e.what());
    }
  }
  return model::make_desk_text_bank(cfg.model.concepts, cfg.model.text_dim, cfg.model.dim,
                                    cfg.bank_seed());
}

}  // namespace detail

/// Runs the configured training loop and writes `best.ckpt`, `last.ckpt`, and
/// `train_log.jsonl` under out_dir. Epoch composition, flips, and batch order
/// come from one seeded stream, so a (config, seed) pair fixes every byte of
/// the result. A non-finite loss aborts with DivergenceError.
inline TrainResult train(const TrainConfig& cfg, const std::string& out_dir,
                         std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate(false);
  fs::create_directories(out_dir);

  const Dataset train_ds = load_dataset(cfg.train_dir);
  const Dataset val_ds = load_dataset(cfg.val_dir);
  detail::require_compatible(train_ds, cfg.model, "training");
  detail::require_compatible(val_ds, cfg.model, "validation");
  std::vector<Dataset> aug;
  for (const std::string& dir : cfg.aug_dirs) {
    aug.push_back(load_dataset(dir));
    detail::require_compatible(aug.back(), cfg.model, "augmentation");
  }

  model::Model net(cfg.model, detail::build_bank(cfg), cfg.init_seed());
  AdamW opt(cfg.optim);
  Rng rng(cfg.loop_seed());
  const json cfg_echo = train_config_to_json(cfg);

  int start_epoch = 0;
  double best_f1 = -1.0;
  if (!cfg.resume_from.empty()) {
    Checkpoint ck;
    try {
      ck = read_checkpoint(cfg.resume_from);
    } catch (const std::runtime_error& e) {
      throw DataError(e.what());
    }
    if (model_config_to_json(ck.model_cfg).dump() != model_config_to_json(cfg.model).dump())
      throw ConfigError("resume checkpoint was written for a different model config: " +
                        cfg.resume_from);
    for (auto& e : net.params().entries()) {
      const auto* t = ck.find(e.name);
      if (!t || !t->same_shape(e.value))
        throw DataError("resume checkpoint is missing parameter: " + e.name);
      e.value = *t;
    }
    restore_optimizer(ck, net, opt);
    rng.set_state(ck.rng_state);
    start_epoch = ck.epoch;
    best_f1 = ck.best_val_f1;
  }

  const std::string log_path = out_dir + "/train_log.jsonl";
  std::ofstream log(log_path, start_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open training log for writing: " + log_path);

  TrainResult result;
  result.best_val_f1 = best_f1;
  result.last_path = out_dir + "/last.ckpt";
  const std::string best_path = out_dir + "/best.ckpt";
  if (best_f1 >= 0) result.best_path = best_path;

  const nn::TensorT<float> val_labels = label_matrix(val_ds);
  struct Ref {
    int source;  // 0 = train, 1.. = aug
    int index;
  };
  long long global_step = 0;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    // Epoch composition: the base set always, each augmentation sample with
    // its source's inclusion probability, then one shuffle.
    std::vector<Ref> order;
    for (int i = 0; i < static_cast<int>(train_ds.size()); ++i) order.push_back({0, i});
    for (size_t s = 0; s < aug.size(); ++s)
      for (int i = 0; i < static_cast<int>(aug[s].size()); ++i)
        if (rng.uniform() < cfg.aug_weights[s]) order.push_back({static_cast<int>(s) + 1, i});
    rng.shuffle(order);

    double epoch_loss_sum = 0;
    int epoch_steps = 0;
    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), b + static_cast<size_t>(cfg.batch_size));
      const int batch_n = static_cast<int>(end - b);
      net.params().zero_grads();
      loss::LossReport sum;
      for (size_t k = b; k < end; ++k) {
        const Ref ref = order[k];
        const Dataset& src = ref.source == 0 ? train_ds : aug[static_cast<size_t>(ref.source - 1)];
        auto img = to_float_image(src.images[static_cast<size_t>(ref.index)]);
        if (rng.uniform() < cfg.flip_prob) img = flip_horizontal(img);

        nn::TapeT<float> tape;
        const auto fwd = net.forward(tape, img, /*record_trace=*/false);
        const auto graph =
            loss::total_loss(tape, fwd, src.labels[static_cast<size_t>(ref.index)],
                             cfg.weights, cfg.flags);
        if (!std::isfinite(graph.report.total)) {
          log << json{{"epoch", epoch}, {"step", global_step}, {"diverged", true}}.dump()
              << "\n";
          log.flush();
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                ", step " + std::to_string(global_step));
        }
        tape.backward(graph.total);
        const auto& r = graph.report;
        sum.total += r.total;
        sum.visual += r.visual;
        sum.patch += r.patch;
        sum.text += r.text;
        sum.separation += r.separation;
        sum.mean += r.mean;
        sum.has_visual |= r.has_visual;
        sum.has_patch |= r.has_patch;
        sum.has_text |= r.has_text;
        sum.has_separation |= r.has_separation;
        sum.has_mean |= r.has_mean;
      }
      const float inv = 1.0f / static_cast<float>(batch_n);
      for (auto& e : net.params().entries())
        for (size_t i = 0; i < e.grad.numel(); ++i) e.grad[i] *= inv;
      opt.step(net.params());

      const double inv_d = 1.0 / batch_n;
      json line{{"epoch", epoch}, {"step", global_step}, {"samples", batch_n},
                {"total", sum.total * inv_d}};
      if (sum.has_visual) line["visual"] = sum.visual * inv_d;
      if (sum.has_patch) line["patch"] = sum.patch * inv_d;
      if (sum.has_text) line["text"] = sum.text * inv_d;
      if (sum.has_mean) line["mean"] = sum.mean * inv_d;
      if (sum.has_separation) line["separation"] = sum.separation * inv_d;
      log << line.dump() << "\n";
      result.final_loss = sum.total * inv_d;
      epoch_loss_sum += sum.total * inv_d;
      epoch_steps += 1;
      global_step += 1;
    }

    nn::TensorT<float> val_scores;
    detail::classify_dataset(net, val_ds, &val_scores);
    const auto stats = metrics::multilabel_stats(val_scores, val_labels);
    const auto mauc = metrics::macro_auc(val_scores, val_labels);

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = epoch_steps > 0 ? epoch_loss_sum / epoch_steps : 0.0;
    es.val_acc = stats.acc;
    es.val_f1 = stats.f1;
    es.val_auc = mauc.defined ? mauc.mean : 0.0;
    result.epochs.push_back(es);
    log << json{{"epoch", epoch}, {"train_loss", es.train_loss}, {"val_acc", es.val_acc},
                {"val_f1", es.val_f1}, {"val_auc", es.val_auc}}
               .dump()
        << "\n";
    log.flush();
    if (progress)
      (*progress) << "epoch " << epoch << "  loss " << es.train_loss << "  val_f1 "
                  << es.val_f1 << "\n";

    if (es.val_f1 > best_f1) {
      best_f1 = es.val_f1;
      result.best_path = best_path;
      write_checkpoint(best_path, make_checkpoint(net, cfg_echo, epoch + 1, best_f1,
                                                  rng.state(), train_ds.concepts, &opt));
    }
    write_checkpoint(result.last_path, make_checkpoint(net, cfg_echo, epoch + 1, best_f1,
                                                       rng.state(), train_ds.concepts, &opt));
    result.epochs_run += 1;
  }
  result.best_val_f1 = best_f1;

  // A zero-epoch run still leaves a loadable snapshot behind.
  if (cfg.epochs == start_epoch || !fs::exists(result.last_path))
    write_checkpoint(result.last_path, make_checkpoint(net, cfg_echo, start_epoch, best_f1,
                                                       rng.state(), train_ds.concepts, &opt));
  return result;
}

}  // namespace vcx::harness

#endif  // VCX_HARNESS_TRAINER_HPP_
