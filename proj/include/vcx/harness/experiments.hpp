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

#ifndef VCX_HARNESS_EXPERIMENTS_HPP_
#define VCX_HARNESS_EXPERIMENTS_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vcx/harness/checkpoint.hpp"
#include "vcx/harness/config.hpp"
#include "vcx/harness/evaluate.hpp"
#include "vcx/harness/trainer.hpp"

namespace vcx::harness {

namespace detail {

/// Trains one configuration, evaluates its best checkpoint on the test set,
/// and returns (final training loss, evaluation report).
inline std::pair<double, EvalReport> run_cell(const TrainConfig& cfg,
                                              const std::string& out_dir,
                                              const EvalOptions& eval_opts,
                                              std::ostream* progress) {
  const TrainResult tr = train(cfg, out_dir, progress);
  const std::string ckpt = tr.best_path.empty() ? tr.last_path : tr.best_path;
  Checkpoint ck;
  try {
    ck = read_checkpoint(ckpt);
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
  model::Model net = restore_model(ck);
  const Dataset test = load_dataset(cfg.test_dir);
  EvalReport rep = evaluate(net, test, out_dir + "/eval", eval_opts);
  return {tr.final_loss, rep};
}

}  // namespace detail

/// The pooling-by-loss-configuration grid: {GAP, GMP, GWRP} x {separate
/// branch losses, mean-logit only, both}. Every cell shares the seed and the
/// data; only the pooling mode and the loss flags vary. Writes ablation.csv
/// (one row per cell) plus per-cell run directories.
inline json ablate(const TrainConfig& base, const std::string& out_dir,
                   const EvalOptions& eval_opts = {}, std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  base.validate(true);
  if (base.test_dir.empty()) throw ConfigError("ablate: data.test must be set");
  fs::create_directories(out_dir);

  const nn::PoolKind pools[3] = {nn::PoolKind::kGap, nn::PoolKind::kGmp,
                                 nn::PoolKind::kGwrp};
  struct Mode {
    const char* name;
    bool separate, mean;
  };
  const Mode modes[3] = {{"separate", true, false}, {"mean", false, true},
                         {"both", true, true}};

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"pooling", "separate_losses", "mean_loss", "final_loss", "acc", "f1",
                  "auc", "dice_best", "best_tau"});
  json cells = json::array();
  for (const auto pool : pools)
    for (const auto& mode : modes) {
      TrainConfig cfg = base;
      cfg.model.pooling = pool;
      cfg.flags.separate = mode.separate;
      cfg.flags.mean = mode.mean;
      const std::string cell = std::string("cell_") + nn::pool_name(pool) + "_" + mode.name;
      if (progress) (*progress) << "[ablate] " << cell << "\n";
      const auto [final_loss, rep] =
          detail::run_cell(cfg, out_dir + "/" + cell, eval_opts, progress);
      rows.push_back({nn::pool_name(pool), mode.separate ? "1" : "0",
                      mode.mean ? "1" : "0", detail::format_value(final_loss),
                      detail::format_value(rep.report["classification"]["acc"].get<double>()),
                      detail::format_value(rep.macro_f1),
                      detail::format_value(rep.macro_auc),
                      detail::format_value(rep.dice_best),
                      detail::format_value(rep.best_tau)});
      cells.push_back({{"cell", cell},
                       {"pooling", nn::pool_name(pool)},
                       {"separate", mode.separate},
                       {"mean", mode.mean},
                       {"final_loss", final_loss},
                       {"f1", rep.macro_f1},
                       {"auc", rep.macro_auc},
                       {"dice_best", rep.dice_best},
                       {"best_tau", rep.best_tau}});
    }
  io::write_csv(out_dir + "/ablation.csv", rows);
  json summary{{"cells", cells}};
  std::ofstream f(out_dir + "/ablation.json");
  f << summary.dump(2) << "\n";
  return summary;
}

/// Trains and evaluates all four architecture variants with a shared seed and
/// shared data. Writes comparison.csv; text-branch cells stay empty for the
/// baseline, which has no text stage.
inline json compare_variants(const TrainConfig& base, const std::string& out_dir,
                             const EvalOptions& eval_opts = {},
                             std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  base.validate(true);
  if (base.test_dir.empty()) throw ConfigError("compare: data.test must be set");
  fs::create_directories(out_dir);

  const model::Variant variants[4] = {model::Variant::kBaseline, model::Variant::kTokenFusion,
                                      model::Variant::kTextGuided, model::Variant::kHybrid};
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"variant", "final_loss", "acc", "f1", "auc", "text_f1", "text_auc",
                  "dice_best", "best_tau"});
  json results = json::array();
  for (const auto v : variants) {
    TrainConfig cfg = base;
    cfg.model.variant = v;
    const std::string name = model::variant_name(v);
    if (progress) (*progress) << "[compare] " << name << "\n";
    const auto [final_loss, rep] =
        detail::run_cell(cfg, out_dir + "/" + name, eval_opts, progress);
    std::string text_f1, text_auc;
    if (rep.report.contains("text_branch")) {
      text_f1 = detail::format_value(rep.report["text_branch"]["f1"].get<double>());
      text_auc = detail::format_value(rep.report["text_branch"]["auc"].get<double>());
    }
    rows.push_back({name, detail::format_value(final_loss),
                    detail::format_value(rep.report["classification"]["acc"].get<double>()),
                    detail::format_value(rep.macro_f1), detail::format_value(rep.macro_auc),
                    text_f1, text_auc, detail::format_value(rep.dice_best),
                    detail::format_value(rep.best_tau)});
    json row{{"variant", name},     {"final_loss", final_loss},
             {"f1", rep.macro_f1},  {"auc", rep.macro_auc},
             {"dice_best", rep.dice_best}, {"best_tau", rep.best_tau}};
    if (rep.report.contains("text_branch")) row["text_branch"] = rep.report["text_branch"];
    results.push_back(row);
  }
  io::write_csv(out_dir + "/comparison.csv", rows);
  json summary{{"variants", results}};
  std::ofstream f(out_dir + "/comparison.json");
  f << summary.dump(2) << "\n";
  return summary;
}

}  // namespace vcx::harness

#endif  // VCX_HARNESS_EXPERIMENTS_HPP_
