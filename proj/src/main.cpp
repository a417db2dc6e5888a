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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <zlib.h>

#include "vcx/harness/checkpoint.hpp"
#include "vcx/harness/config.hpp"
#include "vcx/harness/errors.hpp"
#include "vcx/harness/evaluate.hpp"
#include "vcx/harness/experiments.hpp"
#include "vcx/harness/explain_op.hpp"
#include "vcx/harness/trainer.hpp"
#include "vcx/synskin/generate.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

using vcx::harness::json;

/// Every run leaves a run.json next to its outputs: the resolved
/// configuration, tool versions, and no timestamps, so identical runs write
/// identical bytes. Reports cite the file by the returned content hash.
std::string write_run_json(const std::string& out_dir, const std::string& command,
                           const json& resolved) {
  std::filesystem::create_directories(out_dir);
  json run;
  run["command"] = command;
  run["versions"] = {{"vcx", kVersion},
                     {"checkpoint_format", vcx::harness::kCheckpointVersion},
                     {"dataset_format", 1}};
  run["config"] = resolved;
  const std::string text = run.dump(2) + "\n";
  std::ofstream f(out_dir + "/run.json");
  if (!f) throw vcx::harness::DataError("cannot write run.json under: " + out_dir);
  f << text;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(text.data()),
                         static_cast<uInt>(text.size()));
  char buf[24];
  std::snprintf(buf, sizeof(buf), "crc32:%08lx", static_cast<unsigned long>(crc));
  return buf;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw vcx::harness::ConfigError("--seeds needs a comma-separated list");
  return out;
}

vcx::model::Model load_model_for(const std::string& ckpt_path,
                                 vcx::harness::Checkpoint* ck_out = nullptr) {
  vcx::harness::Checkpoint ck;
  try {
    ck = vcx::harness::read_checkpoint(ckpt_path);
  } catch (const std::runtime_error& e) {
    throw vcx::harness::DataError(e.what());
  }
  auto model = vcx::harness::restore_model(ck);
  if (ck_out) *ck_out = std::move(ck);
  return model;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-concept token transformer toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::vector<std::string> overrides;
  app.add_option("--set", overrides, "Override a config key, e.g. --set optimizer.lr=3e-4")
      ->take_all();

  std::string config_path, out_dir, ckpt_path, data_dir, image_path, seeds_arg;
  int gen_count = 100;
  std::uint64_t gen_seed = 1;
  int gen_threads = 0;
  std::vector<double> taus;
  int xai_budget = 25;
  bool no_maps = false;

  auto* synskin = app.add_subcommand("synskin", "Synthetic dermoscopy dataset tools");
  auto* gen = synskin->add_subcommand("generate", "Generate a labeled dataset");
  gen->add_option("--config", config_path, "Generator config JSON");
  gen->add_option("--count", gen_count, "Number of samples")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--threads", gen_threads, "Worker threads (0 = auto)");
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", config_path, "Training config JSON");
  train_cmd->add_option("--out", out_dir, "Run directory")->required();
  train_cmd->add_option("--seeds", seeds_arg,
                        "Comma-separated seed list; one run per seed in out/seed_<s>");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  eval_cmd->add_option("--out", out_dir, "Output directory")->required();
  eval_cmd->add_option("--tau", taus, "Map thresholds for Dice")->take_all();
  eval_cmd->add_option("--budget", xai_budget, "Images used for faithfulness metrics");
  eval_cmd->add_flag("--no-maps", no_maps, "Skip per-concept map export");

  auto* explain_cmd = app.add_subcommand("explain", "Emit maps and overlays");
  explain_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  auto* im_opt = explain_cmd->add_option("--image", image_path, "One RGB PNG");
  auto* ds_opt = explain_cmd->add_option("--data", data_dir, "Dataset directory");
  explain_cmd->add_option("--out", out_dir, "Output directory")->required();
  im_opt->excludes(ds_opt);

  auto* ablate_cmd = app.add_subcommand("ablate", "Pooling-by-loss ablation grid");
  ablate_cmd->add_option("--config", config_path, "Training config JSON");
  ablate_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* compare_cmd = app.add_subcommand("compare", "Train and compare all variants");
  compare_cmd->add_option("--config", config_path, "Training config JSON");
  compare_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return vcx::harness::kExitConfig;
  }

  try {
    if (gen->parsed()) {
      json resolved;
      const auto cfg = vcx::harness::load_gen_config(config_path, overrides, &resolved);
      resolved["count"] = gen_count;
      resolved["seed"] = gen_seed;
      write_run_json(out_dir, "synskin generate", resolved);
      vcx::synskin::generate_dataset(cfg, gen_count, gen_seed, out_dir, gen_threads);
      std::cout << "wrote " << gen_count << " samples to " << out_dir << "\n";
    } else if (train_cmd->parsed()) {
      json resolved;
      auto cfg = vcx::harness::load_train_config(config_path, overrides, &resolved);
      if (!seeds_arg.empty()) {
        const auto seeds = parse_seed_list(seeds_arg);
        write_run_json(out_dir, "train", resolved);
        json summary = json::array();
        for (const auto s : seeds) {
          auto run_cfg = cfg;
          run_cfg.seed = s;
          const std::string sub = out_dir + "/seed_" + std::to_string(s);
          json sub_resolved = vcx::harness::train_config_to_json(run_cfg);
          write_run_json(sub, "train", sub_resolved);
          const auto res = vcx::harness::train(run_cfg, sub, &std::cout);
          summary.push_back({{"seed", s},
                             {"best_val_f1", res.best_val_f1},
                             {"final_loss", res.final_loss}});
        }
        std::ofstream f(out_dir + "/seeds_summary.json");
        f << json{{"runs", summary}}.dump(2) << "\n";
      } else {
        write_run_json(out_dir, "train", resolved);
        const auto res = vcx::harness::train(cfg, out_dir, &std::cout);
        std::cout << "best val F1 " << res.best_val_f1 << " after " << res.epochs_run
                  << " epochs\n";
      }
    } else if (eval_cmd->parsed()) {
      vcx::harness::Checkpoint ck;
      auto net = load_model_for(ckpt_path, &ck);
      const auto ds = vcx::harness::load_dataset(data_dir);
      if (!ck.concepts.empty() && ck.concepts != ds.concepts)
        throw vcx::harness::DataError(
            "checkpoint and dataset disagree on concept names: " + ckpt_path);
      vcx::harness::EvalOptions opts;
      if (!taus.empty()) opts.taus = taus;
      opts.xai_budget = xai_budget;
      opts.export_maps = !no_maps;
      json resolved{{"ckpt", ckpt_path}, {"data", data_dir}, {"taus", opts.taus},
                    {"budget", opts.xai_budget}, {"export_maps", opts.export_maps}};
      opts.run_hash = write_run_json(out_dir, "eval", resolved);
      const auto rep = vcx::harness::evaluate(net, ds, out_dir, opts);
      std::cout << "f1 " << rep.macro_f1 << "  auc " << rep.macro_auc << "  dice "
                << rep.dice_best << " at tau " << rep.best_tau << "\n";
    } else if (explain_cmd->parsed()) {
      if (image_path.empty() && data_dir.empty())
        throw vcx::harness::ConfigError("explain: pass --image or --data");
      vcx::harness::Checkpoint ck;
      auto net = load_model_for(ckpt_path, &ck);
      json resolved{{"ckpt", ckpt_path}, {"image", image_path}, {"data", data_dir}};
      write_run_json(out_dir, "explain", resolved);
      vcx::harness::ExplainOptions opts;
      if (!image_path.empty()) {
        vcx::harness::explain_file(net, ck.concepts, image_path, out_dir, opts);
      } else {
        const auto ds = vcx::harness::load_dataset(data_dir);
        vcx::harness::explain_dataset(net, ds, out_dir, opts);
      }
      std::cout << "wrote explanations to " << out_dir << "\n";
    } else if (ablate_cmd->parsed()) {
      json resolved;
      const auto cfg = vcx::harness::load_train_config(config_path, overrides, &resolved);
      write_run_json(out_dir, "ablate", resolved);
      vcx::harness::EvalOptions opts;
      opts.export_maps = false;
      opts.xai_budget = 0;
      vcx::harness::ablate(cfg, out_dir, opts, &std::cout);
      std::cout << "wrote " << out_dir << "/ablation.csv\n";
    } else if (compare_cmd->parsed()) {
      json resolved;
      const auto cfg = vcx::harness::load_train_config(config_path, overrides, &resolved);
      write_run_json(out_dir, "compare", resolved);
      vcx::harness::EvalOptions opts;
      opts.xai_budget = 8;
      vcx::harness::compare_variants(cfg, out_dir, opts, &std::cout);
      std::cout << "wrote " << out_dir << "/comparison.csv\n";
    }
  } catch (const vcx::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return vcx::harness::kExitConfig;
  } catch (const vcx::harness::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return vcx::harness::kExitDivergence;
  } catch (const vcx::harness::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return vcx::harness::kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return vcx::harness::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return vcx::harness::kExitData;
  }
  return vcx::harness::kExitOk;
}
