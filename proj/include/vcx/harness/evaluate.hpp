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

#ifndef VCX_HARNESS_EVALUATE_HPP_
#define VCX_HARNESS_EVALUATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vcx/harness/config.hpp"
#include "vcx/harness/dataset.hpp"
#include "vcx/harness/errors.hpp"
#include "vcx/io/csv.hpp"
#include "vcx/io/png.hpp"
#include "vcx/metrics/metrics.hpp"
#include "vcx/model/model.hpp"
#include "vcx/xmap/explain.hpp"

namespace vcx::harness {

struct EvalOptions {
  std::vector<double> taus{0.3, 0.4, 0.5, 0.6};
  double decision_tau = 0.5;   // classification threshold
  int affinity_layers = 0;     // 0: library default (upper half)
  int xai_budget = 25;         // images used for selectivity / continuity
  bool export_maps = true;
  std::string run_hash;        // echo of the run.json hash, may be empty

  void validate() const {
    if (taus.empty()) throw ConfigError("eval: at least one tau required");
    for (double t : taus)
      if (!(t > 0 && t < 1)) throw ConfigError("eval: tau values must lie in (0,1)");
    if (!(decision_tau > 0 && decision_tau < 1))
      throw ConfigError("eval: decision threshold must lie in (0,1)");
    if (xai_budget < 0) throw ConfigError("eval: xai budget must be >= 0");
  }
};

struct EvalReport {
  json report;
  double macro_f1 = 0;
  double macro_auc = 0;
  double best_tau = 0;
  double dice_best = 0;        // mean Dice at best tau; NaN when no pairs
  double lesion_baseline = 0;  // whole-lesion predictor Dice over the same pairs
  double pointing_rate = -1;
  double pointing_area_baseline = -1;
  double sparseness_mean = -1;
};

namespace detail {

inline std::string format_tau(double t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline nn::TensorT<float> map_channel(const xmap::ConceptMaps& maps, int c) {
  const int h = maps.values.dim(0), w = maps.values.dim(1);
  nn::TensorT<float> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at2(y, x) = maps.values.at3(y, x, c);
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace detail

/// Full evaluation pass: classification metrics over the whole set, and
/// localization / explanation metrics over the correctly predicted positive
/// (sample, concept) pairs. Writes report.json, report.csv, and optionally
/// per-concept grayscale maps under out_dir.
inline EvalReport evaluate(model::Model& net, const Dataset& ds, const std::string& out_dir,
                           const EvalOptions& opts = {}) {
  namespace fs = std::filesystem;
  opts.validate();
  if (ds.size() == 0) throw DataError("empty evaluation set: " + ds.root);
  const auto& mc = net.config();
  if (static_cast<int>(ds.concepts.size()) != mc.concepts)
    throw DataError("evaluation set has " + std::to_string(ds.concepts.size()) +
                    " concepts, checkpoint expects " + std::to_string(mc.concepts) + ": " +
                    ds.root);
  if (ds.image_size != mc.image_size)
    throw DataError("evaluation set image size " + std::to_string(ds.image_size) +
                    " does not match model input " + std::to_string(mc.image_size) + ": " +
                    ds.root);
  fs::create_directories(out_dir);

  const int n = static_cast<int>(ds.size());
  const int c = mc.concepts;
  const bool masks_present = has_color_masks(ds);
  const bool has_text = model::uses_text_stage(mc.variant);

  nn::TensorT<float> scores({n, c}), text_scores;
  if (has_text) text_scores = nn::TensorT<float>({n, c});
  std::vector<xmap::ConceptMaps> maps(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    nn::TapeT<float> tape;
    const auto img = to_float_image(ds.images[static_cast<size_t>(i)]);
    const auto fwd = net.forward(tape, img, /*record_trace=*/true);
    for (int j = 0; j < c; ++j) {
      scores.at2(i, j) = fwd.probs.value()[static_cast<size_t>(j)];
      if (has_text) {
        const float z = fwd.y_tc.value()[static_cast<size_t>(j)];
        text_scores.at2(i, j) = 1.0f / (1.0f + std::exp(-z));
      }
    }
    maps[static_cast<size_t>(i)] =
        xmap::build_maps(fwd.trace, fwd.f_out_p.value(), fwd.has_text, mc.grid(),
                         mc.image_size, opts.affinity_layers);
  }

  const nn::TensorT<float> labels = label_matrix(ds);
  const auto stats = metrics::multilabel_stats(scores, labels, opts.decision_tau);
  const auto mauc = metrics::macro_auc(scores, labels);

  if (opts.export_maps) {
    for (int j = 0; j < c; ++j)
      fs::create_directories(out_dir + "/maps/" + ds.concepts[static_cast<size_t>(j)]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j)
        io::write_png(out_dir + "/maps/" + ds.concepts[static_cast<size_t>(j)] + "/" +
                          ds.names[static_cast<size_t>(i)] + ".png",
                      xmap::map_channel_to_gray(maps[static_cast<size_t>(i)], j));
  }

  // Correctly predicted positives drive every localization metric; the pair
  // set does not depend on the map threshold, so per-tau Dice means are
  // comparable.
  struct Pair {
    int i, j;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      if (labels.at2(i, j) > 0.5f && scores.at2(i, j) >= static_cast<float>(opts.decision_tau))
        pairs.push_back({i, j});

  json dice_mean = json::object();
  json dice_per_concept = json::object();
  json cl = json::object();
  double best_tau = opts.taus[0];
  double best_dice = -1;
  double lesion_baseline = std::numeric_limits<double>::quiet_NaN();
  if (masks_present) {
    // Ground truth masks for the pair set, loaded once.
    std::vector<io::ImageU8> gt(pairs.size());
    for (size_t p = 0; p < pairs.size(); ++p)
      gt[p] = load_color_mask(ds, static_cast<size_t>(pairs[p].i),
                              ds.concepts[static_cast<size_t>(pairs[p].j)]);
    for (double tau : opts.taus) {
      std::vector<double> all;
      std::vector<std::vector<double>> per(static_cast<size_t>(c));
      for (size_t p = 0; p < pairs.size(); ++p) {
        const auto& m = maps[static_cast<size_t>(pairs[p].i)];
        std::vector<float> probs(static_cast<size_t>(c));
        for (int j = 0; j < c; ++j) probs[static_cast<size_t>(j)] = scores.at2(pairs[p].i, j);
        const auto masks = xmap::threshold_maps(m, probs, tau);
        const auto& pred = masks[static_cast<size_t>(pairs[p].j)];
        if (!pred) continue;  // below decision threshold; excluded by pair choice
        const double d = metrics::dice(*pred, gt[p]);
        all.push_back(d);
        per[static_cast<size_t>(pairs[p].j)].push_back(d);
      }
      const double mean = all.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : detail::mean_of(all);
      dice_mean[detail::format_tau(tau)] = mean;
      json per_j = json::array();
      for (int j = 0; j < c; ++j)
        per_j.push_back(per[static_cast<size_t>(j)].empty()
                            ? json()
                            : json(detail::mean_of(per[static_cast<size_t>(j)])));
      dice_per_concept[detail::format_tau(tau)] = per_j;
      cl[detail::format_tau(tau)] =
          std::isnan(mean) ? json() : json(metrics::cl_score(stats.f1, mean));
      if (!std::isnan(mean) && mean > best_dice) {
        best_dice = mean;
        best_tau = tau;
      }
    }
    // Reference predictor: always the whole lesion, independent of the map.
    std::vector<double> base;
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto lesion = load_lesion_mask(ds, static_cast<size_t>(pairs[p].i));
      base.push_back(metrics::dice(lesion, gt[p]));
    }
    if (!base.empty()) lesion_baseline = detail::mean_of(base);
  }

  // Pointing game and sparseness over the same pair set.
  std::vector<double> point_hits, point_area, sparse_vals;
  if (masks_present) {
    for (const auto& p : pairs) {
      const auto gt_mask =
          load_color_mask(ds, static_cast<size_t>(p.i), ds.concepts[static_cast<size_t>(p.j)]);
      const auto ch = detail::map_channel(maps[static_cast<size_t>(p.i)], p.j);
      const auto hit = metrics::pointing_game(ch, gt_mask);
      if (hit) {
        point_hits.push_back(static_cast<double>(*hit));
        size_t fg = 0;
        for (auto px : gt_mask.pixels) fg += px != 0 ? 1 : 0;
        point_area.push_back(static_cast<double>(fg) /
                             static_cast<double>(gt_mask.pixels.size()));
      }
      const auto sp = metrics::sparseness(ch);
      if (sp) sparse_vals.push_back(*sp);
    }
  }

  // Faithfulness metrics run on a budgeted prefix of the set; every predicted
  // concept of those images contributes.
  std::vector<double> selectivity_vals, continuity_vals;
  const int budget = std::min<int>(n, opts.xai_budget);
  if (budget > 0) {
    nn::TensorT<float> baseline({mc.patch_size, mc.patch_size, 3});
    for (int i = 0; i < budget; ++i) {
      const auto img = to_float_image(ds.images[static_cast<size_t>(i)]);
      for (int j = 0; j < c; ++j) {
        if (scores.at2(i, j) < static_cast<float>(opts.decision_tau)) continue;
        const auto ch = detail::map_channel(maps[static_cast<size_t>(i)], j);
        auto score_fn = [&](const nn::TensorT<float>& x) {
          nn::TapeT<float> tape;
          const auto fwd = net.forward(tape, x, false);
          return static_cast<double>(fwd.probs.value()[static_cast<size_t>(j)]);
        };
        selectivity_vals.push_back(metrics::selectivity(score_fn, img, ch, mc.patch_size,
                                                        baseline));
        auto explain_fn = [&](const nn::TensorT<float>& x) {
          nn::TapeT<float> tape;
          const auto fwd = net.forward(tape, x, true);
          const auto mm = xmap::build_maps(fwd.trace, fwd.f_out_p.value(), fwd.has_text,
                                           mc.grid(), mc.image_size, opts.affinity_layers);
          return detail::map_channel(mm, j);
        };
        continuity_vals.push_back(metrics::continuity(explain_fn, img));
      }
    }
  }

  EvalReport out;
  out.macro_f1 = stats.f1;
  out.macro_auc = mauc.defined ? mauc.mean : 0.0;
  out.best_tau = best_tau;
  out.dice_best = best_dice >= 0 ? best_dice : std::numeric_limits<double>::quiet_NaN();
  out.lesion_baseline = lesion_baseline;
  if (!point_hits.empty()) {
    out.pointing_rate = detail::mean_of(point_hits);
    out.pointing_area_baseline = detail::mean_of(point_area);
  }
  if (!sparse_vals.empty()) out.sparseness_mean = detail::mean_of(sparse_vals);

  json rep;
  rep["run_hash"] = opts.run_hash;
  rep["dataset"] = ds.root;
  rep["variant"] = model::variant_name(mc.variant);
  rep["n"] = n;
  rep["concepts"] = ds.concepts;
  rep["has_masks"] = masks_present;
  json per_f1 = json::array(), per_auc = json::array();
  for (int j = 0; j < c; ++j) {
    per_f1.push_back(stats.per_concept_f1[static_cast<size_t>(j)]);
    per_auc.push_back(mauc.per_concept[static_cast<size_t>(j)].has_value()
                          ? json(*mauc.per_concept[static_cast<size_t>(j)])
                          : json());
  }
  rep["classification"] = {{"acc", stats.acc},   {"f1", stats.f1},
                           {"auc", out.macro_auc}, {"auc_defined_concepts", mauc.defined},
                           {"per_concept_f1", per_f1}, {"per_concept_auc", per_auc}};
  if (has_text) {
    const auto tstats = metrics::multilabel_stats(text_scores, labels, opts.decision_tau);
    const auto tauc = metrics::macro_auc(text_scores, labels);
    rep["text_branch"] = {{"f1", tstats.f1}, {"auc", tauc.defined ? tauc.mean : 0.0}};
  }
  if (masks_present) {
    rep["dice"] = {{"pairs", pairs.size()},
                   {"mean", dice_mean},
                   {"per_concept", dice_per_concept},
                   {"best_tau", best_tau},
                   {"best", out.dice_best},
                   {"lesion_baseline", lesion_baseline}};
    rep["cl_score"] = cl;
    rep["xai"] = {{"pointing_game",
                   {{"rate", out.pointing_rate},
                    {"n", point_hits.size()},
                    {"area_baseline", out.pointing_area_baseline}}},
                  {"sparseness", {{"mean", out.sparseness_mean}, {"n", sparse_vals.size()}}}};
  }
  if (!selectivity_vals.empty() || !continuity_vals.empty()) {
    rep["faithfulness"] = {
        {"budget", budget},
        {"selectivity", {{"mean", detail::mean_of(selectivity_vals)},
                         {"n", selectivity_vals.size()}}},
        {"continuity", {{"mean", detail::mean_of(continuity_vals)},
                        {"n", continuity_vals.size()}}}};
  }
  out.report = rep;

  std::ofstream jf(out_dir + "/report.json");
  if (!jf) throw DataError("cannot write report: " + out_dir + "/report.json");
  jf << rep.dump(2) << "\n";
  jf.close();

  const std::string variant = model::variant_name(mc.variant);
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"dataset", "variant", "metric", "value"});
  auto add = [&](const std::string& metric, double v) {
    rows.push_back({ds.root, variant, metric, detail::format_value(v)});
  };
  add("acc", stats.acc);
  add("f1", stats.f1);
  add("auc", out.macro_auc);
  if (has_text) {
    add("text_f1", rep["text_branch"]["f1"].get<double>());
    add("text_auc", rep["text_branch"]["auc"].get<double>());
  }
  if (masks_present) {
    auto usable = [](const json& v) {
      return v.is_number() && !std::isnan(v.get<double>());
    };
    for (double tau : opts.taus) {
      const auto& v = dice_mean[detail::format_tau(tau)];
      if (usable(v)) add("dice@" + detail::format_tau(tau), v.get<double>());
      const auto& cv = cl[detail::format_tau(tau)];
      if (usable(cv)) add("cl_score@" + detail::format_tau(tau), cv.get<double>());
    }
    if (best_dice >= 0) {
      add("dice_best", out.dice_best);
      add("best_tau", best_tau);
    }
    if (!std::isnan(lesion_baseline)) add("dice_lesion_baseline", lesion_baseline);
    if (!point_hits.empty()) {
      add("pointing_game", out.pointing_rate);
      add("pointing_game_area_baseline", out.pointing_area_baseline);
    }
    if (!sparse_vals.empty()) add("sparseness", out.sparseness_mean);
  }
  if (!selectivity_vals.empty()) add("selectivity", detail::mean_of(selectivity_vals));
  if (!continuity_vals.empty()) add("continuity", detail::mean_of(continuity_vals));
  io::write_csv(out_dir + "/report.csv", rows);
  return out;
}

}  // namespace vcx::harness

#endif  // VCX_HARNESS_EVALUATE_HPP_
