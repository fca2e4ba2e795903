/**
 * Copyright 2026 The xpose Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xpose/xpose.h"

namespace {

struct ConfigHandle {
  xp_config* cfg = nullptr;
  ~ConfigHandle() { xp_config_destroy(cfg); }
};

int report(xp_status st, const char* what) {
  if (st == XP_OK) return 0;
  std::fprintf(stderr, "xpose %s: %s\n", what, xp_last_error());
  return static_cast<int>(st);
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instrument pose estimation from synthetic radiographs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);

  std::optional<std::string> phantom, instrument, split;
  std::optional<int> count;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--phantom", phantom, "Phantom preset (shell-sphere | layered-slab | perlin-bone)");
  gen->add_option("--instrument", instrument, "Instrument (screw | drill | robot)");
  gen->add_option("--count", count, "Number of records")->check(CLI::PositiveNumber);
  gen->add_option("--split", split, "train | eval (selects the sampling distributions)");

  std::string task = "rectangle", head = "indirect", train_data;
  std::optional<int> epochs;
  auto* tr = app.add_subcommand("train", "Train a landmark network");
  tr->add_option("--task", task, "rectangle | patches")->check(CLI::IsMember({"rectangle", "patches"}));
  tr->add_option("--head", head, "direct | indirect")->check(CLI::IsMember({"direct", "indirect"}));
  tr->add_option("--data", train_data, "Dataset directory (patches task)");
  tr->add_option("--epochs", epochs, "Training epochs (overrides the config)");

  std::string data_dir, weights_dir;
  std::optional<std::string> predictor;
  std::optional<double> noise;
  std::optional<int> k_max, trials;
  auto add_estimation = [&](CLI::App* sub) {
    sub->add_option("--data", data_dir, "Dataset directory")->required();
    sub->add_option("--weights", weights_dir, "Weights directory (convnet predictor)");
    sub->add_option("--predictor", predictor, "oracle | convnet")->check(CLI::IsMember({"oracle", "convnet"}));
    sub->add_option("--noise", noise, "Oracle keypoint noise in pixels");
    sub->add_option("--k-max", k_max, "Iterations per estimate")->check(CLI::PositiveNumber);
    sub->add_option("--trials", trials, "Trials per record")->check(CLI::PositiveNumber);
  };
  auto* est = app.add_subcommand("estimate", "Estimate poses for every record");
  add_estimation(est);
  auto* eva = app.add_subcommand("evaluate", "Per-iteration errors and summaries");
  add_estimation(eva);

  std::optional<std::string> metric;
  std::optional<int> budget, records;
  auto* reg = app.add_subcommand("register", "Intensity-based registration baseline");
  reg->add_option("--data", data_dir, "Dataset directory")->required();
  reg->add_option("--metric", metric, "gc | mi")->check(CLI::IsMember({"gc", "mi"}));
  reg->add_option("--budget", budget, "Render budget per registration")->check(CLI::PositiveNumber);
  reg->add_option("--trials", trials, "Trials per record")->check(CLI::PositiveNumber);
  reg->add_option("--records", records, "Number of records (0 = all)")->check(CLI::NonNegativeNumber);

  std::vector<std::string> summaries;
  auto* plot = app.add_subcommand("plot", "Box plots from summary CSVs");
  plot->add_option("summaries", summaries, "Summary CSV files")->required()->check(CLI::ExistingFile);

  app.add_subcommand("config", "Print the resolved configuration");

  CLI11_PARSE(app, argc, argv);

  ConfigHandle h;
  xp_status st = config_path.empty() ? xp_config_create(&h.cfg) : xp_config_load(config_path.c_str(), &h.cfg);
  if (st != XP_OK) return report(st, "config");

  std::vector<std::pair<std::string, std::string>> sets;
  if (seed) sets.emplace_back("/seed", std::to_string(*seed));
  if (threads) sets.emplace_back("/threads", std::to_string(*threads));
  if (phantom) sets.emplace_back("/phantom/preset", json_string(*phantom));
  if (instrument) sets.emplace_back("/instrument/kind", json_string(*instrument));
  if (count) sets.emplace_back("/generation/count", std::to_string(*count));
  if (split) sets.emplace_back("/generation/split", json_string(*split));
  if (epochs) sets.emplace_back("/training/epochs", std::to_string(*epochs));
  if (predictor) sets.emplace_back("/estimator/predictor", json_string(*predictor));
  if (noise) sets.emplace_back("/estimator/oracle_noise_px", std::to_string(*noise));
  if (k_max) sets.emplace_back("/estimator/k_max", std::to_string(*k_max));
  if (trials) sets.emplace_back("/experiment/trials_per_record", std::to_string(*trials));
  if (metric) sets.emplace_back("/registration/metric", json_string(*metric));
  if (budget) sets.emplace_back("/registration/max_renders", std::to_string(*budget));
  if (records) sets.emplace_back("/registration/records", std::to_string(*records));
  for (const auto& [ptr, value] : sets) {
    st = xp_config_set(h.cfg, ptr.c_str(), value.c_str());
    if (st != XP_OK) return report(st, ptr.c_str());
  }
  if (app.got_subcommand("config")) {
    size_t n = 0;
    xp_config_to_json(h.cfg, nullptr, 0, &n);
    std::string buf(n, '\0');
    st = xp_config_to_json(h.cfg, buf.data(), n, &n);
    if (st != XP_OK) return report(st, "config");
    std::printf("%s\n", buf.c_str());
    return 0;
  }
  const char* out = out_dir.c_str();
  if (app.got_subcommand(gen)) return report(xp_generate(h.cfg, out), "generate");
  if (app.got_subcommand(tr))
    return report(xp_train(h.cfg, task.c_str(), head.c_str(), train_data.empty() ? nullptr : train_data.c_str(), out),
                  "train");
  const char* weights = weights_dir.empty() ? nullptr : weights_dir.c_str();
  if (app.got_subcommand(est)) return report(xp_estimate(h.cfg, data_dir.c_str(), weights, out), "estimate");
  if (app.got_subcommand(eva)) return report(xp_evaluate(h.cfg, data_dir.c_str(), weights, out), "evaluate");
  if (app.got_subcommand(reg)) return report(xp_register(h.cfg, data_dir.c_str(), out), "register");
  if (app.got_subcommand(plot)) {
    std::vector<const char*> paths;
    for (const auto& s : summaries) paths.push_back(s.c_str());
    return report(xp_plot(paths.data(), paths.size(), out), "plot");
  }
  return 0;
}
