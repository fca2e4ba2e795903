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

#pragma once

// End-to-end stages behind the command-line tool. Every stage writes into its
// output directory; CSV files use %.17g numbers and a fixed column order.
//
//   generate  -> manifest.jsonl, records.csv, images/
//   train     -> loss.csv, weights/ (patches) or rectangle_errors.csv,
//                rectangle_loss.csv, rectangle_summary.csv, weights/<head>_seed<k>/
//   estimate  -> estimates.csv, timing.json
//   evaluate  -> trials.csv, summary.csv, evaluation.json
//   register  -> registration_<metric>.csv, registration_<metric>_summary.csv,
//                registration_<metric>.json
//   plot      -> box_<metric>.svg per metric

#include <filesystem>
#include <string>
#include <vector>

#include "xpose/config.hpp"

namespace xpose {

namespace fs = std::filesystem;

void pipeline_generate(const AppConfig& cfg, const fs::path& out);

void pipeline_train(const AppConfig& cfg, const std::string& task, nn::Head head, const fs::path& data_dir,
                    const fs::path& out);

/// Patch samples of a dataset: `patches_per_record` augmented crops per record
/// with |tau| below the validity limit.
std::vector<PatchSample> make_patch_samples(const std::vector<DatasetRecord>& records, const AppConfig& cfg,
                                            nn::Head head);

/// `weights_dir` is used when the configured predictor is convnet.
void pipeline_estimate(const AppConfig& cfg, const fs::path& data_dir, const fs::path& weights_dir,
                       const fs::path& out);
void pipeline_evaluate(const AppConfig& cfg, const fs::path& data_dir, const fs::path& weights_dir,
                       const fs::path& out);

struct RegistrationTrial {
  int record = 0;
  int trial = 0;
  ErrorReport initial;
  ErrorReport final;
  int renders = 0;
  double initial_score = 0.0;
  double best_score = 0.0;
};

/// Runs the registration baseline on the first `registration_records` valid
/// records with `trials_per_record` trials, using the same per-trial initial
/// estimates as the evaluation harness.
std::vector<RegistrationTrial> run_registration_trials(const std::vector<DatasetRecord>& records,
                                                       const AppConfig& cfg);
std::string registration_csv(const std::vector<RegistrationTrial>& trials, SimilarityMetric metric);

void pipeline_register(const AppConfig& cfg, const fs::path& data_dir, const fs::path& out);

/// Reads summary CSVs and writes one box plot per metric with one box per
/// method. Reference rows are skipped.
void pipeline_plot(const std::vector<fs::path>& summary_csvs, const fs::path& out);

}  // namespace xpose
