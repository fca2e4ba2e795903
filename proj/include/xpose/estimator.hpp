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

// Iterative patch-based pose estimation and the evaluation harness.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xpose/geometry.hpp"
#include "xpose/metrics.hpp"
#include "xpose/nn.hpp"
#include "xpose/patch.hpp"
#include "xpose/sampler.hpp"

namespace xpose {

/// Maps a standard-pose patch to 12 normalized keypoint values.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::array<double, 12> predict(const Patch& patch, int iteration) = 0;
};

struct OracleConfig {
  double noise_px = 0.0;        // base keypoint noise (patch pixels)
  double deviation_gain = 1.0;  // noise grows with the distance of the patch estimate from the truth
  double position_scale_mm = 2.5;
  double angle_scale_deg = 10.0;

  void validate() const;
};

/// Ground-truth keypoints expressed in the patch frame, with Gaussian noise of
/// standard deviation noise_px * (1 + gain * d), where d = |dpos| / position
/// scale + |dalpha| / angle scale measures how far the patch is from the
/// standard pose.
class OraclePredictor : public Predictor {
 public:
  OraclePredictor(const Pose& truth, const KeypointLayout& layout, const ProjectionGeometry& geom,
                  const OracleConfig& cfg, std::uint64_t seed);
  std::array<double, 12> predict(const Patch& patch, int iteration) override;

 private:
  Pose truth_;
  KeypointLayout layout_;
  ProjectionGeometry geom_;
  OracleConfig cfg_;
  std::uint64_t seed_;
};

/// Trained indirect-head network. Not thread-safe.
class NetworkPredictor : public Predictor {
 public:
  explicit NetworkPredictor(nn::Network& net);
  std::array<double, 12> predict(const Patch& patch, int iteration) override;

 private:
  nn::Network* net_;
};

struct EstimatorConfig {
  int k_max = 3;
  double tau_validity_limit_deg = 80.0;

  void validate() const;
};

struct IterationStep {
  Pose input;
  PoseRecovery output;
};

struct EstimateResult {
  Pose pose;                        // last successful estimate
  std::vector<IterationStep> trace;  // one entry per completed iteration
  bool aborted = false;
  std::string abort_reason;
};

/// Repeats patch extraction, prediction and pose recovery k_max times, feeding
/// each estimate back as the next patch center.
EstimateResult estimate_iterative(const Image2D& image, const Pose& initial, Predictor& predictor,
                                  const EstimatorConfig& cfg, const KeypointLayout& layout,
                                  const ProjectionGeometry& geom);

/// Deterministic initial estimate for (record, trial): an offset drawn from
/// the augmentation distribution, applied at the true depth.
Pose initial_estimate(const DatasetRecord& rec, const AugmentationSpec& aug, std::uint64_t seed, int trial);

struct ExperimentConfig {
  EstimatorConfig estimator;
  AugmentationSpec augmentation;
  int trials_per_record = 1;
  std::uint64_t seed = 1;
  std::string method = "oracle";
  unsigned threads = 1;

  void validate() const;
};

struct TrialRow {
  int record = 0;
  int trial = 0;
  int iteration = 0;  // 0: initial estimate
  Pose truth;
  Pose estimate;
  ErrorReport error;
  bool aborted = false;
};

struct ExperimentResult {
  std::vector<TrialRow> rows;
  int records_used = 0;
  int records_excluded = 0;  // |tau| at or beyond the validity limit
  int trials_aborted = 0;
  double seconds_per_estimate = 0.0;
};

/// (record, trial seed) -> predictor. Called once per trial.
using PredictorFactory = std::function<std::unique_ptr<Predictor>(const DatasetRecord&, std::uint64_t)>;

/// Runs every trial on every valid record. Records need images.
ExperimentResult run_experiment(const std::vector<DatasetRecord>& records, const ExperimentConfig& cfg,
                                const PredictorFactory& factory);

/// Rows of one iteration, excluding aborted trials.
std::vector<ErrorReport> errors_at_iteration(const ExperimentResult& res, int iteration);

std::string trial_csv(const ExperimentResult& res, const std::string& method);
std::vector<Summary> experiment_summaries(const ExperimentResult& res, const std::string& method, int iteration);

}  // namespace xpose
