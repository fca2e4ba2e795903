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

// Single versioned JSON configuration shared by every pipeline stage.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "xpose/estimator.hpp"
#include "xpose/nn.hpp"
#include "xpose/patch.hpp"
#include "xpose/registration.hpp"
#include "xpose/sampler.hpp"

namespace xpose {

constexpr int kConfigSchemaVersion = 1;

struct RectangleTaskConfig {
  int train_count = 2000;
  int test_count = 500;
  int seeds = 5;
  int base_channels = 8;
  int fc_nodes = 64;
  bool full_scale = false;  // 20000 / 1000 images

  void validate() const;
};

struct PatchTaskConfig {
  int patches_per_record = 4;  // augmented crops per training record
  void validate() const;
};

enum class PredictorKind { Oracle, ConvNet };
std::string to_string(PredictorKind k);
PredictorKind predictor_kind_from_string(const std::string& s);

/// Simplified patch network used by default: 8 base channels, 256 dense nodes.
nn::ConvNetConfig desk_scale_network();

struct AppConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  ProjectionGeometry geometry;
  GenerationConfig generation;  // its geometry, seed and threads are overwritten from the top level
  bool specs_follow_split = true;  // "specs": "split" selects the training or evaluation distributions
  AugmentationSpec augmentation;
  nn::ConvNetConfig network = desk_scale_network();
  nn::TrainConfig training;
  PatchTaskConfig patches;
  RectangleTaskConfig rectangle;
  EstimatorConfig estimator;
  PredictorKind predictor = PredictorKind::Oracle;
  OracleConfig oracle;
  RegistrationConfig registration;
  int trials_per_record = 1;
  int registration_records = 25;  // first N valid records of the dataset; 0 = all

  void validate() const;
  /// Copies the top-level seed, threads and geometry into the stage configs.
  void propagate();
};

nlohmann::json distribution_to_json(const DistributionSpec& d);
DistributionSpec distribution_from_json(const nlohmann::json& j);
nlohmann::json specs_to_json(const GenerationSpecs& s);
GenerationSpecs specs_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const AppConfig& cfg);
/// Missing keys keep their defaults; unknown top-level sections and a
/// mismatching schema_version are rejected with Format.
AppConfig app_config_from_json(const nlohmann::json& j);
AppConfig load_app_config(const std::filesystem::path& path);

}  // namespace xpose
