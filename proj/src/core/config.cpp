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

#include "xpose/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "xpose/errors.hpp"
#include "xpose/serialize.hpp"

namespace xpose {

using nlohmann::json;

void RectangleTaskConfig::validate() const {
  require(train_count >= 2 && test_count >= 1 && seeds >= 1, ErrorCode::InvalidArgument,
          "rectangle task needs >= 2 train images, >= 1 test image and >= 1 seed");
  require(base_channels >= 1 && fc_nodes >= 4, ErrorCode::InvalidArgument, "rectangle network too small");
}

void PatchTaskConfig::validate() const {
  require(patches_per_record >= 1, ErrorCode::InvalidArgument, "patches_per_record must be >= 1");
}

std::string to_string(PredictorKind k) { return k == PredictorKind::Oracle ? "oracle" : "convnet"; }

PredictorKind predictor_kind_from_string(const std::string& s) {
  if (s == "oracle") return PredictorKind::Oracle;
  if (s == "convnet") return PredictorKind::ConvNet;
  fail(ErrorCode::InvalidArgument, "unknown predictor '" + s + "' (oracle | convnet)");
}

nn::ConvNetConfig desk_scale_network() {
  nn::ConvNetConfig c;
  c.base_channels = 8;
  c.fc_nodes = 256;
  return c;
}

void AppConfig::validate() const {
  require(schema_version == kConfigSchemaVersion, ErrorCode::Format, "unsupported config schema_version");
  require(threads >= 1, ErrorCode::InvalidArgument, "threads must be >= 1");
  geometry.validate();
  generation.validate();
  augmentation.validate();
  network.validate();
  training.validate();
  patches.validate();
  rectangle.validate();
  estimator.validate();
  oracle.validate();
  registration.validate();
  require(trials_per_record >= 1, ErrorCode::InvalidArgument, "trials_per_record must be >= 1");
  require(registration_records >= 0, ErrorCode::InvalidArgument, "registration_records must be >= 0");
}

void AppConfig::propagate() {
  generation.geometry = geometry;
  generation.seed = seed;
  generation.threads = threads;
  training.seed = seed;
  registration.seed = seed;
}

namespace {

const char* kind_name(DistributionSpec::Kind k) {
  switch (k) {
    case DistributionSpec::Kind::Normal: return "normal";
    case DistributionSpec::Kind::Uniform: return "uniform";
    case DistributionSpec::Kind::Polar: return "polar";
    case DistributionSpec::Kind::Fixed: return "fixed";
  }
  return "fixed";
}

DistributionSpec::Kind kind_from_name(const std::string& s) {
  if (s == "normal") return DistributionSpec::Kind::Normal;
  if (s == "uniform") return DistributionSpec::Kind::Uniform;
  if (s == "polar") return DistributionSpec::Kind::Polar;
  if (s == "fixed") return DistributionSpec::Kind::Fixed;
  fail(ErrorCode::Format, "unknown distribution kind '" + s + "'");
}

template <class T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  require(j.is_object(), ErrorCode::Format, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known.count(it.key()) > 0, ErrorCode::Format, "unknown key '" + it.key() + "' in " + where);
}

json generation_to_json(const GenerationConfig& g) {
  return {{"phantom_dims", g.phantom_shape.dims},
          {"phantom_spacing_mm", g.phantom_shape.spacing_mm},
          {"diameter_mm", g.instrument_params.diameter_mm},
          {"robot_bend_deg", g.instrument_params.robot_bend_deg},
          {"segments", g.instrument_params.segments},
          {"split", g.split},
          {"count", g.count},
          {"index_offset", g.index_offset},
          {"inner_retries", g.inner_retries},
          {"outer_retries", g.outer_retries},
          {"margin_mm", g.margin_mm},
          {"detector_margin_px", g.detector_margin_px},
          {"upsample", g.upsample},
          {"render", g.render}};
}

GenerationConfig generation_from_json(const json& j) {
  reject_unknown(j,
                 {"phantom_preset", "phantom_seed", "phantom_dims", "phantom_spacing_mm", "instrument", "diameter_mm",
                  "robot_bend_deg", "segments", "mu_instrument", "split", "count", "index_offset", "inner_retries",
                  "outer_retries", "margin_mm", "detector_margin_px", "upsample", "render", "specs"},
                 "generation");
  GenerationConfig g;
  read(j, "phantom_preset", g.phantom_preset);
  read(j, "phantom_seed", g.phantom_seed);
  read(j, "phantom_dims", g.phantom_shape.dims);
  read(j, "phantom_spacing_mm", g.phantom_shape.spacing_mm);
  if (j.contains("instrument")) g.instrument = instrument_kind_from_string(j.at("instrument").get<std::string>());
  read(j, "diameter_mm", g.instrument_params.diameter_mm);
  read(j, "robot_bend_deg", g.instrument_params.robot_bend_deg);
  read(j, "segments", g.instrument_params.segments);
  read(j, "mu_instrument", g.mu_instrument);
  read(j, "split", g.split);
  read(j, "count", g.count);
  read(j, "index_offset", g.index_offset);
  read(j, "inner_retries", g.inner_retries);
  read(j, "outer_retries", g.outer_retries);
  read(j, "margin_mm", g.margin_mm);
  read(j, "detector_margin_px", g.detector_margin_px);
  read(j, "upsample", g.upsample);
  read(j, "render", g.render);
  return g;
}

}  // namespace

json distribution_to_json(const DistributionSpec& d) {
  json j{{"kind", kind_name(d.kind)}};
  switch (d.kind) {
    case DistributionSpec::Kind::Normal: j["mean"] = d.a; j["sigma"] = d.b; break;
    case DistributionSpec::Kind::Uniform: j["min"] = d.a; j["max"] = d.b; break;
    case DistributionSpec::Kind::Polar: j["r_max"] = d.a; break;
    case DistributionSpec::Kind::Fixed: j["value"] = d.a; break;
  }
  return j;
}

DistributionSpec distribution_from_json(const json& j) {
  require(j.is_object() && j.contains("kind"), ErrorCode::Format, "distribution needs a 'kind'");
  DistributionSpec d;
  d.kind = kind_from_name(j.at("kind").get<std::string>());
  switch (d.kind) {
    case DistributionSpec::Kind::Normal: d.a = j.value("mean", 0.0); d.b = j.at("sigma").get<double>(); break;
    case DistributionSpec::Kind::Uniform: d.a = j.at("min").get<double>(); d.b = j.at("max").get<double>(); break;
    case DistributionSpec::Kind::Polar: d.a = j.at("r_max").get<double>(); break;
    case DistributionSpec::Kind::Fixed: d.a = j.at("value").get<double>(); break;
  }
  d.validate();
  return d;
}

json specs_to_json(const GenerationSpecs& s) {
  json pos = json::array(), tilt = json::array(), rot = json::array();
  for (const auto& d : s.position) pos.push_back(distribution_to_json(d));
  for (const auto& d : s.tilt) tilt.push_back(distribution_to_json(d));
  for (const auto& d : s.rotations) rot.push_back(distribution_to_json(d));
  return {{"position_mm", pos},
          {"roll_deg", distribution_to_json(s.roll)},
          {"tilt_deg", tilt},
          {"source_object_distance_mm", distribution_to_json(s.source_object_distance)},
          {"offset_mm", distribution_to_json(s.offset)},
          {"rotations_zyz_deg", rot}};
}

GenerationSpecs specs_from_json(const json& j) {
  reject_unknown(j, {"position_mm", "roll_deg", "tilt_deg", "source_object_distance_mm", "offset_mm", "rotations_zyz_deg"},
                 "generation.specs");
  GenerationSpecs s = GenerationSpecs::training();
  auto read_array = [&](const char* key, auto& arr) {
    if (!j.contains(key)) return;
    const json& a = j.at(key);
    require(a.is_array() && a.size() == arr.size(), ErrorCode::Format,
            std::string("generation.specs.") + key + " has the wrong length");
    for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = distribution_from_json(a[i]);
  };
  read_array("position_mm", s.position);
  read_array("tilt_deg", s.tilt);
  read_array("rotations_zyz_deg", s.rotations);
  if (j.contains("roll_deg")) s.roll = distribution_from_json(j.at("roll_deg"));
  if (j.contains("source_object_distance_mm"))
    s.source_object_distance = distribution_from_json(j.at("source_object_distance_mm"));
  if (j.contains("offset_mm")) s.offset = distribution_from_json(j.at("offset_mm"));
  s.validate();
  return s;
}

json config_to_json(const AppConfig& c) {
  const auto& r = c.registration;
  json generation_json = generation_to_json(c.generation);
  generation_json["specs"] = c.specs_follow_split ? json("split") : specs_to_json(c.generation.specs);
  return {{"schema_version", c.schema_version},
          {"seed", c.seed},
          {"threads", c.threads},
          {"geometry", geometry_to_json(c.geometry)},
          {"phantom", {{"preset", c.generation.phantom_preset}, {"seed", c.generation.phantom_seed}}},
          {"instrument", {{"kind", to_string(c.generation.instrument)}, {"mu", c.generation.mu_instrument}}},
          {"generation", generation_json},
          {"augmentation",
           {{"delta_x_initial_mm", c.augmentation.delta_x_initial_mm},
            {"delta_alpha_initial_deg", c.augmentation.delta_alpha_initial_deg},
            {"patches_per_record", c.patches.patches_per_record}}},
          {"network", nn::config_to_json(c.network)},
          {"training", nn::train_config_to_json(c.training)},
          {"rectangle",
           {{"train_count", c.rectangle.train_count},
            {"test_count", c.rectangle.test_count},
            {"seeds", c.rectangle.seeds},
            {"base_channels", c.rectangle.base_channels},
            {"fc_nodes", c.rectangle.fc_nodes},
            {"full_scale", c.rectangle.full_scale}}},
          {"estimator",
           {{"k_max", c.estimator.k_max},
            {"tau_validity_limit_deg", c.estimator.tau_validity_limit_deg},
            {"predictor", to_string(c.predictor)},
            {"oracle_noise_px", c.oracle.noise_px},
            {"oracle_deviation_gain", c.oracle.deviation_gain},
            {"oracle_position_scale_mm", c.oracle.position_scale_mm},
            {"oracle_angle_scale_deg", c.oracle.angle_scale_deg}}},
          {"registration",
           {{"metric", to_string(r.metric)},
            {"max_renders", r.max_renders},
            {"lambda", r.lambda},
            {"sigma0", r.sigma0},
            {"position_scale_mm", r.position_scale_mm},
            {"angle_scale_deg", r.angle_scale_deg},
            {"mi_bins", r.mi_bins},
            {"upsample", r.upsample},
            {"records", c.registration_records}}},
          {"experiment", {{"trials_per_record", c.trials_per_record}}}};
}

AppConfig app_config_from_json(const json& j) {
  reject_unknown(j,
                 {"schema_version", "seed", "threads", "geometry", "phantom", "instrument", "generation",
                  "augmentation", "network", "training", "rectangle", "estimator", "registration", "experiment"},
                 "config");
  AppConfig c;
  try {
    require(j.contains("schema_version"), ErrorCode::Format, "config needs a schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    require(c.schema_version == kConfigSchemaVersion, ErrorCode::Format,
            "config schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                std::to_string(kConfigSchemaVersion) + ")");
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    if (j.contains("geometry")) c.geometry = geometry_from_json(j.at("geometry"));
    if (j.contains("generation")) {
      c.generation = generation_from_json(j.at("generation"));
      const json& g = j.at("generation");
      c.specs_follow_split = !g.contains("specs") || g.at("specs") == "split";
      if (!c.specs_follow_split) c.generation.specs = specs_from_json(g.at("specs"));
    }
    if (c.specs_follow_split)
      c.generation.specs = c.generation.split == "eval" ? GenerationSpecs::evaluation() : GenerationSpecs::training();
    if (j.contains("phantom")) {
      const json& p = j.at("phantom");
      reject_unknown(p, {"preset", "seed"}, "phantom");
      read(p, "preset", c.generation.phantom_preset);
      read(p, "seed", c.generation.phantom_seed);
    }
    if (j.contains("instrument")) {
      const json& i = j.at("instrument");
      reject_unknown(i, {"kind", "mu"}, "instrument");
      if (i.contains("kind")) c.generation.instrument = instrument_kind_from_string(i.at("kind").get<std::string>());
      read(i, "mu", c.generation.mu_instrument);
    }
    if (j.contains("augmentation")) {
      const json& a = j.at("augmentation");
      reject_unknown(a, {"delta_x_initial_mm", "delta_alpha_initial_deg", "patches_per_record"}, "augmentation");
      read(a, "delta_x_initial_mm", c.augmentation.delta_x_initial_mm);
      read(a, "delta_alpha_initial_deg", c.augmentation.delta_alpha_initial_deg);
      read(a, "patches_per_record", c.patches.patches_per_record);
    }
    if (j.contains("network")) c.network = nn::config_from_json(j.at("network"));
    if (j.contains("training")) c.training = nn::train_config_from_json(j.at("training"));
    if (j.contains("rectangle")) {
      const json& r = j.at("rectangle");
      reject_unknown(r, {"train_count", "test_count", "seeds", "base_channels", "fc_nodes", "full_scale"},
                     "rectangle");
      read(r, "train_count", c.rectangle.train_count);
      read(r, "test_count", c.rectangle.test_count);
      read(r, "seeds", c.rectangle.seeds);
      read(r, "base_channels", c.rectangle.base_channels);
      read(r, "fc_nodes", c.rectangle.fc_nodes);
      read(r, "full_scale", c.rectangle.full_scale);
    }
    if (j.contains("estimator")) {
      const json& e = j.at("estimator");
      reject_unknown(e,
                     {"k_max", "tau_validity_limit_deg", "predictor", "oracle_noise_px", "oracle_deviation_gain",
                      "oracle_position_scale_mm", "oracle_angle_scale_deg"},
                     "estimator");
      read(e, "k_max", c.estimator.k_max);
      read(e, "tau_validity_limit_deg", c.estimator.tau_validity_limit_deg);
      if (e.contains("predictor")) c.predictor = predictor_kind_from_string(e.at("predictor").get<std::string>());
      read(e, "oracle_noise_px", c.oracle.noise_px);
      read(e, "oracle_deviation_gain", c.oracle.deviation_gain);
      read(e, "oracle_position_scale_mm", c.oracle.position_scale_mm);
      read(e, "oracle_angle_scale_deg", c.oracle.angle_scale_deg);
    }
    if (j.contains("registration")) {
      const json& r = j.at("registration");
      reject_unknown(r,
                     {"metric", "max_renders", "lambda", "sigma0", "position_scale_mm", "angle_scale_deg", "mi_bins",
                      "upsample", "records"},
                     "registration");
      if (r.contains("metric")) c.registration.metric = similarity_metric_from_string(r.at("metric").get<std::string>());
      read(r, "max_renders", c.registration.max_renders);
      read(r, "lambda", c.registration.lambda);
      read(r, "sigma0", c.registration.sigma0);
      read(r, "position_scale_mm", c.registration.position_scale_mm);
      read(r, "angle_scale_deg", c.registration.angle_scale_deg);
      read(r, "mi_bins", c.registration.mi_bins);
      read(r, "upsample", c.registration.upsample);
      read(r, "records", c.registration_records);
    }
    if (j.contains("experiment")) {
      const json& e = j.at("experiment");
      reject_unknown(e, {"trials_per_record"}, "experiment");
      read(e, "trials_per_record", c.trials_per_record);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("config: ") + e.what());
  }
  c.propagate();
  c.validate();
  return c;
}

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return app_config_from_json(j);
}

}  // namespace xpose
