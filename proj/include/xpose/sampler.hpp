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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xpose/geometry.hpp"
#include "xpose/mesh.hpp"
#include "xpose/phantom.hpp"
#include "xpose/renderer.hpp"
#include "xpose/rng.hpp"

namespace xpose {

struct DistributionSpec {
  enum class Kind { Normal, Uniform, Polar, Fixed };
  Kind kind = Kind::Fixed;
  double a = 0.0;  // normal: mean, uniform: min, polar: r_max, fixed: value
  double b = 0.0;  // normal: sigma, uniform: max

  static DistributionSpec normal(double mean, double sigma) { return {Kind::Normal, mean, sigma}; }
  static DistributionSpec uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static DistributionSpec polar(double r_max) { return {Kind::Polar, r_max, 0.0}; }
  static DistributionSpec fixed(double v) { return {Kind::Fixed, v, 0.0}; }

  void validate() const;
  std::string describe() const;
};

/// Scalar draw. Polar specs must go through sample_polar.
double sample(const DistributionSpec& spec, Rng& rng);
/// (r, phi_deg) with r ~ U(0, r_max), phi ~ U(0, 360).
Vec2 sample_polar(const DistributionSpec& spec, Rng& rng);

/// Per-record sampling distributions.
struct GenerationSpecs {
  std::array<DistributionSpec, 3> position;  // deviation from the nominal position, world mm
  DistributionSpec roll;                     // about the instrument main axis, degrees
  std::array<DistributionSpec, 2> tilt;      // out-of-axis rotations, degrees
  DistributionSpec source_object_distance;
  DistributionSpec offset;                      // polar, mm on the detector plane
  std::array<DistributionSpec, 3> rotations;    // Z-Y-Z, degrees

  void validate() const;
  static GenerationSpecs training();    // N(0, 5^2) mm, N(0, 30^2) deg
  static GenerationSpecs evaluation();  // N(0, 1^2) mm, N(0, 15^2) deg
};

/// Orientation composition: nominal * Rz(tilt[1]) * Ry(tilt[0]) * Rx(roll).
Mat3 compose_orientation(const Mat3& nominal, double roll_deg, double tilt_a_deg, double tilt_b_deg);

struct DatasetRecord {
  int index = 0;
  std::uint64_t seed = 0;
  std::string split = "train";
  std::string phantom_preset;
  std::uint64_t phantom_seed = 0;
  PhantomShape phantom_shape;
  InstrumentKind instrument = InstrumentKind::Screw;
  InstrumentParams instrument_params;
  double mu_instrument = 0.5;
  int nominal_id = 0;
  Vec3 deviation_mm = Vec3::Zero();
  double roll_deg = 0.0, tilt_a_deg = 0.0, tilt_b_deg = 0.0;
  Vec3 position = Vec3::Zero();     // instrument origin, world mm
  Mat3 rotation = Mat3::Identity();  // mesh frame -> world
  ProjectionSetup setup;
  Pose pose;
  int outer_attempts = 0;
  int inner_attempts = 0;
  int upsample = 4;
  std::string image_file;          // relative to the dataset directory
  std::optional<Radiograph> image;  // present when rendered or loaded
};

struct GenerationConfig {
  std::string phantom_preset = "shell-sphere";
  std::uint64_t phantom_seed = 1;
  PhantomShape phantom_shape;
  InstrumentKind instrument = InstrumentKind::Screw;
  InstrumentParams instrument_params;
  double mu_instrument = 0.5;
  std::string split = "train";
  GenerationSpecs specs = GenerationSpecs::training();
  ProjectionGeometry geometry;
  int count = 1000;
  std::uint64_t seed = 1;
  int index_offset = 0;
  int inner_retries = 100;
  int outer_retries = 100;
  double margin_mm = 5.0;
  double detector_margin_px = 64.0;  // projected origin must stay this far from the border
  int upsample = 4;
  bool render = true;
  unsigned threads = 1;

  void validate() const;
};

constexpr double kInsertMarginMm = 1.0;

/// Fine local copy of the anatomy around a placed mesh with the instrument
/// voxelized into it.
Volume make_instrument_insert(const Volume& anatomy, const InstrumentMesh& placed, double mu_instrument, int factor,
                              double margin_mm);

/// Renders the record's scene (full detector) from the anatomy.
Radiograph render_record(const Volume& anatomy, const DatasetRecord& record, unsigned threads = 1);

/// Pose of a placed instrument origin/axis under a projection.
Pose pose_from_placement(const ProjectionSetup& setup, const Vec3& position, const Vec3& main_axis_world);

/// Is the projection acceptable: polygons clear and origin inside the
/// detector with the configured border.
bool projection_acceptable(const ProjectionSetup& setup, const Vec3& position, const ValidityPolygons& polys,
                           double margin_mm, double detector_margin_px);

/// Double rejection loop per record with per-record derived seeds; the output
/// order is the record index regardless of the thread count.
std::vector<DatasetRecord> generate_dataset(const Volume& phantom, const InstrumentMesh& instrument,
                                            const std::vector<NominalPlacement>& nominal,
                                            const ValidityPolygons& polys, const GenerationConfig& cfg);

/// Convenience wrapper that builds phantom, mesh, anchors and polygons from cfg.
std::vector<DatasetRecord> generate_dataset(const GenerationConfig& cfg);

/// Partitions by phantom preset: records from `holdout_preset` form the
/// evaluation side. Only records of `instrument` are kept.
std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split_scenario(
    const std::vector<DatasetRecord>& records, InstrumentKind instrument, const std::string& holdout_preset);

/// Generates one cross-validation scenario: training specs for the two
/// non-holdout presets, evaluation specs for the holdout preset.
std::vector<DatasetRecord> generate_scenario(const GenerationConfig& base, const std::string& holdout_preset,
                                             int train_count_per_preset, int eval_count);

// Dataset directory: manifest.jsonl (one record per line, schema-versioned),
// records.csv (fixed columns) and images/rec_NNNNNN.pgm + .json.
constexpr int kDatasetSchemaVersion = 1;
void save_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir);
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir, bool load_images = true);
std::string records_csv(const std::vector<DatasetRecord>& records);

}  // namespace xpose
