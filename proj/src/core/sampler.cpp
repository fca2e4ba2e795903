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

#include "xpose/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "xpose/errors.hpp"
#include "xpose/parallel.hpp"

namespace xpose {

void DistributionSpec::validate() const {
  switch (kind) {
    case Kind::Normal:
      require(b > 0.0 && std::isfinite(a) && std::isfinite(b), ErrorCode::InvalidArgument,
              "normal spec needs sigma > 0");
      break;
    case Kind::Uniform:
      require(a < b && std::isfinite(a) && std::isfinite(b), ErrorCode::InvalidArgument, "uniform spec needs min < max");
      break;
    case Kind::Polar:
      require(a > 0.0 && std::isfinite(a), ErrorCode::InvalidArgument, "polar spec needs r_max > 0");
      break;
    case Kind::Fixed:
      require(std::isfinite(a), ErrorCode::InvalidArgument, "fixed spec needs a finite value");
      break;
  }
}

std::string DistributionSpec::describe() const {
  std::ostringstream s;
  switch (kind) {
    case Kind::Normal: s << "normal(" << a << ", " << b << ")"; break;
    case Kind::Uniform: s << "uniform(" << a << ", " << b << ")"; break;
    case Kind::Polar: s << "polar(" << a << ")"; break;
    case Kind::Fixed: s << "fixed(" << a << ")"; break;
  }
  return s.str();
}

double sample(const DistributionSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case DistributionSpec::Kind::Normal: return normal(rng, spec.a, spec.b);
    case DistributionSpec::Kind::Uniform: return uniform(rng, spec.a, spec.b);
    case DistributionSpec::Kind::Fixed: return spec.a;
    case DistributionSpec::Kind::Polar: break;
  }
  fail(ErrorCode::InvalidArgument, "polar specs yield two values; use sample_polar");
}

Vec2 sample_polar(const DistributionSpec& spec, Rng& rng) {
  require(spec.kind == DistributionSpec::Kind::Polar, ErrorCode::InvalidArgument, "sample_polar needs a polar spec");
  const double r = uniform(rng, 0.0, spec.a);
  const double phi = uniform(rng, 0.0, 360.0);
  return {r, phi};
}

void GenerationSpecs::validate() const {
  for (const auto& s : position) s.validate();
  roll.validate();
  for (const auto& s : tilt) s.validate();
  source_object_distance.validate();
  offset.validate();
  require(offset.kind == DistributionSpec::Kind::Polar, ErrorCode::InvalidArgument, "object offset must be polar");
  for (const auto& s : rotations) s.validate();
}

namespace {

GenerationSpecs table_specs(double position_sigma, double tilt_sigma) {
  GenerationSpecs g;
  g.position.fill(DistributionSpec::normal(0.0, position_sigma));
  g.roll = DistributionSpec::uniform(0.0, 360.0);
  g.tilt.fill(DistributionSpec::normal(0.0, tilt_sigma));
  g.source_object_distance = DistributionSpec::uniform(362.8, 725.61);
  g.offset = DistributionSpec::polar(100.0);
  g.rotations = {DistributionSpec::uniform(0.0, 360.0), DistributionSpec::uniform(-60.0, 60.0),
                 DistributionSpec::uniform(0.0, 360.0)};
  return g;
}

Mat3 axis_rotation(double deg, const Vec3& axis) {
  return Eigen::AngleAxisd(deg2rad(deg), axis).toRotationMatrix();
}

}  // namespace

GenerationSpecs GenerationSpecs::training() { return table_specs(5.0, 30.0); }
GenerationSpecs GenerationSpecs::evaluation() { return table_specs(1.0, 15.0); }

Mat3 compose_orientation(const Mat3& nominal, double roll_deg, double tilt_a_deg, double tilt_b_deg) {
  return nominal * axis_rotation(tilt_b_deg, Vec3::UnitZ()) * axis_rotation(tilt_a_deg, Vec3::UnitY()) *
         axis_rotation(roll_deg, Vec3::UnitX());
}

void GenerationConfig::validate() const {
  require(count >= 1, ErrorCode::InvalidArgument, "count must be >= 1");
  require(index_offset >= 0, ErrorCode::InvalidArgument, "index_offset must be >= 0");
  require(inner_retries >= 1 && outer_retries >= 1, ErrorCode::InvalidArgument, "retry budgets must be >= 1");
  require(margin_mm >= 0.0 && detector_margin_px >= 0.0, ErrorCode::InvalidArgument, "margins must be >= 0");
  require(upsample == 1 || upsample == 2 || upsample == 4, ErrorCode::InvalidArgument, "upsample must be 1, 2 or 4");
  require(mu_instrument >= 0.0, ErrorCode::InvalidArgument, "mu_instrument must be >= 0");
  require(split == "train" || split == "eval", ErrorCode::InvalidArgument, "split must be 'train' or 'eval'");
  geometry.validate();
  specs.validate();
}

Volume make_instrument_insert(const Volume& anatomy, const InstrumentMesh& placed, double mu_instrument, int factor,
                              double margin_mm) {
  Box3 box = placed.bounding_box();
  box.min().array() -= margin_mm;
  box.max().array() += margin_mm;
  Volume fine = interpolate_region(anatomy, factor, box);
  return voxelize_and_combine(fine, placed, mu_instrument).volume;
}

Radiograph render_record(const Volume& anatomy, const DatasetRecord& record, unsigned threads) {
  const InstrumentMesh mesh = make_instrument(record.instrument, record.instrument_params);
  const InstrumentMesh placed = transform_mesh(mesh, record.position, record.rotation);
  const Volume insert = make_instrument_insert(anatomy, placed, record.mu_instrument, record.upsample, kInsertMarginMm);
  Scene scene;
  scene.anatomy = &anatomy;
  scene.insert = &insert;
  return render_scene(scene, record.setup, threads);
}

Pose pose_from_placement(const ProjectionSetup& setup, const Vec3& position, const Vec3& main_axis_world) {
  const PointProjection pp = project_point(setup, position);
  const auto [alpha, tau] = direction_angles(setup, main_axis_world);
  return make_pose(pp.pixel.x(), pp.pixel.y(), alpha, tau, pp.depth);
}

bool projection_acceptable(const ProjectionSetup& setup, const Vec3& position, const ValidityPolygons& polys,
                           double margin_mm, double detector_margin_px) {
  if (!validity_check(setup, position, polys, margin_mm)) return false;
  const Vec2 px = project_point(setup, position).pixel;
  return px.x() >= detector_margin_px && px.y() >= detector_margin_px &&
         px.x() <= setup.geom.width - 1 - detector_margin_px && px.y() <= setup.geom.height - 1 - detector_margin_px;
}

namespace {

DatasetRecord sample_record(int index, const Volume& phantom, const InstrumentMesh& instrument,
                            const std::vector<NominalPlacement>& nominal, const ValidityPolygons& polys,
                            const GenerationConfig& cfg) {
  DatasetRecord rec;
  rec.index = index;
  rec.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(index)});
  rec.split = cfg.split;
  rec.phantom_preset = cfg.phantom_preset;
  rec.phantom_seed = cfg.phantom_seed;
  rec.phantom_shape = cfg.phantom_shape;
  rec.instrument = instrument.kind;
  rec.instrument_params = cfg.instrument_params;
  rec.instrument_params.robot_bend_deg = instrument.robot_bend_deg;
  rec.mu_instrument = cfg.mu_instrument;
  rec.upsample = cfg.upsample;
  const NominalPlacement& anchor = nominal[static_cast<std::size_t>(index) % nominal.size()];
  rec.nominal_id = anchor.id;

  Rng rng(rec.seed);
  const GenerationSpecs& sp = cfg.specs;
  for (int outer = 0; outer < cfg.outer_retries; ++outer) {
    for (int a = 0; a < 3; ++a) rec.deviation_mm[a] = sample(sp.position[a], rng);
    rec.roll_deg = sample(sp.roll, rng);
    rec.tilt_a_deg = sample(sp.tilt[0], rng);
    rec.tilt_b_deg = sample(sp.tilt[1], rng);
    rec.position = anchor.position + rec.deviation_mm;
    rec.rotation = compose_orientation(anchor.rotation, rec.roll_deg, rec.tilt_a_deg, rec.tilt_b_deg);
    const Vec3 axis_world = rec.rotation * instrument.main_axis;

    for (int inner = 0; inner < cfg.inner_retries; ++inner) {
      ProjectionSetup s;
      s.geom = cfg.geometry;
      s.source_object_distance = sample(sp.source_object_distance, rng);
      const Vec2 off = sample_polar(sp.offset, rng);
      s.offset_r = off.x();
      s.offset_phi = off.y();
      for (int a = 0; a < 3; ++a) s.rotations[a] = sample(sp.rotations[a], rng);
      s.object_center = rec.position;
      if (!(s.source_object_distance > 0.0 && s.source_object_distance < s.geom.source_detector_distance)) continue;
      if (!projection_acceptable(s, rec.position, polys, cfg.margin_mm, cfg.detector_margin_px)) continue;
      rec.setup = s;
      rec.pose = pose_from_placement(s, rec.position, axis_world);
      rec.outer_attempts = outer + 1;
      rec.inner_attempts = inner + 1;
      if (cfg.render) rec.image = render_record(phantom, rec, 1);
      return rec;
    }
  }
  std::ostringstream msg;
  msg << "record " << index << ": no valid projection after " << cfg.outer_retries << " x " << cfg.inner_retries
      << " attempts (projection spec: d_SOD " << sp.source_object_distance.describe() << ", offset "
      << sp.offset.describe() << ", rotations " << sp.rotations[0].describe() << " x " << sp.rotations[1].describe()
      << " x " << sp.rotations[2].describe() << "; position spec " << sp.position[0].describe() << ")";
  fail(ErrorCode::Generation, msg.str());
}

}  // namespace

std::vector<DatasetRecord> generate_dataset(const Volume& phantom, const InstrumentMesh& instrument,
                                            const std::vector<NominalPlacement>& nominal,
                                            const ValidityPolygons& polys, const GenerationConfig& cfg) {
  cfg.validate();
  phantom.validate();
  polys.validate();
  require(!nominal.empty(), ErrorCode::InvalidArgument, "at least one nominal placement is required");
  std::vector<DatasetRecord> out(static_cast<std::size_t>(cfg.count));
  parallel_for(0, out.size(), cfg.threads, [&](std::size_t i) {
    out[i] = sample_record(cfg.index_offset + static_cast<int>(i), phantom, instrument, nominal, polys, cfg);
  });
  return out;
}

std::vector<DatasetRecord> generate_dataset(const GenerationConfig& cfg) {
  const Volume phantom = build_phantom(cfg.phantom_seed, cfg.phantom_preset, cfg.phantom_shape);
  const InstrumentMesh mesh = make_instrument(cfg.instrument, cfg.instrument_params);
  const auto nominal = nominal_placements(cfg.phantom_preset, cfg.phantom_seed, cfg.phantom_shape);
  return generate_dataset(phantom, mesh, nominal, phantom_validity_polygons(phantom), cfg);
}

std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split_scenario(
    const std::vector<DatasetRecord>& records, InstrumentKind instrument, const std::string& holdout_preset) {
  std::set<std::string> presets;
  for (const auto& r : records) presets.insert(r.phantom_preset);
  require(presets.size() >= 2, ErrorCode::InvalidArgument, "split_scenario needs at least two phantom presets");
  require(presets.count(holdout_preset) == 1, ErrorCode::InvalidArgument,
          "holdout preset '" + holdout_preset + "' not present in the records");
  std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> out;
  for (const auto& r : records) {
    if (r.instrument != instrument) continue;
    (r.phantom_preset == holdout_preset ? out.second : out.first).push_back(r);
  }
  return out;
}

std::vector<DatasetRecord> generate_scenario(const GenerationConfig& base, const std::string& holdout_preset,
                                             int train_count_per_preset, int eval_count) {
  const auto& names = phantom_presets();
  require(std::find(names.begin(), names.end(), holdout_preset) != names.end(), ErrorCode::InvalidArgument,
          "unknown holdout preset '" + holdout_preset + "'");
  std::vector<DatasetRecord> all;
  int next_index = base.index_offset;
  for (const auto& preset : phantom_presets()) {
    GenerationConfig cfg = base;
    cfg.phantom_preset = preset;
    const bool holdout = preset == holdout_preset;
    cfg.split = holdout ? "eval" : "train";
    cfg.specs = holdout ? GenerationSpecs::evaluation() : GenerationSpecs::training();
    cfg.count = holdout ? eval_count : train_count_per_preset;
    cfg.index_offset = next_index;
    auto part = generate_dataset(cfg);
    next_index += cfg.count;
    for (auto& r : part) all.push_back(std::move(r));
  }
  return all;
}

}  // namespace xpose
