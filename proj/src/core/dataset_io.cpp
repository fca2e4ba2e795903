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

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xpose/errors.hpp"
#include "xpose/sampler.hpp"
#include "xpose/serialize.hpp"

namespace xpose {

using nlohmann::json;

namespace {

template <class F>
auto parse_field(const char* what, F&& f) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::Format, std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  return parse_field("3-vector", [&] {
    require(j.is_array() && j.size() == 3, ErrorCode::Format, "expected a 3-element array");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  });
}

json mat3_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

Mat3 mat3_from_json(const json& j) {
  return parse_field("3x3 matrix", [&] {
    require(j.is_array() && j.size() == 3, ErrorCode::Format, "expected 3 rows");
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      require(j[r].is_array() && j[r].size() == 3, ErrorCode::Format, "expected 3 columns");
      for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
  });
}

json geometry_to_json(const ProjectionGeometry& g) {
  return {{"source_detector_distance_mm", g.source_detector_distance},
          {"pixel_spacing_mm", g.pixel_spacing},
          {"width", g.width},
          {"height", g.height}};
}

ProjectionGeometry geometry_from_json(const json& j) {
  return parse_field("projection geometry", [&] {
    ProjectionGeometry g;
    g.source_detector_distance = j.value("source_detector_distance_mm", g.source_detector_distance);
    g.pixel_spacing = j.value("pixel_spacing_mm", g.pixel_spacing);
    g.width = j.value("width", g.width);
    g.height = j.value("height", g.height);
    g.validate();
    return g;
  });
}

json setup_to_json(const ProjectionSetup& s) {
  return {{"geometry", geometry_to_json(s.geom)},
          {"source_object_distance_mm", s.source_object_distance},
          {"offset_r_mm", s.offset_r},
          {"offset_phi_deg", s.offset_phi},
          {"rotations_zyz_deg", {s.rotations[0], s.rotations[1], s.rotations[2]}},
          {"object_center_mm", vec3_to_json(s.object_center)}};
}

ProjectionSetup setup_from_json(const json& j) {
  return parse_field("projection setup", [&] {
    ProjectionSetup s;
    s.geom = geometry_from_json(j.at("geometry"));
    s.source_object_distance = j.at("source_object_distance_mm").get<double>();
    s.offset_r = j.at("offset_r_mm").get<double>();
    s.offset_phi = j.at("offset_phi_deg").get<double>();
    const auto& r = j.at("rotations_zyz_deg");
    require(r.is_array() && r.size() == 3, ErrorCode::Format, "rotations_zyz_deg needs 3 angles");
    for (int a = 0; a < 3; ++a) s.rotations[a] = r[a].get<double>();
    s.object_center = vec3_from_json(j.at("object_center_mm"));
    s.validate();
    return s;
  });
}

json pose_to_json(const Pose& p) {
  return {{"x", p.x}, {"y", p.y}, {"alpha_deg", p.alpha}, {"tau_deg", p.tau}, {"depth_mm", p.depth}};
}

Pose pose_from_json(const json& j) {
  return parse_field("pose", [&] {
    return make_pose(j.at("x").get<double>(), j.at("y").get<double>(), j.at("alpha_deg").get<double>(),
                     j.at("tau_deg").get<double>(), j.at("depth_mm").get<double>());
  });
}

namespace {

json record_to_json(const DatasetRecord& r) {
  return {{"schema_version", kDatasetSchemaVersion},
          {"index", r.index},
          {"seed", r.seed},
          {"split", r.split},
          {"phantom", {{"preset", r.phantom_preset},
                       {"seed", r.phantom_seed},
                       {"dims", r.phantom_shape.dims},
                       {"spacing_mm", r.phantom_shape.spacing_mm}}},
          {"instrument", {{"kind", to_string(r.instrument)},
                          {"diameter_mm", r.instrument_params.diameter_mm},
                          {"robot_bend_deg", r.instrument_params.robot_bend_deg},
                          {"segments", r.instrument_params.segments},
                          {"mu", r.mu_instrument}}},
          {"nominal_id", r.nominal_id},
          {"deviation_mm", vec3_to_json(r.deviation_mm)},
          {"roll_deg", r.roll_deg},
          {"tilt_deg", {r.tilt_a_deg, r.tilt_b_deg}},
          {"position_mm", vec3_to_json(r.position)},
          {"rotation", mat3_to_json(r.rotation)},
          {"setup", setup_to_json(r.setup)},
          {"pose", pose_to_json(r.pose)},
          {"attempts", {r.outer_attempts, r.inner_attempts}},
          {"upsample", r.upsample},
          {"image", r.image_file}};
}

DatasetRecord record_from_json(const json& j) {
  return parse_field("dataset record", [&] {
    require(j.at("schema_version").get<int>() == kDatasetSchemaVersion, ErrorCode::Format,
            "unsupported dataset schema version");
    DatasetRecord r;
    r.index = j.at("index").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.split = j.at("split").get<std::string>();
    const auto& ph = j.at("phantom");
    r.phantom_preset = ph.at("preset").get<std::string>();
    r.phantom_seed = ph.at("seed").get<std::uint64_t>();
    r.phantom_shape.dims = ph.at("dims").get<int>();
    r.phantom_shape.spacing_mm = ph.at("spacing_mm").get<double>();
    const auto& in = j.at("instrument");
    r.instrument = instrument_kind_from_string(in.at("kind").get<std::string>());
    r.instrument_params.diameter_mm = in.at("diameter_mm").get<double>();
    r.instrument_params.robot_bend_deg = in.at("robot_bend_deg").get<double>();
    r.instrument_params.segments = in.at("segments").get<int>();
    r.mu_instrument = in.at("mu").get<double>();
    r.nominal_id = j.at("nominal_id").get<int>();
    r.deviation_mm = vec3_from_json(j.at("deviation_mm"));
    r.roll_deg = j.at("roll_deg").get<double>();
    r.tilt_a_deg = j.at("tilt_deg").at(0).get<double>();
    r.tilt_b_deg = j.at("tilt_deg").at(1).get<double>();
    r.position = vec3_from_json(j.at("position_mm"));
    r.rotation = mat3_from_json(j.at("rotation"));
    r.setup = setup_from_json(j.at("setup"));
    r.pose = pose_from_json(j.at("pose"));
    r.outer_attempts = j.at("attempts").at(0).get<int>();
    r.inner_attempts = j.at("attempts").at(1).get<int>();
    r.upsample = j.at("upsample").get<int>();
    r.image_file = j.at("image").get<std::string>();
    return r;
  });
}

std::string image_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "images/rec_%06d.pgm", index);
  return buf;
}

}  // namespace

std::string records_csv(const std::vector<DatasetRecord>& records) {
  std::string out =
      "index,split,phantom,instrument,nominal_id,seed,x_px,y_px,alpha_deg,tau_deg,depth_mm,d_sod_mm,offset_r_mm,"
      "offset_phi_deg,rot1_deg,rot2_deg,rot3_deg,dev_x_mm,dev_y_mm,dev_z_mm,roll_deg,tilt_a_deg,tilt_b_deg,image\n";
  char buf[1024];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf,
                  "%d,%s,%s,%s,%d,%" PRIu64
                  ",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%s\n",
                  r.index, r.split.c_str(), r.phantom_preset.c_str(), to_string(r.instrument), r.nominal_id, r.seed,
                  r.pose.x, r.pose.y, r.pose.alpha, r.pose.tau, r.pose.depth, r.setup.source_object_distance,
                  r.setup.offset_r, r.setup.offset_phi, r.setup.rotations[0], r.setup.rotations[1],
                  r.setup.rotations[2], r.deviation_mm.x(), r.deviation_mm.y(), r.deviation_mm.z(), r.roll_deg,
                  r.tilt_a_deg, r.tilt_b_deg, r.image_file.c_str());
    out += buf;
  }
  return out;
}

void save_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream manifest(dir / "manifest.jsonl");
  require(bool(manifest), ErrorCode::Io, "cannot write " + (dir / "manifest.jsonl").string());
  for (const auto& rec : records) {
    DatasetRecord r = rec;
    if (r.image) {
      r.image_file = image_name(r.index);
      save_radiograph(*r.image, dir / r.image_file);
    }
    manifest << record_to_json(r).dump() << '\n';
  }
  require(bool(manifest), ErrorCode::Io, "short write to manifest.jsonl");
  std::vector<DatasetRecord> named = records;
  for (auto& r : named)
    if (r.image) r.image_file = image_name(r.index);
  std::ofstream csv(dir / "records.csv");
  require(bool(csv), ErrorCode::Io, "cannot write " + (dir / "records.csv").string());
  csv << records_csv(named);
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir, bool load_images) {
  std::ifstream manifest(dir / "manifest.jsonl");
  require(bool(manifest), ErrorCode::Io, "cannot read " + (dir / "manifest.jsonl").string());
  std::vector<DatasetRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      fail(ErrorCode::Format, "manifest line " + std::to_string(line_no) + " is not valid JSON: " + e.what());
    }
    DatasetRecord r = record_from_json(j);
    if (load_images && !r.image_file.empty()) r.image = load_radiograph(dir / r.image_file);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace xpose
