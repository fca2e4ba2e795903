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

#include "xpose/xpose.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include <json.hpp>

#include "xpose/config.hpp"
#include "xpose/errors.hpp"
#include "xpose/metrics.hpp"
#include "xpose/pipeline.hpp"

struct xp_config {
  nlohmann::json doc;
};

struct xp_dataset {
  std::vector<xpose::DatasetRecord> records;
};

namespace {

thread_local std::string g_last_error;

xp_status map_code(xpose::ErrorCode c) {
  switch (c) {
    case xpose::ErrorCode::InvalidArgument: return XP_ERR_INVALID_ARGUMENT;
    case xpose::ErrorCode::Degenerate: return XP_ERR_DEGENERATE;
    case xpose::ErrorCode::OutOfRange: return XP_ERR_OUT_OF_RANGE;
    case xpose::ErrorCode::Io: return XP_ERR_IO;
    case xpose::ErrorCode::Format: return XP_ERR_FORMAT;
    case xpose::ErrorCode::Generation: return XP_ERR_GENERATION;
    case xpose::ErrorCode::Diverged: return XP_ERR_DIVERGED;
  }
  return XP_ERR_INTERNAL;
}

template <class F>
xp_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return XP_OK;
  } catch (const xpose::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return XP_ERR_FORMAT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return XP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return XP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return XP_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  xpose::require(p != nullptr, xpose::ErrorCode::InvalidArgument, std::string(name) + " must not be null");
}

xpose::ProjectionGeometry to_geom(const xp_geometry* g) {
  xpose::ProjectionGeometry out;
  out.source_detector_distance = g->source_detector_distance_mm;
  out.pixel_spacing = g->pixel_spacing_mm;
  out.width = g->width;
  out.height = g->height;
  out.validate();
  return out;
}

xpose::Pose to_pose(const xp_pose* p) { return xpose::make_pose(p->x, p->y, p->alpha_deg, p->tau_deg, p->depth_mm); }

xp_pose from_pose(const xpose::Pose& p) { return {p.x, p.y, p.alpha, p.tau, p.depth}; }

xpose::AppConfig resolve(const xp_config* cfg) {
  need(cfg, "config");
  return xpose::app_config_from_json(cfg->doc);
}

std::filesystem::path opt_path(const char* p) { return p ? std::filesystem::path(p) : std::filesystem::path(); }

}  // namespace

extern "C" {

const char* xp_last_error(void) { return g_last_error.c_str(); }

const char* xp_version(void) { return "0.1.0"; }

xp_geometry xp_geometry_default(void) {
  const auto g = xpose::ProjectionGeometry::c_arm_default();
  return {g.source_detector_distance, g.pixel_spacing, g.width, g.height};
}

xp_status xp_keypoints_from_pose(const xp_pose* pose, int32_t mirrored, const xp_geometry* geom, xp_keypoints* out) {
  return guarded([&] {
    need(pose, "pose");
    need(geom, "geometry");
    need(out, "out");
    const auto kps = xpose::keypoints_from_pose(to_pose(pose), xpose::KeypointLayout::standard(mirrored != 0),
                                                to_geom(geom));
    for (int i = 0; i < 6; ++i) {
      out->xy[2 * i] = kps.points[i].x();
      out->xy[2 * i + 1] = kps.points[i].y();
    }
  });
}

xp_status xp_pose_from_keypoints(const xp_keypoints* kps, int32_t mirrored, const xp_geometry* geom, xp_pose* out,
                                 int32_t* cos_tau_clamped) {
  return guarded([&] {
    need(kps, "keypoints");
    need(geom, "geometry");
    need(out, "out");
    xpose::KeypointSet set;
    for (int i = 0; i < 6; ++i) set.points[i] = xpose::Vec2(kps->xy[2 * i], kps->xy[2 * i + 1]);
    const auto rec = xpose::pose_from_keypoints(set, xpose::KeypointLayout::standard(mirrored != 0), to_geom(geom));
    *out = from_pose(rec.pose);
    if (cos_tau_clamped) *cos_tau_clamped = rec.cos_tau_clamped ? 1 : 0;
  });
}

xp_status xp_compute_errors(const xp_pose* predicted, const xp_pose* truth, const xp_geometry* geom, xp_errors* out) {
  return guarded([&] {
    need(predicted, "predicted");
    need(truth, "truth");
    need(geom, "geometry");
    need(out, "out");
    const auto e = xpose::compute_errors(to_pose(predicted), to_pose(truth), to_geom(geom));
    *out = {e.position_mm,      e.position_px, e.forward_angle_deg, e.forward_angle_signed_deg, e.projection_angle_deg,
            e.depth_mm,         e.depth_signed_mm, e.tau_beyond_validity ? 1 : 0};
  });
}

xp_status xp_config_create(xp_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new xp_config{xpose::config_to_json(xpose::AppConfig{})};
  });
}

xp_status xp_config_load(const char* path, xp_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xp_config{xpose::config_to_json(xpose::load_app_config(path))};
  });
}

xp_status xp_config_parse(const char* json, xp_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      xpose::fail(xpose::ErrorCode::Format, std::string("config is not valid JSON: ") + e.what());
    }
    *out = new xp_config{xpose::config_to_json(xpose::app_config_from_json(j))};
  });
}

void xp_config_destroy(xp_config* cfg) { delete cfg; }

xp_status xp_config_set(xp_config* cfg, const char* json_pointer, const char* json_value) {
  return guarded([&] {
    need(cfg, "config");
    need(json_pointer, "json_pointer");
    need(json_value, "json_value");
    nlohmann::json next = cfg->doc;
    const nlohmann::json::json_pointer ptr(json_pointer);
    xpose::require(next.contains(ptr), xpose::ErrorCode::InvalidArgument,
                   std::string("unknown config key ") + json_pointer);
    next[ptr] = nlohmann::json::parse(json_value);
    cfg->doc = xpose::config_to_json(xpose::app_config_from_json(next));
  });
}

xp_status xp_config_to_json(const xp_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    need(cfg, "config");
    const std::string s = cfg->doc.dump(2);
    if (needed) *needed = s.size() + 1;
    if (buf == nullptr) return;
    xpose::require(cap >= s.size() + 1, xpose::ErrorCode::InvalidArgument, "buffer too small for config JSON");
    std::memcpy(buf, s.c_str(), s.size() + 1);
  });
}

xp_status xp_dataset_load(const char* dir, int32_t load_images, xp_dataset** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    auto ds = std::make_unique<xp_dataset>();
    ds->records = xpose::load_dataset(dir, load_images != 0);
    *out = ds.release();
  });
}

void xp_dataset_destroy(xp_dataset* ds) { delete ds; }

xp_status xp_dataset_size(const xp_dataset* ds, size_t* out) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = ds->records.size();
  });
}

xp_status xp_dataset_pose(const xp_dataset* ds, size_t i, xp_pose* out) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    xpose::require(i < ds->records.size(), xpose::ErrorCode::OutOfRange, "record index out of range");
    *out = from_pose(ds->records[i].pose);
  });
}

xp_status xp_generate(const xp_config* cfg, const char* out_dir) {
  return guarded([&] {
    need(out_dir, "out_dir");
    xpose::pipeline_generate(resolve(cfg), out_dir);
  });
}

xp_status xp_train(const xp_config* cfg, const char* task, const char* head, const char* data_dir,
                   const char* out_dir) {
  return guarded([&] {
    need(task, "task");
    need(head, "head");
    need(out_dir, "out_dir");
    xpose::pipeline_train(resolve(cfg), task, xpose::nn::head_from_string(head), opt_path(data_dir), out_dir);
  });
}

xp_status xp_estimate(const xp_config* cfg, const char* data_dir, const char* weights_dir, const char* out_dir) {
  return guarded([&] {
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    xpose::pipeline_estimate(resolve(cfg), data_dir, opt_path(weights_dir), out_dir);
  });
}

xp_status xp_evaluate(const xp_config* cfg, const char* data_dir, const char* weights_dir, const char* out_dir) {
  return guarded([&] {
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    xpose::pipeline_evaluate(resolve(cfg), data_dir, opt_path(weights_dir), out_dir);
  });
}

xp_status xp_register(const xp_config* cfg, const char* data_dir, const char* out_dir) {
  return guarded([&] {
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    xpose::pipeline_register(resolve(cfg), data_dir, out_dir);
  });
}

xp_status xp_plot(const char* const* summary_csvs, size_t count, const char* out_dir) {
  return guarded([&] {
    need(out_dir, "out_dir");
    xpose::require(summary_csvs != nullptr || count == 0, xpose::ErrorCode::InvalidArgument,
                   "summary list must not be null");
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < count; ++i) {
      need(summary_csvs[i], "summary path");
      paths.emplace_back(summary_csvs[i]);
    }
    xpose::pipeline_plot(paths, out_dir);
  });
}

}  // extern "C"
