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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "xpose/xpose.h"

namespace fs = std::filesystem;

namespace {

std::string config_json(const xp_config* cfg) {
  size_t n = 0;
  EXPECT_EQ(xp_config_to_json(cfg, nullptr, 0, &n), XP_OK);
  std::string buf(n, '\0');
  EXPECT_EQ(xp_config_to_json(cfg, buf.data(), n, &n), XP_OK);
  buf.resize(n - 1);
  return buf;
}

struct Config {
  xp_config* cfg = nullptr;
  Config() { EXPECT_EQ(xp_config_create(&cfg), XP_OK); }
  ~Config() { xp_config_destroy(cfg); }
};

}  // namespace

TEST(CApi, VersionAndGeometry) {
  EXPECT_STRNE(xp_version(), "");
  const xp_geometry g = xp_geometry_default();
  EXPECT_EQ(g.width, 1024);
  EXPECT_EQ(g.height, 1024);
  EXPECT_GT(g.source_detector_distance_mm, 0.0);
}

TEST(CApi, KeypointPoseRoundTrip) {
  const xp_geometry g = xp_geometry_default();
  for (int mirrored = 0; mirrored < 2; ++mirrored) {
    const xp_pose p{412.25, 630.5, 212.0, -37.5, 540.0};
    xp_keypoints k;
    ASSERT_EQ(xp_keypoints_from_pose(&p, mirrored, &g, &k), XP_OK);
    xp_pose q;
    int32_t clamped = -1;
    ASSERT_EQ(xp_pose_from_keypoints(&k, mirrored, &g, &q, &clamped), XP_OK);
    EXPECT_EQ(clamped, 0);
    EXPECT_NEAR(q.x, p.x, 1e-9);
    EXPECT_NEAR(q.y, p.y, 1e-9);
    EXPECT_NEAR(q.alpha_deg, p.alpha_deg, 1e-9);
    EXPECT_NEAR(q.tau_deg, std::abs(p.tau_deg), 1e-9);
    EXPECT_NEAR(q.depth_mm, p.depth_mm, 1e-6);
  }
}

TEST(CApi, ComputeErrors) {
  const xp_geometry g = xp_geometry_default();
  const xp_pose truth{500, 500, 10, 30, g.source_detector_distance_mm};
  const xp_pose pred{501, 500, 350, -30, g.source_detector_distance_mm + 4};
  xp_errors e;
  ASSERT_EQ(xp_compute_errors(&pred, &truth, &g, &e), XP_OK);
  EXPECT_DOUBLE_EQ(e.position_mm, 0.29296875);
  EXPECT_NEAR(e.forward_angle_deg, 20.0, 1e-12);
  EXPECT_NEAR(e.forward_angle_signed_deg, -20.0, 1e-12);
  EXPECT_EQ(e.projection_angle_deg, 0.0);
  EXPECT_NEAR(e.depth_signed_mm, 4.0, 1e-9);
  EXPECT_EQ(e.tau_beyond_validity, 0);
}

TEST(CApi, NullArgumentsReportErrors) {
  const xp_geometry g = xp_geometry_default();
  xp_keypoints k;
  EXPECT_EQ(xp_keypoints_from_pose(nullptr, 0, &g, &k), XP_ERR_INVALID_ARGUMENT);
  EXPECT_STRNE(xp_last_error(), "");
  xp_dataset* ds = nullptr;
  EXPECT_EQ(xp_dataset_load("/nonexistent/xpose/dataset", 0, &ds), XP_ERR_IO);
  EXPECT_EQ(ds, nullptr);
  xp_config_destroy(nullptr);
  xp_dataset_destroy(nullptr);
}

TEST(CApi, ConfigSetAndSerialize) {
  Config c;
  ASSERT_EQ(xp_config_set(c.cfg, "/generation/count", "250"), XP_OK);
  const std::string text = config_json(c.cfg);
  EXPECT_NE(text.find("\"count\": 250"), std::string::npos) << text;

  xp_config* back = nullptr;
  ASSERT_EQ(xp_config_parse(text.c_str(), &back), XP_OK);
  EXPECT_EQ(config_json(back), text);
  xp_config_destroy(back);

  size_t n = 0;
  char small[4];
  EXPECT_EQ(xp_config_to_json(c.cfg, small, sizeof small, &n), XP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(n, text.size() + 1);
}

TEST(CApi, ConfigErrors) {
  Config c;
  const std::string before = config_json(c.cfg);
  EXPECT_EQ(xp_config_set(c.cfg, "/generation/colour", "1"), XP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(xp_config_set(c.cfg, "/generation/count", "not json"), XP_ERR_FORMAT);
  EXPECT_NE(xp_config_set(c.cfg, "/estimator/k_max", "0"), XP_OK);
  EXPECT_EQ(config_json(c.cfg), before);

  xp_config* out = nullptr;
  EXPECT_EQ(xp_config_parse("{\"schema_version\": 99}", &out), XP_ERR_FORMAT);
  EXPECT_EQ(out, nullptr);
  EXPECT_NE(std::string(xp_last_error()).find("schema_version"), std::string::npos);
  EXPECT_EQ(xp_config_parse("{", &out), XP_ERR_FORMAT);
  EXPECT_EQ(xp_config_load("/nonexistent/xpose.json", &out), XP_ERR_IO);
}

TEST(CApi, GenerateAndLoadDataset) {
  const fs::path dir = fs::temp_directory_path() / "xpose_capi_dataset";
  fs::remove_all(dir);
  Config c;
  ASSERT_EQ(xp_config_set(c.cfg, "/generation/count", "3"), XP_OK);
  ASSERT_EQ(xp_config_set(c.cfg, "/generation/render", "false"), XP_OK);
  ASSERT_EQ(xp_config_set(c.cfg, "/generation/phantom_dims", "32"), XP_OK);
  ASSERT_EQ(xp_config_set(c.cfg, "/generation/phantom_spacing_mm", "2.0"), XP_OK);
  ASSERT_EQ(xp_generate(c.cfg, dir.c_str()), XP_OK) << xp_last_error();
  EXPECT_TRUE(fs::exists(dir / "records.csv"));
  EXPECT_TRUE(fs::exists(dir / "manifest.jsonl"));

  xp_dataset* ds = nullptr;
  ASSERT_EQ(xp_dataset_load(dir.c_str(), 0, &ds), XP_OK) << xp_last_error();
  size_t n = 0;
  ASSERT_EQ(xp_dataset_size(ds, &n), XP_OK);
  EXPECT_EQ(n, 3u);
  const xp_geometry g = xp_geometry_default();
  for (size_t i = 0; i < n; ++i) {
    xp_pose p;
    ASSERT_EQ(xp_dataset_pose(ds, i, &p), XP_OK);
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.x, g.width - 1.0);
    EXPECT_GT(p.depth_mm, 0.0);
  }
  xp_pose p;
  EXPECT_EQ(xp_dataset_pose(ds, n, &p), XP_ERR_OUT_OF_RANGE);
  xp_dataset_destroy(ds);
}
