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

#include "xpose/patch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "xpose/errors.hpp"
#include "xpose/serialize.hpp"

namespace xpose {

Vec2 patch_anchor(bool mirrored) { return mirrored ? Vec2(61.0, 24.0) : Vec2(30.0, 24.0); }

Vec2 CropTransform::to_image(const Vec2& p) const {
  const double a = deg2rad(alpha_deg);
  const double c = std::cos(a), s = std::sin(a);
  const Vec2 d = p - anchor;
  return center + Vec2(c * d.x() - s * d.y(), s * d.x() + c * d.y());
}

Vec2 CropTransform::to_patch(const Vec2& q) const {
  const double a = deg2rad(alpha_deg);
  const double c = std::cos(a), s = std::sin(a);
  const Vec2 d = q - center;
  return anchor + Vec2(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
}

std::vector<double> sample_patch_raw(const Image2D& image, const CropTransform& crop, int width, int height) {
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      const Vec2 q = crop.to_image(Vec2(u, v));
      out[static_cast<std::size_t>(v) * width + u] = image.sample(q.x(), q.y());
    }
  return out;
}

void normalize_minmax(std::vector<double>& pixels) {
  if (pixels.empty()) return;
  const auto [mn, mx] = std::minmax_element(pixels.begin(), pixels.end());
  const double lo = *mn, range = *mx - *mn;
  for (double& p : pixels) p = range > 0.0 ? (p - lo) / range : 0.0;
}

Patch extract_patch(const Image2D& image, const Pose& estimate, const Vec2& anchor, int source_index) {
  require(std::isfinite(estimate.x) && std::isfinite(estimate.y) && std::isfinite(estimate.alpha),
          ErrorCode::InvalidArgument, "patch estimate must be finite");
  require(estimate.x >= image.x0 && estimate.y >= image.y0 && estimate.x <= image.x0 + image.width - 1 &&
              estimate.y <= image.y0 + image.height - 1,
          ErrorCode::OutOfRange, "patch estimate lies outside the image");
  Patch p;
  p.crop = {Vec2(estimate.x, estimate.y), estimate.alpha, anchor};
  p.estimate = estimate;
  p.source_index = source_index;
  p.pixels = sample_patch_raw(image, p.crop, p.width, p.height);
  normalize_minmax(p.pixels);
  return p;
}

void AugmentationSpec::validate() const {
  require(delta_x_initial_mm > 0.0 && delta_alpha_initial_deg > 0.0, ErrorCode::InvalidArgument,
          "augmentation deltas must be positive");
}

InitialOffset draw_initial_offset(const AugmentationSpec& spec, Rng& rng) {
  spec.validate();
  const double r = uniform(rng, 0.0, spec.delta_x_initial_mm);
  const double beta = deg2rad(uniform(rng, 0.0, 360.0));
  InitialOffset off;
  off.delta_mm = r * Vec2(std::cos(beta), std::sin(beta));
  off.delta_alpha_deg = normal(rng, 0.0, spec.delta_alpha_initial_deg);
  return off;
}

Pose apply_offset(const Pose& pose, const InitialOffset& off, const ProjectionGeometry& geom, double depth_mm) {
  require(depth_mm > 0.0, ErrorCode::InvalidArgument, "conversion depth must be positive");
  const double px_per_mm = 1.0 / (geom.d2p() * depth_mm);
  Pose p = pose;
  p.x += off.delta_mm.x() * px_per_mm;
  p.y += off.delta_mm.y() * px_per_mm;
  p.alpha = wrap_degrees_360(pose.alpha + off.delta_alpha_deg);
  return p;
}

std::array<double, 12> normalize_keypoints(const KeypointSet& kps, int width, int height) {
  const double cu = 0.5 * (width - 1), cv = 0.5 * (height - 1);
  std::array<double, 12> out{};
  for (int i = 0; i < 6; ++i) {
    out[2 * i] = (kps.points[i].x() - cu) / cu;
    out[2 * i + 1] = (kps.points[i].y() - cv) / cv;
  }
  return out;
}

KeypointSet unnormalize_keypoints(const std::array<double, 12>& values, const CropTransform& crop, int width,
                                  int height) {
  const double cu = 0.5 * (width - 1), cv = 0.5 * (height - 1);
  KeypointSet out;
  for (int i = 0; i < 6; ++i)
    out.points[i] = crop.to_image(Vec2(values[2 * i] * cu + cu, values[2 * i + 1] * cv + cv));
  return out;
}

KeypointSet to_patch_coords(const KeypointSet& image_kps, const CropTransform& crop) {
  KeypointSet out;
  for (int i = 0; i < 6; ++i) out.points[i] = crop.to_patch(image_kps.points[i]);
  return out;
}

void save_patch_archive(const std::vector<PatchSample>& samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream bin(dir / "patches.bin", std::ios::binary);
  std::ofstream idx(dir / "index.jsonl");
  require(bool(bin) && bool(idx), ErrorCode::Io, "cannot write patch archive in " + dir.string());
  const std::size_t n = static_cast<std::size_t>(kPatchWidth) * kPatchHeight;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    require(s.pixels.size() == n, ErrorCode::InvalidArgument, "patch sample has the wrong pixel count");
    for (float f : s.pixels) {
      const std::uint32_t b = std::bit_cast<std::uint32_t>(f);
      const unsigned char le[4] = {static_cast<unsigned char>(b), static_cast<unsigned char>(b >> 8),
                                   static_cast<unsigned char>(b >> 16), static_cast<unsigned char>(b >> 24)};
      bin.write(reinterpret_cast<const char*>(le), 4);
    }
    nlohmann::json j{{"patch", i},
                     {"record", s.record},
                     {"width", kPatchWidth},
                     {"height", kPatchHeight},
                     {"estimate", pose_to_json(s.estimate)},
                     {"target", s.target}};
    idx << j.dump() << '\n';
  }
  require(bool(bin) && bool(idx), ErrorCode::Io, "short write to patch archive");
}

std::vector<PatchSample> load_patch_archive(const std::filesystem::path& dir) {
  std::ifstream bin(dir / "patches.bin", std::ios::binary);
  std::ifstream idx(dir / "index.jsonl");
  require(bool(bin) && bool(idx), ErrorCode::Io, "cannot read patch archive in " + dir.string());
  const std::size_t n = static_cast<std::size_t>(kPatchWidth) * kPatchHeight;
  std::vector<PatchSample> out;
  std::string line;
  std::vector<unsigned char> buf(n * 4);
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    PatchSample s;
    try {
      const auto j = nlohmann::json::parse(line);
      require(j.at("width").get<int>() == kPatchWidth && j.at("height").get<int>() == kPatchHeight,
              ErrorCode::Format, "patch archive has an unexpected patch size");
      s.record = j.at("record").get<int>();
      s.estimate = pose_from_json(j.at("estimate"));
      s.target = j.at("target").get<std::vector<double>>();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorCode::Format, std::string("malformed patch index line: ") + e.what());
    }
    bin.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(bool(bin), ErrorCode::Format, "patches.bin shorter than its index");
    s.pixels.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint32_t b = std::uint32_t(buf[4 * k]) | (std::uint32_t(buf[4 * k + 1]) << 8) |
                              (std::uint32_t(buf[4 * k + 2]) << 16) | (std::uint32_t(buf[4 * k + 3]) << 24);
      s.pixels[k] = std::bit_cast<float>(b);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace xpose
