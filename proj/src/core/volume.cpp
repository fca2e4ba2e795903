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

#include "xpose/volume.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "xpose/errors.hpp"

namespace xpose {

namespace {

constexpr int kVolumeFormatVersion = 1;

void check_dims(const std::array<int, 3>& dims, const Vec3& spacing) {
  for (int a = 0; a < 3; ++a) {
    require(dims[a] > 0, ErrorCode::InvalidArgument, "volume dims must be positive");
    require(spacing[a] > 0.0, ErrorCode::InvalidArgument, "volume spacing must be positive");
  }
}

}  // namespace

Volume Volume::zeros(std::array<int, 3> dims, const Vec3& spacing, const Vec3& origin) {
  check_dims(dims, spacing);
  Volume v;
  v.dims = dims;
  v.spacing = spacing;
  v.origin = origin;
  v.data.assign(v.voxel_count(), 0.0f);
  return v;
}

Box3 Volume::extent() const {
  const Vec3 lo = origin - 0.5 * spacing;
  const Vec3 hi = origin + spacing.cwiseProduct(Vec3(dims[0] - 0.5, dims[1] - 0.5, dims[2] - 0.5));
  return Box3(lo, hi);
}

void Volume::validate() const {
  check_dims(dims, spacing);
  require(data.size() == voxel_count(), ErrorCode::InvalidArgument, "volume data length does not match dims");
  for (float mu : data) require(mu >= 0.0f, ErrorCode::InvalidArgument, "attenuation must be non-negative");
}

Volume interpolate_region(const Volume& v, int factor, const Box3& box) {
  require(factor == 1 || factor == 2 || factor == 4, ErrorCode::InvalidArgument,
          "interpolation factor must be 1, 2 or 4");
  const Vec3 fine = v.spacing / factor;
  std::array<int, 3> lo{}, dims{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = static_cast<int>(std::ceil((box.min()[a] - v.origin[a]) / fine[a] - 1e-9));
    const int hi = static_cast<int>(std::floor((box.max()[a] - v.origin[a]) / fine[a] + 1e-9));
    require(hi >= lo[a], ErrorCode::InvalidArgument, "interpolation region holds no grid nodes");
    dims[a] = hi - lo[a] + 1;
  }
  const Vec3 origin = v.origin + fine.cwiseProduct(Vec3(lo[0], lo[1], lo[2]));
  Volume out = Volume::zeros(dims, fine, origin);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) out.at(i, j, k) = static_cast<float>(v.sample(out.voxel_center(i, j, k)));
  return out;
}

Volume interpolate_volume(const Volume& v, int factor) {
  require(factor == 1 || factor == 2 || factor == 4, ErrorCode::InvalidArgument,
          "interpolation factor must be 1, 2 or 4");
  if (factor == 1) return v;
  const Vec3 last = v.voxel_center(v.dims[0] - 1, v.dims[1] - 1, v.dims[2] - 1);
  return interpolate_region(v, factor, Box3(v.origin, last));
}

void save_volume(const Volume& v, const std::filesystem::path& header_path) {
  v.validate();
  std::filesystem::path raw = header_path;
  raw.replace_extension(".raw");
  nlohmann::json h;
  h["format_version"] = kVolumeFormatVersion;
  h["dims"] = {v.dims[0], v.dims[1], v.dims[2]};
  h["spacing_mm"] = {v.spacing[0], v.spacing[1], v.spacing[2]};
  h["origin_mm"] = {v.origin[0], v.origin[1], v.origin[2]};
  h["mu_units"] = "1/mm";
  h["layout"] = "x-fastest, z-slowest";
  h["dtype"] = "float32-le";
  h["pixel_convention"] = "x = column (grows right), y = row (grows down), alpha from +x toward +y";
  h["payload"] = raw.filename().string();

  std::ofstream hf(header_path);
  require(bool(hf), ErrorCode::Io, "cannot write " + header_path.string());
  hf << h.dump(2) << '\n';

  std::ofstream rf(raw, std::ios::binary);
  require(bool(rf), ErrorCode::Io, "cannot write " + raw.string());
  for (float f : v.data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                          static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    rf.write(reinterpret_cast<const char*>(b), 4);
  }
  require(bool(rf), ErrorCode::Io, "short write to " + raw.string());
}

Volume load_volume(const std::filesystem::path& header_path) {
  std::ifstream hf(header_path);
  require(bool(hf), ErrorCode::Io, "cannot read " + header_path.string());
  nlohmann::json h;
  try {
    hf >> h;
  } catch (const std::exception& e) {
    fail(ErrorCode::Format, "volume header is not valid JSON: " + std::string(e.what()));
  }
  require(h.value("format_version", 0) == kVolumeFormatVersion, ErrorCode::Format, "unsupported volume format version");
  require(h.value("dtype", std::string()) == "float32-le", ErrorCode::Format, "unsupported volume dtype");
  Volume v;
  for (int a = 0; a < 3; ++a) {
    v.dims[a] = h.at("dims").at(a).get<int>();
    v.spacing[a] = h.at("spacing_mm").at(a).get<double>();
    v.origin[a] = h.at("origin_mm").at(a).get<double>();
  }
  check_dims(v.dims, v.spacing);
  const auto raw = header_path.parent_path() / h.at("payload").get<std::string>();
  std::ifstream rf(raw, std::ios::binary);
  require(bool(rf), ErrorCode::Io, "cannot read " + raw.string());
  v.data.resize(v.voxel_count());
  for (auto& f : v.data) {
    unsigned char b[4];
    rf.read(reinterpret_cast<char*>(b), 4);
    require(bool(rf), ErrorCode::Format, "volume payload shorter than dims imply");
    const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                               (std::uint32_t(b[3]) << 24);
    f = std::bit_cast<float>(bits);
  }
  v.validate();
  return v;
}

}  // namespace xpose
