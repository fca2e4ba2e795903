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

#include <json.hpp>

#include "xpose/geometry.hpp"
#include "xpose/renderer.hpp"

namespace xpose {

nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json mat3_to_json(const Mat3& m);  // row-major 3x3
Mat3 mat3_from_json(const nlohmann::json& j);

nlohmann::json geometry_to_json(const ProjectionGeometry& g);
ProjectionGeometry geometry_from_json(const nlohmann::json& j);

nlohmann::json setup_to_json(const ProjectionSetup& s);
ProjectionSetup setup_from_json(const nlohmann::json& j);

nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

}  // namespace xpose
