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

#include "xpose/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Geometry>
#include <json.hpp>

#include "xpose/errors.hpp"
#include "xpose/parallel.hpp"
#include "xpose/serialize.hpp"

namespace xpose {

namespace {

constexpr int kRadiographFormatVersion = 1;

Mat3 base_arrangement() {
  Mat3 b;
  b.col(0) = Vec3::UnitY();  // image x
  b.col(1) = Vec3::UnitZ();  // image y
  b.col(2) = Vec3::UnitX();  // projection normal
  return b;
}

/// Slab test against an axis-aligned box; returns [t0, t1] with t0 >= 0.
bool intersect_box(const Vec3& origin, const Vec3& dir, const Box3& box, double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min()[a] || origin[a] > box.max()[a]) return false;
      continue;
    }
    const double inv = 1.0 / dir[a];
    double ta = (box.min()[a] - origin[a]) * inv;
    double tb = (box.max()[a] - origin[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return t1 > t0;
}

/// Per-render ray generator with the camera rotation hoisted out of the pixel loop.
struct RayGen {
  explicit RayGen(const ProjectionSetup& s)
      : world_from_camera(s.camera_from_world().transpose()), center(s.geom.center()),
        spacing(s.geom.pixel_spacing), sdd(s.geom.source_detector_distance), source(s.source_world()) {}
  Vec3 dir(double px, double py) const {
    const Vec3 cam{(px - center.x()) * spacing, (py - center.y()) * spacing, sdd};
    return world_from_camera * cam.normalized();
  }
  Mat3 world_from_camera;
  Vec2 center;
  double spacing, sdd;
  Vec3 source;
};

double integrate(const Volume& v, const Vec3& src, const Vec3& dir, double t0, double t1, double step) {
  const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step)));
  const double h = (t1 - t0) / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += v.sample(src + (t0 + (i + 0.5) * h) * dir);
  return sum * h;
}

double insert_delta(const Volume& anatomy, const Volume& insert, const Vec3& src, const Vec3& dir, double t0,
                    double t1, double step) {
  const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step)));
  const double h = (t1 - t0) / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = src + (t0 + (i + 0.5) * h) * dir;
    sum += insert.sample(p) - anatomy.sample(p);
  }
  return sum * h;
}

}  // namespace

void ProjectionSetup::validate() const {
  geom.validate();
  require(source_object_distance > 0.0 && source_object_distance < geom.source_detector_distance,
          ErrorCode::InvalidArgument, "source_object_distance must lie in (0, SDD)");
  require(offset_r >= 0.0, ErrorCode::InvalidArgument, "object offset radius must be >= 0");
}

Mat3 ProjectionSetup::camera_from_world() const {
  const Mat3 rp = (Eigen::AngleAxisd(deg2rad(rotations[0]), Vec3::UnitZ()) *
                   Eigen::AngleAxisd(deg2rad(rotations[1]), Vec3::UnitY()) *
                   Eigen::AngleAxisd(deg2rad(rotations[2]), Vec3::UnitZ()))
                      .toRotationMatrix();
  return (rp * base_arrangement()).transpose();
}

Vec3 ProjectionSetup::object_in_camera() const {
  const double phi = deg2rad(offset_phi);
  const Vec3 on_detector{offset_r * std::cos(phi), offset_r * std::sin(phi), geom.source_detector_distance};
  return on_detector * (source_object_distance / geom.source_detector_distance);
}

Vec3 ProjectionSetup::to_camera(const Vec3& world) const {
  return camera_from_world() * (world - object_center) + object_in_camera();
}

Vec3 ProjectionSetup::source_world() const {
  return object_center - camera_from_world().transpose() * object_in_camera();
}

Vec3 ProjectionSetup::ray_direction(double px, double py) const {
  const Vec2 c = geom.center();
  const Vec3 cam{(px - c.x()) * geom.pixel_spacing, (py - c.y()) * geom.pixel_spacing, geom.source_detector_distance};
  return camera_from_world().transpose() * cam.normalized();
}

PointProjection project_point(const ProjectionSetup& setup, const Vec3& p) {
  const Vec3 cam = setup.to_camera(p);
  require(cam.z() > 0.0, ErrorCode::OutOfRange, "point lies at or behind the source");
  const double f = setup.geom.source_detector_distance / (cam.z() * setup.geom.pixel_spacing);
  return {setup.geom.center() + f * Vec2(cam.x(), cam.y()), cam.z()};
}

std::pair<double, double> direction_angles(const ProjectionSetup& setup, const Vec3& world_dir) {
  const Vec3 n = (setup.camera_from_world() * world_dir).normalized();
  const double alpha = wrap_degrees_360(rad2deg(std::atan2(n.y(), n.x())));
  const double tau = rad2deg(std::asin(std::clamp(n.z(), -1.0, 1.0)));
  return {alpha, tau};
}

Image2D Image2D::zeros(int width, int height, int x0, int y0) {
  require(width >= 0 && height >= 0, ErrorCode::InvalidArgument, "image size must be non-negative");
  Image2D im;
  im.width = width;
  im.height = height;
  im.x0 = x0;
  im.y0 = y0;
  im.pixels.assign(static_cast<std::size_t>(width) * height, 0.0);
  return im;
}

double Image2D::sample(double x, double y) const {
  const double fx = std::floor(x), fy = std::floor(y);
  const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
  const double tx = x - fx, ty = y - fy;
  auto px = [&](int xx, int yy) { return contains(xx, yy) ? at(xx, yy) : 0.0; };
  const double top = px(ix, iy) + (tx == 0.0 ? 0.0 : tx * (px(ix + 1, iy) - px(ix, iy)));
  if (ty == 0.0) return top;
  const double bottom = px(ix, iy + 1) + (tx == 0.0 ? 0.0 : tx * (px(ix + 1, iy + 1) - px(ix, iy + 1)));
  return top + ty * (bottom - top);
}

double default_step(const Volume& v) { return 0.5 * v.spacing.minCoeff(); }

Image2D project_volume_window(const Volume& v, const ProjectionSetup& setup, double step_mm,
                              const PixelWindow& window, unsigned threads) {
  require(step_mm > 0.0, ErrorCode::InvalidArgument, "step_mm must be positive");
  setup.validate();
  Image2D im = Image2D::zeros(window.width, window.height, window.x0, window.y0);
  const Box3 box = v.extent();
  const RayGen rays(setup);
  const Vec3& src = rays.source;
  parallel_for(0, static_cast<std::size_t>(window.height), threads, [&](std::size_t row) {
    const int y = window.y0 + static_cast<int>(row);
    for (int x = window.x0; x < window.x0 + window.width; ++x) {
      const Vec3 dir = rays.dir(x, y);
      double t0, t1;
      if (intersect_box(src, dir, box, t0, t1)) im.at(x, y) = integrate(v, src, dir, t0, t1, step_mm);
    }
  });
  return im;
}

Radiograph project_volume(const Volume& v, const ProjectionSetup& setup, double step_mm, unsigned threads) {
  const PixelWindow full{0, 0, setup.geom.width, setup.geom.height};
  return {project_volume_window(v, setup, step_mm, full, threads), setup};
}

void add_insert_correction(const Scene& scene, const ProjectionSetup& setup, Image2D& image, unsigned threads) {
  if (!scene.insert) return;
  require(scene.anatomy != nullptr, ErrorCode::InvalidArgument, "scene needs an anatomy volume");
  const Volume& ins = *scene.insert;
  const double step = scene.insert_step > 0.0 ? scene.insert_step : default_step(ins);
  const Box3 box = ins.extent();
  const RayGen rays(setup);
  const Vec3& src = rays.source;

  // Pixel footprint of the insert box.
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner = box.corner(static_cast<Box3::CornerType>(c));
    const Vec3 cam = setup.to_camera(corner);
    if (cam.z() <= 0.0) return;
    const PointProjection pp = project_point(setup, corner);
    xmin = std::min(xmin, pp.pixel.x());
    xmax = std::max(xmax, pp.pixel.x());
    ymin = std::min(ymin, pp.pixel.y());
    ymax = std::max(ymax, pp.pixel.y());
  }
  const int x_lo = std::max(image.x0, static_cast<int>(std::floor(xmin)));
  const int x_hi = std::min(image.x0 + image.width - 1, static_cast<int>(std::ceil(xmax)));
  const int y_lo = std::max(image.y0, static_cast<int>(std::floor(ymin)));
  const int y_hi = std::min(image.y0 + image.height - 1, static_cast<int>(std::ceil(ymax)));
  if (x_lo > x_hi || y_lo > y_hi) return;

  parallel_for(static_cast<std::size_t>(y_lo), static_cast<std::size_t>(y_hi) + 1, threads, [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = x_lo; x <= x_hi; ++x) {
      const Vec3 dir = rays.dir(x, y);
      double t0, t1;
      if (intersect_box(src, dir, box, t0, t1)) {
        const double v = image.at(x, y) + insert_delta(*scene.anatomy, ins, src, dir, t0, t1, step);
        image.at(x, y) = std::max(0.0, v);
      }
    }
  });
}

Image2D render_scene_window(const Scene& scene, const ProjectionSetup& setup, const PixelWindow& window,
                            unsigned threads) {
  require(scene.anatomy != nullptr, ErrorCode::InvalidArgument, "scene needs an anatomy volume");
  const double step = scene.anatomy_step > 0.0 ? scene.anatomy_step : default_step(*scene.anatomy);
  Image2D im = project_volume_window(*scene.anatomy, setup, step, window, threads);
  add_insert_correction(scene, setup, im, threads);
  return im;
}

Radiograph render_scene(const Scene& scene, const ProjectionSetup& setup, unsigned threads) {
  const PixelWindow full{0, 0, setup.geom.width, setup.geom.height};
  return {render_scene_window(scene, setup, full, threads), setup};
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  if (distance_to_polygon_boundary(p, poly) == 0.0) return true;
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

double distance_to_polygon_boundary(const Vec2& p, const std::vector<Vec2>& poly) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[j], b = poly[i];
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + t * ab - p).norm());
  }
  return best;
}

bool validity_check(const ProjectionSetup& setup, const Vec3& instrument_position, const ValidityPolygons& polys,
                    double margin_mm) {
  require(margin_mm >= 0.0, ErrorCode::InvalidArgument, "margin_mm must be >= 0");
  const Vec3 cam = setup.to_camera(instrument_position);
  if (cam.z() <= 0.0) return false;
  const PointProjection inst = project_point(setup, instrument_position);
  const double margin_px = margin_mm / (setup.geom.d2p() * inst.depth);
  for (const auto* poly3 : {&polys.lower, &polys.upper}) {
    if (poly3->size() < 3) return false;
    std::vector<Vec2> poly;
    for (const auto& v : *poly3) {
      if (setup.to_camera(v).z() <= 0.0) return false;
      poly.push_back(project_point(setup, v).pixel);
    }
    double area2 = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
      area2 += poly[j].x() * poly[i].y() - poly[i].x() * poly[j].y();
    if (std::abs(area2) < 1e-9) return false;
    if (point_in_polygon(inst.pixel, poly)) return false;
    if (distance_to_polygon_boundary(inst.pixel, poly) <= margin_px) return false;
  }
  return true;
}

void save_radiograph(const Radiograph& r, const std::filesystem::path& pgm_path) {
  const Image2D& im = r.image;
  require(im.width > 0 && im.height > 0, ErrorCode::InvalidArgument, "cannot save an empty radiograph");
  const auto [mn_it, mx_it] = std::minmax_element(im.pixels.begin(), im.pixels.end());
  const double mn = *mn_it, mx = *mx_it;
  std::ofstream f(pgm_path, std::ios::binary);
  require(bool(f), ErrorCode::Io, "cannot write " + pgm_path.string());
  f << "P5\n" << im.width << ' ' << im.height << "\n65535\n";
  std::vector<unsigned char> buf(im.pixels.size() * 2);
  for (std::size_t i = 0; i < im.pixels.size(); ++i) {
    const double n = mx > mn ? (im.pixels[i] - mn) / (mx - mn) : 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(n, 0.0, 1.0) * 65535.0));
    buf[2 * i] = static_cast<unsigned char>(q >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(bool(f), ErrorCode::Io, "short write to " + pgm_path.string());

  nlohmann::json side;
  side["format_version"] = kRadiographFormatVersion;
  side["raw_min"] = mn;
  side["raw_max"] = mx;
  side["width"] = im.width;
  side["height"] = im.height;
  side["display"] = "16-bit linear map of [raw_min, raw_max] line integrals";
  side["pixel_convention"] = "x = column (grows right), y = row (grows down), alpha from +x toward +y";
  side["euler_order"] = "Z-Y-Z about the object center";
  side["setup"] = setup_to_json(r.setup);
  std::filesystem::path sp = pgm_path;
  sp.replace_extension(".json");
  std::ofstream sf(sp);
  require(bool(sf), ErrorCode::Io, "cannot write " + sp.string());
  sf << side.dump(2) << '\n';
}

Radiograph load_radiograph(const std::filesystem::path& pgm_path) {
  std::filesystem::path sp = pgm_path;
  sp.replace_extension(".json");
  std::ifstream sf(sp);
  require(bool(sf), ErrorCode::Io, "cannot read " + sp.string());
  nlohmann::json side;
  try {
    sf >> side;
  } catch (const std::exception& e) {
    fail(ErrorCode::Format, "radiograph sidecar is not valid JSON: " + std::string(e.what()));
  }
  require(side.value("format_version", 0) == kRadiographFormatVersion, ErrorCode::Format,
          "unsupported radiograph format version");

  std::ifstream f(pgm_path, std::ios::binary);
  require(bool(f), ErrorCode::Io, "cannot read " + pgm_path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  require(magic == "P5" && maxval == 65535 && w > 0 && h > 0, ErrorCode::Format, "expected a 16-bit binary PGM");
  f.get();
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 2);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(bool(f), ErrorCode::Format, "PGM payload shorter than its header implies");

  Radiograph r;
  r.setup = setup_from_json(side.at("setup"));
  r.image = Image2D::zeros(w, h);
  const double mn = side.at("raw_min").get<double>(), mx = side.at("raw_max").get<double>();
  for (std::size_t i = 0; i < r.image.pixels.size(); ++i) {
    const unsigned q = (unsigned(buf[2 * i]) << 8) | buf[2 * i + 1];
    r.image.pixels[i] = mn + (mx - mn) * (q / 65535.0);
  }
  return r;
}

}  // namespace xpose
