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

#include "xpose/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "xpose/errors.hpp"
#include "xpose/parallel.hpp"

namespace xpose {

const char* to_string(InstrumentKind k) {
  switch (k) {
    case InstrumentKind::Screw: return "screw";
    case InstrumentKind::Drill: return "drill";
    case InstrumentKind::Robot: return "robot";
  }
  return "unknown";
}

InstrumentKind instrument_kind_from_string(const std::string& s) {
  if (s == "screw") return InstrumentKind::Screw;
  if (s == "drill") return InstrumentKind::Drill;
  if (s == "robot") return InstrumentKind::Robot;
  fail(ErrorCode::InvalidArgument, "unknown instrument kind '" + s + "'");
}

Box3 InstrumentMesh::bounding_box() const {
  Box3 b;
  for (const auto& v : vertices) b.extend(v);
  return b;
}

bool InstrumentMesh::is_watertight() const {
  for (const auto& [first, last] : components) {
    std::map<std::pair<int, int>, int> directed;
    for (std::size_t t = first; t < last; ++t) {
      const auto& tri = triangles[t];
      for (int e = 0; e < 3; ++e) ++directed[{tri[e], tri[(e + 1) % 3]}];
    }
    for (const auto& [edge, count] : directed) {
      if (count != 1) return false;
      auto it = directed.find({edge.second, edge.first});
      if (it == directed.end() || it->second != 1) return false;
    }
  }
  return !components.empty();
}

double InstrumentMesh::enclosed_volume() const {
  double v = 0.0;
  for (const auto& tri : triangles)
    v += vertices[tri[0]].dot(vertices[tri[1]].cross(vertices[tri[2]])) / 6.0;
  return v;
}

namespace {

struct AxisFrame {
  Vec3 base;
  Vec3 s;  // profile direction
  Vec3 u;  // u x v == s
  Vec3 v;
};

/// Surface of revolution from a (s, r) profile. Endpoints with r == 0 become
/// apexes, other endpoints get flat caps. Normals face outward.
void add_revolution(InstrumentMesh& m, const std::vector<std::pair<double, double>>& profile, const AxisFrame& f,
                    int segments) {
  const std::size_t first_tri = m.triangles.size();
  std::vector<std::vector<int>> rings;
  std::vector<int> apex(profile.size(), -1);
  for (std::size_t p = 0; p < profile.size(); ++p) {
    const auto [s, r] = profile[p];
    const Vec3 c = f.base + s * f.s;
    std::vector<int> ring;
    if (r == 0.0) {
      apex[p] = static_cast<int>(m.vertices.size());
      m.vertices.push_back(c);
    } else {
      for (int j = 0; j < segments; ++j) {
        const double phi = 2.0 * kPi * j / segments;
        ring.push_back(static_cast<int>(m.vertices.size()));
        m.vertices.push_back(c + r * (std::cos(phi) * f.u + std::sin(phi) * f.v));
      }
    }
    rings.push_back(std::move(ring));
  }
  auto add = [&](int a, int b, int c) { m.triangles.push_back({a, b, c}); };
  for (std::size_t p = 0; p + 1 < profile.size(); ++p) {
    const auto& ra = rings[p];
    const auto& rb = rings[p + 1];
    for (int j = 0; j < segments; ++j) {
      const int jn = (j + 1) % segments;
      if (apex[p] >= 0) {
        add(apex[p], rb[jn], rb[j]);
      } else if (apex[p + 1] >= 0) {
        add(ra[j], ra[jn], apex[p + 1]);
      } else {
        add(ra[j], rb[jn], rb[j]);
        add(ra[j], ra[jn], rb[jn]);
      }
    }
  }
  if (apex.front() < 0) {
    const int c = static_cast<int>(m.vertices.size());
    m.vertices.push_back(f.base + profile.front().first * f.s);
    for (int j = 0; j < segments; ++j) add(c, rings.front()[(j + 1) % segments], rings.front()[j]);
  }
  if (apex.back() < 0) {
    const int c = static_cast<int>(m.vertices.size());
    m.vertices.push_back(f.base + profile.back().first * f.s);
    for (int j = 0; j < segments; ++j) add(c, rings.back()[j], rings.back()[(j + 1) % segments]);
  }
  m.components.push_back({first_tri, m.triangles.size()});
}

Mat3 axis_angle(const Vec3& axis, double deg) {
  return Eigen::AngleAxisd(deg2rad(deg), axis.normalized()).toRotationMatrix();
}

}  // namespace

InstrumentMesh make_instrument(InstrumentKind kind, const InstrumentParams& params) {
  require(params.diameter_mm > 0.0, ErrorCode::InvalidArgument, "instrument diameter must be positive");
  require(params.segments >= 8 && params.segments % 4 == 0, ErrorCode::InvalidArgument,
          "segments must be a multiple of 4 and >= 8");
  InstrumentMesh m;
  m.kind = kind;
  const double r = 0.5 * params.diameter_mm;
  const int seg = params.segments;
  const AxisFrame forward{Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const AxisFrame backward{Vec3::Zero(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitZ()};

  switch (kind) {
    case InstrumentKind::Screw: {
      // Bounding-box diagonal 6.5 mm for a 3 mm head.
      const double length = std::sqrt(6.5 * 6.5 - 2.0 * (2.0 * r) * (2.0 * r));
      const double shaft = 2.0 / 3.0 * r;
      add_revolution(m, {{0.0, r}, {0.25 * length, r}, {0.25 * length, shaft}, {0.82 * length, shaft}, {length, 0.0}},
                     forward, seg);
      break;
    }
    case InstrumentKind::Drill: {
      const double tip = r / std::tan(deg2rad(59.0));
      add_revolution(m, {{0.0, 0.0}, {tip, r}, {10.0, r}}, backward, seg);
      break;
    }
    case InstrumentKind::Robot: {
      require(params.robot_bend_deg >= -30.0 && params.robot_bend_deg <= 30.0, ErrorCode::InvalidArgument,
              "robot bend must lie in [-30, 30] degrees");
      m.robot_bend_deg = params.robot_bend_deg;
      // Spherical head of diameter d followed by a slightly thinner cylinder;
      // the rigid front part has a 13.15 mm bounding-box diagonal.
      const double body = 0.93 * r;
      const double front_len = std::sqrt(13.15 * 13.15 - 2.0 * (2.0 * r) * (2.0 * r));
      std::vector<std::pair<double, double>> profile;
      const double theta_end = kPi - std::asin(body / r);
      const int arc_steps = 16;
      for (int i = 0; i <= arc_steps; ++i) {
        // sample densely enough to hit theta = 90 degrees exactly
        const double theta = (i <= 8) ? 0.5 * kPi * i / 8 : 0.5 * kPi + (theta_end - 0.5 * kPi) * (i - 8) / 8;
        profile.push_back({r - r * std::cos(theta), i == 0 ? 0.0 : r * std::sin(theta)});
      }
      profile.back().second = body;
      profile.push_back({front_len, body});
      add_revolution(m, profile, backward, seg);

      const double gap = 0.3;
      const Vec3 joint = -(front_len + 0.5 * gap) * Vec3::UnitX();
      const Mat3 bend = axis_angle(Vec3::UnitZ(), params.robot_bend_deg);
      AxisFrame rear{joint, bend * (-Vec3::UnitX()), bend * Vec3::UnitY(), bend * (-Vec3::UnitZ())};
      add_revolution(m, {{0.5 * gap, body}, {0.5 * gap + 8.0, body}}, rear, seg);
      break;
    }
  }
  m.origin = Vec3::Zero();
  m.main_axis = Vec3::UnitX();
  return m;
}

InstrumentMesh make_box_mesh(const Vec3& lo, const Vec3& hi) {
  InstrumentMesh m;
  for (int k = 0; k < 8; ++k)
    m.vertices.push_back({(k & 1) ? hi.x() : lo.x(), (k & 2) ? hi.y() : lo.y(), (k & 4) ? hi.z() : lo.z()});
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  m.components.push_back({0, m.triangles.size()});
  m.origin = 0.5 * (lo + hi);
  return m;
}

InstrumentMesh make_sphere_mesh(const Vec3& center, double radius, int segments, int rings) {
  std::vector<std::pair<double, double>> profile;
  for (int i = 0; i <= rings; ++i) {
    const double theta = kPi * i / rings;
    const double rr = (i == 0 || i == rings) ? 0.0 : radius * std::sin(theta);
    profile.push_back({radius - radius * std::cos(theta), rr});
  }
  InstrumentMesh m;
  add_revolution(m, profile, AxisFrame{center - radius * Vec3::UnitX(), Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()},
                 segments);
  m.origin = center;
  return m;
}

InstrumentMesh transform_mesh(const InstrumentMesh& mesh, const Vec3& position, const Mat3& rotation) {
  require(rotation.allFinite() && position.allFinite(), ErrorCode::InvalidArgument, "transform must be finite");
  require((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9 &&
              std::abs(rotation.determinant() - 1.0) < 1e-9,
          ErrorCode::InvalidArgument, "orientation is not a proper rotation");
  InstrumentMesh out = mesh;
  for (auto& v : out.vertices) v = rotation * v + position;
  out.origin = rotation * mesh.origin + position;
  out.main_axis = (rotation * mesh.main_axis).normalized();
  return out;
}

namespace {

// Tie-break for points exactly on an xy edge: an edge owns its boundary when
// it points "up" (or right on horizontals), so shared edges count once.
bool edge_owns(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (b.y() > a.y()) || (b.y() == a.y() && b.x() < a.x());
}

}  // namespace

CombineResult voxelize_and_combine(const Volume& volume, const InstrumentMesh& mesh, double mu_instrument,
                                   unsigned threads) {
  require(mu_instrument >= 0.0, ErrorCode::InvalidArgument, "instrument attenuation must be non-negative");
  CombineResult result{volume, 0, {}};
  if (mesh.triangles.empty()) return result;

  const Box3 mb = mesh.bounding_box();
  const Box3 vb = volume.extent();
  if (!mb.intersects(vb)) {
    result.warnings.push_back("instrument mesh lies entirely outside the volume; volume unchanged");
    return result;
  }
  std::array<int, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::ceil((mb.min()[a] - volume.origin[a]) / volume.spacing[a])));
    hi[a] = std::min(volume.dims[a] - 1,
                     static_cast<int>(std::floor((mb.max()[a] - volume.origin[a]) / volume.spacing[a])));
  }
  if (lo[0] > hi[0] || lo[1] > hi[1] || lo[2] > hi[2]) return result;

  const int nx = hi[0] - lo[0] + 1, ny = hi[1] - lo[1] + 1, nz = hi[2] - lo[2] + 1;
  std::vector<std::uint8_t> inside(static_cast<std::size_t>(nx) * ny * nz, 0);

  struct Tri2 {
    Eigen::Vector2d p[3];
    double z[3];
    double xmin, xmax, ymin, ymax;
    double area2;
  };

  for (const auto& [first, last] : mesh.components) {
    std::vector<Tri2> tris;
    tris.reserve(last - first);
    for (std::size_t t = first; t < last; ++t) {
      Tri2 tr;
      for (int e = 0; e < 3; ++e) {
        const Vec3& v = mesh.vertices[mesh.triangles[t][e]];
        tr.p[e] = {v.x(), v.y()};
        tr.z[e] = v.z();
      }
      const Eigen::Vector2d e1 = tr.p[1] - tr.p[0], e2 = tr.p[2] - tr.p[0];
      tr.area2 = e1.x() * e2.y() - e1.y() * e2.x();
      if (tr.area2 == 0.0) continue;  // vertical in xy, never crossed by a z-ray
      tr.xmin = std::min({tr.p[0].x(), tr.p[1].x(), tr.p[2].x()});
      tr.xmax = std::max({tr.p[0].x(), tr.p[1].x(), tr.p[2].x()});
      tr.ymin = std::min({tr.p[0].y(), tr.p[1].y(), tr.p[2].y()});
      tr.ymax = std::max({tr.p[0].y(), tr.p[1].y(), tr.p[2].y()});
      tris.push_back(tr);
    }

    // Columns are independent; each writes only its own (i, j) cells.
    parallel_for(0, static_cast<std::size_t>(nx) * ny, threads, [&](std::size_t col) {
      const int ii = static_cast<int>(col % nx), jj = static_cast<int>(col / nx);
      const Eigen::Vector2d q{volume.origin.x() + (lo[0] + ii) * volume.spacing.x(),
                              volume.origin.y() + (lo[1] + jj) * volume.spacing.y()};
      std::vector<double> hits;
      for (const auto& tr : tris) {
        if (q.x() < tr.xmin || q.x() > tr.xmax || q.y() < tr.ymin || q.y() > tr.ymax) continue;
        const double sgn = tr.area2 > 0.0 ? 1.0 : -1.0;
        double w[3];
        bool in = true;
        for (int e = 0; e < 3 && in; ++e) {
          const Eigen::Vector2d& a = tr.p[e];
          const Eigen::Vector2d& b = tr.p[(e + 1) % 3];
          w[e] = sgn * ((b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x()));
          if (w[e] < 0.0) in = false;
          else if (w[e] == 0.0) in = (sgn > 0.0) ? edge_owns(a, b) : edge_owns(b, a);
        }
        if (!in) continue;
        // w[e] is opposite vertex (e + 2) % 3.
        const double sum = w[0] + w[1] + w[2];
        if (sum <= 0.0) continue;
        const double z = (w[0] * tr.z[2] + w[1] * tr.z[0] + w[2] * tr.z[1]) / sum;
        hits.push_back(z);
      }
      if (hits.size() < 2) return;
      std::sort(hits.begin(), hits.end());
      for (int kk = 0; kk < nz; ++kk) {
        const double zc = volume.origin.z() + (lo[2] + kk) * volume.spacing.z();
        const auto below = std::lower_bound(hits.begin(), hits.end(), zc) - hits.begin();
        if (below % 2 == 1) inside[(static_cast<std::size_t>(kk) * ny + jj) * nx + ii] = 1;
      }
    });
  }

  const float mu = static_cast<float>(mu_instrument);
  for (int kk = 0; kk < nz; ++kk)
    for (int jj = 0; jj < ny; ++jj)
      for (int ii = 0; ii < nx; ++ii)
        if (inside[(static_cast<std::size_t>(kk) * ny + jj) * nx + ii]) {
          result.volume.at(lo[0] + ii, lo[1] + jj, lo[2] + kk) = mu;
          ++result.voxels_set;
        }
  return result;
}

void save_off(const InstrumentMesh& mesh, const std::filesystem::path& path) {
  std::ofstream f(path);
  require(bool(f), ErrorCode::Io, "cannot write " + path.string());
  f << "OFF\n# kind " << to_string(mesh.kind) << " bend_deg " << mesh.robot_bend_deg << "\n";
  f << mesh.vertices.size() << ' ' << mesh.triangles.size() << " 0\n";
  f.precision(17);
  for (const auto& v : mesh.vertices) f << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) f << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  require(bool(f), ErrorCode::Io, "short write to " + path.string());
}

InstrumentMesh load_off(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(bool(f), ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  auto next = [&]() -> std::string {
    while (std::getline(f, line)) {
      auto pos = line.find('#');
      if (pos != std::string::npos) line.erase(pos);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    }
    fail(ErrorCode::Format, "unexpected end of OFF file " + path.string());
  };
  std::string header = next();
  require(header.rfind("OFF", 0) == 0, ErrorCode::Format, "missing OFF header in " + path.string());
  std::size_t nv = 0, nf = 0, ne = 0;
  std::istringstream(next()) >> nv >> nf >> ne;
  InstrumentMesh m;
  for (std::size_t i = 0; i < nv; ++i) {
    Vec3 v;
    std::istringstream s(next());
    s >> v.x() >> v.y() >> v.z();
    require(bool(s), ErrorCode::Format, "bad OFF vertex line");
    m.vertices.push_back(v);
  }
  for (std::size_t i = 0; i < nf; ++i) {
    std::istringstream s(next());
    int n = 0;
    std::array<int, 3> t{};
    s >> n >> t[0] >> t[1] >> t[2];
    require(bool(s) && n == 3, ErrorCode::Format, "only triangle faces are supported");
    for (int idx : t)
      require(idx >= 0 && static_cast<std::size_t>(idx) < nv, ErrorCode::Format, "face index out of range");
    m.triangles.push_back(t);
  }
  m.components.push_back({0, m.triangles.size()});
  return m;
}

}  // namespace xpose
