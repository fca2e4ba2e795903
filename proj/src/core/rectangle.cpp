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

#include "xpose/rectangle.hpp"

#include <cmath>

#include "xpose/errors.hpp"
#include "xpose/rng.hpp"

namespace xpose {

namespace {

bool inside_rectangle(double lx, double ly, const RectangleShape& s) {
  const double hl = 0.5 * s.length, hw = 0.5 * s.width, r = s.corner_radius;
  if (std::abs(lx) > hl || std::abs(ly) > hw) return false;
  if (lx > hl - r && std::abs(ly) > hw - r) {
    const double dx = lx - (hl - r), dy = std::abs(ly) - (hw - r);
    return dx * dx + dy * dy <= r * r;
  }
  return true;
}

double center_margin(const RectangleShape& s) { return std::hypot(0.5 * s.length, 0.5 * s.width) + 0.5; }

}  // namespace

RectangleSample render_rectangle(const Vec2& center, double angle_deg, const RectangleShape& shape) {
  require(shape.image_size > 0 && shape.supersample >= 1, ErrorCode::InvalidArgument, "invalid rectangle shape");
  require(shape.corner_radius >= 0.0 && shape.corner_radius <= 0.5 * std::min(shape.length, shape.width),
          ErrorCode::InvalidArgument, "corner radius exceeds the rectangle");
  RectangleSample s;
  s.center = center;
  s.angle_deg = wrap_degrees_360(angle_deg);
  const double a = deg2rad(s.angle_deg);
  const Vec2 dir(std::cos(a), std::sin(a));
  s.endpoints = {center + 0.5 * shape.length * dir, center - 0.5 * shape.length * dir};
  const int n = shape.image_size, ss = shape.supersample;
  s.pixels.assign(static_cast<std::size_t>(n) * n, 1.0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double px = x - 0.5 + (sx + 0.5) / ss - center.x();
          const double py = y - 0.5 + (sy + 0.5) / ss - center.y();
          if (inside_rectangle(px * dir.x() + py * dir.y(), -px * dir.y() + py * dir.x(), shape)) ++hits;
        }
      s.pixels[static_cast<std::size_t>(y) * n + x] = 1.0 - static_cast<double>(hits) / (ss * ss);
    }
  return s;
}

std::vector<RectangleSample> make_rectangle_dataset(int count, std::uint64_t seed, const RectangleShape& shape) {
  require(count >= 1, ErrorCode::InvalidArgument, "rectangle dataset needs count >= 1");
  const double m = center_margin(shape);
  require(shape.image_size - 1 - m > m, ErrorCode::InvalidArgument, "image too small for the rectangle");
  std::vector<RectangleSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const double cx = uniform(rng, m, shape.image_size - 1 - m);
    const double cy = uniform(rng, m, shape.image_size - 1 - m);
    const double angle = uniform(rng, 0.0, 360.0);
    out.push_back(render_rectangle({cx, cy}, angle, shape));
  }
  return out;
}

double endpoint_angle(const std::array<Vec2, 2>& e) {
  const Vec2 d = e[0] - e[1];
  return wrap_degrees_360(rad2deg(std::atan2(d.y(), d.x())));
}

std::vector<double> rectangle_target(const RectangleSample& s, nn::Head head, const RectangleShape& shape) {
  if (head == nn::Head::Direct) return {s.angle_deg / 180.0 - 1.0};
  const double c = 0.5 * (shape.image_size - 1);
  return {(s.endpoints[0].x() - c) / c, (s.endpoints[0].y() - c) / c, (s.endpoints[1].x() - c) / c,
          (s.endpoints[1].y() - c) / c};
}

double rectangle_angle_from_output(const std::vector<double>& out, nn::Head head, const RectangleShape& shape) {
  if (head == nn::Head::Direct) {
    require(out.size() == 1, ErrorCode::InvalidArgument, "direct head has one output");
    return wrap_degrees_360((out[0] + 1.0) * 180.0);
  }
  require(out.size() == 4, ErrorCode::InvalidArgument, "indirect head has four outputs");
  const double c = 0.5 * (shape.image_size - 1);
  return endpoint_angle({Vec2(out[0] * c + c, out[1] * c + c), Vec2(out[2] * c + c, out[3] * c + c)});
}

nn::Dataset to_nn_dataset(const std::vector<RectangleSample>& samples, nn::Head head, const RectangleShape& shape) {
  nn::Dataset d;
  const int n = shape.image_size;
  d.inputs = nn::Tensor::zeros(static_cast<int>(samples.size()), 1, n, n);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].pixels.begin(), samples[i].pixels.end(),
              d.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * d.inputs.per_sample()));
    d.targets.push_back(rectangle_target(samples[i], head, shape));
  }
  return d;
}

nn::ConvNetConfig rectangle_network(nn::Head head, int base_channels, int fc_nodes, const RectangleShape& shape) {
  nn::ConvNetConfig c;
  c.input_height = c.input_width = shape.image_size;
  c.blocks = 2;
  c.layers_per_block = 2;
  c.base_channels = base_channels;
  c.fc_layers = 3;
  c.fc_factor = 4;
  c.fc_nodes = fc_nodes;
  c.head = head;
  c.outputs = head == nn::Head::Direct ? 1 : 4;
  return c;
}

RectangleRun run_rectangle(const nn::ConvNetConfig& net_cfg, const nn::TrainConfig& train_cfg,
                           const std::vector<RectangleSample>& train_set, const std::vector<RectangleSample>& test_set,
                           const RectangleShape& shape) {
  RectangleRun run;
  run.head = net_cfg.head;
  run.seed = train_cfg.seed;
  nn::Network net(net_cfg, derive_seed(train_cfg.seed, {0x1417ULL}));
  run.training = nn::train(net, train_cfg, to_nn_dataset(train_set, net_cfg.head, shape));
  const nn::Dataset test = to_nn_dataset(test_set, net_cfg.head, shape);
  const auto outputs = nn::predict_all(net, test.inputs);
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const double pred = rectangle_angle_from_output(outputs[i], net_cfg.head, shape);
    run.true_angles.push_back(test_set[i].angle_deg);
    run.abs_errors_deg.push_back(std::abs(angle_error(pred, test_set[i].angle_deg)));
  }
  return run;
}

}  // namespace xpose
