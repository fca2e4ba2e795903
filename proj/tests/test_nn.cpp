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

#include "support/gradcheck.hpp"
#include "xpose/errors.hpp"
#include "xpose/nn.hpp"
#include "xpose/rectangle.hpp"

using namespace xpose;
using namespace xpose::nn;
using namespace xpose::testing;
namespace fs = std::filesystem;

namespace {

constexpr double kH = 1e-4;
constexpr double kRel = 1e-4;

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
  Tensor t = Tensor::zeros(n, c, h, w);
  Rng rng(seed);
  randomize(t, rng, scale);
  return t;
}

Network stack(std::vector<std::unique_ptr<Layer>> layers, std::uint64_t seed) {
  Network net(std::move(layers));
  Rng rng(seed);
  randomize_params(net, rng);
  return net;
}

template <typename... L>
std::vector<std::unique_ptr<Layer>> layers(L&&... l) {
  std::vector<std::unique_ptr<Layer>> v;
  (v.push_back(std::forward<L>(l)), ...);
  return v;
}

void expect_gradients(Network& net, const Tensor& x, bool training, std::uint64_t seed = 7) {
  const GradCheckReport r = gradient_check(net, x, training, kH, kRel, seed);
  EXPECT_GT(r.checked, 0u);
  EXPECT_LE(r.skipped * 10, r.checked + r.skipped);
  EXPECT_EQ(r.failures, 0u) << r.worst;
}

ConvNetConfig tiny_config() {
  ConvNetConfig c;
  c.input_height = 12;
  c.input_width = 20;
  c.base_channels = 2;
  c.fc_nodes = 16;
  c.fc_factor = 4;
  c.fc_layers = 3;
  return c;
}

// Direct nested-loop 3x3 convolution with zero padding.
double naive_conv(const Tensor& x, const Param& w, const Param& b, int n, int co, int oy, int ox, int stride) {
  double s = b.value[co];
  for (int ci = 0; ci < x.c; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int iy = oy * stride + ky - 1, ix = ox * stride + kx - 1;
        if (iy < 0 || ix < 0 || iy >= x.h || ix >= x.w) continue;
        s += w.value[((co * x.c + ci) * 3 + ky) * 3 + kx] * x.at(n, ci, iy, ix);
      }
  return s;
}

}  // namespace

TEST(GradientCheck, Conv) {
  for (int stride : {1, 2}) {
    Network net = stack(layers(make_conv3x3(2, 3, stride)), 1);
    expect_gradients(net, random_tensor(2, 2, 7, 6, 2), true);
  }
}

TEST(GradientCheck, Relu) {
  Network net = stack(layers(make_relu()), 1);
  Tensor x = random_tensor(2, 2, 4, 5, 3);
  for (double& v : x.data) v += v >= 0 ? 0.1 : -0.1;  // keep away from the kink
  expect_gradients(net, x, true);
}

TEST(GradientCheck, Pooling) {
  for (int kind = 0; kind < 2; ++kind) {
    Network net = stack(layers(kind == 0 ? make_max_pool2() : make_avg_pool2()), 1);
    expect_gradients(net, random_tensor(2, 2, 6, 7, 4), true);
  }
}

TEST(GradientCheck, BatchNormTrainingAndInference) {
  Network conv_bn = stack(layers(make_conv3x3(2, 3, 1), make_batch_norm(3)), 5);
  expect_gradients(conv_bn, random_tensor(3, 2, 5, 4, 6), true);
  expect_gradients(conv_bn, random_tensor(3, 2, 5, 4, 6), false);
  Network dense_bn = stack(layers(make_flatten(), make_dense(6, 4), make_batch_norm(4)), 7);
  expect_gradients(dense_bn, random_tensor(5, 1, 2, 3, 8), true);
}

TEST(GradientCheck, Dropout) {
  Network net = stack(layers(make_dense(6, 5), make_dropout(0.2), make_dense(5, 3)), 9);
  const Tensor x = random_tensor(4, 6, 1, 1, 10);
  expect_gradients(net, x, false);
  expect_gradients(net, x, true);
}

TEST(GradientCheck, FlattenDense) {
  Network net = stack(layers(make_flatten(), make_dense(12, 4)), 11);
  expect_gradients(net, random_tensor(3, 2, 2, 3, 12), true);
}

TEST(GradientCheck, ConfiguredNetworks) {
  const Pooling poolings[] = {Pooling::Max, Pooling::Average, Pooling::StridedLast};
  const ConvRegularization conv_regs[] = {ConvRegularization::None, ConvRegularization::Dropout,
                                          ConvRegularization::BatchNormBlock, ConvRegularization::BatchNormLayer};
  const FcRegularization fc_regs[] = {FcRegularization::None, FcRegularization::Dropout, FcRegularization::BatchNorm};
  int case_id = 0;
  for (Pooling p : poolings)
    for (ConvRegularization cr : conv_regs)
      for (FcRegularization fr : fc_regs) {
        ConvNetConfig c = tiny_config();
        c.pooling = p;
        c.conv_regularization = cr;
        c.fc_regularization = fr;
        c.head = case_id % 2 ? Head::Direct : Head::Indirect;
        c.outputs = c.head == Head::Direct ? 1 : 12;
        Network net(c, 100 + case_id);
        SCOPED_TRACE(to_string(p) + "/" + to_string(cr) + "/" + to_string(fr));
        expect_gradients(net, random_tensor(8, 1, 12, 20, 200 + case_id), true, 300 + case_id);
        ++case_id;
      }
}

TEST(Forward, ZeroWeightsGiveZeroOutput) {
  Network net(tiny_config(), 1);
  for (Param* p : net.params()) std::fill(p->value.begin(), p->value.end(), 0.0);
  const Tensor y = net.predict(random_tensor(2, 1, 12, 20, 1));
  EXPECT_EQ(y.per_sample(), 12u);
  for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(Forward, PositiveHomogeneity) {
  Network net = stack(layers(make_dense(5, 7), make_relu(), make_dense(7, 3)), 2);
  auto ps = net.params();
  std::fill(ps[3]->value.begin(), ps[3]->value.end(), 0.0);  // output bias
  const Tensor x = random_tensor(4, 5, 1, 1, 3);
  const Tensor y = net.predict(x);
  for (double& v : ps[0]->value) v *= 2.5;
  for (double& v : ps[1]->value) v *= 2.5;
  const Tensor z = net.predict(x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(z.data[i], 2.5 * y.data[i], 1e-12);
}

TEST(Forward, ConvMatchesDirectConvolution) {
  for (int stride : {1, 2}) {
    Network net = stack(layers(make_conv3x3(1, 4, stride)), 3);
    const Tensor x = random_tensor(2, 1, 48, 92, 4);
    const Tensor y = net.predict(x);
    const auto ps = net.params();
    for (int n = 0; n < 2; ++n)
      for (int co = 0; co < 4; ++co)
        for (int oy = 0; oy < y.h; ++oy)
          for (int ox = 0; ox < y.w; ++ox) {
            const double ref = naive_conv(x, *ps[0], *ps[1], n, co, oy, ox, stride);
            ASSERT_NEAR(y.at(n, co, oy, ox), ref, 1e-5 * std::max(1.0, std::abs(ref)));
          }
  }
}

TEST(Forward, ShapeMismatchThrows) {
  Network net(tiny_config(), 1);
  EXPECT_THROW(net.predict(random_tensor(1, 1, 10, 20, 1)), Error);
}

TEST(Backward, ZeroLossGivesZeroGradients) {
  Network net(tiny_config(), 2);
  const Tensor x = random_tensor(3, 1, 12, 20, 5);
  Rng rng(1);
  const Tensor y = net.forward(x, true, rng);
  Tensor g;
  EXPECT_EQ(mse_loss(y, y, &g), 0.0);
  net.zero_grad();
  net.backward(g);
  for (Param* p : net.params())
    for (double v : p->grad) EXPECT_EQ(v, 0.0);
}

TEST(Backward, BatchGradientIsSumOfSampleGradients) {
  Network net(tiny_config(), 3);
  const Tensor x = random_tensor(3, 1, 12, 20, 6);
  const Tensor c = random_tensor(3, 12, 1, 1, 7);
  Rng rng(1);
  net.zero_grad();
  net.forward(x, false, rng);
  net.backward(c);
  std::vector<std::vector<double>> batch;
  for (Param* p : net.params()) batch.push_back(p->grad);
  net.zero_grad();
  for (std::size_t s = 0; s < 3; ++s) {
    net.forward(slice_batch(x, {s}), false, rng);
    net.backward(slice_batch(c, {s}));
  }
  auto ps = net.params();
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (std::size_t i = 0; i < ps[k]->grad.size(); ++i)
      EXPECT_NEAR(ps[k]->grad[i], batch[k][i], 1e-10 * std::max(1.0, std::abs(batch[k][i])));
}

TEST(Loss, MeanSquaredError) {
  Tensor y = Tensor::zeros(1, 2, 1, 1), t = Tensor::zeros(1, 2, 1, 1);
  y.data = {1.0, 3.0};
  t.data = {0.0, 1.0};
  Tensor g;
  EXPECT_DOUBLE_EQ(mse_loss(y, t, &g), 2.5);
  EXPECT_DOUBLE_EQ(g.data[0], 1.0);
  EXPECT_DOUBLE_EQ(g.data[1], 2.0);
}

TEST(Optimizer, SingleSteps) {
  Param p{"w", {1}, {1.0}, {0.5}};
  TrainConfig sgd;
  sgd.optimizer = OptimizerKind::SgdNesterov;
  sgd.learning_rate = 0.1;
  sgd.momentum = 0.9;
  Optimizer o(sgd, {&p});
  o.step();
  // velocity 0.5; update lr * (g + mu * v)
  EXPECT_NEAR(p.value[0], 1.0 - 0.1 * (0.5 + 0.9 * 0.5), 1e-15);

  Param q{"w", {1}, {1.0}, {0.5}};
  TrainConfig adam;
  adam.learning_rate = 0.01;
  Optimizer a(adam, {&q});
  a.step();
  // bias-corrected first step moves by lr * g / (|g| + eps')
  EXPECT_NEAR(q.value[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-12);
}

TEST(Training, ZeroLearningRateKeepsWeights) {
  Network net(rectangle_network(Head::Indirect), 4);
  std::vector<std::vector<double>> before;
  for (Param* p : net.params()) before.push_back(p->value);
  const Dataset d = to_nn_dataset(make_rectangle_dataset(40, 1), Head::Indirect);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 2;
  train(net, tc, d);
  auto ps = net.params();
  for (std::size_t k = 0; k < ps.size(); ++k) EXPECT_EQ(ps[k]->value, before[k]);
}

TEST(Training, SameSeedSameWeights) {
  const Dataset d = to_nn_dataset(make_rectangle_dataset(64, 2), Head::Direct);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 5;
  ConvNetConfig c = rectangle_network(Head::Direct);
  c.conv_regularization = ConvRegularization::Dropout;
  Network a(c, 9), b(c, 9);
  const TrainResult ra = train(a, tc, d);
  const TrainResult rb = train(b, tc, d);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  auto pa = a.params(), pb = b.params();
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k]->value, pb[k]->value);
}

TEST(Training, RectangleLossDropsTenfold) {
  const Dataset d = to_nn_dataset(make_rectangle_dataset(64, 3), Head::Indirect);
  Network net(rectangle_network(Head::Indirect), 6);
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 32;
  tc.seed = 6;
  const TrainResult r = train(net, tc, d);
  EXPECT_EQ(r.epochs_run, 200);
  EXPECT_LE(r.final_loss * 10.0, r.initial_loss) << r.initial_loss << " -> " << r.final_loss;
}

TEST(Training, DivergenceThrows) {
  const Dataset d = to_nn_dataset(make_rectangle_dataset(32, 4), Head::Direct);
  Network net(rectangle_network(Head::Direct), 1);
  TrainConfig tc;
  tc.optimizer = OptimizerKind::SgdNesterov;
  tc.learning_rate = 1e6;
  tc.epochs = 20;
  try {
    train(net, tc, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Diverged);
  }
}

TEST(Weights, SaveLoadRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "xpose_test_weights";
  fs::remove_all(dir);
  ConvNetConfig c = tiny_config();
  c.conv_regularization = ConvRegularization::BatchNormLayer;
  Network net(c, 12);
  // Move the running statistics away from their defaults.
  Rng rng(1);
  net.forward(random_tensor(4, 1, 12, 20, 2), true, rng);
  save_weights(net, 12, 3, dir);
  Network back = load_weights(dir);
  EXPECT_EQ(config_to_json(back.config()), config_to_json(c));
  const Tensor x = random_tensor(2, 1, 12, 20, 3);
  const Tensor a = net.predict(x), b = back.predict(x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-4 * std::max(1.0, std::abs(a.data[i])));
  auto pb = back.params(), pa = net.params();
  for (std::size_t k = 0; k < pa.size(); ++k)
    for (std::size_t i = 0; i < pa[k]->value.size(); ++i)
      EXPECT_EQ(pb[k]->value[i], static_cast<double>(static_cast<float>(pa[k]->value[i])));
  EXPECT_THROW(load_weights(dir / "missing"), Error);
}

TEST(Config, JsonRoundTripAndValidation) {
  ConvNetConfig c = tiny_config();
  c.blocks = 3;
  c.layers_per_block = 3;
  c.pooling = Pooling::StridedLast;
  c.fc_layers = 4;
  c.fc_factor = 2;
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
  ConvNetConfig bad = c;
  bad.blocks = 4;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.fc_factor = 3;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_EQ(head_from_string("direct"), Head::Direct);
  EXPECT_THROW(head_from_string("sideways"), Error);
}

TEST(Config, FullSizeNetworkHasThirteenWeightLayers) {
  ConvNetConfig c;
  c.blocks = 3;
  c.layers_per_block = 3;
  c.fc_layers = 4;
  c.fc_factor = 2;
  Network net(c, 1);
  int weight_layers = 0;
  for (auto& l : net.layers()) weight_layers += l->kind().rfind("conv", 0) == 0 || l->kind() == "dense";
  EXPECT_EQ(weight_layers, 13);
  EXPECT_EQ(net.layers().front()->params()[0]->shape[0], 32);
}

TEST(Rectangle, ZeroAngleIsHorizontalWithFrontRounded) {
  const RectangleShape shape;
  const RectangleSample s = render_rectangle(Vec2(14.5, 14.5), 0.0, shape);
  auto px = [&](int x, int y) { return s.pixels[static_cast<std::size_t>(y) * shape.image_size + x]; };
  // 15 px long along x, 9 px wide along y.
  EXPECT_LT(px(14 + 6, 14), 0.5);
  EXPECT_GT(px(14, 14 + 6), 0.5);
  // Front corners (+x) rounded: less ink than the square back corners.
  const double front = px(21, 10) + px(21, 18);
  const double back = px(7, 10) + px(7, 18);
  EXPECT_GT(front, back + 0.5);
  EXPECT_NEAR(s.endpoints[0].x() - s.endpoints[1].x(), 15.0, 1e-12);
}

TEST(Rectangle, LabelsAreConsistent) {
  const auto set = make_rectangle_dataset(500, 8);
  for (const auto& s : set) {
    EXPECT_NEAR(angle_error(endpoint_angle(s.endpoints), s.angle_deg), 0.0, 1e-9);
    for (double v : s.pixels) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    for (Head h : {Head::Direct, Head::Indirect}) {
      const auto t = rectangle_target(s, h);
      EXPECT_NEAR(angle_error(rectangle_angle_from_output(t, h), s.angle_deg), 0.0, 1e-9);
    }
  }
  const auto again = make_rectangle_dataset(500, 8);
  EXPECT_EQ(again.back().pixels, set.back().pixels);
}

TEST(Rectangle, IndirectLabelsContinuousAcrossWrap) {
  const auto a = render_rectangle(Vec2(15, 15), 359.5);
  const auto b = render_rectangle(Vec2(15, 15), 0.5);
  for (int e = 0; e < 2; ++e) EXPECT_LT((a.endpoints[e] - b.endpoints[e]).norm(), 2.0);
  const double ta = rectangle_target(a, Head::Direct)[0], tb = rectangle_target(b, Head::Direct)[0];
  EXPECT_NEAR((ta - tb) * 180.0, 359.0, 1e-9);
}

TEST(Rectangle, FullScaleCounts) {
  EXPECT_EQ(make_rectangle_dataset(1000, 1).size(), 1000u);
  EXPECT_THROW(make_rectangle_dataset(0, 1), Error);
}
