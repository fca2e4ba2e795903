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

// Small VGG-style convolutional regressors with hand-written backward passes.
// Everything runs in double precision on the CPU; tensors are NCHW.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "xpose/rng.hpp"

namespace xpose::nn {

struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  static Tensor zeros(int n, int c, int h, int w);
  std::size_t size() const { return data.size(); }
  std::size_t per_sample() const { return static_cast<std::size_t>(c) * h * w; }
  double& at(int in, int ic, int ih, int iw) {
    return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
  }
  double at(int in, int ic, int ih, int iw) const {
    return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
  }
};

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  /// `rng` is only consumed by stochastic layers in training mode.
  virtual Tensor forward(const Tensor& x, bool training, Rng& rng) = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input) for the
  /// most recent forward call.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  /// Non-trainable state saved with the weights (batch-norm running stats).
  virtual std::vector<Param*> buffers() { return {}; }
};

std::unique_ptr<Layer> make_conv3x3(int in_channels, int out_channels, int stride);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_max_pool2();
std::unique_ptr<Layer> make_avg_pool2();
std::unique_ptr<Layer> make_batch_norm(int channels, double momentum = 0.1, double eps = 1e-5);
std::unique_ptr<Layer> make_dropout(double rate);
std::unique_ptr<Layer> make_flatten();
std::unique_ptr<Layer> make_dense(int in_features, int out_features);

enum class Pooling { Max, Average, StridedLast };
enum class ConvRegularization { None, Dropout, BatchNormBlock, BatchNormLayer };
enum class FcRegularization { None, Dropout, BatchNorm };
enum class Head { Indirect, Direct };

/// Design space of the regressor. Channels start at `base_channels` and
/// double per block; the dense stack has `fc_layers` layers including the
/// output layer, hidden widths start at `fc_nodes` and shrink by `fc_factor`.
struct ConvNetConfig {
  int input_channels = 1;
  int input_height = 48;
  int input_width = 92;
  int blocks = 2;            // 2 | 3
  int layers_per_block = 2;  // 2 | 3
  int base_channels = 32;
  Pooling pooling = Pooling::Max;
  ConvRegularization conv_regularization = ConvRegularization::None;
  int fc_layers = 3;  // with fc_factor: "4/2" -> (4, 2), "3/4" -> (3, 4)
  int fc_factor = 4;
  int fc_nodes = 1024;
  FcRegularization fc_regularization = FcRegularization::None;
  double dropout_rate = 0.2;
  Head head = Head::Indirect;
  int outputs = 12;

  void validate() const;
};

std::string to_string(Pooling p);
std::string to_string(ConvRegularization r);
std::string to_string(FcRegularization r);
std::string to_string(Head h);
Pooling pooling_from_string(const std::string& s);
ConvRegularization conv_regularization_from_string(const std::string& s);
FcRegularization fc_regularization_from_string(const std::string& s);
Head head_from_string(const std::string& s);

nlohmann::json config_to_json(const ConvNetConfig& cfg);
/// Missing keys keep their defaults; the result is validated.
ConvNetConfig config_from_json(const nlohmann::json& j);

class Network {
 public:
  Network() = default;
  /// Builds the layer stack and draws He-scaled weights from `seed`.
  Network(const ConvNetConfig& cfg, std::uint64_t seed);
  /// Arbitrary stack (tests); parameters keep their constructed values.
  explicit Network(std::vector<std::unique_ptr<Layer>> layers);

  Tensor forward(const Tensor& x, bool training, Rng& rng);
  /// Inference mode forward.
  Tensor predict(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void zero_grad();
  std::vector<Param*> params();
  std::vector<Param*> buffers();
  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }
  const ConvNetConfig& config() const { return cfg_; }
  std::size_t parameter_count();

 private:
  ConvNetConfig cfg_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Mean over all elements of (y - t)^2; `grad` receives d(loss)/dy.
double mse_loss(const Tensor& y, const Tensor& target, Tensor* grad);

enum class OptimizerKind { SgdNesterov, Adam };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const std::vector<Param*>& params);
  void step();

 private:
  TrainConfig cfg_;
  std::vector<Param*> params_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

/// In-memory supervised dataset: inputs [N, C, H, W] and targets [N, K].
struct Dataset {
  Tensor inputs;
  std::vector<std::vector<double>> targets;
  std::size_t size() const { return targets.size(); }
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  double initial_loss = 0.0;       // full-dataset loss before the first update
  double final_loss = 0.0;         // full-dataset loss after training
  int epochs_run = 0;
};

/// Seeded mini-batch training. Throws Diverged when the loss turns
/// non-finite. `on_epoch` (optional) receives (epoch, loss).
TrainResult train(Network& net, const TrainConfig& cfg, const Dataset& data,
                  const std::function<void(int, double)>& on_epoch = {});

/// Full-dataset inference-mode loss in batches.
double evaluate_loss(Network& net, const Dataset& data, int batch_size = 64);

/// Batch-wise inference; returns one output row per sample.
std::vector<std::vector<double>> predict_all(Network& net, const Tensor& inputs, int batch_size = 64);

Tensor slice_batch(const Tensor& x, const std::vector<std::size_t>& rows);

// Weights directory: `weights.json` (config, seed, epoch, tensor table) plus one
// little-endian float32 blob per tensor.
void save_weights(Network& net, std::uint64_t seed, int epoch, const std::filesystem::path& dir);
Network load_weights(const std::filesystem::path& dir);

}  // namespace xpose::nn
