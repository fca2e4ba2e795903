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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "xpose/errors.hpp"
#include "xpose/nn.hpp"

namespace xpose::nn {

namespace {

constexpr int kWeightsFormatVersion = 1;

void write_f32(std::ofstream& f, const std::vector<double>& v) {
  for (double d : v) {
    const std::uint32_t b = std::bit_cast<std::uint32_t>(static_cast<float>(d));
    const unsigned char le[4] = {static_cast<unsigned char>(b), static_cast<unsigned char>(b >> 8),
                                 static_cast<unsigned char>(b >> 16), static_cast<unsigned char>(b >> 24)};
    f.write(reinterpret_cast<const char*>(le), 4);
  }
}

std::vector<double> read_f32(const std::filesystem::path& p, std::size_t n) {
  std::ifstream f(p, std::ios::binary);
  require(bool(f), ErrorCode::Io, "cannot read " + p.string());
  std::vector<unsigned char> buf(n * 4);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(static_cast<std::size_t>(f.gcount()) == buf.size(), ErrorCode::Format,
          p.string() + " is shorter than its declared shape");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint32_t b = std::uint32_t(buf[4 * k]) | (std::uint32_t(buf[4 * k + 1]) << 8) |
                            (std::uint32_t(buf[4 * k + 2]) << 16) | (std::uint32_t(buf[4 * k + 3]) << 24);
    out[k] = std::bit_cast<float>(b);
  }
  return out;
}

Tensor targets_batch(const Dataset& data, const std::vector<std::size_t>& rows) {
  const int k = static_cast<int>(data.targets[rows[0]].size());
  Tensor t = Tensor::zeros(static_cast<int>(rows.size()), k, 1, 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = data.targets[rows[i]];
    require(static_cast<int>(row.size()) == k, ErrorCode::InvalidArgument, "ragged target rows");
    std::copy(row.begin(), row.end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  return t;
}

}  // namespace

double mse_loss(const Tensor& y, const Tensor& target, Tensor* grad) {
  require(y.size() == target.size() && y.size() > 0, ErrorCode::InvalidArgument, "mse: shape mismatch");
  double sum = 0.0;
  if (grad) *grad = Tensor::zeros(y.n, y.c, y.h, y.w);
  const double scale = 2.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y.data[i] - target.data[i];
    sum += d * d;
    if (grad) grad->data[i] = scale * d;
  }
  return sum / static_cast<double>(y.size());
}

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorCode::InvalidArgument,
          "learning rate must be finite and >= 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::InvalidArgument, "momentum must lie in [0, 1)");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0, ErrorCode::InvalidArgument,
          "invalid Adam parameters");
  require(batch_size >= 1 && epochs >= 0, ErrorCode::InvalidArgument, "batch_size >= 1 and epochs >= 0 required");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd-nesterov"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd-nesterov") return OptimizerKind::SgdNesterov;
  fail(ErrorCode::InvalidArgument, "unknown optimizer '" + s + "'");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"optimizer", to_string(c.optimizer)}, {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
          {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}, {"batch_size", c.batch_size},
          {"epochs", c.epochs}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.optimizer = optimizer_from_string(j.value("optimizer", to_string(c.optimizer)));
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::Format, std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

Optimizer::Optimizer(const TrainConfig& cfg, const std::vector<Param*>& params) : cfg_(cfg), params_(params) {
  cfg.validate();
  for (Param* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Optimizer::step() {
  ++t_;
  const double lr = cfg_.learning_rate;
  if (lr == 0.0) return;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    if (cfg_.optimizer == OptimizerKind::SgdNesterov) {
      const double mu = cfg_.momentum;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = mu * m[i] + p.grad[i];
        p.value[i] -= lr * (p.grad[i] + mu * m[i]);
      }
    } else {
      const double b1 = cfg_.beta1, b2 = cfg_.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * p.grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * p.grad[i] * p.grad[i];
        p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
      }
    }
  }
}

Tensor slice_batch(const Tensor& x, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::zeros(static_cast<int>(rows.size()), x.c, x.h, x.w);
  const std::size_t ps = x.per_sample();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < static_cast<std::size_t>(x.n), ErrorCode::InvalidArgument, "batch row out of range");
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * ps), ps,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * ps));
  }
  return out;
}

std::vector<std::vector<double>> predict_all(Network& net, const Tensor& inputs, int batch_size) {
  std::vector<std::vector<double>> out;
  for (int start = 0; start < inputs.n; start += batch_size) {
    std::vector<std::size_t> rows;
    for (int i = start; i < std::min(inputs.n, start + batch_size); ++i) rows.push_back(static_cast<std::size_t>(i));
    const Tensor y = net.predict(slice_batch(inputs, rows));
    const std::size_t k = y.per_sample();
    for (std::size_t i = 0; i < rows.size(); ++i)
      out.emplace_back(y.data.begin() + static_cast<std::ptrdiff_t>(i * k),
                       y.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
  }
  return out;
}

double evaluate_loss(Network& net, const Dataset& data, int batch_size) {
  require(data.size() > 0, ErrorCode::InvalidArgument, "dataset is empty");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) rows.push_back(i);
    const Tensor y = net.predict(slice_batch(data.inputs, rows));
    const Tensor t = targets_batch(data, rows);
    sum += mse_loss(y, t, nullptr) * static_cast<double>(y.size());
    count += y.size();
  }
  return sum / static_cast<double>(count);
}

TrainResult train(Network& net, const TrainConfig& cfg, const Dataset& data,
                  const std::function<void(int, double)>& on_epoch) {
  cfg.validate();
  require(data.size() > 0 && static_cast<int>(data.size()) == data.inputs.n, ErrorCode::InvalidArgument,
          "training needs a nonempty dataset with one target row per input");
  TrainResult result;
  result.initial_loss = evaluate_loss(net, data);
  Optimizer opt(cfg, net.params());
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(
                                                              std::min(order.size(), start + cfg.batch_size)));
      // Batch-norm needs more than one sample; drop a trailing singleton.
      if (rows.size() < 2 && order.size() > 1) continue;
      net.zero_grad();
      const Tensor y = net.forward(slice_batch(data.inputs, rows), true, rng);
      Tensor grad;
      const double loss = mse_loss(y, targets_batch(data, rows), &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", batch " << batches << " (loss " << loss
            << ", learning rate " << cfg.learning_rate << ", optimizer " << to_string(cfg.optimizer) << ")";
        fail(ErrorCode::Diverged, msg.str());
      }
      net.backward(grad);
      opt.step();
      sum += loss;
      ++batches;
    }
    const double mean = batches ? sum / static_cast<double>(batches) : 0.0;
    result.epoch_loss.push_back(mean);
    result.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(epoch, mean);
  }
  result.final_loss = evaluate_loss(net, data);
  require(std::isfinite(result.final_loss), ErrorCode::Diverged, "final training loss is not finite");
  return result;
}

void save_weights(Network& net, std::uint64_t seed, int epoch, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = kWeightsFormatVersion;
  manifest["config"] = config_to_json(net.config());
  manifest["seed"] = seed;
  manifest["epoch"] = epoch;
  manifest["dtype"] = "float32-le";
  nlohmann::json tensors = nlohmann::json::array();
  int layer_index = 0, blob = 0;
  for (auto& layer : net.layers()) {
    auto emit = [&](Param* p, const char* role) {
      char name[32];
      std::snprintf(name, sizeof name, "t%03d.bin", blob++);
      std::ofstream f(dir / name, std::ios::binary);
      require(bool(f), ErrorCode::Io, "cannot write " + (dir / name).string());
      write_f32(f, p->value);
      tensors.push_back({{"layer", layer_index}, {"kind", layer->kind()}, {"name", p->name}, {"role", role},
                         {"shape", p->shape}, {"file", name}});
    };
    for (Param* p : layer->params()) emit(p, "param");
    for (Param* p : layer->buffers()) emit(p, "buffer");
    ++layer_index;
  }
  manifest["tensors"] = tensors;
  std::ofstream mf(dir / "weights.json");
  require(bool(mf), ErrorCode::Io, "cannot write " + (dir / "weights.json").string());
  mf << manifest.dump(2) << '\n';
}

Network load_weights(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "weights.json");
  require(bool(mf), ErrorCode::Io, "cannot read " + (dir / "weights.json").string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const std::exception& e) {
    fail(ErrorCode::Format, std::string("weights.json is not valid JSON: ") + e.what());
  }
  require(manifest.value("format_version", 0) == kWeightsFormatVersion, ErrorCode::Format,
          "unsupported weights format version");
  Network net(config_from_json(manifest.at("config")), manifest.value("seed", std::uint64_t{0}));
  std::vector<Param*> slots;
  for (auto& layer : net.layers()) {
    for (Param* p : layer->params()) slots.push_back(p);
    for (Param* p : layer->buffers()) slots.push_back(p);
  }
  const auto& tensors = manifest.at("tensors");
  require(tensors.size() == slots.size(), ErrorCode::Format, "weights file does not match the network layout");
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto shape = tensors[k].at("shape").get<std::vector<int>>();
    require(shape == slots[k]->shape, ErrorCode::Format, "tensor shape mismatch in weights file");
    slots[k]->value = read_f32(dir / tensors[k].at("file").get<std::string>(), slots[k]->value.size());
  }
  return net;
}

}  // namespace xpose::nn
