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

#include "xpose/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "xpose/errors.hpp"

namespace xpose::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void check_input(const Tensor& x, int c, const char* layer) {
  require(x.n > 0 && x.c == c && x.size() == static_cast<std::size_t>(x.n) * x.per_sample(),
          ErrorCode::InvalidArgument, std::string(layer) + ": input shape mismatch");
}

Param make_param(const std::string& name, std::vector<int> shape, double fill = 0.0) {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return {name, std::move(shape), std::vector<double>(n, fill), std::vector<double>(n, 0.0)};
}

class Conv3x3 final : public Layer {
 public:
  Conv3x3(int cin, int cout, int stride)
      : cin_(cin), cout_(cout), stride_(stride), weight_(make_param("weight", {cout, cin, 3, 3})),
        bias_(make_param("bias", {cout})) {}

  std::string kind() const override { return stride_ == 1 ? "conv3x3" : "conv3x3s2"; }

  Tensor forward(const Tensor& x, bool, Rng&) override {
    check_input(x, cin_, "conv3x3");
    x_ = x;
    const int ho = out_dim(x.h), wo = out_dim(x.w);
    Tensor y = Tensor::zeros(x.n, cout_, ho, wo);
    RowMat col(static_cast<Eigen::Index>(cin_) * 9, static_cast<Eigen::Index>(ho) * wo);
    const CMapMat w(weight_.value.data(), cout_, cin_ * 9);
    const Eigen::Map<const Eigen::VectorXd> b(bias_.value.data(), cout_);
    for (int n = 0; n < x.n; ++n) {
      im2col(x, n, ho, wo, col);
      MapMat out(y.data.data() + static_cast<std::size_t>(n) * y.per_sample(), cout_, ho * wo);
      out.noalias() = w * col;
      out.colwise() += b;
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const int ho = g.h, wo = g.w;
    Tensor dx = Tensor::zeros(x_.n, x_.c, x_.h, x_.w);
    RowMat col(static_cast<Eigen::Index>(cin_) * 9, static_cast<Eigen::Index>(ho) * wo);
    RowMat dcol(col.rows(), col.cols());
    const CMapMat w(weight_.value.data(), cout_, cin_ * 9);
    MapMat dw(weight_.grad.data(), cout_, cin_ * 9);
    Eigen::Map<Eigen::VectorXd> db(bias_.grad.data(), cout_);
    for (int n = 0; n < x_.n; ++n) {
      const CMapMat go(g.data.data() + static_cast<std::size_t>(n) * g.per_sample(), cout_, ho * wo);
      im2col(x_, n, ho, wo, col);
      dw.noalias() += go * col.transpose();
      db += go.rowwise().sum();
      dcol.noalias() = w.transpose() * go;
      col2im(dcol, n, ho, wo, dx);
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

 private:
  int out_dim(int in) const { return (in - 1) / stride_ + 1; }

  void im2col(const Tensor& x, int n, int ho, int wo, RowMat& col) const {
    for (int c = 0; c < cin_; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          double* row = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * col.cols();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ + ky - 1;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - 1;
              row[oy * wo + ox] = (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) ? x.at(n, c, iy, ix) : 0.0;
            }
          }
        }
  }

  void col2im(const RowMat& dcol, int n, int ho, int wo, Tensor& dx) const {
    for (int c = 0; c < cin_; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double* row = dcol.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * dcol.cols();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ + ky - 1;
            if (iy < 0 || iy >= dx.h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - 1;
              if (ix >= 0 && ix < dx.w) dx.at(n, c, iy, ix) += row[oy * wo + ox];
            }
          }
        }
  }

  int cin_, cout_, stride_;
  Param weight_, bias_;
  Tensor x_;
};

class Relu final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, bool, Rng&) override {
    Tensor y = x;
    mask_.assign(x.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.data[i] > 0.0)
        mask_[i] = 1;
      else
        y.data[i] = 0.0;
    }
    return y;
  }
  Tensor backward(const Tensor& g) override {
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!mask_[i]) dx.data[i] = 0.0;
    return dx;
  }

 private:
  std::vector<unsigned char> mask_;
};

class Pool2 final : public Layer {
 public:
  explicit Pool2(bool max) : max_(max) {}
  std::string kind() const override { return max_ ? "maxpool2" : "avgpool2"; }

  Tensor forward(const Tensor& x, bool, Rng&) override {
    require(x.h >= 2 && x.w >= 2, ErrorCode::InvalidArgument, "pool2: input smaller than the window");
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor y = Tensor::zeros(x.n, x.c, x.h / 2, x.w / 2);
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < y.h; ++oy)
          for (int ox = 0; ox < y.w; ++ox, ++o) {
            double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
            int best_k = 0;
            for (int k = 0; k < 4; ++k) {
              const double v = x.at(n, c, 2 * oy + k / 2, 2 * ox + k % 2);
              sum += v;
              if (v > best) {
                best = v;
                best_k = k;
              }
            }
            y.data[o] = max_ ? best : 0.25 * sum;
            argmax_[o] = static_cast<unsigned char>(best_k);
          }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    Tensor dx = Tensor::zeros(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    std::size_t o = 0;
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < g.c; ++c)
        for (int oy = 0; oy < g.h; ++oy)
          for (int ox = 0; ox < g.w; ++ox, ++o) {
            if (max_) {
              const int k = argmax_[o];
              dx.at(n, c, 2 * oy + k / 2, 2 * ox + k % 2) += g.data[o];
            } else {
              for (int k = 0; k < 4; ++k) dx.at(n, c, 2 * oy + k / 2, 2 * ox + k % 2) += 0.25 * g.data[o];
            }
          }
    return dx;
  }

 private:
  bool max_;
  std::array<int, 4> in_shape_{};
  std::vector<unsigned char> argmax_;
};

class BatchNorm final : public Layer {
 public:
  BatchNorm(int channels, double momentum, double eps)
      : channels_(channels), momentum_(momentum), eps_(eps), gamma_(make_param("gamma", {channels}, 1.0)),
        beta_(make_param("beta", {channels})), running_mean_(make_param("running_mean", {channels})),
        running_var_(make_param("running_var", {channels}, 1.0)) {}

  std::string kind() const override { return "batchnorm"; }

  Tensor forward(const Tensor& x, bool training, Rng&) override {
    check_input(x, channels_, "batchnorm");
    training_ = training;
    const int hw = x.h * x.w;
    const double m = static_cast<double>(x.n) * hw;
    xhat_ = Tensor::zeros(x.n, x.c, x.h, x.w);
    invstd_.assign(channels_, 0.0);
    Tensor y = xhat_;
    for (int c = 0; c < channels_; ++c) {
      double mean, var;
      if (training) {
        require(m > 1.0, ErrorCode::InvalidArgument, "batchnorm needs more than one value per channel in training");
        double s = 0.0;
        for (int n = 0; n < x.n; ++n)
          for (int i = 0; i < hw; ++i) s += x.data[(static_cast<std::size_t>(n) * channels_ + c) * hw + i];
        mean = s / m;
        double ss = 0.0;
        for (int n = 0; n < x.n; ++n)
          for (int i = 0; i < hw; ++i) {
            const double d = x.data[(static_cast<std::size_t>(n) * channels_ + c) * hw + i] - mean;
            ss += d * d;
          }
        var = ss / m;
        running_mean_.value[c] = (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean;
        running_var_.value[c] = (1.0 - momentum_) * running_var_.value[c] + momentum_ * var * m / (m - 1.0);
      } else {
        mean = running_mean_.value[c];
        var = running_var_.value[c];
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      invstd_[c] = inv;
      for (int n = 0; n < x.n; ++n)
        for (int i = 0; i < hw; ++i) {
          const std::size_t k = (static_cast<std::size_t>(n) * channels_ + c) * hw + i;
          xhat_.data[k] = (x.data[k] - mean) * inv;
          y.data[k] = gamma_.value[c] * xhat_.data[k] + beta_.value[c];
        }
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const int hw = g.h * g.w;
    const double m = static_cast<double>(g.n) * hw;
    Tensor dx = Tensor::zeros(g.n, g.c, g.h, g.w);
    for (int c = 0; c < channels_; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (int n = 0; n < g.n; ++n)
        for (int i = 0; i < hw; ++i) {
          const std::size_t k = (static_cast<std::size_t>(n) * channels_ + c) * hw + i;
          sum_g += g.data[k];
          sum_gx += g.data[k] * xhat_.data[k];
        }
      gamma_.grad[c] += sum_gx;
      beta_.grad[c] += sum_g;
      const double gm = gamma_.value[c] * invstd_[c];
      for (int n = 0; n < g.n; ++n)
        for (int i = 0; i < hw; ++i) {
          const std::size_t k = (static_cast<std::size_t>(n) * channels_ + c) * hw + i;
          dx.data[k] = training_ ? gm * (g.data[k] - sum_g / m - xhat_.data[k] * sum_gx / m) : gm * g.data[k];
        }
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<Param*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  int channels_;
  double momentum_, eps_;
  Param gamma_, beta_, running_mean_, running_var_;
  bool training_ = false;
  Tensor xhat_;
  std::vector<double> invstd_;
};

class Dropout final : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    require(rate >= 0.0 && rate < 1.0, ErrorCode::InvalidArgument, "dropout rate must lie in [0, 1)");
  }
  std::string kind() const override { return "dropout"; }
  Tensor forward(const Tensor& x, bool training, Rng& rng) override {
    scale_.assign(x.size(), 1.0);
    if (!training || rate_ == 0.0) return x;
    Tensor y = x;
    std::bernoulli_distribution keep(1.0 - rate_);
    const double s = 1.0 / (1.0 - rate_);
    for (std::size_t i = 0; i < y.size(); ++i) {
      scale_[i] = keep(rng) ? s : 0.0;
      y.data[i] *= scale_[i];
    }
    return y;
  }
  Tensor backward(const Tensor& g) override {
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= scale_[i];
    return dx;
  }

 private:
  double rate_;
  std::vector<double> scale_;
};

class Flatten final : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, bool, Rng&) override {
    shape_ = {x.n, x.c, x.h, x.w};
    Tensor y = x;
    y.c = static_cast<int>(x.per_sample());
    y.h = y.w = 1;
    return y;
  }
  Tensor backward(const Tensor& g) override {
    Tensor dx = g;
    dx.n = shape_[0];
    dx.c = shape_[1];
    dx.h = shape_[2];
    dx.w = shape_[3];
    return dx;
  }

 private:
  std::array<int, 4> shape_{};
};

class Dense final : public Layer {
 public:
  Dense(int in, int out)
      : in_(in), out_(out), weight_(make_param("weight", {out, in})), bias_(make_param("bias", {out})) {}
  std::string kind() const override { return "dense"; }

  Tensor forward(const Tensor& x, bool, Rng&) override {
    require(x.n > 0 && x.per_sample() == static_cast<std::size_t>(in_), ErrorCode::InvalidArgument,
            "dense: input feature count mismatch");
    x_ = x;
    Tensor y = Tensor::zeros(x.n, out_, 1, 1);
    const CMapMat xm(x.data.data(), x.n, in_);
    const CMapMat w(weight_.value.data(), out_, in_);
    MapMat ym(y.data.data(), x.n, out_);
    ym.noalias() = xm * w.transpose();
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias_.value.data(), out_);
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const CMapMat gm(g.data.data(), g.n, out_);
    const CMapMat xm(x_.data.data(), x_.n, in_);
    const CMapMat w(weight_.value.data(), out_, in_);
    MapMat(weight_.grad.data(), out_, in_).noalias() += gm.transpose() * xm;
    Eigen::Map<Eigen::RowVectorXd>(bias_.grad.data(), out_) += gm.colwise().sum();
    Tensor dx = Tensor::zeros(x_.n, x_.c, x_.h, x_.w);
    MapMat(dx.data.data(), x_.n, in_).noalias() = gm * w;
    return dx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

 private:
  int in_, out_;
  Param weight_, bias_;
  Tensor x_;
};

template <class E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, e] : table)
    if (s == name) return e;
  fail(ErrorCode::InvalidArgument, std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

Tensor Tensor::zeros(int n, int c, int h, int w) {
  require(n >= 0 && c >= 0 && h >= 0 && w >= 0, ErrorCode::InvalidArgument, "tensor dims must be >= 0");
  Tensor t;
  t.n = n;
  t.c = c;
  t.h = h;
  t.w = w;
  t.data.assign(static_cast<std::size_t>(n) * c * h * w, 0.0);
  return t;
}

std::unique_ptr<Layer> make_conv3x3(int in_channels, int out_channels, int stride) {
  require(in_channels > 0 && out_channels > 0 && (stride == 1 || stride == 2), ErrorCode::InvalidArgument,
          "conv3x3 needs positive channels and stride 1 or 2");
  return std::make_unique<Conv3x3>(in_channels, out_channels, stride);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<Relu>(); }
std::unique_ptr<Layer> make_max_pool2() { return std::make_unique<Pool2>(true); }
std::unique_ptr<Layer> make_avg_pool2() { return std::make_unique<Pool2>(false); }
std::unique_ptr<Layer> make_batch_norm(int channels, double momentum, double eps) {
  require(channels > 0, ErrorCode::InvalidArgument, "batchnorm needs channels > 0");
  return std::make_unique<BatchNorm>(channels, momentum, eps);
}
std::unique_ptr<Layer> make_dropout(double rate) { return std::make_unique<Dropout>(rate); }
std::unique_ptr<Layer> make_flatten() { return std::make_unique<Flatten>(); }
std::unique_ptr<Layer> make_dense(int in_features, int out_features) {
  require(in_features > 0 && out_features > 0, ErrorCode::InvalidArgument, "dense needs positive sizes");
  return std::make_unique<Dense>(in_features, out_features);
}

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::Max: return "max";
    case Pooling::Average: return "average";
    case Pooling::StridedLast: return "strided-last";
  }
  return "?";
}
std::string to_string(ConvRegularization r) {
  switch (r) {
    case ConvRegularization::None: return "none";
    case ConvRegularization::Dropout: return "dropout";
    case ConvRegularization::BatchNormBlock: return "batchnorm-block";
    case ConvRegularization::BatchNormLayer: return "batchnorm-layer";
  }
  return "?";
}
std::string to_string(FcRegularization r) {
  switch (r) {
    case FcRegularization::None: return "none";
    case FcRegularization::Dropout: return "dropout";
    case FcRegularization::BatchNorm: return "batchnorm";
  }
  return "?";
}
std::string to_string(Head h) { return h == Head::Indirect ? "indirect" : "direct"; }

Pooling pooling_from_string(const std::string& s) {
  return enum_from<Pooling>(s, {{"max", Pooling::Max}, {"average", Pooling::Average},
                                {"strided-last", Pooling::StridedLast}}, "pooling");
}
ConvRegularization conv_regularization_from_string(const std::string& s) {
  return enum_from<ConvRegularization>(s, {{"none", ConvRegularization::None},
                                           {"dropout", ConvRegularization::Dropout},
                                           {"batchnorm-block", ConvRegularization::BatchNormBlock},
                                           {"batchnorm-layer", ConvRegularization::BatchNormLayer}},
                                       "conv regularization");
}
FcRegularization fc_regularization_from_string(const std::string& s) {
  return enum_from<FcRegularization>(s, {{"none", FcRegularization::None}, {"dropout", FcRegularization::Dropout},
                                         {"batchnorm", FcRegularization::BatchNorm}},
                                     "fc regularization");
}
Head head_from_string(const std::string& s) {
  return enum_from<Head>(s, {{"indirect", Head::Indirect}, {"direct", Head::Direct}}, "head");
}

void ConvNetConfig::validate() const {
  require(input_channels > 0 && input_height >= 4 && input_width >= 4, ErrorCode::InvalidArgument,
          "network input must be at least 4x4 with one channel");
  require(blocks == 2 || blocks == 3, ErrorCode::InvalidArgument, "blocks must be 2 or 3");
  require(layers_per_block == 2 || layers_per_block == 3, ErrorCode::InvalidArgument,
          "layers_per_block must be 2 or 3");
  require(base_channels > 0, ErrorCode::InvalidArgument, "base_channels must be positive");
  require((fc_layers == 4 && fc_factor == 2) || (fc_layers == 3 && fc_factor == 4), ErrorCode::InvalidArgument,
          "fc layers/factor must be 4/2 or 3/4");
  require(fc_nodes > 0, ErrorCode::InvalidArgument, "fc_nodes must be positive");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCode::InvalidArgument, "dropout_rate must lie in [0, 1)");
  require(outputs > 0, ErrorCode::InvalidArgument, "outputs must be positive");
  int h = input_height, w = input_width;
  for (int b = 0; b < blocks; ++b) {
    h /= 2;
    w /= 2;
  }
  require(h >= 1 && w >= 1, ErrorCode::InvalidArgument, "input too small for the number of blocks");
}

nlohmann::json config_to_json(const ConvNetConfig& c) {
  return {{"input_channels", c.input_channels},
          {"input_height", c.input_height},
          {"input_width", c.input_width},
          {"blocks", c.blocks},
          {"layers_per_block", c.layers_per_block},
          {"base_channels", c.base_channels},
          {"pooling", to_string(c.pooling)},
          {"conv_regularization", to_string(c.conv_regularization)},
          {"fc_layers", c.fc_layers},
          {"fc_factor", c.fc_factor},
          {"fc_nodes", c.fc_nodes},
          {"fc_regularization", to_string(c.fc_regularization)},
          {"dropout_rate", c.dropout_rate},
          {"head", to_string(c.head)},
          {"outputs", c.outputs}};
}

ConvNetConfig config_from_json(const nlohmann::json& j) {
  ConvNetConfig c;
  try {
    c.input_channels = j.value("input_channels", c.input_channels);
    c.input_height = j.value("input_height", c.input_height);
    c.input_width = j.value("input_width", c.input_width);
    c.blocks = j.value("blocks", c.blocks);
    c.layers_per_block = j.value("layers_per_block", c.layers_per_block);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.pooling = pooling_from_string(j.value("pooling", to_string(c.pooling)));
    c.conv_regularization = conv_regularization_from_string(j.value("conv_regularization", to_string(c.conv_regularization)));
    c.fc_layers = j.value("fc_layers", c.fc_layers);
    c.fc_factor = j.value("fc_factor", c.fc_factor);
    c.fc_nodes = j.value("fc_nodes", c.fc_nodes);
    c.fc_regularization = fc_regularization_from_string(j.value("fc_regularization", to_string(c.fc_regularization)));
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.head = head_from_string(j.value("head", to_string(c.head)));
    c.outputs = j.value("outputs", c.head == Head::Direct ? 1 : 12);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::Format, std::string("malformed network config: ") + e.what());
  }
  c.validate();
  return c;
}

Network::Network(const ConvNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  int c = cfg.input_channels, h = cfg.input_height, w = cfg.input_width;
  for (int b = 0; b < cfg.blocks; ++b) {
    const int co = cfg.base_channels << b;
    for (int l = 0; l < cfg.layers_per_block; ++l) {
      const bool strided = cfg.pooling == Pooling::StridedLast && l == cfg.layers_per_block - 1;
      layers_.push_back(make_conv3x3(c, co, strided ? 2 : 1));
      if (cfg.conv_regularization == ConvRegularization::BatchNormLayer) layers_.push_back(make_batch_norm(co));
      layers_.push_back(make_relu());
      c = co;
      if (strided) {
        h = (h - 1) / 2 + 1;
        w = (w - 1) / 2 + 1;
      }
    }
    if (cfg.conv_regularization == ConvRegularization::BatchNormBlock) layers_.push_back(make_batch_norm(co));
    if (cfg.pooling == Pooling::Max || cfg.pooling == Pooling::Average) {
      layers_.push_back(cfg.pooling == Pooling::Max ? make_max_pool2() : make_avg_pool2());
      h /= 2;
      w /= 2;
    }
    if (cfg.conv_regularization == ConvRegularization::Dropout) layers_.push_back(make_dropout(cfg.dropout_rate));
  }
  layers_.push_back(make_flatten());
  int features = c * h * w;
  int width = cfg.fc_nodes;
  for (int k = 0; k < cfg.fc_layers - 1; ++k) {
    layers_.push_back(make_dense(features, width));
    if (cfg.fc_regularization == FcRegularization::BatchNorm) layers_.push_back(make_batch_norm(width));
    layers_.push_back(make_relu());
    if (cfg.fc_regularization == FcRegularization::Dropout) layers_.push_back(make_dropout(cfg.dropout_rate));
    features = width;
    width = std::max(1, width / cfg.fc_factor);
  }
  layers_.push_back(make_dense(features, cfg.outputs));

  // He fan-in initialization, biases zero.
  Rng rng(seed);
  for (auto& layer : layers_) {
    if (layer->kind().rfind("conv", 0) != 0 && layer->kind() != "dense") continue;
    Param* wp = layer->params()[0];
    int fan_in = 1;
    for (std::size_t d = 1; d < wp->shape.size(); ++d) fan_in *= wp->shape[d];
    const double sd = std::sqrt(2.0 / fan_in);
    for (double& v : wp->value) v = normal(rng, 0.0, sd);
  }
}

Network::Network(std::vector<std::unique_ptr<Layer>> layers) : layers_(std::move(layers)) {}

Tensor Network::forward(const Tensor& x, bool training, Rng& rng) {
  Tensor t = x;
  for (auto& l : layers_) t = l->forward(t, training, rng);
  return t;
}

Tensor Network::predict(const Tensor& x) {
  Rng unused(0);
  return forward(x, false, unused);
}

Tensor Network::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Network::zero_grad() {
  for (Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& l : layers_)
    for (Param* p : l->params()) out.push_back(p);
  return out;
}

std::vector<Param*> Network::buffers() {
  std::vector<Param*> out;
  for (auto& l : layers_)
    for (Param* p : l->buffers()) out.push_back(p);
  return out;
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (Param* p : params()) n += p->value.size();
  return n;
}

}  // namespace xpose::nn
