// Copyright 2026 The odsel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "odsel/nn.h"

#include <cmath>
#include <numeric>
#include <string>

namespace odsel::nn {

namespace {

Matrix activate(const Matrix& z, Activation act) {
  switch (act) {
    case Activation::kRelu: return z.cwiseMax(0.0);
    case Activation::kSigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kLinear: return z;
  }
  return z;
}

// d(act)/dz expressed through the activation output y.
Matrix activation_derivative(const Matrix& y, Activation act) {
  switch (act) {
    case Activation::kRelu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::kSigmoid: return (y.array() * (1.0 - y.array())).matrix();
    case Activation::kTanh: return (1.0 - y.array().square()).matrix();
    case Activation::kLinear: return Matrix::Ones(y.rows(), y.cols());
  }
  return Matrix::Ones(y.rows(), y.cols());
}

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  Matrix z = x * layer.weight.transpose();
  if (layer.bias) z.rowwise() += layer.bias->transpose();
  return z;
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kLinear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  fail(ErrorCode::kParse, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMseReconstruction: return "mse_reconstruction";
    case LossKind::kVaeElbo: return "vae_elbo";
    case LossKind::kSvddDistance: return "svdd_distance";
    case LossKind::kAe1SvmJoint: return "ae1svm_joint";
    case LossKind::kDeviation: return "deviation";
    case LossKind::kLunarRegression: return "lunar_regression";
  }
  return "unknown";
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim()) {
      fail(ErrorCode::kDimensionMismatch, "layer " + std::to_string(l) + " expects " +
                                              std::to_string(layer.in_dim()) + " inputs but layer " +
                                              std::to_string(l - 1) + " emits " +
                                              std::to_string(layers_[l - 1].out_dim()));
    }
    if (layer.bias && layer.bias->size() != layer.out_dim()) {
      fail(ErrorCode::kDimensionMismatch, "bias size mismatch in layer " + std::to_string(l));
    }
    if (!layer.weight.allFinite() || (layer.bias && !layer.bias->allFinite())) {
      fail(ErrorCode::kNonFiniteData, "non-finite parameter in layer " + std::to_string(l));
    }
  }
}

Mlp Mlp::glorot(Eigen::Index in_dim, const std::vector<Eigen::Index>& widths,
                const std::vector<Activation>& activations, bool with_bias, Rng& rng) {
  if (widths.size() != activations.size()) {
    fail(ErrorCode::kInvalidArgument, "one activation per layer is required");
  }
  std::vector<DenseLayer> layers;
  Eigen::Index fan_in = in_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const Eigen::Index fan_out = widths[l];
    if (fan_in < 1 || fan_out < 1) fail(ErrorCode::kInvalidArgument, "layer widths must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index i = 0; i < fan_out; ++i) {
      for (Eigen::Index j = 0; j < fan_in; ++j) layer.weight(i, j) = rng.uniform(-limit, limit);
    }
    if (with_bias) layer.bias = Vector::Zero(fan_out);
    layer.activation = activations[l];
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return Mlp(std::move(layers));
}

Eigen::Index Mlp::in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
Eigen::Index Mlp::out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index count = 0;
  for (const auto& layer : layers_) {
    count += layer.weight.size() + (layer.bias ? layer.bias->size() : 0);
  }
  return count;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
        x.weight.cols() != y.weight.cols() || x.weight != y.weight ||
        x.bias.has_value() != y.bias.has_value()) {
      return false;
    }
    if (x.bias && *x.bias != *y.bias) return false;
  }
  return true;
}

ForwardResult forward(const Mlp& mlp, const Matrix& batch) {
  if (mlp.empty()) fail(ErrorCode::kInvalidArgument, "forward through an empty network");
  if (batch.cols() != mlp.in_dim()) {
    fail(ErrorCode::kDimensionMismatch, "network expects " + std::to_string(mlp.in_dim()) +
                                            " inputs, got " + std::to_string(batch.cols()));
  }
  ForwardResult result;
  const auto& layers = mlp.layers();
  result.cache.inputs.reserve(layers.size());
  result.cache.activations.reserve(layers.size());
  Matrix x = batch;
  for (const auto& layer : layers) {
    Matrix y = activate(affine(layer, x), layer.activation);
    result.cache.inputs.push_back(std::move(x));
    x = y;
    result.cache.activations.push_back(std::move(y));
  }
  result.output = std::move(x);
  return result;
}

Matrix predict(const Mlp& mlp, const Matrix& batch) {
  if (mlp.empty()) fail(ErrorCode::kInvalidArgument, "forward through an empty network");
  if (batch.cols() != mlp.in_dim()) {
    fail(ErrorCode::kDimensionMismatch, "network expects " + std::to_string(mlp.in_dim()) +
                                            " inputs, got " + std::to_string(batch.cols()));
  }
  Matrix x = batch;
  for (const auto& layer : mlp.layers()) x = activate(affine(layer, x), layer.activation);
  return x;
}

MlpGradients backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& output_gradient) {
  const auto& layers = mlp.layers();
  if (cache.inputs.size() != layers.size() || cache.activations.size() != layers.size()) {
    fail(ErrorCode::kDimensionMismatch, "cache does not match network depth");
  }
  const Matrix& out = cache.activations.back();
  if (output_gradient.rows() != out.rows() || output_gradient.cols() != out.cols()) {
    fail(ErrorCode::kDimensionMismatch, "output gradient shape does not match forward output");
  }
  MlpGradients grads;
  grads.weight.resize(layers.size());
  grads.bias.resize(layers.size());
  Matrix upstream = output_gradient;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const DenseLayer& layer = layers[k];
    const Matrix dz =
        (upstream.array() * activation_derivative(cache.activations[k], layer.activation).array())
            .matrix();
    grads.weight[k] = dz.transpose() * cache.inputs[k];
    if (layer.bias) grads.bias[k] = dz.colwise().sum().transpose();
    upstream = dz * layer.weight;
  }
  grads.input = std::move(upstream);
  return grads;
}

void append_params(Mlp& mlp, ParamList& params) {
  for (auto& layer : mlp.mutable_layers()) {
    params.push_back({layer.weight.data(), layer.weight.size()});
    if (layer.bias) params.push_back({layer.bias->data(), layer.bias->size()});
  }
}

Eigen::Index scatter_gradients(const MlpGradients& grads, Vector& flat, Eigen::Index offset) {
  for (std::size_t k = 0; k < grads.weight.size(); ++k) {
    const Matrix& w = grads.weight[k];
    flat.segment(offset, w.size()) += Eigen::Map<const Vector>(w.data(), w.size());
    offset += w.size();
    const Vector& b = grads.bias[k];
    if (b.size() > 0) {
      flat.segment(offset, b.size()) += b;
      offset += b.size();
    }
  }
  return offset;
}

Eigen::Index total_size(const ParamList& params) {
  Eigen::Index n = 0;
  for (const auto& p : params) n += p.size;
  return n;
}

AdamState AdamState::for_size(Eigen::Index size, double lr) {
  AdamState s;
  s.first_moment = Vector::Zero(size);
  s.second_moment = Vector::Zero(size);
  s.lr = lr;
  return s;
}

void adam_step(const ParamList& params, const Vector& gradient, AdamState& state) {
  const Eigen::Index size = total_size(params);
  if (gradient.size() != size || state.first_moment.size() != size ||
      state.second_moment.size() != size) {
    fail(ErrorCode::kDimensionMismatch, "adam: gradient/state size does not match parameters");
  }
  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * gradient.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  Eigen::Index offset = 0;
  for (const auto& p : params) {
    Eigen::Map<Vector> values(p.data, p.size);
    const auto m_hat = state.first_moment.segment(offset, p.size).array() / c1;
    const auto v_hat = state.second_moment.segment(offset, p.size).array() / c2;
    values.array() -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    offset += p.size;
  }
}

std::vector<std::vector<Eigen::Index>> Objective::epoch_batches(Eigen::Index batch_size,
                                                                bool shuffle, Rng& rng) const {
  const Eigen::Index n = sample_count();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (shuffle) rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<Eigen::Index>> batches;
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return batches;
}

TrainResult train_mlp(Objective& objective, const TrainConfig& config) {
  if (config.epochs < 1) fail(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (config.batch_size < 1) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (!(config.lr > 0.0)) fail(ErrorCode::kInvalidArgument, "learning rate must be positive");

  const ParamList params = objective.parameters();
  const Eigen::Index size = total_size(params);
  AdamState adam = AdamState::for_size(size, config.lr);
  Rng rng(config.seed);
  Vector gradient(size);
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double weighted = 0.0;
    Eigen::Index seen = 0;
    for (const auto& rows : objective.epoch_batches(config.batch_size, config.shuffle, rng)) {
      gradient.setZero();
      const double loss = objective.loss_and_gradient(rows, rng, gradient);
      if (!std::isfinite(loss) || !gradient.allFinite()) {
        fail(ErrorCode::kDivergence, std::string("non-finite ") + std::string(to_string(objective.kind())) +
                                         " loss at epoch " + std::to_string(epoch));
      }
      if (config.clip_norm > 0.0) {
        const double norm = gradient.norm();
        if (norm > config.clip_norm) gradient *= config.clip_norm / norm;
      }
      adam_step(params, gradient, adam);
      weighted += loss * static_cast<double>(rows.size());
      seen += static_cast<Eigen::Index>(rows.size());
    }
    result.loss_trace.push_back(weighted / static_cast<double>(std::max<Eigen::Index>(seen, 1)));
  }
  return result;
}

Matrix gather_rows(const Matrix& x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

MseObjective::MseObjective(Mlp& mlp, const Matrix& inputs, const Matrix& targets, LossKind kind)
    : mlp_(mlp), inputs_(inputs), targets_(targets), kind_(kind) {
  if (inputs.rows() != targets.rows() || targets.cols() != mlp.out_dim() ||
      inputs.cols() != mlp.in_dim()) {
    fail(ErrorCode::kDimensionMismatch, "mse objective: inputs/targets do not match the network");
  }
}

ParamList MseObjective::parameters() {
  ParamList params;
  append_params(mlp_, params);
  return params;
}

double MseObjective::loss_and_gradient(std::span<const Eigen::Index> rows, Rng&, Vector& gradient) {
  const Matrix x = gather_rows(inputs_, rows);
  const Matrix t = gather_rows(targets_, rows);
  ForwardResult fwd = forward(mlp_, x);
  const Matrix diff = fwd.output - t;
  const double scale = 1.0 / static_cast<double>(diff.rows() * diff.cols());
  const double loss = diff.squaredNorm() * scale;
  scatter_gradients(backward(mlp_, fwd.cache, 2.0 * scale * diff), gradient, 0);
  return loss;
}

json mlp_to_json(const Mlp& mlp) {
  json layers = json::array();
  for (const auto& layer : mlp.layers()) {
    json l;
    l["out"] = layer.out_dim();
    l["in"] = layer.in_dim();
    l["activation"] = to_string(layer.activation);
    l["weight"] = std::vector<double>(layer.weight.data(), layer.weight.data() + layer.weight.size());
    if (layer.bias) {
      l["bias"] = std::vector<double>(layer.bias->data(), layer.bias->data() + layer.bias->size());
    } else {
      l["bias"] = nullptr;
    }
    layers.push_back(std::move(l));
  }
  return layers;
}

Mlp mlp_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorCode::kParse, "network must be an array of layers");
  std::vector<DenseLayer> layers;
  for (const auto& l : j) {
    DenseLayer layer;
    const auto out = l.at("out").get<Eigen::Index>();
    const auto in = l.at("in").get<Eigen::Index>();
    const auto w = l.at("weight").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != out * in) {
      fail(ErrorCode::kParse, "weight array has wrong length");
    }
    layer.weight = Eigen::Map<const Matrix>(w.data(), out, in);
    if (!l.at("bias").is_null()) {
      const auto b = l.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(b.size()) != out) fail(ErrorCode::kParse, "bias array has wrong length");
      layer.bias = Eigen::Map<const Vector>(b.data(), out);
    }
    layer.activation = parse_activation(l.at("activation").get<std::string>());
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

}  // namespace odsel::nn
