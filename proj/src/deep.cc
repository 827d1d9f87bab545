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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>

#include "json_util.h"
#include "objectives.h"
#include "odsel/detectors.h"

namespace odsel {

using nn::Activation;
using nn::ForwardResult;
using nn::Mlp;

namespace {

// Hidden relu layers followed by a single output layer.
Mlp make_network(Eigen::Index in_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index out_dim,
                 Activation output, bool with_bias, Rng& rng) {
  std::vector<Eigen::Index> widths = hidden;
  widths.push_back(out_dim);
  std::vector<Activation> acts(hidden.size(), Activation::kRelu);
  acts.push_back(output);
  return Mlp::glorot(in_dim, widths, acts, with_bias, rng);
}

std::vector<Eigen::Index> reversed(std::vector<Eigen::Index> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

nn::TrainConfig train_config(const DeepTraining& t, std::uint64_t seed) {
  nn::TrainConfig c;
  c.epochs = t.epochs;
  c.batch_size = t.batch_size;
  c.lr = t.lr;
  c.seed = seed;
  return c;
}

Vector row_mse(const Matrix& reconstruction, const Matrix& x) {
  return (reconstruction - x).rowwise().squaredNorm() / static_cast<double>(x.cols());
}

void require_rows(const Matrix& x, Eigen::Index min_rows, const char* who) {
  if (x.rows() < min_rows) {
    fail(ErrorCode::kInvalidArgument, std::string(who) + " needs at least " +
                                          std::to_string(min_rows) + " samples");
  }
}

// ---------------------------------------------------------------------------

class AutoencoderObjective final : public nn::Objective {
 public:
  AutoencoderObjective(Mlp& encoder, Mlp& decoder, const Matrix& x)
      : encoder_(encoder), decoder_(decoder), x_(x) {}

  nn::LossKind kind() const override { return nn::LossKind::kMseReconstruction; }
  Eigen::Index sample_count() const override { return x_.rows(); }

  nn::ParamList parameters() override {
    nn::ParamList p;
    nn::append_params(encoder_, p);
    nn::append_params(decoder_, p);
    return p;
  }

  double loss_and_gradient(std::span<const Eigen::Index> rows, Rng&, Vector& gradient) override {
    const Matrix xb = nn::gather_rows(x_, rows);
    ForwardResult enc = nn::forward(encoder_, xb);
    ForwardResult dec = nn::forward(decoder_, enc.output);
    const Matrix diff = dec.output - xb;
    const double scale = 1.0 / static_cast<double>(diff.size());
    const auto gdec = nn::backward(decoder_, dec.cache, 2.0 * scale * diff);
    const auto genc = nn::backward(encoder_, enc.cache, gdec.input);
    const Eigen::Index offset = nn::scatter_gradients(genc, gradient, 0);
    nn::scatter_gradients(gdec, gradient, offset);
    return diff.squaredNorm() * scale;
  }

 private:
  Mlp& encoder_;
  Mlp& decoder_;
  const Matrix& x_;
};

class VaeObjective final : public nn::Objective {
 public:
  VaeObjective(Mlp& encoder, Mlp& decoder, const Matrix& x, double beta)
      : encoder_(encoder), decoder_(decoder), x_(x), beta_(beta) {}

  nn::LossKind kind() const override { return nn::LossKind::kVaeElbo; }
  Eigen::Index sample_count() const override { return x_.rows(); }

  nn::ParamList parameters() override {
    nn::ParamList p;
    nn::append_params(encoder_, p);
    nn::append_params(decoder_, p);
    return p;
  }

  double loss_and_gradient(std::span<const Eigen::Index> rows, Rng& rng, Vector& gradient) override {
    const Matrix xb = nn::gather_rows(x_, rows);
    const Eigen::Index b = xb.rows();
    const Eigen::Index latent = decoder_.in_dim();
    ForwardResult enc = nn::forward(encoder_, xb);
    const Matrix mu = enc.output.leftCols(latent);
    const Matrix logvar = enc.output.rightCols(latent);
    Matrix eps(b, latent);
    for (Eigen::Index i = 0; i < b; ++i) {
      for (Eigen::Index j = 0; j < latent; ++j) eps(i, j) = rng.normal();
    }
    const Matrix sigma = (0.5 * logvar.array()).exp().matrix();
    const Matrix z = mu + sigma.cwiseProduct(eps);
    ForwardResult dec = nn::forward(decoder_, z);
    const Matrix diff = dec.output - xb;

    const double inv_b = 1.0 / static_cast<double>(b);
    const double recon = diff.squaredNorm() / static_cast<double>(diff.size());
    const double kl = gaussian_kl(mu, logvar).sum() * inv_b;

    const auto gdec = nn::backward(decoder_, dec.cache, (2.0 / static_cast<double>(diff.size())) * diff);
    const Matrix& dz = gdec.input;
    Matrix denc(b, 2 * latent);
    denc.leftCols(latent) = dz + beta_ * inv_b * mu;
    denc.rightCols(latent) =
        (dz.array() * eps.array() * 0.5 * sigma.array() +
         beta_ * inv_b * 0.5 * (logvar.array().exp() - 1.0))
            .matrix();
    const auto genc = nn::backward(encoder_, enc.cache, denc);
    const Eigen::Index offset = nn::scatter_gradients(genc, gradient, 0);
    nn::scatter_gradients(gdec, gradient, offset);
    return recon + beta_ * kl;
  }

 private:
  Mlp& encoder_;
  Mlp& decoder_;
  const Matrix& x_;
  double beta_;
};

class SvddObjective final : public nn::Objective {
 public:
  SvddObjective(Mlp& embedding, const Vector& center, const Matrix& x)
      : embedding_(embedding), center_(center), x_(x) {}

  nn::LossKind kind() const override { return nn::LossKind::kSvddDistance; }
  Eigen::Index sample_count() const override { return x_.rows(); }

  nn::ParamList parameters() override {
    nn::ParamList p;
    nn::append_params(embedding_, p);
    return p;
  }

  double loss_and_gradient(std::span<const Eigen::Index> rows, Rng&, Vector& gradient) override {
    const Matrix xb = nn::gather_rows(x_, rows);
    ForwardResult fwd = nn::forward(embedding_, xb);
    const Matrix diff = fwd.output.rowwise() - center_.transpose();
    const double inv_b = 1.0 / static_cast<double>(xb.rows());
    nn::scatter_gradients(nn::backward(embedding_, fwd.cache, 2.0 * inv_b * diff), gradient, 0);
    return diff.squaredNorm() * inv_b;
  }

 private:
  Mlp& embedding_;
  const Vector& center_;
  const Matrix& x_;
};

class Ae1SvmObjective final : public nn::Objective {
 public:
  Ae1SvmObjective(Mlp& encoder, Mlp& decoder, const FourierMap& map, Vector& w, double& rho, const Matrix& x,
                  double nu, double alpha)
      : encoder_(encoder), decoder_(decoder), map_(map), w_(w), rho_(rho), x_(x), nu_(nu), alpha_(alpha) {}

  nn::LossKind kind() const override { return nn::LossKind::kAe1SvmJoint; }
  Eigen::Index sample_count() const override { return x_.rows(); }

  nn::ParamList parameters() override {
    nn::ParamList p;
    nn::append_params(encoder_, p);
    nn::append_params(decoder_, p);
    p.push_back({w_.data(), w_.size()});
    p.push_back({&rho_, 1});
    return p;
  }

  double loss_and_gradient(std::span<const Eigen::Index> rows, Rng&, Vector& gradient) override {
    const Matrix xb = nn::gather_rows(x_, rows);
    const double b = static_cast<double>(xb.rows());
    ForwardResult enc = nn::forward(encoder_, xb);
    ForwardResult dec = nn::forward(decoder_, enc.output);
    const Matrix& z = enc.output;
    const Matrix diff = dec.output - xb;
    const double recon = diff.squaredNorm() / static_cast<double>(diff.size());

    const auto gdec =
        nn::backward(decoder_, dec.cache, (alpha_ * 2.0 / static_cast<double>(diff.size())) * diff);
    const Matrix arg = (z * map_.omega.transpose()).rowwise() + map_.phase.transpose();
    const double amp = std::sqrt(2.0 / static_cast<double>(map_.features()));
    const Matrix phi = amp * arg.array().cos();
    Matrix dz = gdec.input;
    const Vector margin = rho_ - (phi * w_).array();
    const double hinge_scale = 1.0 / (nu_ * b);
    Vector dw = w_;
    double active = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (margin(i) > 0.0) {
        active += 1.0;
        // d(-w.phi)/dz = amp (w o sin(arg)) omega
        const Vector s = amp * (w_.array() * arg.row(i).transpose().array().sin()).matrix();
        dz.row(i) += hinge_scale * (s.transpose() * map_.omega);
        dw -= hinge_scale * phi.row(i).transpose();
      }
    }
    const auto genc = nn::backward(encoder_, enc.cache, dz);
    Eigen::Index offset = nn::scatter_gradients(genc, gradient, 0);
    offset = nn::scatter_gradients(gdec, gradient, offset);
    gradient.segment(offset, w_.size()) += dw;
    gradient(offset + w_.size()) += active * hinge_scale - 1.0;
    return ae1svm_loss(recon, w_, rho_, phi, nu_, alpha_);
  }

 private:
  Mlp& encoder_;
  Mlp& decoder_;
  const FourierMap& map_;
  Vector& w_;
  double& rho_;
  const Matrix& x_;
  double nu_;
  double alpha_;
};

class DeviationObjective final : public nn::Objective {
 public:
  DeviationObjective(Mlp& scorer, const Matrix& x, const Labels& labels, double prior_mean,
                     double prior_std, double margin)
      : scorer_(scorer), x_(x), labels_(labels), mean_(prior_mean), std_(prior_std), margin_(margin) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      (labels[i] == 1 ? anomalies_ : normals_).push_back(static_cast<Eigen::Index>(i));
    }
  }

  nn::LossKind kind() const override { return nn::LossKind::kDeviation; }
  Eigen::Index sample_count() const override { return x_.rows(); }

  nn::ParamList parameters() override {
    nn::ParamList p;
    nn::append_params(scorer_, p);
    return p;
  }

  // ceil(n / batch) batches per epoch, each half normal and half anomaly,
  // both drawn with replacement.
  std::vector<std::vector<Eigen::Index>> epoch_batches(Eigen::Index batch_size, bool,
                                                       Rng& rng) const override {
    const Eigen::Index n = x_.rows();
    const Eigen::Index count = (n + batch_size - 1) / batch_size;
    const Eigen::Index normal_count = normals_.empty() ? 0 : std::max<Eigen::Index>(1, batch_size / 2);
    const Eigen::Index anomaly_count = std::max<Eigen::Index>(1, batch_size - normal_count);
    std::vector<std::vector<Eigen::Index>> batches(static_cast<std::size_t>(count));
    for (auto& batch : batches) {
      batch.reserve(static_cast<std::size_t>(normal_count + anomaly_count));
      for (Eigen::Index i = 0; i < normal_count; ++i) batch.push_back(normals_[rng.below(normals_.size())]);
      for (Eigen::Index i = 0; i < anomaly_count; ++i) batch.push_back(anomalies_[rng.below(anomalies_.size())]);
    }
    return batches;
  }

  double loss_and_gradient(std::span<const Eigen::Index> rows, Rng&, Vector& gradient) override {
    const Matrix xb = nn::gather_rows(x_, rows);
    ForwardResult fwd = nn::forward(scorer_, xb);
    const double inv_b = 1.0 / static_cast<double>(xb.rows());
    Matrix dout(xb.rows(), 1);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < xb.rows(); ++i) {
      const int y = labels_[rows[i]];
      const double dev = (fwd.output(i, 0) - mean_) / std_;
      loss += deviation_loss(dev, y, margin_);
      double ddev = 0.0;
      if (y == 0) {
        ddev = dev > 0.0 ? 1.0 : (dev < 0.0 ? -1.0 : 0.0);
      } else if (dev < margin_) {
        ddev = -1.0;
      }
      dout(i, 0) = ddev * inv_b / std_;
    }
    nn::scatter_gradients(nn::backward(scorer_, fwd.cache, dout), gradient, 0);
    return loss * inv_b;
  }

 private:
  Mlp& scorer_;
  const Matrix& x_;
  const Labels& labels_;
  std::vector<Eigen::Index> normals_;
  std::vector<Eigen::Index> anomalies_;
  double mean_;
  double std_;
  double margin_;
};

}  // namespace

Eigen::Index default_latent_dim(Eigen::Index d) { return std::max<Eigen::Index>(2, (d + 3) / 4); }

// ---------------------------------------------------------------------------
// AE

AeState::AeState(Mlp encoder, Mlp decoder) : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  if (encoder_.empty() || decoder_.empty() || encoder_.out_dim() != decoder_.in_dim() ||
      decoder_.out_dim() != encoder_.in_dim()) {
    fail(ErrorCode::kInvalidArgument, "autoencoder: encoder/decoder shapes do not chain");
  }
}

ScoreVector AeState::score(const Matrix& prepared) const {
  return row_mse(nn::predict(decoder_, nn::predict(encoder_, prepared)), prepared);
}

json AeState::to_json() const {
  return {{"encoder", nn::mlp_to_json(encoder_)}, {"decoder", nn::mlp_to_json(decoder_)}};
}

std::shared_ptr<const AeState> AeState::from_json(const json& j) {
  return std::make_shared<AeState>(nn::mlp_from_json(j.at("encoder")), nn::mlp_from_json(j.at("decoder")));
}

AeFit fit_ae(const Matrix& x, const AeParams& params, std::uint64_t seed) {
  require_rows(x, 1, "ae");
  const Eigen::Index d = x.cols();
  const Eigen::Index latent = params.latent > 0 ? params.latent : default_latent_dim(d);
  Rng rng(seed);
  Mlp encoder = make_network(d, params.training.hidden, latent, Activation::kLinear, true, rng);
  Mlp decoder = make_network(latent, reversed(params.training.hidden), d, Activation::kLinear, true, rng);
  AutoencoderObjective objective(encoder, decoder, x);
  auto result = nn::train_mlp(objective, train_config(params.training, rng.next_u64()));
  return {std::make_shared<AeState>(std::move(encoder), std::move(decoder)), std::move(result.loss_trace)};
}

// ---------------------------------------------------------------------------
// VAE

Vector gaussian_kl(const Matrix& mu, const Matrix& logvar) {
  return (-0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp())).rowwise().sum();
}

VaeState::VaeState(Mlp encoder, Mlp decoder, double beta)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), beta_(beta) {
  if (encoder_.empty() || decoder_.empty() || encoder_.out_dim() != 2 * decoder_.in_dim() ||
      decoder_.out_dim() != encoder_.in_dim()) {
    fail(ErrorCode::kInvalidArgument, "vae: encoder must emit 2 x latent values and decoder must reconstruct the input");
  }
}

ScoreVector VaeState::score(const Matrix& prepared) const {
  const Matrix mu = nn::predict(encoder_, prepared).leftCols(latent_dim());
  return row_mse(nn::predict(decoder_, mu), prepared);
}

json VaeState::to_json() const {
  return {{"encoder", nn::mlp_to_json(encoder_)}, {"decoder", nn::mlp_to_json(decoder_)}, {"beta", beta_}};
}

std::shared_ptr<const VaeState> VaeState::from_json(const json& j) {
  return std::make_shared<VaeState>(nn::mlp_from_json(j.at("encoder")), nn::mlp_from_json(j.at("decoder")),
                                    j.at("beta").get<double>());
}

VaeFit fit_vae(const Matrix& x, const VaeParams& params, std::uint64_t seed) {
  require_rows(x, 1, "vae");
  if (!(params.beta >= 0.0)) fail(ErrorCode::kInvalidArgument, "vae: beta must be >= 0");
  const Eigen::Index d = x.cols();
  const Eigen::Index latent = params.latent > 0 ? params.latent : default_latent_dim(d);
  Rng rng(seed);
  Mlp encoder = make_network(d, params.training.hidden, 2 * latent, Activation::kLinear, true, rng);
  Mlp decoder = make_network(latent, reversed(params.training.hidden), d, Activation::kLinear, true, rng);
  VaeObjective objective(encoder, decoder, x, params.beta);
  auto result = nn::train_mlp(objective, train_config(params.training, rng.next_u64()));
  return {std::make_shared<VaeState>(std::move(encoder), std::move(decoder), params.beta),
          std::move(result.loss_trace)};
}

// ---------------------------------------------------------------------------
// DeepSVDD

DeepSvddState::DeepSvddState(Mlp embedding, Vector center)
    : embedding_(std::move(embedding)), center_(std::move(center)) {
  if (embedding_.empty()) fail(ErrorCode::kInvalidArgument, "deepsvdd: embedding needs at least one layer");
  for (const auto& layer : embedding_.layers()) {
    if (layer.bias) fail(ErrorCode::kInvalidArgument, "deepsvdd: embedding layers must be bias-free");
  }
  if (center_.size() != embedding_.out_dim()) {
    fail(ErrorCode::kDimensionMismatch, "deepsvdd: center does not match embedding width");
  }
}

ScoreVector DeepSvddState::score(const Matrix& prepared) const {
  return (nn::predict(embedding_, prepared).rowwise() - center_.transpose()).rowwise().squaredNorm();
}

json DeepSvddState::to_json() const {
  return {{"embedding", nn::mlp_to_json(embedding_)}, {"center", vector_to_json(center_)}};
}

std::shared_ptr<const DeepSvddState> DeepSvddState::from_json(const json& j) {
  return std::make_shared<DeepSvddState>(nn::mlp_from_json(j.at("embedding")), vector_from_json(j.at("center")));
}

Vector svdd_center(const Mlp& embedding, const Matrix& x) {
  Vector c = nn::predict(embedding, x).colwise().mean().transpose();
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (std::abs(c(i)) < kSvddCenterFloor) c(i) = c(i) < 0.0 ? -kSvddCenterFloor : kSvddCenterFloor;
  }
  return c;
}

DeepSvddFit fit_deepsvdd(const Matrix& x, const DeepSvddParams& params, std::uint64_t seed) {
  require_rows(x, 1, "deepsvdd");
  if (params.latent < 1) fail(ErrorCode::kInvalidArgument, "deepsvdd: latent must be >= 1");
  Rng rng(seed);
  Mlp embedding = make_network(x.cols(), params.training.hidden, params.latent, Activation::kLinear, false, rng);
  const Vector center = svdd_center(embedding, x);
  DeepSvddFit out;
  {
    const DeepSvddState initial(embedding, center);
    out.initial_mean_score = initial.score(x).mean();
  }
  SvddObjective objective(embedding, center, x);
  out.loss_trace = nn::train_mlp(objective, train_config(params.training, rng.next_u64())).loss_trace;
  out.state = std::make_shared<DeepSvddState>(std::move(embedding), center);
  return out;
}

// ---------------------------------------------------------------------------
// AE1SVM

Matrix FourierMap::apply(const Matrix& z) const {
  const Matrix arg = (z * omega.transpose()).rowwise() + phase.transpose();
  return std::sqrt(2.0 / static_cast<double>(features())) * arg.array().cos();
}

FourierMap make_fourier_map(Eigen::Index latent, Eigen::Index features, double gamma, Rng& rng) {
  if (latent < 1 || features < 1) fail(ErrorCode::kInvalidArgument, "fourier map needs positive dimensions");
  if (!(gamma > 0.0)) fail(ErrorCode::kInvalidArgument, "fourier map gamma must be positive");
  FourierMap map{Matrix(features, latent), Vector(features)};
  const double sd = std::sqrt(2.0 * gamma);
  for (Eigen::Index r = 0; r < features; ++r) {
    for (Eigen::Index c = 0; c < latent; ++c) map.omega(r, c) = sd * rng.normal();
  }
  for (Eigen::Index r = 0; r < features; ++r) map.phase(r) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return map;
}

double ae1svm_loss(double recon_mse, const Vector& w, double rho, const Matrix& phi, double nu, double alpha) {
  const Vector margin = rho - (phi * w).array();
  const double hinge = margin.cwiseMax(0.0).sum() / (nu * static_cast<double>(phi.rows()));
  return alpha * recon_mse + 0.5 * w.squaredNorm() + hinge - rho;
}

Ae1SvmState::Ae1SvmState(Mlp encoder, Mlp decoder, FourierMap map, Vector w, double rho)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), map_(std::move(map)), w_(std::move(w)), rho_(rho) {
  if (encoder_.empty() || decoder_.empty() || encoder_.out_dim() != decoder_.in_dim() ||
      map_.omega.cols() != encoder_.out_dim() || map_.phase.size() != map_.features() ||
      w_.size() != map_.features()) {
    fail(ErrorCode::kInvalidArgument, "ae1svm: encoder, decoder, feature map and w shapes do not chain");
  }
}

ScoreVector Ae1SvmState::score(const Matrix& prepared) const {
  return (rho_ - (map_.apply(nn::predict(encoder_, prepared)) * w_).array()).matrix();
}

json Ae1SvmState::to_json() const {
  return {{"encoder", nn::mlp_to_json(encoder_)},
          {"decoder", nn::mlp_to_json(decoder_)},
          {"omega", matrix_to_json(map_.omega)},
          {"phase", vector_to_json(map_.phase)},
          {"w", vector_to_json(w_)},
          {"rho", rho_}};
}

std::shared_ptr<const Ae1SvmState> Ae1SvmState::from_json(const json& j) {
  return std::make_shared<Ae1SvmState>(nn::mlp_from_json(j.at("encoder")), nn::mlp_from_json(j.at("decoder")),
                                       FourierMap{matrix_from_json(j.at("omega")), vector_from_json(j.at("phase"))},
                                       vector_from_json(j.at("w")), j.at("rho").get<double>());
}

Ae1SvmFit fit_ae1svm(const Matrix& x, const Ae1SvmParams& params, std::uint64_t seed) {
  require_rows(x, 1, "ae1svm");
  if (!(params.nu > 0.0 && params.nu <= 1.0)) fail(ErrorCode::kInvalidArgument, "ae1svm: nu must lie in (0, 1]");
  if (params.features < 1) fail(ErrorCode::kInvalidArgument, "ae1svm: features must be positive");
  if (params.gamma < 0.0) fail(ErrorCode::kInvalidArgument, "ae1svm: gamma must be >= 0");
  const Eigen::Index d = x.cols();
  const Eigen::Index latent = params.latent > 0 ? params.latent : default_latent_dim(d);
  const double gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(latent);
  Rng rng(seed);
  Mlp encoder = make_network(d, params.training.hidden, latent, Activation::kLinear, true, rng);
  Mlp decoder = make_network(latent, reversed(params.training.hidden), d, Activation::kLinear, true, rng);
  FourierMap map = make_fourier_map(latent, params.features, gamma, rng);
  Vector w = Vector::Zero(params.features);
  double rho = 0.0;
  Ae1SvmObjective objective(encoder, decoder, map, w, rho, x, params.nu, params.alpha);
  auto result = nn::train_mlp(objective, train_config(params.training, rng.next_u64()));
  return {std::make_shared<Ae1SvmState>(std::move(encoder), std::move(decoder), std::move(map), std::move(w), rho),
          std::move(result.loss_trace)};
}

// ---------------------------------------------------------------------------
// DevNet

double deviation_loss(double dev, int label, double margin) {
  return label == 1 ? std::max(0.0, margin - dev) : std::abs(dev);
}

DevNetState::DevNetState(Mlp scorer, double prior_mean, double prior_std)
    : scorer_(std::move(scorer)), prior_mean_(prior_mean), prior_std_(prior_std) {
  if (scorer_.empty() || scorer_.out_dim() != 1) fail(ErrorCode::kInvalidArgument, "devnet: scorer must emit one value");
  if (!(prior_std_ > 0.0)) fail(ErrorCode::kInvalidArgument, "devnet: reference std must be positive");
}

ScoreVector DevNetState::score(const Matrix& prepared) const { return nn::predict(scorer_, prepared).col(0); }

json DevNetState::to_json() const {
  return {{"scorer", nn::mlp_to_json(scorer_)}, {"prior_mean", prior_mean_}, {"prior_std", prior_std_}};
}

std::shared_ptr<const DevNetState> DevNetState::from_json(const json& j) {
  return std::make_shared<DevNetState>(nn::mlp_from_json(j.at("scorer")), j.at("prior_mean").get<double>(),
                                       j.at("prior_std").get<double>());
}

DevNetFit fit_devnet(const Matrix& x, const Labels& labels, const DevNetParams& params, std::uint64_t seed) {
  validate_labels(labels, x.rows());
  if (std::none_of(labels.begin(), labels.end(), [](int y) { return y == 1; })) {
    fail(ErrorCode::kLabelsRequired, "devnet: labels required (at least one labeled anomaly)");
  }
  if (params.prior_samples < 2) fail(ErrorCode::kInvalidArgument, "devnet: prior_samples must be >= 2");
  Rng rng(seed);
  Mlp scorer = make_network(x.cols(), params.training.hidden, 1, Activation::kLinear, true, rng);

  Rng prior_rng(rng.next_u64());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < params.prior_samples; ++i) {
    const double r = prior_rng.normal();
    sum += r;
    sum_sq += r * r;
  }
  const double n = static_cast<double>(params.prior_samples);
  const double mean = sum / n;
  const double std = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0));

  DeviationObjective objective(scorer, x, labels, mean, std, params.margin);
  auto result = nn::train_mlp(objective, train_config(params.training, rng.next_u64()));
  return {std::make_shared<DevNetState>(std::move(scorer), mean, std), std::move(result.loss_trace)};
}

// ---------------------------------------------------------------------------
// LUNAR

Matrix knn_distance_features(const Matrix& train, const Matrix& query, Eigen::Index k) {
  const auto nbs = k_nearest(train, query, k);
  Matrix f(query.rows(), k);
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) f(i, j) = nbs[i].distance[j];
  }
  return f;
}

LunarState::LunarState(Matrix train, Eigen::Index k, Mlp scorer)
    : train_(std::move(train)), k_(k), scorer_(std::move(scorer)) {
  if (k_ < 1 || k_ > train_.rows() - 1) fail(ErrorCode::kInvalidArgument, "lunar: k must satisfy 1 <= k <= n-1");
  if (scorer_.empty() || scorer_.in_dim() != k_ || scorer_.out_dim() != 1) {
    fail(ErrorCode::kInvalidArgument, "lunar: scorer must map k distances to one value");
  }
}

ScoreVector LunarState::score(const Matrix& prepared) const {
  return nn::predict(scorer_, knn_distance_features(train_, prepared, k_)).col(0);
}

json LunarState::to_json() const {
  return {{"k", k_}, {"train", matrix_to_json(train_)}, {"scorer", nn::mlp_to_json(scorer_)}};
}

std::shared_ptr<const LunarState> LunarState::from_json(const json& j) {
  return std::make_shared<LunarState>(matrix_from_json(j.at("train")), j.at("k").get<Eigen::Index>(),
                                      nn::mlp_from_json(j.at("scorer")));
}

LunarFit fit_lunar(const Matrix& x, const LunarParams& params, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) fail(ErrorCode::kInvalidArgument, "lunar needs at least 2 samples");
  if (params.k_explicit && params.k >= n) {
    fail(ErrorCode::kInvalidArgument, "lunar: k=" + std::to_string(params.k) + " must be < n=" + std::to_string(n));
  }
  if (!(params.negative_ratio > 0.0)) fail(ErrorCode::kInvalidArgument, "lunar: negative_ratio must be > 0");
  if (!(params.epsilon >= 0.0)) fail(ErrorCode::kInvalidArgument, "lunar: epsilon must be >= 0");
  const Eigen::Index k = std::min(params.k, n - 1);
  if (k < 1) fail(ErrorCode::kInvalidArgument, "lunar: k must be >= 1");

  Rng rng(seed);
  const Eigen::Index negatives =
      std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::llround(params.negative_ratio * static_cast<double>(n))));
  const Eigen::Index uniform_count = negatives / 2;
  const Vector lo = x.colwise().minCoeff().transpose();
  const Vector hi = x.colwise().maxCoeff().transpose();
  const Vector mean = x.colwise().mean().transpose();
  const Vector sd = ((x.rowwise() - mean.transpose()).colwise().squaredNorm() / static_cast<double>(n))
                        .cwiseSqrt()
                        .transpose();

  Matrix negative(negatives, d);
  for (Eigen::Index i = 0; i < uniform_count; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) negative(i, j) = rng.uniform(lo(j), hi(j));
  }
  for (Eigen::Index i = uniform_count; i < negatives; ++i) {
    const auto src = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    for (Eigen::Index j = 0; j < d; ++j) negative(i, j) = x(src, j) + rng.normal() * params.epsilon * sd(j);
  }

  Matrix features(n + negatives, k);
  features.topRows(n) = knn_distance_features(x, x, k);
  features.bottomRows(negatives) = knn_distance_features(x, negative, k);
  Matrix targets(n + negatives, 1);
  targets.topRows(n).setZero();
  targets.bottomRows(negatives).setOnes();

  Mlp scorer = make_network(k, params.training.hidden, 1, Activation::kSigmoid, true, rng);
  nn::MseObjective objective(scorer, features, targets, nn::LossKind::kLunarRegression);
  auto result = nn::train_mlp(objective, train_config(params.training, rng.next_u64()));
  return {std::make_shared<LunarState>(x, k, std::move(scorer)), std::move(result.loss_trace)};
}

namespace detail {

std::unique_ptr<nn::Objective> autoencoder_objective(Mlp& encoder, Mlp& decoder, const Matrix& x) {
  return std::make_unique<AutoencoderObjective>(encoder, decoder, x);
}

std::unique_ptr<nn::Objective> vae_objective(Mlp& encoder, Mlp& decoder, const Matrix& x, double beta) {
  return std::make_unique<VaeObjective>(encoder, decoder, x, beta);
}

std::unique_ptr<nn::Objective> svdd_objective(Mlp& embedding, const Vector& center, const Matrix& x) {
  return std::make_unique<SvddObjective>(embedding, center, x);
}

std::unique_ptr<nn::Objective> ae1svm_objective(Mlp& encoder, Mlp& decoder, const FourierMap& map, Vector& w,
                                                double& rho, const Matrix& x, double nu, double alpha) {
  return std::make_unique<Ae1SvmObjective>(encoder, decoder, map, w, rho, x, nu, alpha);
}

std::unique_ptr<nn::Objective> deviation_objective(Mlp& scorer, const Matrix& x, const Labels& labels,
                                                   double prior_mean, double prior_std, double margin) {
  return std::make_unique<DeviationObjective>(scorer, x, labels, prior_mean, prior_std, margin);
}

}  // namespace detail

}  // namespace odsel
