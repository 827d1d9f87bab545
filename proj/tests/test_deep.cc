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
#include <functional>
#include <numeric>

#include "doctest.h"
#include "objectives.h"
#include "odsel/core.h"
#include "odsel/detectors.h"
#include "odsel/eval.h"
#include "odsel/io.h"
#include "oracles.h"

using namespace odsel;
using nn::Activation;
using nn::Mlp;

namespace {

Matrix gaussian(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  return x;
}

void randomize_biases(Mlp& mlp, Rng& rng) {
  for (auto& layer : mlp.mutable_layers()) {
    if (layer.bias) {
      for (Eigen::Index i = 0; i < layer.bias->size(); ++i) (*layer.bias)(i) = rng.uniform(-0.3, 0.3);
    }
  }
}

// Gradient at the current parameters vs central differences. The objective
// is evaluated with a freshly seeded Rng each call so stochastic terms repeat.
double gradient_error(nn::Objective& objective) {
  auto params = objective.parameters();
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(objective.sample_count()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  Vector analytic = Vector::Zero(nn::total_size(params));
  Rng r0(99);
  objective.loss_and_gradient(rows, r0, analytic);
  auto loss = [&] {
    Vector scratch = Vector::Zero(nn::total_size(params));
    Rng r(99);
    return objective.loss_and_gradient(rows, r, scratch);
  };
  return oracle::max_relative_error(analytic, oracle::central_gradient(params, loss, 1e-5));
}

Matrix blob_train(std::uint64_t seed) {
  const auto syn = make_synthetic(SyntheticKind::kBlob, seed);
  return fit_scaler(syn.dataset.data.values()).apply(syn.dataset.data.values());
}

DeepTraining quick(int epochs) {
  DeepTraining t;
  t.epochs = epochs;
  return t;
}

}  // namespace

TEST_CASE("property: every deep objective passes a central-difference gradient check") {
  Rng rng(31);
  for (int trial = 0; trial < 4; ++trial) {
    CAPTURE(trial);
    const Eigen::Index d = 3 + trial;
    const Matrix x = gaussian(rng, 6, d);

    Mlp enc = Mlp::glorot(d, {5, 2}, {Activation::kTanh, Activation::kLinear}, true, rng);
    Mlp dec = Mlp::glorot(2, {5, d}, {Activation::kSigmoid, Activation::kLinear}, true, rng);
    randomize_biases(enc, rng);
    randomize_biases(dec, rng);
    CHECK(gradient_error(*detail::autoencoder_objective(enc, dec, x)) < 1e-4);

    Mlp venc = Mlp::glorot(d, {5, 4}, {Activation::kTanh, Activation::kLinear}, true, rng);
    Mlp vdec = Mlp::glorot(2, {5, d}, {Activation::kTanh, Activation::kLinear}, true, rng);
    randomize_biases(venc, rng);
    CHECK(gradient_error(*detail::vae_objective(venc, vdec, x, 0.7)) < 1e-4);

    Mlp emb = Mlp::glorot(d, {4, 3}, {Activation::kTanh, Activation::kLinear}, false, rng);
    const Vector center = svdd_center(emb, x);
    CHECK(gradient_error(*detail::svdd_objective(emb, center, x)) < 1e-4);

    Mlp aenc = Mlp::glorot(d, {4, 2}, {Activation::kTanh, Activation::kLinear}, true, rng);
    Mlp adec = Mlp::glorot(2, {4, d}, {Activation::kTanh, Activation::kLinear}, true, rng);
    randomize_biases(aenc, rng);
    const FourierMap map = make_fourier_map(2, 16, 0.5, rng);
    Vector w(16);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = 0.3 * rng.normal();
    double rho = 0.05;
    CHECK(gradient_error(*detail::ae1svm_objective(aenc, adec, map, w, rho, x, 0.3, 1.0)) < 1e-4);

    Mlp scorer = Mlp::glorot(d, {4, 1}, {Activation::kRelu, Activation::kLinear}, true, rng);
    randomize_biases(scorer, rng);
    const Labels labels = {0, 1, 0, 0, 1, 0};
    CHECK(gradient_error(*detail::deviation_objective(scorer, x, labels, 0.1, 1.2, 5.0)) < 1e-4);
  }
}

TEST_CASE("gaussian kl examples") {
  CHECK(gaussian_kl(Matrix::Zero(1, 3), Matrix::Zero(1, 3))(0) == 0.0);
  Matrix mu(1, 1);
  mu << 1.0;
  CHECK(gaussian_kl(mu, Matrix::Zero(1, 1))(0) == doctest::Approx(0.5));
  Matrix lv(1, 1);
  lv << std::log(2.0);
  CHECK(gaussian_kl(Matrix::Zero(1, 1), lv)(0) == doctest::Approx(0.5 * (2.0 - 1.0 - std::log(2.0))));
}

TEST_CASE("deviation loss examples") {
  CHECK(deviation_loss(-1.5, 0, 5.0) == 1.5);
  CHECK(deviation_loss(2.0, 1, 5.0) == 3.0);
  CHECK(deviation_loss(6.0, 1, 5.0) == 0.0);
}

TEST_CASE("deepsvdd rejects bias layers and empty networks") {
  Rng rng(1);
  CHECK_THROWS_AS(DeepSvddState(Mlp(), Vector::Zero(0)), Error);
  Mlp with_bias = Mlp::glorot(3, {2}, {Activation::kLinear}, true, rng);
  CHECK_THROWS_AS(DeepSvddState(with_bias, Vector::Ones(2)), Error);
  Mlp plain = Mlp::glorot(3, {2}, {Activation::kLinear}, false, rng);
  CHECK_THROWS_AS(DeepSvddState(plain, Vector::Ones(3)), Error);
}

TEST_CASE("deepsvdd center coordinates are pushed away from zero") {
  const Mlp zero({nn::DenseLayer{Matrix::Zero(2, 3), std::nullopt, Activation::kLinear}});
  const Vector c = svdd_center(zero, Matrix::Ones(4, 3));
  CHECK(c(0) == kSvddCenterFloor);
  CHECK(c(1) == kSvddCenterFloor);
  Matrix w(1, 1);
  w << -1.0;
  const Mlp neg({nn::DenseLayer{w, std::nullopt, Activation::kLinear}});
  CHECK(svdd_center(neg, Matrix::Constant(2, 1, 0.05))(0) == -kSvddCenterFloor);
}

TEST_CASE("deepsvdd keeps the center fixed and contracts the data") {
  const Matrix x = blob_train(2);
  DeepSvddParams p;
  p.training = quick(50);
  const auto fit = fit_deepsvdd(x, p, 7);
  CHECK(fit.state->center().cwiseAbs().minCoeff() >= kSvddCenterFloor);
  const double final_mean = fit.state->score(x).mean();
  CHECK(final_mean <= 0.5 * fit.initial_mean_score);
  const auto again = fit_deepsvdd(x, p, 7);
  CHECK(again.state->center() == fit.state->center());
}

TEST_CASE("ae1svm loss with zero weights") {
  const Matrix phi = Matrix::Ones(4, 3);
  CHECK(ae1svm_loss(0.25, Vector::Zero(3), 0.5, phi, 0.5, 2.0) == doctest::Approx(2.0 * 0.25 + 0.5 / 0.5 - 0.5));
  CHECK(ae1svm_loss(0.0, Vector::Zero(3), -1.0, phi, 0.5, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("ae1svm flags about nu of the training data and ranks outliers higher") {
  const auto syn = make_synthetic(SyntheticKind::kBlob, 3);
  const Matrix x = fit_scaler(syn.dataset.data.values()).apply(syn.dataset.data.values());
  Ae1SvmParams p;
  p.training = quick(60);
  p.nu = 0.1;
  const auto fit = fit_ae1svm(x, p, 11);
  const ScoreVector s = fit.state->score(x);
  const Eigen::Index outside = (s.array() > 0.0).count();
  CHECK(static_cast<double>(outside) <= 2.0 * p.nu * static_cast<double>(x.rows()));
  CHECK(auroc(s, syn.dataset.labels.value()) > 0.8);
  CHECK_THROWS_AS(fit_ae1svm(x, [] { Ae1SvmParams q; q.nu = 0.0; return q; }(), 0), Error);
}

TEST_CASE("devnet requires at least one labeled anomaly") {
  Rng rng(4);
  const Matrix x = gaussian(rng, 20, 3);
  try {
    fit_devnet(x, Labels(20, 0), DevNetParams{}, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLabelsRequired);
    CHECK(std::string(e.what()).find("labels required") != std::string::npos);
  }
}

TEST_CASE("devnet reference prior is close to a standard normal") {
  Rng rng(4);
  const Matrix x = gaussian(rng, 30, 2);
  Labels y(30, 0);
  y[3] = 1;
  DevNetParams p;
  p.training = quick(2);
  const auto fit = fit_devnet(x, y, p, 1);
  CHECK(std::abs(fit.state->prior_mean()) < 0.1);
  CHECK(std::abs(fit.state->prior_std() - 1.0) < 0.1);
}

TEST_CASE("lunar preconditions and distance features") {
  Rng rng(6);
  const Matrix x = gaussian(rng, 30, 2);
  LunarParams zero_ratio;
  zero_ratio.negative_ratio = 0.0;
  CHECK_THROWS_AS(fit_lunar(x, zero_ratio, 0), Error);
  LunarParams big_k;
  big_k.k = 30;
  big_k.k_explicit = true;
  CHECK_THROWS_AS(fit_lunar(x, big_k, 0), Error);

  const Matrix f = knn_distance_features(x, x, 5);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index j = 1; j < f.cols(); ++j) CHECK(f(i, j - 1) <= f(i, j));
  }
}

TEST_CASE("lunar scores lie in [0, 1] and peak at a far outlier") {
  Rng rng(8);
  Matrix x = gaussian(rng, 120, 2);
  x.row(119) << 12.0, 12.0;
  LunarParams p;
  p.training = quick(40);
  const auto fit = fit_lunar(x, p, 2);
  const ScoreVector s = fit.state->score(x);
  CHECK(s.minCoeff() >= 0.0);
  CHECK(s.maxCoeff() <= 1.0);
  Eigen::Index arg = 0;
  s.maxCoeff(&arg);
  CHECK(arg == 119);
}

TEST_CASE("vae training loss decreases") {
  const Matrix x = blob_train(5);
  VaeParams p;
  p.training = quick(30);
  const auto fit = fit_vae(x, p, 3);
  REQUIRE(fit.loss_trace.size() == 30);
  CHECK(fit.loss_trace.back() < fit.loss_trace.front());
  CHECK_THROWS_AS(fit_vae(x, [] { VaeParams q; q.beta = -1.0; return q; }(), 0), Error);
}

TEST_CASE("autoencoder learns data on a line better than points off it") {
  Rng rng(10);
  Matrix x(200, 3);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const double t = rng.uniform(-1.0, 1.0);
    x.row(i) << t, 2.0 * t, -t;
  }
  AeParams p;
  p.training = quick(200);
  p.training.hidden = {8};
  p.latent = 1;
  const auto fit = fit_ae(x, p, 1);
  Matrix off(2, 3);
  off << 1.0, -1.0, 1.0, -0.5, 0.5, 0.5;
  CHECK(fit.state->score(off).minCoeff() > fit.state->score(x).maxCoeff());
}

TEST_CASE("property: scoring commutes with a permutation of the query rows") {
  const auto syn = make_synthetic(SyntheticKind::kBlob, 1);
  const DataMatrix& data = syn.dataset.data;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(data.n()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(3);
  rng.shuffle(perm.begin(), perm.end());
  const DataMatrix permuted(take_rows(data.values(), perm));
  for (DetectorId id : kAllDetectors) {
    CAPTURE(to_string(id));
    const Labels* labels = id == DetectorId::kDevNet ? &*syn.dataset.labels : nullptr;
    const auto model = fit(id, data, kDefaultContamination, is_deep(id) ? HyperParams{{"epochs", "3"}} : HyperParams{}, 0, labels);
    const ScoreVector base = decision_function(model, data);
    const ScoreVector moved = decision_function(model, permuted);
    for (Eigen::Index i = 0; i < base.size(); ++i) CHECK(moved(i) == base(perm[i]));
  }
}
