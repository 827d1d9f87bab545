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

#include <cmath>

#include "doctest.h"
#include "odsel/nn.h"
#include "oracles.h"

using namespace odsel;
using namespace odsel::nn;

namespace {

Mlp scalar_affine(double w, std::optional<double> b) {
  DenseLayer layer{Matrix::Constant(1, 1, w), std::nullopt, Activation::kLinear};
  if (b) layer.bias = Vector::Constant(1, *b);
  return Mlp({layer});
}

// Random architecture: 1-3 layers, widths 1-16, random activations.
Mlp random_mlp(Rng& rng, Eigen::Index in) {
  const int depth = 1 + static_cast<int>(rng.below(3));
  std::vector<Eigen::Index> widths;
  std::vector<Activation> acts;
  const Activation choices[] = {Activation::kRelu, Activation::kSigmoid, Activation::kTanh, Activation::kLinear};
  for (int l = 0; l < depth; ++l) {
    widths.push_back(1 + static_cast<Eigen::Index>(rng.below(16)));
    acts.push_back(choices[rng.below(4)]);
  }
  Mlp mlp = Mlp::glorot(in, widths, acts, rng.below(2) == 1, rng);
  for (auto& layer : mlp.mutable_layers()) {
    if (layer.bias) {
      for (Eigen::Index i = 0; i < layer.bias->size(); ++i) (*layer.bias)(i) = rng.uniform(-0.5, 0.5);
    }
  }
  return mlp;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("forward examples") {
  const Mlp affine = scalar_affine(2.0, 1.0);
  CHECK(predict(affine, Matrix::Constant(1, 1, 3.0))(0, 0) == 7.0);

  const Mlp relu({DenseLayer{Matrix::Identity(2, 2), std::nullopt, Activation::kRelu}});
  Matrix x(1, 2);
  x << -1, 2;
  const Matrix y = predict(relu, x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 2.0);

  const Mlp zero({DenseLayer{Matrix::Zero(3, 2), Vector::Zero(3), Activation::kLinear},
                  DenseLayer{Matrix::Zero(2, 3), Vector::Zero(2), Activation::kTanh}});
  Rng rng(1);
  CHECK(predict(zero, random_matrix(rng, 4, 2)).isZero());
  CHECK_THROWS_AS(forward(zero, Matrix::Zero(1, 3)), Error);
}

TEST_CASE("Mlp rejects layers that do not chain") {
  CHECK_THROWS_AS(Mlp({DenseLayer{Matrix::Zero(3, 2), std::nullopt, Activation::kLinear},
                       DenseLayer{Matrix::Zero(2, 4), std::nullopt, Activation::kLinear}}),
                  Error);
  Matrix bad = Matrix::Zero(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(Mlp({DenseLayer{bad, std::nullopt, Activation::kLinear}}), Error);
}

TEST_CASE("backward on a scalar affine layer") {
  // y = 2 * 3 + 1 = 7. For loss 1/2 y^2, dL/dW = y x = 21; for loss y^2 it
  // doubles to 42. Both are checked against central differences.
  Mlp mlp = scalar_affine(2.0, 1.0);
  const Matrix x = Matrix::Constant(1, 1, 3.0);
  auto grad_for = [&](double factor) {
    const auto fwd = forward(mlp, x);
    return backward(mlp, fwd.cache, factor * fwd.output).weight[0](0, 0);
  };
  ParamList params;
  append_params(mlp, params);
  auto half_sq = [&] { return 0.5 * std::pow(predict(mlp, x)(0, 0), 2); };
  auto sq = [&] { return std::pow(predict(mlp, x)(0, 0), 2); };
  const Vector fd_half = oracle::central_gradient(params, half_sq, 1e-5);
  const Vector fd_sq = oracle::central_gradient(params, sq, 1e-5);
  CHECK(grad_for(1.0) == doctest::Approx(fd_half(0)).epsilon(1e-8));
  CHECK(grad_for(2.0) == doctest::Approx(fd_sq(0)).epsilon(1e-8));
  CHECK(grad_for(1.0) == doctest::Approx(21.0));
  CHECK(grad_for(2.0) == doctest::Approx(42.0));
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  Rng rng(3);
  const Mlp mlp = random_mlp(rng, 4);
  const Matrix x = random_matrix(rng, 5, 4);
  const auto fwd = forward(mlp, x);
  const auto g = backward(mlp, fwd.cache, Matrix::Zero(fwd.output.rows(), fwd.output.cols()));
  for (const auto& w : g.weight) CHECK(w.isZero());
  for (const auto& b : g.bias) CHECK(b.isZero());
  CHECK(g.input.isZero());
}

TEST_CASE("property: analytic gradients match central differences on random networks") {
  Rng rng(2024);
  for (int config = 0; config < 20; ++config) {
    CAPTURE(config);
    const Eigen::Index in = 1 + static_cast<Eigen::Index>(rng.below(6));
    Mlp mlp = random_mlp(rng, in);
    const Matrix x = random_matrix(rng, 7, in);
    const Matrix target = random_matrix(rng, 7, mlp.out_dim());
    MseObjective objective(mlp, x, target);
    const auto params = objective.parameters();
    std::vector<Eigen::Index> rows = {0, 1, 2, 3, 4, 5, 6};
    Vector analytic = Vector::Zero(total_size(params));
    Rng unused(0);
    objective.loss_and_gradient(rows, unused, analytic);
    auto loss = [&] {
      Vector scratch = Vector::Zero(total_size(params));
      Rng r(0);
      return objective.loss_and_gradient(rows, r, scratch);
    };
    CHECK(oracle::max_relative_error(analytic, oracle::central_gradient(params, loss, 1e-5)) < 1e-4);
  }
}

TEST_CASE("input gradients match central differences") {
  Rng rng(8);
  const Mlp mlp = random_mlp(rng, 3);
  Matrix x = random_matrix(rng, 4, 3);
  const Matrix r = random_matrix(rng, 4, mlp.out_dim());
  const auto fwd = forward(mlp, x);
  const Matrix analytic = backward(mlp, fwd.cache, r).input;
  ParamList view{{x.data(), x.size()}};
  auto loss = [&] { return (predict(mlp, x).array() * r.array()).sum(); };
  const Vector fd = oracle::central_gradient(view, loss, 1e-5);
  CHECK(oracle::max_relative_error(Eigen::Map<const Vector>(analytic.data(), analytic.size()), fd) < 1e-4);
}

TEST_CASE("adam examples") {
  double p = 0.0;
  ParamList params{{&p, 1}};
  AdamState state = AdamState::for_size(1, 0.01);
  adam_step(params, Vector::Constant(1, 2.0), state);
  CHECK(state.step == 1);
  CHECK(p == doctest::Approx(-0.01 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));

  double q = 1.5;
  ParamList still{{&q, 1}};
  AdamState s2 = AdamState::for_size(1, 0.01);
  adam_step(still, Vector::Zero(1), s2);
  adam_step(still, Vector::Zero(1), s2);
  CHECK(q == 1.5);

  // Recurrence for constant g: m_t/(1-b1^t) = g, v_t/(1-b2^t) = g^2, so each
  // step moves by lr g / (|g| + eps).
  double r = 0.0;
  ParamList mono{{&r, 1}};
  AdamState s3 = AdamState::for_size(1, 0.1);
  adam_step(mono, Vector::Constant(1, -3.0), s3);
  const double first = r;
  adam_step(mono, Vector::Constant(1, -3.0), s3);
  CHECK(first > 0.0);
  CHECK(r > first);
  CHECK(r == doctest::Approx(2 * 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-9));
  CHECK_THROWS_AS(adam_step(mono, Vector::Zero(2), s3), Error);
}

TEST_CASE("glorot init is bounded and seed-determined") {
  Rng a(42), b(42);
  const Mlp m1 = Mlp::glorot(10, {6, 3}, {Activation::kRelu, Activation::kLinear}, true, a);
  const Mlp m2 = Mlp::glorot(10, {6, 3}, {Activation::kRelu, Activation::kLinear}, true, b);
  CHECK(m1 == m2);
  CHECK(m1.layers()[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 16.0));
  CHECK(m1.layers()[1].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 9.0));
  CHECK(m1.layers()[0].bias->isZero());
  CHECK(m1.parameter_count() == 10 * 6 + 6 + 6 * 3 + 3);
}

TEST_CASE("train_mlp fits a repeated sample and is deterministic") {
  Rng rng(1);
  Mlp mlp = Mlp::glorot(3, {3}, {Activation::kLinear}, true, rng);
  Matrix x(8, 3);
  x.rowwise() = Eigen::RowVector3d(0.5, -1.0, 2.0);
  MseObjective objective(mlp, x, x);
  TrainConfig config;
  config.epochs = 500;
  config.batch_size = 8;
  config.lr = 0.01;
  const auto result = train_mlp(objective, config);
  CHECK(result.loss_trace.size() == 500);
  CHECK(result.loss_trace.back() < 1e-3);

  auto run = [](std::uint64_t seed) {
    Rng r(7);
    Mlp net = Mlp::glorot(2, {4, 2}, {Activation::kTanh, Activation::kLinear}, true, r);
    Matrix data(20, 2);
    for (Eigen::Index i = 0; i < data.size(); ++i) data(i) = r.normal();
    MseObjective obj(net, data, data);
    TrainConfig c;
    c.epochs = 10;
    c.batch_size = 6;
    c.seed = seed;
    return train_mlp(obj, c).loss_trace;
  };
  CHECK(run(3) == run(3));
  CHECK(run(3) != run(4));

  TrainConfig zero;
  zero.epochs = 0;
  CHECK_THROWS_AS(train_mlp(objective, zero), Error);
  TrainConfig no_batch;
  no_batch.batch_size = 0;
  CHECK_THROWS_AS(train_mlp(objective, no_batch), Error);
}

TEST_CASE("property: full-batch linear regression loss does not increase") {
  Rng rng(12);
  const Matrix x = random_matrix(rng, 40, 3);
  const Matrix t = x * Eigen::Vector3d(1.0, -2.0, 0.5) + Vector::Constant(40, 0.3);
  Mlp mlp = Mlp::glorot(3, {1}, {Activation::kLinear}, true, rng);
  MseObjective objective(mlp, x, t);
  TrainConfig config;
  config.epochs = 200;
  config.batch_size = 1000;
  config.lr = 1e-3;
  const auto trace = train_mlp(objective, config).loss_trace;
  for (std::size_t e = 1; e < trace.size(); ++e) CHECK(trace[e] <= trace[e - 1] + 1e-12);
}

TEST_CASE("default batching keeps the last partial batch") {
  Rng rng(0);
  Mlp mlp = Mlp::glorot(1, {1}, {Activation::kLinear}, true, rng);
  const Matrix x = Matrix::Zero(10, 1);
  MseObjective objective(mlp, x, x);
  Rng r(1);
  const auto batches = objective.epoch_batches(4, false, r);
  REQUIRE(batches.size() == 3);
  CHECK(batches[2].size() == 2);
  CHECK(batches[0] == std::vector<Eigen::Index>{0, 1, 2, 3});
}

TEST_CASE("mlp json round trip is exact") {
  Rng rng(77);
  const Mlp mlp = random_mlp(rng, 5);
  CHECK(mlp_from_json(json::parse(mlp_to_json(mlp).dump())) == mlp);
}
