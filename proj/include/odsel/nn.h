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

#pragma once

// Dense multilayer perceptrons with hand-derived reverse mode and Adam.
//
// Batches are row-major in the sense of samples-per-row: a batch is a
// (batch x features) matrix and layer l computes
//   z = x * W^T + 1 b^T,   y = act(z).

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "odsel/core.h"
#include "odsel/rng.h"

namespace odsel::nn {

enum class Activation { kRelu, kSigmoid, kTanh, kLinear };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Matrix weight;               // out x in
  std::optional<Vector> bias;  // out, absent for bias-free layers
  Activation activation = Activation::kLinear;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

class Mlp {
 public:
  Mlp() = default;
  // Validates that layer dimensions chain and parameters are finite.
  explicit Mlp(std::vector<DenseLayer> layers);

  // Glorot-uniform weights U(-sqrt(6/(fan_in+fan_out)), +...), zero biases.
  // `widths` are the output widths of each layer, in order.
  static Mlp glorot(Eigen::Index in_dim, const std::vector<Eigen::Index>& widths,
                    const std::vector<Activation>& activations, bool with_bias, Rng& rng);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  bool empty() const { return layers_.empty(); }
  Eigen::Index in_dim() const;
  Eigen::Index out_dim() const;
  Eigen::Index parameter_count() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<DenseLayer> layers_;
};

struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> activations;  // post-activation output of each layer
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

// Throws kDimensionMismatch when batch.cols() != in_dim().
ForwardResult forward(const Mlp& mlp, const Matrix& batch);
// Output only, no cache.
Matrix predict(const Mlp& mlp, const Matrix& batch);

struct MlpGradients {
  std::vector<Matrix> weight;  // same shapes as the layer weights
  std::vector<Vector> bias;    // empty vectors for bias-free layers
  Matrix input;                // d(loss)/d(batch)
};

// Backpropagates d(loss)/d(output) through the layers recorded in `cache`.
MlpGradients backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& output_gradient);

// Non-owning view of one contiguous parameter block.
struct ParamView {
  double* data;
  Eigen::Index size;
};
using ParamList = std::vector<ParamView>;

// Appends weights then bias of every layer, layer by layer.
void append_params(Mlp& mlp, ParamList& params);
// Writes gradients into `flat` at `offset` following append_params order;
// returns the offset just past the written block.
Eigen::Index scatter_gradients(const MlpGradients& grads, Vector& flat, Eigen::Index offset);
Eigen::Index total_size(const ParamList& params);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(Eigen::Index size, double lr);
};

// Increments state.step, then applies the bias-corrected Adam update.
void adam_step(const ParamList& params, const Vector& gradient, AdamState& state);

struct TrainConfig {
  int epochs = 50;
  Eigen::Index batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

enum class LossKind {
  kMseReconstruction,
  kVaeElbo,
  kSvddDistance,
  kAe1SvmJoint,
  kDeviation,
  kLunarRegression,
};

std::string_view to_string(LossKind kind);

// A differentiable loss bound to its networks and data.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual LossKind kind() const = 0;
  virtual ParamList parameters() = 0;
  virtual Eigen::Index sample_count() const = 0;

  // Row indices of every batch in one epoch. The default partitions
  // [0, sample_count) into consecutive batches after an optional seeded
  // shuffle; the last partial batch is kept.
  virtual std::vector<std::vector<Eigen::Index>> epoch_batches(Eigen::Index batch_size,
                                                               bool shuffle, Rng& rng) const;

  // Mean loss over `rows`; `gradient` is pre-sized to total_size(parameters())
  // and zeroed by the caller.
  virtual double loss_and_gradient(std::span<const Eigen::Index> rows, Rng& rng,
                                   Vector& gradient) = 0;
};

struct TrainResult {
  std::vector<double> loss_trace;  // sample-weighted mean batch loss per epoch
};

// Mutates the objective's parameters in place. Throws kInvalidArgument for
// epochs < 1 or batch_size < 1 and kDivergence on a non-finite loss.
TrainResult train_mlp(Objective& objective, const TrainConfig& config);

// Mean over rows of ||mlp(x) - target||^2 / out_dim. Used for reconstruction
// (targets = inputs) and for regression onto fixed targets.
class MseObjective final : public Objective {
 public:
  MseObjective(Mlp& mlp, const Matrix& inputs, const Matrix& targets,
               LossKind kind = LossKind::kMseReconstruction);

  LossKind kind() const override { return kind_; }
  ParamList parameters() override;
  Eigen::Index sample_count() const override { return inputs_.rows(); }
  double loss_and_gradient(std::span<const Eigen::Index> rows, Rng& rng, Vector& gradient) override;

 private:
  Mlp& mlp_;
  const Matrix& inputs_;
  const Matrix& targets_;
  LossKind kind_;
};

// Gathers `rows` of `x` into a dense batch.
Matrix gather_rows(const Matrix& x, std::span<const Eigen::Index> rows);

json mlp_to_json(const Mlp& mlp);
Mlp mlp_from_json(const json& j);

}  // namespace odsel::nn
