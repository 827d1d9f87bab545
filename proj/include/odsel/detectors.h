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

// Concrete detector states and their training entry points. Most callers go
// through odsel::fit / odsel::decision_function instead; these are exposed
// for tests and for callers that need detector internals.

#include <cstdint>
#include <memory>
#include <vector>

#include "odsel/core.h"
#include "odsel/nn.h"
#include "odsel/rng.h"

namespace odsel {

// ---------------------------------------------------------------------------
// Neighbor search (brute force, O(n_query * n_train * d)).

struct Neighbors {
  std::vector<Eigen::Index> index;  // ascending distance, ties by index
  std::vector<double> distance;
};

// k nearest training rows for every query row. A query that coincides
// exactly with a training row has one such zero-distance match removed, so
// scoring the training set itself excludes each point from its own
// neighborhood. Requires k <= train.rows() - 1.
std::vector<Neighbors> k_nearest(const Matrix& train, const Matrix& query, Eigen::Index k);

// ---------------------------------------------------------------------------
// Classical detectors.

struct KnnParams {
  Eigen::Index k = 5;
  bool standardize = false;
};

// Score = Euclidean distance to the k-th nearest training point.
class KnnState final : public DetectorState {
 public:
  KnnState(Matrix train, Eigen::Index k);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const KnnState> from_json(const json& j);

  const Matrix& train() const { return train_; }
  Eigen::Index k() const { return k_; }

 private:
  Matrix train_;
  Eigen::Index k_;
};

// LOF lrd divisors are floored at this value.
inline constexpr double kLofReachFloor = 1e-12;

struct LofParams {
  Eigen::Index k = 20;
  bool standardize = false;
};

class LofState final : public DetectorState {
 public:
  // Computes k-distances and lrds of the training points.
  LofState(Matrix train, Eigen::Index k);
  LofState(Matrix train, Eigen::Index k, Vector k_distance, Vector lrd);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const LofState> from_json(const json& j);

  const Vector& k_distance() const { return k_distance_; }
  const Vector& lrd() const { return lrd_; }

 private:
  Matrix train_;
  Eigen::Index k_;
  Vector k_distance_;
  Vector lrd_;
};

struct IforestParams {
  int n_trees = 100;
  Eigen::Index max_samples = 256;
  bool standardize = false;
};

struct IsolationNode {
  int feature = -1;  // -1 marks an external node
  double split = 0.0;
  int left = -1;
  int right = -1;
  Eigen::Index size = 0;  // training samples reaching this node
};

using IsolationTree = std::vector<IsolationNode>;  // root at index 0

// Average unsuccessful-search path length in a BST of n nodes.
double average_path_length(Eigen::Index n);

class IforestState final : public DetectorState {
 public:
  IforestState(std::vector<IsolationTree> trees, Eigen::Index subsample);
  // 2^(-E[h(x)] / c(psi)); all 0.5 when c(psi) = 0.
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const IforestState> from_json(const json& j);

  const std::vector<IsolationTree>& trees() const { return trees_; }
  Eigen::Index subsample() const { return subsample_; }
  double path_length(const IsolationTree& tree, const Eigen::Ref<const Vector>& x) const;

 private:
  std::vector<IsolationTree> trees_;
  Eigen::Index subsample_;
};

std::shared_ptr<const KnnState> fit_knn(const Matrix& x, const KnnParams& params);
std::shared_ptr<const LofState> fit_lof(const Matrix& x, const LofParams& params);
std::shared_ptr<const IforestState> fit_iforest(const Matrix& x, const IforestParams& params,
                                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Deep detectors. All consume standardized inputs.

struct DeepTraining {
  std::vector<Eigen::Index> hidden = {64, 32};
  int epochs = 50;
  Eigen::Index batch_size = 32;
  double lr = 1e-3;
};

// max(2, ceil(d / 4))
Eigen::Index default_latent_dim(Eigen::Index d);

struct AeParams {
  DeepTraining training;
  Eigen::Index latent = 0;  // 0 selects default_latent_dim
};

// Score = mean squared reconstruction error per row.
class AeState final : public DetectorState {
 public:
  AeState(nn::Mlp encoder, nn::Mlp decoder);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const AeState> from_json(const json& j);

  const nn::Mlp& encoder() const { return encoder_; }
  const nn::Mlp& decoder() const { return decoder_; }

 private:
  nn::Mlp encoder_;
  nn::Mlp decoder_;
};

struct AeFit {
  std::shared_ptr<const AeState> state;
  std::vector<double> loss_trace;
};

AeFit fit_ae(const Matrix& x, const AeParams& params, std::uint64_t seed);

struct VaeParams {
  DeepTraining training;
  Eigen::Index latent = 0;
  double beta = 1.0;
};

// Closed-form KL(N(mu, exp(logvar)) || N(0, I)) per row.
Vector gaussian_kl(const Matrix& mu, const Matrix& logvar);

// Score = reconstruction MSE decoded from the mean latent (no sampling).
class VaeState final : public DetectorState {
 public:
  VaeState(nn::Mlp encoder, nn::Mlp decoder, double beta);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const VaeState> from_json(const json& j);

  Eigen::Index latent_dim() const { return decoder_.in_dim(); }

 private:
  nn::Mlp encoder_;  // emits [mu | logvar]
  nn::Mlp decoder_;
  double beta_;
};

struct VaeFit {
  std::shared_ptr<const VaeState> state;
  std::vector<double> loss_trace;
};

VaeFit fit_vae(const Matrix& x, const VaeParams& params, std::uint64_t seed);

struct DeepSvddParams {
  DeepTraining training;
  Eigen::Index latent = 8;
};

// Coordinates of the center with magnitude below this are pushed out to it.
inline constexpr double kSvddCenterFloor = 0.1;

// Score = ||phi(x) - c||^2 with a bias-free embedding phi and frozen c.
class DeepSvddState final : public DetectorState {
 public:
  // Throws kInvalidArgument for a zero-layer network or any layer with bias.
  DeepSvddState(nn::Mlp embedding, Vector center);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const DeepSvddState> from_json(const json& j);

  const Vector& center() const { return center_; }
  const nn::Mlp& embedding() const { return embedding_; }

 private:
  nn::Mlp embedding_;
  Vector center_;
};

// Mean initial embedding with the center floor applied.
Vector svdd_center(const nn::Mlp& embedding, const Matrix& x);

struct DeepSvddFit {
  std::shared_ptr<const DeepSvddState> state;
  std::vector<double> loss_trace;
  double initial_mean_score = 0.0;
};

DeepSvddFit fit_deepsvdd(const Matrix& x, const DeepSvddParams& params, std::uint64_t seed);

struct Ae1SvmParams {
  DeepTraining training;
  Eigen::Index latent = 0;
  double nu = 0.1;
  double alpha = 1.0;
  Eigen::Index features = 256;  // random Fourier features over the latent
  double gamma = 0.0;           // RBF width; 0 means 1 / latent
};

// Fixed random Fourier map phi(z) = sqrt(2/D) cos(z omega^T + phase), whose
// inner products approximate exp(-gamma ||z - z'||^2).
struct FourierMap {
  Matrix omega;  // D x latent
  Vector phase;  // D

  Matrix apply(const Matrix& z) const;
  Eigen::Index features() const { return omega.rows(); }

  friend bool operator==(const FourierMap&, const FourierMap&) = default;
};

FourierMap make_fourier_map(Eigen::Index latent, Eigen::Index features, double gamma, Rng& rng);

// Joint loss on a batch of feature rows phi_i and reconstructions:
//   alpha * recon + 0.5 ||w||^2 + 1/(nu B) sum max(0, rho - w.phi_i) - rho
double ae1svm_loss(double recon_mse, const Vector& w, double rho, const Matrix& phi, double nu,
                   double alpha);

// Score = rho - w . phi(z(x)), positive outside the one-class boundary.
class Ae1SvmState final : public DetectorState {
 public:
  Ae1SvmState(nn::Mlp encoder, nn::Mlp decoder, FourierMap map, Vector w, double rho);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const Ae1SvmState> from_json(const json& j);

  const nn::Mlp& encoder() const { return encoder_; }
  const nn::Mlp& decoder() const { return decoder_; }
  const FourierMap& fourier_map() const { return map_; }
  const Vector& w() const { return w_; }
  double rho() const { return rho_; }

 private:
  nn::Mlp encoder_;
  nn::Mlp decoder_;
  FourierMap map_;
  Vector w_;
  double rho_;
};

struct Ae1SvmFit {
  std::shared_ptr<const Ae1SvmState> state;
  std::vector<double> loss_trace;
};

Ae1SvmFit fit_ae1svm(const Matrix& x, const Ae1SvmParams& params, std::uint64_t seed);

struct DevNetParams {
  DeepTraining training;
  double margin = 5.0;
  int prior_samples = 5000;
};

// (1 - y) |dev| + y max(0, margin - dev)
double deviation_loss(double dev, int label, double margin);

// Score = phi(x), the raw scalar output.
class DevNetState final : public DetectorState {
 public:
  DevNetState(nn::Mlp scorer, double prior_mean, double prior_std);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const DevNetState> from_json(const json& j);

  double prior_mean() const { return prior_mean_; }
  double prior_std() const { return prior_std_; }

 private:
  nn::Mlp scorer_;
  double prior_mean_;
  double prior_std_;
};

struct DevNetFit {
  std::shared_ptr<const DevNetState> state;
  std::vector<double> loss_trace;
};

// Throws kLabelsRequired unless labels contain at least one anomaly.
DevNetFit fit_devnet(const Matrix& x, const Labels& labels, const DevNetParams& params,
                     std::uint64_t seed);

struct LunarParams {
  DeepTraining training;
  Eigen::Index k = 10;
  bool k_explicit = false;  // explicit k >= n is an error, the default clamps
  double negative_ratio = 1.0;
  double epsilon = 0.1;     // perturbation scale, fraction of per-feature std
};

// Sorted distances to the k nearest training rows, one row per query.
Matrix knn_distance_features(const Matrix& train, const Matrix& query, Eigen::Index k);

// Score = sigmoid scorer over the k-nearest-distance vector, in [0, 1].
class LunarState final : public DetectorState {
 public:
  LunarState(Matrix train, Eigen::Index k, nn::Mlp scorer);
  ScoreVector score(const Matrix& prepared) const override;
  json to_json() const override;
  static std::shared_ptr<const LunarState> from_json(const json& j);

  Eigen::Index k() const { return k_; }

 private:
  Matrix train_;
  Eigen::Index k_;
  nn::Mlp scorer_;
};

struct LunarFit {
  std::shared_ptr<const LunarState> state;
  std::vector<double> loss_trace;
};

LunarFit fit_lunar(const Matrix& x, const LunarParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Hyperparameter parsing. Each throws kInvalidArgument on unknown keys or
// malformed values.

KnnParams parse_knn_params(const HyperParams& hp);
LofParams parse_lof_params(const HyperParams& hp);
IforestParams parse_iforest_params(const HyperParams& hp);
AeParams parse_ae_params(const HyperParams& hp);
VaeParams parse_vae_params(const HyperParams& hp);
DeepSvddParams parse_deepsvdd_params(const HyperParams& hp);
Ae1SvmParams parse_ae1svm_params(const HyperParams& hp);
DevNetParams parse_devnet_params(const HyperParams& hp);
LunarParams parse_lunar_params(const HyperParams& hp);

// Recognized hyperparameter keys for a detector, for usage messages.
std::vector<std::string> hyperparameter_keys(DetectorId id);

}  // namespace odsel
