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

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "odsel/error.h"

namespace odsel {

using json = nlohmann::json;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Higher = more anomalous.
using ScoreVector = Eigen::VectorXd;

// 0 = normal, 1 = anomaly.
using Labels = std::vector<int>;

// Flat key -> value hyperparameter map. Values are parsed per detector.
using HyperParams = std::map<std::string, std::string>;

// n x d matrix of finite reals, n >= 1 and d >= 1. Rows are samples.
class DataMatrix {
 public:
  // Throws kNonFiniteData / kInvalidArgument.
  explicit DataMatrix(Matrix values);

  Eigen::Index n() const { return values_.rows(); }
  Eigen::Index d() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

  friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
    return a.values_ == b.values_;
  }

 private:
  Matrix values_;
};

struct LabeledDataset {
  DataMatrix data;
  std::optional<Labels> labels;
};

// Throws unless labels has length n and values in {0, 1}.
void validate_labels(const Labels& labels, Eigen::Index n);

enum class DetectorId { kKnn, kLof, kIforest, kAe, kVae, kDeepSvdd, kAe1Svm, kDevNet, kLunar };

inline constexpr std::array<DetectorId, 9> kAllDetectors = {
    DetectorId::kKnn,  DetectorId::kLof,      DetectorId::kIforest,
    DetectorId::kAe,   DetectorId::kVae,      DetectorId::kDeepSvdd,
    DetectorId::kAe1Svm, DetectorId::kDevNet, DetectorId::kLunar};

// Lowercase names: "knn", "lof", "iforest", "ae", "vae", "deepsvdd",
// "ae1svm", "devnet", "lunar".
std::string_view to_string(DetectorId id);
std::optional<DetectorId> parse_detector_id(std::string_view name);
// Throws kVocabulary listing the valid names.
DetectorId detector_id_or_throw(std::string_view name);

// True for the neural detectors, which always consume standardized inputs.
bool is_deep(DetectorId id);

// Per-column affine map fitted on training data.
struct Scaler {
  Vector mean;
  Vector scale;  // population std, forced to 1 for columns with std < 1e-12

  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& z) const;

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

struct Standardized {
  DataMatrix data;
  Scaler scaler;
};

Standardized standardize(const DataMatrix& data);
Scaler fit_scaler(const Matrix& x);

struct ContaminationFlags {
  double threshold;
  Labels flags;
};

// Flags exactly ceil(contamination * n) highest scores, ties broken by lower
// index; threshold is the smallest flagged score.
ContaminationFlags threshold_from_contamination(const ScoreVector& scores, double contamination);

// Number of flags used by threshold_from_contamination.
Eigen::Index contamination_count(Eigen::Index n, double contamination);

// Trained parameters of one detector. Implementations are immutable.
class DetectorState {
 public:
  virtual ~DetectorState() = default;
  // `prepared` is already standardized when the detector requires it.
  virtual ScoreVector score(const Matrix& prepared) const = 0;
  virtual json to_json() const = 0;
};

class FittedDetector {
 public:
  FittedDetector(DetectorId id, HyperParams hyperparams, std::shared_ptr<const DetectorState> state,
                 ScoreVector train_scores, double contamination, double threshold, Scaler scaler,
                 bool standardized, std::uint64_t seed, Eigen::Index input_dim);

  DetectorId id() const { return id_; }
  const HyperParams& hyperparams() const { return hyperparams_; }
  const DetectorState& state() const { return *state_; }
  const ScoreVector& train_scores() const { return train_scores_; }
  double contamination() const { return contamination_; }
  double threshold() const { return threshold_; }
  const Scaler& scaler() const { return scaler_; }
  bool standardized() const { return standardized_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index input_dim() const { return input_dim_; }

 private:
  DetectorId id_;
  HyperParams hyperparams_;
  std::shared_ptr<const DetectorState> state_;
  ScoreVector train_scores_;
  double contamination_;
  double threshold_;
  Scaler scaler_;
  bool standardized_;
  std::uint64_t seed_;
  Eigen::Index input_dim_;
};

inline constexpr double kDefaultContamination = 0.1;

// Trains `id` on `data`. `labels` is only consulted by DEVNET, which requires
// at least one positive. Throws on unknown hyperparameter keys.
FittedDetector fit(DetectorId id, const DataMatrix& data, double contamination,
                   const HyperParams& hyperparams, std::uint64_t seed,
                   const Labels* labels = nullptr);

ScoreVector decision_function(const FittedDetector& model, const DataMatrix& data);

// 1 exactly where score > threshold.
Labels predict_labels(const FittedDetector& model, const DataMatrix& data);

// Rebuilds a detector state from its to_json() form.
std::shared_ptr<const DetectorState> state_from_json(DetectorId id, const json& state);

}  // namespace odsel
