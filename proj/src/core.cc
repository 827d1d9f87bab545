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

#include "odsel/core.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace odsel {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNonFiniteData: return "non-finite-data";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kLabelsRequired: return "labels-required";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kVocabulary: return "vocabulary-violation";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kTransport: return "transport-error";
    case ErrorCode::kReplayMiss: return "replay-miss";
    case ErrorCode::kDivergence: return "divergence";
  }
  return "unknown";
}

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    fail(ErrorCode::kInvalidArgument, "data matrix must have at least one row and one column");
  }
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      if (!std::isfinite(values_(i, j))) {
        std::ostringstream msg;
        msg << "non-finite value at row " << i << ", column " << j;
        fail(ErrorCode::kNonFiniteData, msg.str());
      }
    }
  }
}

void validate_labels(const Labels& labels, Eigen::Index n) {
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    fail(ErrorCode::kDimensionMismatch, "label count " + std::to_string(labels.size()) +
                                            " does not match sample count " + std::to_string(n));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      fail(ErrorCode::kInvalidArgument, "label at row " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

namespace {
constexpr std::array<std::string_view, 9> kDetectorNames = {
    "knn", "lof", "iforest", "ae", "vae", "deepsvdd", "ae1svm", "devnet", "lunar"};
}  // namespace

std::string_view to_string(DetectorId id) { return kDetectorNames[static_cast<std::size_t>(id)]; }

std::optional<DetectorId> parse_detector_id(std::string_view name) {
  for (std::size_t i = 0; i < kDetectorNames.size(); ++i) {
    if (kDetectorNames[i] == name) return static_cast<DetectorId>(i);
  }
  return std::nullopt;
}

DetectorId detector_id_or_throw(std::string_view name) {
  if (auto id = parse_detector_id(name)) return *id;
  std::string valid;
  for (auto n : kDetectorNames) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  fail(ErrorCode::kVocabulary, "unknown detector id '" + std::string(name) + "' (valid: " + valid + ")");
}

bool is_deep(DetectorId id) {
  switch (id) {
    case DetectorId::kKnn:
    case DetectorId::kLof:
    case DetectorId::kIforest:
      return false;
    default:
      return true;
  }
}

Matrix Scaler::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) {
    fail(ErrorCode::kDimensionMismatch, "scaler expects " + std::to_string(mean.size()) +
                                            " columns, got " + std::to_string(x.cols()));
  }
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix Scaler::invert(const Matrix& z) const {
  return (z.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
}

Scaler fit_scaler(const Matrix& x) {
  const double n = static_cast<double>(x.rows());
  Scaler s;
  s.mean = x.colwise().sum().transpose() / n;
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale(j) = sd < 1e-12 ? 1.0 : sd;
  }
  return s;
}

Standardized standardize(const DataMatrix& data) {
  Scaler s = fit_scaler(data.values());
  return Standardized{DataMatrix(s.apply(data.values())), std::move(s)};
}

Eigen::Index contamination_count(Eigen::Index n, double contamination) {
  // The epsilon absorbs binary rounding in products like 0.07 * 100.
  const auto count = static_cast<Eigen::Index>(std::ceil(contamination * static_cast<double>(n) - 1e-9));
  return std::clamp<Eigen::Index>(count, 1, n);
}

ContaminationFlags threshold_from_contamination(const ScoreVector& scores, double contamination) {
  const Eigen::Index n = scores.size();
  if (n == 0) fail(ErrorCode::kInvalidArgument, "cannot threshold an empty score vector");
  if (!(contamination > 0.0 && contamination <= 0.5)) {
    fail(ErrorCode::kInvalidArgument, "contamination must lie in (0, 0.5]");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  const Eigen::Index count = contamination_count(n, contamination);
  ContaminationFlags out{scores(order[count - 1]), Labels(static_cast<std::size_t>(n), 0)};
  for (Eigen::Index i = 0; i < count; ++i) out.flags[order[i]] = 1;
  return out;
}

FittedDetector::FittedDetector(DetectorId id, HyperParams hyperparams,
                               std::shared_ptr<const DetectorState> state, ScoreVector train_scores,
                               double contamination, double threshold, Scaler scaler,
                               bool standardized, std::uint64_t seed, Eigen::Index input_dim)
    : id_(id),
      hyperparams_(std::move(hyperparams)),
      state_(std::move(state)),
      train_scores_(std::move(train_scores)),
      contamination_(contamination),
      threshold_(threshold),
      scaler_(std::move(scaler)),
      standardized_(standardized),
      seed_(seed),
      input_dim_(input_dim) {
  if (!state_) fail(ErrorCode::kInvalidArgument, "fitted detector without state");
}

ScoreVector decision_function(const FittedDetector& model, const DataMatrix& data) {
  if (data.d() != model.input_dim()) {
    fail(ErrorCode::kDimensionMismatch, "model was trained on " + std::to_string(model.input_dim()) +
                                            " features, got " + std::to_string(data.d()));
  }
  if (model.standardized()) return model.state().score(model.scaler().apply(data.values()));
  return model.state().score(data.values());
}

Labels predict_labels(const FittedDetector& model, const DataMatrix& data) {
  const ScoreVector scores = decision_function(model, data);
  Labels out(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) out[i] = scores(i) > model.threshold() ? 1 : 0;
  return out;
}

}  // namespace odsel
