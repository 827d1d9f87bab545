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

#include <optional>
#include <string>

#include "odsel/core.h"

namespace odsel {

// Statistical attributes of a dataset that feed tag mapping. All moments are
// population moments; per-feature statistics skip nothing, constant features
// contribute skewness 0 and excess kurtosis 0.
struct DatasetProfile {
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  std::optional<double> anomaly_ratio;  // fraction of positive labels, if labels were given
  double skew_mean = 0.0;     // mean over features of |skewness|
  double skew_max = 0.0;      // max over features of |skewness|
  double kurt_mean = 0.0;     // mean excess kurtosis
  double kurt_max = 0.0;
  double noise_level = 0.0;   // variance share outside the top ceil(sqrt(d)) principal components
  double sparsity = 0.0;      // fraction of exact zeros
  double corr_mean = 0.0;     // mean |Pearson r| over feature pairs
  double scale_spread = 0.0;  // log10(max std / min nonzero std)
  double bimodality = 0.0;    // between-cluster variance share of 2-means

  bool labeled_anomalies() const { return anomaly_ratio.has_value() && *anomaly_ratio > 0.0; }

  friend bool operator==(const DatasetProfile&, const DatasetProfile&) = default;
};

DatasetProfile profile(const DataMatrix& data, const Labels* labels = nullptr);

// One line, fixed field order, used verbatim in prompts. anomaly_ratio is
// omitted when unknown.
std::string profile_summary_text(const DatasetProfile& p);

json profile_to_json(const DatasetProfile& p);

// Population skewness and excess kurtosis of one column.
double population_skewness(const Eigen::Ref<const Vector>& x);
double population_excess_kurtosis(const Eigen::Ref<const Vector>& x);

}  // namespace odsel
