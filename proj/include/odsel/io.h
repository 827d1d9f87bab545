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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "odsel/core.h"

namespace odsel {

// CSV with a header row. A column named "label" (values 0/1) is split out
// as labels; every other column must parse as a finite real.
LabeledDataset load_csv(const std::filesystem::path& path);
LabeledDataset parse_csv(std::string_view text, const std::string& source = "<memory>");
// Writes reals with 17 significant digits so load_csv reproduces them exactly.
void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path,
              const std::vector<std::string>& column_names = {});

inline constexpr int kModelSchemaVersion = 1;

json model_to_json(const FittedDetector& model);
// Throws kVersionMismatch for other schema versions, kParse for malformed
// or truncated documents.
FittedDetector model_from_json(const json& j);
void save_model(const FittedDetector& model, const std::filesystem::path& path);
FittedDetector load_model(const std::filesystem::path& path);

enum class SyntheticKind { kBlob, kHighdimSparse, kSkewed, kCorrelated, kMultimodal, kLabeledSemi };

inline constexpr std::array<SyntheticKind, 6> kAllSyntheticKinds = {
    SyntheticKind::kBlob,       SyntheticKind::kHighdimSparse, SyntheticKind::kSkewed,
    SyntheticKind::kCorrelated, SyntheticKind::kMultimodal,    SyntheticKind::kLabeledSemi};

std::string_view to_string(SyntheticKind kind);
// Throws kInvalidArgument listing the valid kinds.
SyntheticKind parse_synthetic_kind(std::string_view name);

struct SyntheticDataset {
  std::string name;
  LabeledDataset dataset;                    // labels are the full ground truth
  std::vector<Eigen::Index> anomaly_indices;  // ascending
  // Partial labels visible to a semi-supervised learner (labeled_semi only):
  // a subset of the anomalies marked 1, everything else 0.
  std::optional<Labels> supervision;
};

inline constexpr Eigen::Index kSyntheticRows = 500;
inline constexpr Eigen::Index kSyntheticAnomalies = 25;
inline constexpr Eigen::Index kSemiSupervisedLabels = 10;

// n = 500 with 25 planted anomalies; deterministic per (kind, seed).
SyntheticDataset make_synthetic(SyntheticKind kind, std::uint64_t seed);

}  // namespace odsel
