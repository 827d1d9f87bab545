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

// Ranking metrics and the benchmark runner.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "odsel/core.h"
#include "odsel/registry.h"
#include "odsel/selector.h"

namespace odsel {

// Mann-Whitney AUROC with midranks for tied scores. Throws kInvalidArgument
// unless both classes are present.
double auroc(const ScoreVector& scores, const Labels& labels);

// Mean precision at each positive's rank in descending-score order, ties
// broken by lower index first. Throws kInvalidArgument without positives.
double average_precision(const ScoreVector& scores, const Labels& labels);

// Midranks (1-based) of `values` in descending order; tied values share the
// average of the ranks they span.
std::vector<double> descending_midranks(const std::vector<double>& values);

struct RankTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  // ranks[dataset][method], 1 = best AUROC
  std::vector<std::vector<double>> ranks;
  std::vector<double> mean_rank;  // per method
};

// `auroc_by_dataset[dataset][method]`; every dataset must score every method
// listed in `methods`. Throws kInvalidArgument on a missing cell.
RankTable rank_table(const std::vector<std::string>& methods,
                     const std::vector<std::string>& datasets,
                     const std::map<std::string, std::map<std::string, double>>& auroc_by_dataset);

struct Split {
  std::vector<Eigen::Index> train;  // ascending
  std::vector<Eigen::Index> test;   // ascending
};

// Per-class shuffle; the first round(train_fraction * class size) rows of
// each class go to train, clamped so a class of two or more rows lands in
// both parts.
Split stratified_split(const Labels& labels, double train_fraction, std::uint64_t seed);

Matrix take_rows(const Matrix& x, const std::vector<Eigen::Index>& rows);
Labels take_labels(const Labels& labels, const std::vector<Eigen::Index>& rows);

struct BenchmarkDataset {
  std::string name;
  DataMatrix data;
  Labels labels;  // ground truth, used for the split and for scoring
  // Labels a semi-supervised learner (and the selector) may see; indexed
  // like `labels`. When absent, DEVNET is handed up to
  // `revealed_anomalies` training anomalies and the selector sees none.
  std::optional<Labels> supervision;
  std::optional<std::string> notes;  // free text for the notes-aware selector row
};

struct BenchmarkConfig {
  std::vector<DetectorId> pool{kAllDetectors.begin(), kAllDetectors.end()};
  std::vector<std::uint64_t> seeds = {0};
  double train_fraction = 0.7;
  double contamination = kDefaultContamination;
  Eigen::Index revealed_anomalies = 10;
  std::map<DetectorId, HyperParams> hyperparams;
  SelectorConfig selector;  // mode is forced to offline for the plain row
  // When set, adds the "selector+notes" row, run in LLM mode with notes.
  LlmClient* notes_client = nullptr;
  int threads = 1;
};

inline constexpr const char* kAverageRow = "average";
inline constexpr const char* kSelectorRow = "selector";
inline constexpr const char* kSelectorNotesRow = "selector+notes";

struct MetricCell {
  double auroc = 0.0;
  double average_precision = 0.0;
  double seconds = 0.0;
};

struct CaseAudit {
  std::string case_name;  // "<dataset>#<seed>"
  SelectionResult offline;
  std::optional<SelectionResult> with_notes;
};

struct BenchmarkReport {
  // metrics[case][method]; cases are "<dataset>#<seed>" in input order.
  std::vector<std::string> cases;
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, MetricCell>> metrics;
  RankTable ranks;             // pool, average and selector rows together
  RankTable standalone_ranks;  // pool members only
  std::vector<CaseAudit> audits;
};

// Fits and scores every pool member on a seeded stratified split of each
// dataset, adds the average-of-pool and selector rows, and ranks them.
// Throws kInvalidArgument with the dataset name when a case cannot be run.
BenchmarkReport benchmark(const std::vector<BenchmarkDataset>& datasets, const Registry& registry,
                          const BenchmarkConfig& config);

// Wall-clock seconds are left out unless `with_timing`, so reruns match
// byte for byte.
json report_to_json(const BenchmarkReport& report, bool with_timing = false);
// Aligned plain-text table: one row per method, mean rank, mean AUROC.
std::string report_text_table(const BenchmarkReport& report);
// One JSON object per line, one line per case.
std::string audits_to_jsonl(const BenchmarkReport& report);

}  // namespace odsel
