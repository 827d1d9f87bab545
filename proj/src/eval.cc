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

#include "odsel/eval.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "odsel/rng.h"

namespace odsel {

namespace {

void check_scored(const ScoreVector& scores, const Labels& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    fail(ErrorCode::kDimensionMismatch, "scores and labels differ in length");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) fail(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  }
}

}  // namespace

std::vector<double> descending_midranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

double auroc(const ScoreVector& scores, const Labels& labels) {
  check_scored(scores, labels);
  const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto negatives = static_cast<double>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) fail(ErrorCode::kInvalidArgument, "AUROC needs both classes");
  // Descending midranks r map to ascending ranks n + 1 - r.
  const std::vector<double> values(scores.data(), scores.data() + scores.size());
  const auto ranks = descending_midranks(values);
  const double n = static_cast<double>(labels.size());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum += n + 1.0 - ranks[i];
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double average_precision(const ScoreVector& scores, const Labels& labels) {
  check_scored(scores, labels);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      hits += 1.0;
      sum += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) fail(ErrorCode::kInvalidArgument, "average precision needs a positive label");
  return sum / hits;
}

RankTable rank_table(const std::vector<std::string>& methods, const std::vector<std::string>& datasets,
                     const std::map<std::string, std::map<std::string, double>>& auroc_by_dataset) {
  if (methods.empty()) fail(ErrorCode::kInvalidArgument, "rank table needs at least one method");
  RankTable table{methods, datasets, {}, std::vector<double>(methods.size(), 0.0)};
  for (const auto& dataset : datasets) {
    auto row = auroc_by_dataset.find(dataset);
    if (row == auroc_by_dataset.end()) fail(ErrorCode::kInvalidArgument, "no results for dataset " + dataset);
    std::vector<double> values;
    for (const auto& method : methods) {
      auto cell = row->second.find(method);
      if (cell == row->second.end()) {
        fail(ErrorCode::kInvalidArgument, "missing result for " + method + " on " + dataset);
      }
      values.push_back(cell->second);
    }
    table.ranks.push_back(descending_midranks(values));
  }
  if (!datasets.empty()) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      double sum = 0.0;
      for (const auto& r : table.ranks) sum += r[m];
      table.mean_rank[m] = sum / static_cast<double>(datasets.size());
    }
  }
  return table;
}

Split stratified_split(const Labels& labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "train fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  Split split;
  for (int cls : {0, 1}) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(static_cast<Eigen::Index>(i));
    }
    rng.shuffle(members.begin(), members.end());
    auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    if (members.size() >= 2) take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Matrix take_rows(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Labels take_labels(const Labels& labels, const std::vector<Eigen::Index>& rows) {
  Labels out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

namespace {

struct Case {
  const BenchmarkDataset* dataset;
  std::uint64_t seed;
  std::string name;
  DataMatrix train;
  DataMatrix test;
  Labels test_labels;
  std::optional<Labels> selector_labels;  // visible supervision on the train rows
  Labels devnet_labels;
};

Case prepare_case(const BenchmarkDataset& ds, std::uint64_t seed, const BenchmarkConfig& config) {
  if (ds.labels.size() != static_cast<std::size_t>(ds.data.n())) {
    fail(ErrorCode::kInvalidArgument, "dataset " + ds.name + ": label count differs from row count");
  }
  const Split split = stratified_split(ds.labels, config.train_fraction, derive_seed(seed, ds.name, "split"));
  Case c{&ds,
         seed,
         ds.name + "#" + std::to_string(seed),
         DataMatrix(take_rows(ds.data.values(), split.train)),
         DataMatrix(take_rows(ds.data.values(), split.test)),
         take_labels(ds.labels, split.test),
         std::nullopt,
         {}};
  if (ds.supervision) {
    c.selector_labels = take_labels(*ds.supervision, split.train);
    c.devnet_labels = *c.selector_labels;
  } else {
    const Labels truth = take_labels(ds.labels, split.train);
    std::vector<std::size_t> anomalies;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == 1) anomalies.push_back(i);
    }
    Rng rng(derive_seed(seed, ds.name, "reveal"));
    rng.shuffle(anomalies.begin(), anomalies.end());
    c.devnet_labels.assign(truth.size(), 0);
    const auto reveal = std::min<std::size_t>(anomalies.size(), static_cast<std::size_t>(config.revealed_anomalies));
    for (std::size_t i = 0; i < reveal; ++i) c.devnet_labels[anomalies[i]] = 1;
  }
  return c;
}

std::string format_fixed(double v, int precision) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

json rank_table_to_json(const RankTable& t) {
  json j = json::object();
  j["methods"] = t.methods;
  j["datasets"] = t.datasets;
  j["ranks"] = t.ranks;
  j["mean_rank"] = t.mean_rank;
  return j;
}

}  // namespace

BenchmarkReport benchmark(const std::vector<BenchmarkDataset>& datasets, const Registry& registry,
                          const BenchmarkConfig& config) {
  if (config.pool.empty()) fail(ErrorCode::kInvalidArgument, "benchmark pool is empty");
  if (datasets.empty()) fail(ErrorCode::kInvalidArgument, "benchmark needs at least one dataset");
  if (config.seeds.empty()) fail(ErrorCode::kInvalidArgument, "benchmark needs at least one seed");

  std::vector<Case> cases;
  for (const auto& ds : datasets) {
    for (auto seed : config.seeds) {
      try {
        cases.push_back(prepare_case(ds, seed, config));
      } catch (const Error& e) {
        fail(e.code(), "dataset " + ds.name + ": " + e.what());
      }
    }
  }

  const std::size_t pool_size = config.pool.size();
  std::vector<MetricCell> cells(cases.size() * pool_size);
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < cells.size(); job = next++) {
      const Case& c = cases[job / pool_size];
      const DetectorId id = config.pool[job % pool_size];
      try {
        const auto start = std::chrono::steady_clock::now();
        auto hp_it = config.hyperparams.find(id);
        const HyperParams hp = hp_it == config.hyperparams.end() ? HyperParams{} : hp_it->second;
        const auto model = fit(id, c.train, config.contamination, hp,
                               derive_seed(c.seed, c.dataset->name, to_string(id)),
                               id == DetectorId::kDevNet ? &c.devnet_labels : nullptr);
        const ScoreVector scores = decision_function(model, c.test);
        const auto stop = std::chrono::steady_clock::now();
        cells[job] = MetricCell{auroc(scores, c.test_labels), average_precision(scores, c.test_labels),
                                std::chrono::duration<double>(stop - start).count()};
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t job = 0; job < errors.size(); ++job) {
    if (!errors[job]) continue;
    const Case& c = cases[job / pool_size];
    const std::string where = "dataset " + c.dataset->name + " (seed " + std::to_string(c.seed) + ", " +
                              std::string(to_string(config.pool[job % pool_size])) + "): ";
    try {
      std::rethrow_exception(errors[job]);
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
  }

  BenchmarkReport report;
  std::vector<std::string> pool_names;
  for (DetectorId id : config.pool) pool_names.emplace_back(to_string(id));
  report.methods = pool_names;
  report.methods.push_back(kAverageRow);
  report.methods.push_back(kSelectorRow);
  if (config.notes_client) report.methods.push_back(kSelectorNotesRow);

  SelectorConfig offline = config.selector;
  offline.mode = SelectorMode::kOffline;
  std::map<std::string, std::map<std::string, double>> aurocs;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case& c = cases[ci];
    report.cases.push_back(c.name);
    auto& row = report.metrics[c.name];
    MetricCell average;
    for (std::size_t m = 0; m < pool_size; ++m) {
      const MetricCell& cell = cells[ci * pool_size + m];
      row[pool_names[m]] = cell;
      average.auroc += cell.auroc / static_cast<double>(pool_size);
      average.average_precision += cell.average_precision / static_cast<double>(pool_size);
      average.seconds += cell.seconds;
    }
    row[kAverageRow] = average;

    const Labels* visible = c.selector_labels ? &*c.selector_labels : nullptr;
    CaseAudit audit{c.name, select(c.train, visible, config.pool, registry, offline), std::nullopt};
    row[kSelectorRow] = row.at(std::string(to_string(audit.offline.chosen)));
    if (config.notes_client) {
      SelectorConfig with_notes = config.selector;
      with_notes.mode = SelectorMode::kLlm;
      with_notes.notes = c.dataset->notes;
      audit.with_notes = select(c.train, visible, config.pool, registry, with_notes, config.notes_client);
      row[kSelectorNotesRow] = row.at(std::string(to_string(audit.with_notes->chosen)));
    }
    report.audits.push_back(std::move(audit));
    for (const auto& [method, cell] : row) aurocs[c.name][method] = cell.auroc;
  }
  report.ranks = rank_table(report.methods, report.cases, aurocs);
  report.standalone_ranks = rank_table(pool_names, report.cases, aurocs);
  return report;
}

json report_to_json(const BenchmarkReport& report, bool with_timing) {
  json j = json::object();
  j["cases"] = report.cases;
  j["methods"] = report.methods;
  json metrics = json::object();
  for (const auto& [name, row] : report.metrics) {
    json r = json::object();
    for (const auto& [method, cell] : row) {
      json c = {{"auroc", cell.auroc}, {"average_precision", cell.average_precision}};
      if (with_timing) c["seconds"] = cell.seconds;
      r[method] = std::move(c);
    }
    metrics[name] = std::move(r);
  }
  j["metrics"] = std::move(metrics);
  j["ranks"] = rank_table_to_json(report.ranks);
  j["standalone_ranks"] = rank_table_to_json(report.standalone_ranks);
  json audits = json::array();
  for (const auto& a : report.audits) {
    json entry = {{"case", a.case_name}, {"offline", selection_to_json(a.offline)}};
    if (a.with_notes) entry["with_notes"] = selection_to_json(*a.with_notes);
    audits.push_back(std::move(entry));
  }
  j["audits"] = std::move(audits);
  return j;
}

std::string report_text_table(const BenchmarkReport& report) {
  std::size_t width = 6;
  for (const auto& m : report.methods) width = std::max(width, m.size());
  auto mean_metric = [&](const std::string& method, double MetricCell::*field) {
    double sum = 0.0;
    for (const auto& c : report.cases) sum += report.metrics.at(c).at(method).*field;
    return report.cases.empty() ? 0.0 : sum / static_cast<double>(report.cases.size());
  };
  auto section = [&](const char* title, const RankTable& table) {
    std::string out = std::string(title) + "\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %9s  %10s  %8s\n", static_cast<int>(width), "method", "mean_rank",
                  "mean_auroc", "mean_ap");
    out += line;
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      const auto& name = table.methods[m];
      std::snprintf(line, sizeof line, "%-*s  %9s  %10s  %8s\n", static_cast<int>(width), name.c_str(),
                    format_fixed(table.mean_rank[m], 4).c_str(),
                    format_fixed(mean_metric(name, &MetricCell::auroc), 4).c_str(),
                    format_fixed(mean_metric(name, &MetricCell::average_precision), 4).c_str());
      out += line;
    }
    return out;
  };
  return section("comparison", report.ranks) + "\n" + section("standalone", report.standalone_ranks);
}

std::string audits_to_jsonl(const BenchmarkReport& report) {
  std::string out;
  for (const auto& a : report.audits) {
    json entry = {{"case", a.case_name}, {"offline", selection_to_json(a.offline)}};
    if (a.with_notes) entry["with_notes"] = selection_to_json(*a.with_notes);
    out += entry.dump() + "\n";
  }
  return out;
}

}  // namespace odsel
