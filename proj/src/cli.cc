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

#include "odsel/cli.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "odsel/eval.h"
#include "odsel/io.h"
#include "odsel/profiler.h"
#include "odsel/registry.h"
#include "odsel/selector.h"

namespace odsel {

namespace {

// Raised for flag combinations CLI11 cannot express; maps to kExitUsage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string valid_detector_list() {
  std::string out;
  for (DetectorId id : kAllDetectors) {
    if (!out.empty()) out += ", ";
    out += to_string(id);
  }
  return out;
}

DetectorId detector_flag(const std::string& name) {
  auto id = parse_detector_id(name);
  if (!id) throw UsageError("unknown detector '" + name + "'; valid ids: " + valid_detector_list());
  return *id;
}

std::vector<DetectorId> pool_flag(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllDetectors.begin(), kAllDetectors.end()};
  std::vector<DetectorId> pool;
  for (const auto& item : names) {
    std::stringstream ss(item);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      const DetectorId id = detector_flag(name);
      if (std::find(pool.begin(), pool.end(), id) == pool.end()) pool.push_back(id);
    }
  }
  if (pool.empty()) throw UsageError("--pool names no detectors; valid ids: " + valid_detector_list());
  return pool;
}

std::vector<std::uint64_t> seeds_flag(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
      } else {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw UsageError("bad seed range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad seed list '" + text + "'");
    }
  }
  if (seeds.empty()) throw UsageError("--seeds names no seeds");
  return seeds;
}

HyperParams params_flag(const std::vector<std::string>& items) {
  HyperParams hp;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + item + "'");
    hp[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return hp;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path);
  f << text;
}

Registry registry_flag(const std::string& path) { return path.empty() ? builtin_registry() : load_registry(path); }

struct Flags {
  // profile
  std::string data;
  bool as_json = false;
  // select
  std::string notes;
  bool offline = false;
  double delta = 0.0;
  std::string registry;
  std::string audit_out;
  std::vector<std::string> pool;
  std::string replay;
  std::string record;
  // fit / score
  std::string detector;
  std::string model_out;
  std::string model_in;
  std::string scores_out;
  double contamination = kDefaultContamination;
  std::uint64_t seed = 0;
  std::vector<std::string> params;
  // bench
  std::string bench_dir;
  bool synthetic = false;
  std::string seeds = "0";
  std::string report;
  int threads = 1;
  // synth
  std::string kind;
  std::string out_path;
};

int cmd_profile(const Flags& f, std::ostream& out) {
  const LabeledDataset ds = load_csv(f.data);
  const DatasetProfile p = profile(ds.data, ds.labels ? &*ds.labels : nullptr);
  if (f.as_json) {
    out << profile_to_json(p).dump(2) << "\n";
    return kExitOk;
  }
  std::stringstream ss(profile_summary_text(p));
  std::string field;
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field[0] == ' ') field.erase(0, 1);
    const auto eq = field.find('=');
    out << field.substr(0, eq) << ": " << field.substr(eq + 1) << "\n";
  }
  return kExitOk;
}

int cmd_select(const Flags& f, std::ostream& out, std::ostream& err, std::shared_ptr<ChatTransport> transport) {
  if (!f.replay.empty() && !f.record.empty()) throw UsageError("--replay and --record are exclusive");
  const std::vector<DetectorId> pool = pool_flag(f.pool);
  SelectorConfig config;
  config.delta = f.delta;
  if (!f.notes.empty()) config.notes = f.notes;

  std::unique_ptr<LlmClient> client;
  if (!f.offline) {
    LlmConfig llm = LlmConfig::from_env();
    if (llm.api_key.empty() && f.replay.empty()) {
      throw UsageError(std::string("LLM mode needs an API key: set ") + kApiKeyEnv +
                       ", replay a transcript with --replay FILE, or pass --offline");
    }
    Transcript transcript = !f.replay.empty()   ? Transcript::replay(f.replay)
                            : !f.record.empty() ? Transcript::record(f.record)
                                                : Transcript();
    client = std::make_unique<LlmClient>(std::move(llm), std::move(transcript),
                                         transport ? transport : std::make_shared<HttpTransport>());
    config.mode = SelectorMode::kLlm;
  }

  const LabeledDataset ds = load_csv(f.data);
  const Registry registry = registry_flag(f.registry);
  const SelectionResult r =
      select(ds.data, ds.labels ? &*ds.labels : nullptr, pool, registry, config, client.get());
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";

  std::vector<std::pair<DetectorId, double>> ranked(r.scores.begin(), r.scores.end());
  std::sort(ranked.begin(), ranked.end(), ranks_before);
  std::string candidates;
  for (const auto& [id, s] : ranked) {
    if (!r.candidates.count(id)) continue;
    if (!candidates.empty()) candidates += ", ";
    candidates += to_string(id);
  }
  out << "chosen: " << to_string(r.chosen) << "\n";
  out << "reason: " << r.reason << "\n";
  out << "mode: " << to_string(r.mode) << "\n";
  const auto tags = tag_names(r.tags);
  std::string tag_line;
  for (const auto& t : tags) tag_line += (tag_line.empty() ? "" : ", ") + t;
  out << "tags: " << (tag_line.empty() ? "(none)" : tag_line) << "\n";
  out << "candidates: " << candidates << "\n";
  out << "scores:\n";
  for (const auto& [id, s] : ranked) {
    char line[64];
    std::snprintf(line, sizeof line, "  %-8s %8.4f%s\n", std::string(to_string(id)).c_str(), s,
                  r.candidates.count(id) ? " *" : "");
    out << line;
  }
  if (!f.audit_out.empty()) write_text(f.audit_out, selection_to_json(r).dump(2) + "\n");
  return kExitOk;
}

int cmd_fit(const Flags& f, std::ostream& out) {
  const DetectorId id = detector_flag(f.detector);
  const HyperParams hp = params_flag(f.params);
  const LabeledDataset ds = load_csv(f.data);
  if (id == DetectorId::kDevNet && !ds.labels) {
    fail(ErrorCode::kLabelsRequired, "labels required: devnet needs a 'label' column in " + f.data);
  }
  const FittedDetector model =
      fit(id, ds.data, f.contamination, hp, f.seed, ds.labels ? &*ds.labels : nullptr);
  save_model(model, f.model_out);
  const auto flagged = threshold_from_contamination(model.train_scores(), model.contamination());
  out << "fitted " << to_string(id) << " on " << ds.data.n() << "x" << ds.data.d() << ", threshold "
      << fmt("%.6g", model.threshold()) << ", flagged "
      << std::count(flagged.flags.begin(), flagged.flags.end(), 1) << "\n";
  return kExitOk;
}

int cmd_score(const Flags& f, std::ostream& out) {
  const FittedDetector model = load_model(f.model_in);
  const LabeledDataset ds = load_csv(f.data);
  const ScoreVector scores = decision_function(model, ds.data);
  const Labels flags = predict_labels(model, ds.data);
  std::string text = "score,flag\n";
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    text += fmt("%.17g", scores(i)) + "," + std::to_string(flags[static_cast<std::size_t>(i)]) + "\n";
  }
  if (f.scores_out.empty()) {
    out << text;
  } else {
    write_text(f.scores_out, text);
  }
  return kExitOk;
}

std::vector<BenchmarkDataset> bench_datasets(const Flags& f) {
  std::vector<BenchmarkDataset> datasets;
  if (f.synthetic) {
    for (SyntheticKind kind : kAllSyntheticKinds) {
      SyntheticDataset s = make_synthetic(kind, 0);
      datasets.push_back({s.name, s.dataset.data, *s.dataset.labels, s.supervision, std::nullopt});
    }
    return datasets;
  }
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(f.bench_dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  if (ec) fail(ErrorCode::kIo, "cannot list " + f.bench_dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::kIo, "no .csv files in " + f.bench_dir);
  for (const auto& path : files) {
    LabeledDataset ds = load_csv(path);
    if (!ds.labels) fail(ErrorCode::kLabelsRequired, "labels required: " + path.string() + " has no 'label' column");
    datasets.push_back({path.stem().string(), ds.data, *ds.labels, std::nullopt, std::nullopt});
  }
  return datasets;
}

std::string replace_extension(const std::string& path, const char* ext) {
  return std::filesystem::path(path).replace_extension(ext).string();
}

int cmd_bench(const Flags& f, std::ostream& out) {
  if (f.synthetic == !f.bench_dir.empty()) throw UsageError("bench takes either a directory or --synthetic");
  if (f.threads < 1) throw UsageError("--threads must be >= 1");
  BenchmarkConfig config;
  config.pool = pool_flag(f.pool);
  config.seeds = seeds_flag(f.seeds);
  config.threads = f.threads;
  config.selector.delta = f.delta;
  const auto datasets = bench_datasets(f);
  const BenchmarkReport report = benchmark(datasets, registry_flag(f.registry), config);
  if (!f.report.empty()) {
    write_text(f.report, report_to_json(report).dump(2) + "\n");
    write_text(replace_extension(f.report, ".txt"), report_text_table(report));
    write_text(replace_extension(f.report, ".audit.jsonl"), audits_to_jsonl(report));
  }
  std::vector<std::pair<double, std::string>> summary;
  for (std::size_t m = 0; m < report.ranks.methods.size(); ++m) {
    summary.emplace_back(report.ranks.mean_rank[m], report.ranks.methods[m]);
  }
  std::stable_sort(summary.begin(), summary.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  out << "mean rank over " << report.cases.size() << " case(s), lower is better\n";
  for (const auto& [rank, name] : summary) {
    char line[96];
    std::snprintf(line, sizeof line, "  %-15s %7.4f\n", name.c_str(), rank);
    out << line;
  }
  return kExitOk;
}

int cmd_registry(const Flags& f, std::ostream& out) {
  const std::string text = registry_to_text(registry_flag(f.registry));
  if (f.out_path.empty()) {
    out << text;
  } else {
    write_text(f.out_path, text);
  }
  return kExitOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
  std::vector<SyntheticKind> kinds;
  if (f.kind == "all") {
    kinds.assign(kAllSyntheticKinds.begin(), kAllSyntheticKinds.end());
    std::filesystem::create_directories(f.out_path);
  } else {
    try {
      kinds.push_back(parse_synthetic_kind(f.kind));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  for (SyntheticKind kind : kinds) {
    const SyntheticDataset s = make_synthetic(kind, f.seed);
    const std::filesystem::path path =
        f.kind == "all" ? std::filesystem::path(f.out_path) / (s.name + ".csv") : std::filesystem::path(f.out_path);
    save_csv(s.dataset, path);
    out << "wrote " << path.string() << " (" << s.dataset.data.n() << " rows, " << s.anomaly_indices.size()
        << " anomalies)\n";
  }
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFiniteData:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kLabelsRequired:
    case ErrorCode::kParse:
    case ErrorCode::kVocabulary:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kIo:
      return kExitData;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kTransport:
    case ErrorCode::kReplayMiss:
    case ErrorCode::kDivergence:
      return kExitRuntime;
  }
  return kExitRuntime;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            std::shared_ptr<ChatTransport> transport) {
  CLI::App app{"Outlier detector selection and scoring", "odsel"};
  app.require_subcommand(1);
  Flags f;

  auto* profile_cmd = app.add_subcommand("profile", "Print dataset statistics");
  profile_cmd->add_option("data", f.data, "CSV file")->required();
  profile_cmd->add_flag("--json", f.as_json, "Emit JSON");

  auto* select_cmd = app.add_subcommand("select", "Choose a detector for a dataset");
  select_cmd->add_option("data", f.data, "CSV file")->required();
  select_cmd->add_option("--notes", f.notes, "Free-text notes passed to the LLM");
  select_cmd->add_flag("--offline", f.offline, "Rule-based tags and symbolic choice, no network");
  select_cmd->add_option("--delta", f.delta, "Candidate threshold on the alignment score");
  select_cmd->add_option("--registry", f.registry, "Registry JSON merged over the builtin one");
  select_cmd->add_option("--out", f.audit_out, "Write the audit record as JSON");
  select_cmd->add_option("--pool", f.pool, "Comma-separated detector ids");
  select_cmd->add_option("--replay", f.replay, "Answer LLM calls from a transcript");
  select_cmd->add_option("--record", f.record, "Record LLM calls to a transcript");

  auto* fit_cmd = app.add_subcommand("fit", "Train a detector and save it");
  fit_cmd->add_option("detector", f.detector, "Detector id")->required();
  fit_cmd->add_option("data", f.data, "CSV file")->required();
  fit_cmd->add_option("--model-out", f.model_out, "Model file to write")->required();
  fit_cmd->add_option("--contamination", f.contamination, "Expected anomaly fraction");
  fit_cmd->add_option("--seed", f.seed, "Random seed");
  fit_cmd->add_option("--param", f.params, "Hyperparameter key=value (repeatable)");

  auto* score_cmd = app.add_subcommand("score", "Score data with a saved model");
  score_cmd->add_option("data", f.data, "CSV file")->required();
  score_cmd->add_option("--model-in", f.model_in, "Model file")->required();
  score_cmd->add_option("--scores-out", f.scores_out, "Write score,flag rows here instead of stdout");

  auto* bench_cmd = app.add_subcommand("bench", "Rank the pool and the selector across datasets");
  bench_cmd->add_option("dir", f.bench_dir, "Directory of labeled CSV files");
  bench_cmd->add_flag("--synthetic", f.synthetic, "Use the six built-in synthetic datasets");
  bench_cmd->add_option("--pool", f.pool, "Comma-separated detector ids");
  bench_cmd->add_option("--seeds", f.seeds, "Seeds, e.g. 1-10 or 0,3,7");
  bench_cmd->add_option("--report", f.report, "Report JSON path; .txt and .audit.jsonl are written alongside");
  bench_cmd->add_option("--registry", f.registry, "Registry JSON merged over the builtin one");
  bench_cmd->add_option("--delta", f.delta, "Candidate threshold on the alignment score");
  bench_cmd->add_option("--threads", f.threads, "Parallel fit jobs");

  auto* registry_cmd = app.add_subcommand("registry", "Print or export model metadata");
  registry_cmd->add_option("--registry", f.registry, "Registry JSON merged over the builtin one");
  registry_cmd->add_option("--out", f.out_path, "Write instead of printing");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset as CSV");
  synth_cmd->add_option("kind", f.kind, "blob, highdim_sparse, skewed, correlated, multimodal, labeled_semi or all")
      ->required();
  synth_cmd->add_option("--seed", f.seed, "Generator seed");
  synth_cmd->add_option("--out", f.out_path, "CSV path (a directory for 'all')")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*profile_cmd) return cmd_profile(f, out);
    if (*select_cmd) return cmd_select(f, out, err, std::move(transport));
    if (*fit_cmd) return cmd_fit(f, out);
    if (*score_cmd) return cmd_score(f, out);
    if (*bench_cmd) return cmd_bench(f, out);
    if (*registry_cmd) return cmd_registry(f, out);
    if (*synth_cmd) return cmd_synth(f, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace odsel
