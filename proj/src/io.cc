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

#include "odsel/io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json_util.h"
#include "odsel/rng.h"

namespace odsel {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LabeledDataset parse_csv(std::string_view text, const std::string& source) {
  std::vector<std::string> lines;
  {
    std::string line;
    std::stringstream ss{std::string(text)};
    while (std::getline(ss, line)) {
      if (!trim(line).empty()) lines.push_back(line);
    }
  }
  if (lines.empty()) fail(ErrorCode::kParse, source + ": empty file");
  const auto header = split_row(lines.front());
  const auto label_it = std::find(header.begin(), header.end(), "label");
  const std::ptrdiff_t label_col = label_it == header.end() ? -1 : label_it - header.begin();
  const auto width = static_cast<Eigen::Index>(header.size());
  const Eigen::Index d = width - (label_col >= 0 ? 1 : 0);
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  if (n < 1) fail(ErrorCode::kParse, source + ": no data rows");
  if (d < 1) fail(ErrorCode::kParse, source + ": no feature columns");

  Matrix values(n, d);
  Labels labels;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto cells = split_row(lines[static_cast<std::size_t>(r) + 1]);
    if (static_cast<Eigen::Index>(cells.size()) != width) {
      fail(ErrorCode::kParse, source + ": row " + std::to_string(r + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    }
    Eigen::Index j = 0;
    for (Eigen::Index c = 0; c < width; ++c) {
      const std::string& cell = cells[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      const bool ok = ec == std::errc() && ptr == cell.data() + cell.size() && !cell.empty() && std::isfinite(v);
      if (!ok) {
        fail(ErrorCode::kParse, source + ": cell '" + cell + "' at row " + std::to_string(r + 1) + ", column " +
                                    std::to_string(c + 1) + " is not a finite number");
      }
      if (c == label_col) {
        if (v != 0.0 && v != 1.0) {
          fail(ErrorCode::kParse, source + ": label at row " + std::to_string(r + 1) + " must be 0 or 1");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values(r, j++) = v;
      }
    }
  }
  LabeledDataset out{DataMatrix(std::move(values)), std::nullopt};
  if (label_col >= 0) out.labels = std::move(labels);
  return out;
}

LabeledDataset load_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path,
              const std::vector<std::string>& column_names) {
  const Matrix& x = dataset.data.values();
  std::string text;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (j > 0) text += ',';
    text += static_cast<std::size_t>(j) < column_names.size() ? column_names[j] : "x" + std::to_string(j);
  }
  if (dataset.labels) text += ",label";
  text += '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j > 0) text += ',';
      text += format_real(x(i, j));
    }
    if (dataset.labels) text += "," + std::to_string((*dataset.labels)[i]);
    text += '\n';
  }
  write_file(path, text);
}

// ---------------------------------------------------------------------------

json model_to_json(const FittedDetector& model) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["detector"] = to_string(model.id());
  j["hyperparameters"] = model.hyperparams();
  j["contamination"] = model.contamination();
  j["threshold"] = model.threshold();
  j["seed"] = model.seed();
  j["standardized"] = model.standardized();
  j["input_dim"] = model.input_dim();
  j["scaler"] = {{"mean", vector_to_json(model.scaler().mean)}, {"scale", vector_to_json(model.scaler().scale)}};
  j["train_scores"] = vector_to_json(model.train_scores());
  j["state"] = model.state().to_json();
  return j;
}

FittedDetector model_from_json(const json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      fail(ErrorCode::kVersionMismatch, "model schema_version " + std::to_string(version) + " is not supported (expected " +
                                            std::to_string(kModelSchemaVersion) + ")");
    }
    const DetectorId id = detector_id_or_throw(j.at("detector").get<std::string>());
    Scaler scaler{vector_from_json(j.at("scaler").at("mean")), vector_from_json(j.at("scaler").at("scale"))};
    const auto input_dim = j.at("input_dim").get<Eigen::Index>();
    if (scaler.mean.size() != input_dim || scaler.scale.size() != input_dim) {
      fail(ErrorCode::kParse, "model scaler does not match input_dim");
    }
    return FittedDetector(id, j.at("hyperparameters").get<HyperParams>(), state_from_json(id, j.at("state")),
                          vector_from_json(j.at("train_scores")), j.at("contamination").get<double>(),
                          j.at("threshold").get<double>(), std::move(scaler), j.at("standardized").get<bool>(),
                          j.at("seed").get<std::uint64_t>(), input_dim);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const FittedDetector& model, const std::filesystem::path& path) {
  write_file(path, model_to_json(model).dump(1) + "\n");
}

FittedDetector load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 6> kKindNames = {"blob",       "highdim_sparse", "skewed",
                                                       "correlated", "multimodal",     "labeled_semi"};

struct Planted {
  Matrix inliers;
  Matrix anomalies;
};

Planted gaussian_blob(Rng& rng, Eigen::Index normal_rows, Eigen::Index anomaly_rows) {
  constexpr Eigen::Index d = 8;
  Planted p{Matrix(normal_rows, d), Matrix(anomaly_rows, d)};
  for (Eigen::Index i = 0; i < normal_rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) p.inliers(i, j) = rng.normal();
  }
  // Uniform in the [-8, 8] box, rejected inside radius 6.
  for (Eigen::Index i = 0; i < anomaly_rows;) {
    Eigen::RowVectorXd x(d);
    for (Eigen::Index j = 0; j < d; ++j) x(j) = rng.uniform(-8.0, 8.0);
    if (x.norm() >= 6.0) p.anomalies.row(i++) = x;
  }
  return p;
}

Planted highdim_sparse(Rng& rng, Eigen::Index normal_rows, Eigen::Index anomaly_rows) {
  constexpr Eigen::Index d = 100;
  constexpr double kDensity = 0.3;
  Planted p{Matrix::Zero(normal_rows, d), Matrix::Zero(anomaly_rows, d)};
  for (Eigen::Index i = 0; i < normal_rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (rng.uniform() < kDensity) p.inliers(i, j) = rng.normal();
    }
  }
  for (Eigen::Index i = 0; i < anomaly_rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (rng.uniform() < kDensity) p.anomalies(i, j) = rng.normal(3.0, 1.0);
    }
  }
  return p;
}

Planted skewed(Rng& rng, Eigen::Index normal_rows, Eigen::Index anomaly_rows) {
  constexpr Eigen::Index d = 6;
  Planted p{Matrix(normal_rows, d), Matrix(anomaly_rows, d)};
  for (Eigen::Index i = 0; i < normal_rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) p.inliers(i, j) = std::exp(rng.normal());
  }
  // Lognormal rows with two coordinates pushed far into the upper tail.
  for (Eigen::Index i = 0; i < anomaly_rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) p.anomalies(i, j) = std::exp(rng.normal());
    const auto a = static_cast<Eigen::Index>(rng.below(d));
    auto b = static_cast<Eigen::Index>(rng.below(d - 1));
    if (b >= a) ++b;
    p.anomalies(i, a) = std::exp(rng.normal(3.0, 0.3));
    p.anomalies(i, b) = std::exp(rng.normal(3.0, 0.3));
  }
  return p;
}

Planted correlated(Rng& rng, Eigen::Index normal_rows, Eigen::Index anomaly_rows) {
  constexpr Eigen::Index d = 12;
  constexpr double kNoise = 0.3;
  Vector primary(d);
  Vector secondary(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    primary(j) = rng.uniform(0.7, 1.0);
    secondary(j) = rng.uniform(-0.5, 0.5);
  }
  Planted p{Matrix(normal_rows, d), Matrix(anomaly_rows, d)};
  for (Eigen::Index i = 0; i < normal_rows; ++i) {
    const double f1 = rng.normal();
    const double f2 = rng.normal();
    for (Eigen::Index j = 0; j < d; ++j) {
      p.inliers(i, j) = primary(j) * f1 + secondary(j) * f2 + kNoise * rng.normal();
    }
  }
  // Same marginal scale, no shared factor.
  for (Eigen::Index i = 0; i < anomaly_rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt(primary(j) * primary(j) + secondary(j) * secondary(j) + kNoise * kNoise);
      p.anomalies(i, j) = sd * rng.normal();
    }
  }
  return p;
}

Planted multimodal(Rng& rng, Eigen::Index normal_rows, Eigen::Index anomaly_rows) {
  constexpr Eigen::Index d = 4;
  constexpr double kOffset = 3.0;
  Planted p{Matrix(normal_rows, d), Matrix(anomaly_rows, d)};
  for (Eigen::Index i = 0; i < normal_rows; ++i) {
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    for (Eigen::Index j = 0; j < d; ++j) p.inliers(i, j) = sign * kOffset + rng.normal();
  }
  // Near the midpoint between the modes.
  for (Eigen::Index i = 0; i < anomaly_rows; ++i) {
    const double t = rng.uniform(-0.3, 0.3) * kOffset;
    for (Eigen::Index j = 0; j < d; ++j) p.anomalies(i, j) = t + rng.normal(0.0, 0.5);
  }
  return p;
}

}  // namespace

std::string_view to_string(SyntheticKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

SyntheticKind parse_synthetic_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<SyntheticKind>(i);
  }
  std::string valid;
  for (auto k : kKindNames) valid += (valid.empty() ? "" : ", ") + std::string(k);
  fail(ErrorCode::kInvalidArgument, "unknown synthetic kind '" + std::string(name) + "' (valid: " + valid + ")");
}

SyntheticDataset make_synthetic(SyntheticKind kind, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "synthetic", to_string(kind)));
  const Eigen::Index normal_rows = kSyntheticRows - kSyntheticAnomalies;
  Planted p;
  switch (kind) {
    case SyntheticKind::kBlob:
    case SyntheticKind::kLabeledSemi: p = gaussian_blob(rng, normal_rows, kSyntheticAnomalies); break;
    case SyntheticKind::kHighdimSparse: p = highdim_sparse(rng, normal_rows, kSyntheticAnomalies); break;
    case SyntheticKind::kSkewed: p = skewed(rng, normal_rows, kSyntheticAnomalies); break;
    case SyntheticKind::kCorrelated: p = correlated(rng, normal_rows, kSyntheticAnomalies); break;
    case SyntheticKind::kMultimodal: p = multimodal(rng, normal_rows, kSyntheticAnomalies); break;
  }

  // Rows are shuffled so anomalies are not contiguous.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(kSyntheticRows));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(order.begin(), order.end());
  Matrix x(kSyntheticRows, p.inliers.cols());
  Labels labels(static_cast<std::size_t>(kSyntheticRows), 0);
  std::vector<Eigen::Index> anomaly_indices;
  for (Eigen::Index src = 0; src < kSyntheticRows; ++src) {
    const Eigen::Index dst = order[src];
    if (src < normal_rows) {
      x.row(dst) = p.inliers.row(src);
    } else {
      x.row(dst) = p.anomalies.row(src - normal_rows);
      labels[dst] = 1;
      anomaly_indices.push_back(dst);
    }
  }
  std::sort(anomaly_indices.begin(), anomaly_indices.end());

  std::optional<Labels> supervision;
  if (kind == SyntheticKind::kLabeledSemi) {
    std::vector<Eigen::Index> revealed = anomaly_indices;
    rng.shuffle(revealed.begin(), revealed.end());
    supervision.emplace(static_cast<std::size_t>(kSyntheticRows), 0);
    for (Eigen::Index i = 0; i < kSemiSupervisedLabels; ++i) (*supervision)[revealed[i]] = 1;
  }
  return SyntheticDataset{std::string(to_string(kind)),
                          LabeledDataset{DataMatrix(std::move(x)), std::move(labels)},
                          std::move(anomaly_indices), std::move(supervision)};
}

}  // namespace odsel
