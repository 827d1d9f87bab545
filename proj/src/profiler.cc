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

#include "odsel/profiler.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace odsel {

namespace {

struct Moments {
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

Moments central_moments(const Eigen::Ref<const Vector>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = x.mean();
  Moments m;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double c = x(i) - mean;
    const double c2 = c * c;
    m.m2 += c2;
    m.m3 += c2 * c;
    m.m4 += c2 * c2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

constexpr double kDegenerate = 1e-24;  // m2 below this counts as a constant column

// Between-cluster share of total variance for 2-means, farthest-point init.
double two_means_share(const Matrix& z) {
  const Eigen::Index n = z.rows();
  const Eigen::RowVectorXd centroid = z.colwise().mean();
  const double total = (z.rowwise() - centroid).squaredNorm();
  if (total <= kDegenerate || n < 2) return 0.0;

  auto farthest_from = [&](const Eigen::RowVectorXd& p) {
    Eigen::Index best = 0;
    double best_d = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dist = (z.row(i) - p).squaredNorm();
      if (dist > best_d) {
        best_d = dist;
        best = i;
      }
    }
    return best;
  };
  Eigen::RowVectorXd c0 = z.row(farthest_from(centroid));
  Eigen::RowVectorXd c1 = z.row(farthest_from(c0));

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 10; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      assign[i] = (z.row(i) - c1).squaredNorm() < (z.row(i) - c0).squaredNorm() ? 1 : 0;
    }
    Eigen::RowVectorXd s0 = Eigen::RowVectorXd::Zero(z.cols());
    Eigen::RowVectorXd s1 = Eigen::RowVectorXd::Zero(z.cols());
    Eigen::Index n0 = 0;
    Eigen::Index n1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (assign[i] == 0) {
        s0 += z.row(i);
        ++n0;
      } else {
        s1 += z.row(i);
        ++n1;
      }
    }
    // An emptied cluster keeps its previous center.
    if (n0 > 0) c0 = s0 / static_cast<double>(n0);
    if (n1 > 0) c1 = s1 / static_cast<double>(n1);
  }
  double within = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) within += (z.row(i) - (assign[i] == 0 ? c0 : c1)).squaredNorm();
  return std::clamp(1.0 - within / total, 0.0, 1.0);
}

}  // namespace

double population_skewness(const Eigen::Ref<const Vector>& x) {
  const Moments m = central_moments(x);
  if (m.m2 <= kDegenerate) return 0.0;
  return m.m3 / std::pow(m.m2, 1.5);
}

double population_excess_kurtosis(const Eigen::Ref<const Vector>& x) {
  const Moments m = central_moments(x);
  if (m.m2 <= kDegenerate) return 0.0;
  return m.m4 / (m.m2 * m.m2) - 3.0;
}

DatasetProfile profile(const DataMatrix& data, const Labels* labels) {
  const Matrix& x = data.values();
  DatasetProfile p;
  p.n = data.n();
  p.d = data.d();
  if (labels) {
    validate_labels(*labels, p.n);
    const auto positives = std::count(labels->begin(), labels->end(), 1);
    p.anomaly_ratio = static_cast<double>(positives) / static_cast<double>(p.n);
  }

  double abs_skew_sum = 0.0;
  double kurt_sum = 0.0;
  p.skew_max = 0.0;
  p.kurt_max = -std::numeric_limits<double>::infinity();
  double max_sd = 0.0;
  double min_sd = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < p.d; ++j) {
    const Vector col = x.col(j);
    const double s = std::abs(population_skewness(col));
    const double k = population_excess_kurtosis(col);
    abs_skew_sum += s;
    kurt_sum += k;
    p.skew_max = std::max(p.skew_max, s);
    p.kurt_max = std::max(p.kurt_max, k);
    const double sd = std::sqrt(central_moments(col).m2);
    if (sd >= 1e-12) {
      max_sd = std::max(max_sd, sd);
      min_sd = std::min(min_sd, sd);
    }
  }
  p.skew_mean = abs_skew_sum / static_cast<double>(p.d);
  p.kurt_mean = kurt_sum / static_cast<double>(p.d);
  p.scale_spread = max_sd > 0.0 ? std::log10(max_sd / min_sd) : 0.0;
  p.sparsity = static_cast<double>((x.array() == 0.0).count()) / static_cast<double>(x.size());

  const Matrix z = standardize(data).data.values();
  const Matrix cov = (z.transpose() * z) / static_cast<double>(p.n);

  // Standardized columns have unit variance (or are all-zero), so cov is the
  // correlation matrix with zero rows for constant features.
  if (p.d > 1) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.d; ++i) {
      for (Eigen::Index j = i + 1; j < p.d; ++j) sum += std::min(1.0, std::abs(cov(i, j)));
    }
    p.corr_mean = sum / static_cast<double>(p.d * (p.d - 1) / 2);
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  Vector values = eig.eigenvalues().cwiseMax(0.0);  // ascending
  const double total = values.sum();
  const auto keep = std::min<Eigen::Index>(p.d, static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(p.d)))));
  if (total > 1e-12) {
    const double tail = values.head(p.d - keep).sum();
    p.noise_level = std::clamp(tail / total, 0.0, 1.0);
  }

  p.bimodality = two_means_share(z);
  return p;
}

std::string profile_summary_text(const DatasetProfile& p) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string s = "n=" + std::to_string(p.n) + ", d=" + std::to_string(p.d);
  if (p.anomaly_ratio) s += ", anomaly_ratio=" + num(*p.anomaly_ratio);
  s += ", skew_mean=" + num(p.skew_mean);
  s += ", skew_max=" + num(p.skew_max);
  s += ", kurt_mean=" + num(p.kurt_mean);
  s += ", kurt_max=" + num(p.kurt_max);
  s += ", noise_level=" + num(p.noise_level);
  s += ", sparsity=" + num(p.sparsity);
  s += ", corr_mean=" + num(p.corr_mean);
  s += ", scale_spread=" + num(p.scale_spread);
  s += ", bimodality=" + num(p.bimodality);
  return s;
}

json profile_to_json(const DatasetProfile& p) {
  json j = json::object();
  j["n"] = p.n;
  j["d"] = p.d;
  j["anomaly_ratio"] = p.anomaly_ratio ? json(*p.anomaly_ratio) : json(nullptr);
  j["skew_mean"] = p.skew_mean;
  j["skew_max"] = p.skew_max;
  j["kurt_mean"] = p.kurt_mean;
  j["kurt_max"] = p.kurt_max;
  j["noise_level"] = p.noise_level;
  j["sparsity"] = p.sparsity;
  j["corr_mean"] = p.corr_mean;
  j["scale_spread"] = p.scale_spread;
  j["bimodality"] = p.bimodality;
  return j;
}

}  // namespace odsel
