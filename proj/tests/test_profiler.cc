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

#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "odsel/io.h"
#include "odsel/profiler.h"
#include "odsel/selector.h"
#include "oracles.h"

using namespace odsel;

namespace {

Matrix gaussian(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  return x;
}

std::vector<double> column_values(const Matrix& x, Eigen::Index c) {
  return {x.col(c).data(), x.col(c).data() + x.rows()};
}

}  // namespace

TEST_CASE("moments of 1..5") {
  Matrix x(5, 1);
  x << 1, 2, 3, 4, 5;
  const auto p = profile(DataMatrix(x));
  const auto m = oracle::population_moments(column_values(x, 0));
  CHECK(p.skew_mean == doctest::Approx(0.0));
  CHECK(p.kurt_mean == doctest::Approx(-1.3));
  CHECK(p.kurt_mean == doctest::Approx(m.excess_kurtosis));
  CHECK(population_skewness(x.col(0)) == doctest::Approx(m.skewness));
}

TEST_CASE("property: moments agree with the definition on skewed columns") {
  Rng rng(3);
  Matrix x(300, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = std::exp(rng.normal());
  const auto p = profile(DataMatrix(x));
  double skew = 0.0, kurt = 0.0, skew_max = 0.0;
  for (Eigen::Index c = 0; c < 4; ++c) {
    const auto m = oracle::population_moments(column_values(x, c));
    skew += std::abs(m.skewness) / 4.0;
    kurt += m.excess_kurtosis / 4.0;
    skew_max = std::max(skew_max, std::abs(m.skewness));
  }
  CHECK(p.skew_mean == doctest::Approx(skew).epsilon(1e-10));
  CHECK(p.skew_max == doctest::Approx(skew_max).epsilon(1e-10));
  CHECK(p.kurt_mean == doctest::Approx(kurt).epsilon(1e-10));
}

TEST_CASE("noise level of rank-deficient data is zero") {
  Rng rng(4);
  // Rank 1 in 4 columns: ceil(sqrt(4)) = 2 components keep everything.
  Matrix x(50, 4);
  for (Eigen::Index i = 0; i < 50; ++i) {
    const double t = rng.normal();
    x.row(i) << t, -2.0 * t, 0.5 * t, 3.0 * t;
  }
  CHECK(profile(DataMatrix(x)).noise_level == doctest::Approx(0.0).scale(1.0));

  // d = 32 keeps ceil(sqrt(32)) = 6 components.
  const Matrix basis6 = gaussian(rng, 6, 32);
  const Matrix rank6 = gaussian(rng, 200, 6) * basis6;
  CHECK(profile(DataMatrix(rank6)).noise_level < 1e-10);
  const Matrix rank8 = gaussian(rng, 200, 8) * gaussian(rng, 8, 32);
  CHECK(profile(DataMatrix(rank8)).noise_level > 1e-3);
}

TEST_CASE("sparsity, scale spread and constant columns") {
  Matrix x(4, 3);
  x << 0, 1, 100, 0, 2, 200, 0, 3, 300, 1, 4, 400;
  const auto p = profile(DataMatrix(x));
  CHECK(p.sparsity == doctest::Approx(3.0 / 12.0));
  const double s0 = std::sqrt(3.0 / 16.0);
  const double s2 = 100.0 * std::sqrt(1.25);
  CHECK(p.scale_spread == doctest::Approx(std::log10(s2 / s0)));
  const auto flat = profile(DataMatrix(Matrix::Constant(5, 2, 3.0)));
  CHECK(flat.scale_spread == 0.0);
  CHECK(flat.corr_mean == 0.0);
  CHECK(std::isfinite(flat.skew_mean));
}

TEST_CASE("summary text order and anomaly ratio") {
  Rng rng(1);
  const DataMatrix data(gaussian(rng, 20, 2));
  const std::string text = profile_summary_text(profile(data));
  CHECK(text.rfind("n=20, d=2, skew_mean=", 0) == 0);
  CHECK(text.find("anomaly_ratio") == std::string::npos);
  const std::vector<std::string> order = {"skew_mean", "skew_max", "kurt_mean", "kurt_max", "noise_level",
                                          "sparsity", "corr_mean", "scale_spread", "bimodality"};
  std::size_t at = 0;
  for (const auto& key : order) {
    const std::size_t found = text.find(key + "=", at);
    CHECK(found != std::string::npos);
    at = found;
  }
  Labels labels(20, 0);
  labels[0] = 1;
  const auto labeled = profile(data, &labels);
  REQUIRE(labeled.anomaly_ratio);
  CHECK(*labeled.anomaly_ratio == doctest::Approx(0.05));
  CHECK(profile_summary_text(labeled).find("anomaly_ratio=0.0500") != std::string::npos);
  CHECK(profile_to_json(profile(data))["anomaly_ratio"].is_null());
}

TEST_CASE("property: profile is invariant to positive column scaling") {
  Rng rng(6);
  Matrix x = gaussian(rng, 100, 3);
  x.col(0) = x.col(0).array().exp();
  Matrix scaled = x;
  scaled.col(0) *= 7.0;
  scaled.col(1) *= 0.01;
  const auto a = profile(DataMatrix(x));
  const auto b = profile(DataMatrix(scaled));
  CHECK(b.skew_mean == doctest::Approx(a.skew_mean).epsilon(1e-9));
  CHECK(b.kurt_mean == doctest::Approx(a.kurt_mean).epsilon(1e-9));
  CHECK(b.corr_mean == doctest::Approx(a.corr_mean).epsilon(1e-9));
  CHECK(b.sparsity == a.sparsity);
}

TEST_CASE("property: duplicating every row leaves the moment features unchanged") {
  Rng rng(7);
  const Matrix x = gaussian(rng, 60, 3);
  Matrix doubled(120, 3);
  doubled << x, x;
  const auto a = profile(DataMatrix(x));
  const auto b = profile(DataMatrix(doubled));
  CHECK(b.skew_mean == doctest::Approx(a.skew_mean).epsilon(1e-9));
  CHECK(b.kurt_max == doctest::Approx(a.kurt_max).epsilon(1e-9));
  CHECK(b.corr_mean == doctest::Approx(a.corr_mean).epsilon(1e-9));
  CHECK(b.noise_level == doctest::Approx(a.noise_level).epsilon(1e-9));
  CHECK(b.scale_spread == doctest::Approx(a.scale_spread).epsilon(1e-9));
}

TEST_CASE("independent columns have small mean correlation") {
  Rng rng(8);
  CHECK(profile(DataMatrix(gaussian(rng, 10000, 5))).corr_mean < 0.1);
}

TEST_CASE("synthetic datasets carry their intended tags") {
  const auto sparse = make_synthetic(SyntheticKind::kHighdimSparse, 0);
  const TagSet tags = map_tags_rules(profile(sparse.dataset.data));
  CHECK(tags.count(Tag::kHighDimensional));
  CHECK(tags.count(Tag::kSmallSample));
  CHECK(tags.count(Tag::kSparse));
  CHECK(profile(make_synthetic(SyntheticKind::kCorrelated, 0).dataset.data).corr_mean > 0.5);
  CHECK(profile(make_synthetic(SyntheticKind::kMultimodal, 0).dataset.data).bimodality >= 0.5);
  CHECK(profile(make_synthetic(SyntheticKind::kSkewed, 0).dataset.data).skew_mean > 1.0);
}

TEST_CASE("bimodality separates two clusters from one") {
  Rng rng(9);
  Matrix two = gaussian(rng, 200, 2) * 0.1;
  two.topRows(100).array() += 5.0;
  CHECK(profile(DataMatrix(two)).bimodality > 0.9);
  CHECK(profile(DataMatrix(gaussian(rng, 200, 2))).bimodality < 0.75);
}
