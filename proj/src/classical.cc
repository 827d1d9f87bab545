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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "odsel/detectors.h"
#include "json_util.h"

namespace odsel {

namespace {

double squared_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                        const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  return (a - b).squaredNorm();
}

}  // namespace

std::vector<Neighbors> k_nearest(const Matrix& train, const Matrix& query, Eigen::Index k) {
  const Eigen::Index n = train.rows();
  if (k < 1 || k > n - 1) {
    fail(ErrorCode::kInvalidArgument,
         "neighbor count k=" + std::to_string(k) + " requires 1 <= k <= n-1 with n=" + std::to_string(n));
  }
  if (query.cols() != train.cols()) {
    fail(ErrorCode::kDimensionMismatch, "query has " + std::to_string(query.cols()) +
                                            " columns, training data has " + std::to_string(train.cols()));
  }
  std::vector<Neighbors> out(static_cast<std::size_t>(query.rows()));
  std::vector<std::pair<double, Eigen::Index>> cand(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    for (Eigen::Index i = 0; i < n; ++i) {
      cand[i] = {squared_distance(query.row(q), train.row(i)), i};
    }
    // Lexicographic pair order gives distance ascending with index tie-break,
    // so the first zero entry is the lowest-index exact match.
    const std::size_t take = static_cast<std::size_t>(k) + 1;
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    const std::size_t skip = cand[0].first == 0.0 ? 1 : 0;
    Neighbors& nb = out[q];
    nb.index.reserve(k);
    nb.distance.reserve(k);
    for (std::size_t r = skip; r < skip + static_cast<std::size_t>(k); ++r) {
      nb.index.push_back(cand[r].second);
      nb.distance.push_back(std::sqrt(cand[r].first));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

KnnState::KnnState(Matrix train, Eigen::Index k) : train_(std::move(train)), k_(k) {
  if (k_ < 1 || k_ > train_.rows() - 1) fail(ErrorCode::kInvalidArgument, "knn: k out of range");
}

ScoreVector KnnState::score(const Matrix& prepared) const {
  const auto nbs = k_nearest(train_, prepared, k_);
  ScoreVector s(prepared.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = nbs[i].distance.back();
  return s;
}

json KnnState::to_json() const { return {{"k", k_}, {"train", matrix_to_json(train_)}}; }

std::shared_ptr<const KnnState> KnnState::from_json(const json& j) {
  return std::make_shared<KnnState>(matrix_from_json(j.at("train")), j.at("k").get<Eigen::Index>());
}

std::shared_ptr<const KnnState> fit_knn(const Matrix& x, const KnnParams& params) {
  if (x.rows() < 2) fail(ErrorCode::kInvalidArgument, "knn needs at least 2 samples");
  return std::make_shared<KnnState>(x, std::min(params.k, x.rows() - 1));
}

// ---------------------------------------------------------------------------

namespace {

// lrd and neighbor-lrd mean for each query, given training k-distances.
void lof_terms(const Matrix& train, const Vector& k_distance, const Matrix& query, Eigen::Index k,
               const Vector* train_lrd, Vector& lrd, Vector& neighbor_lrd_mean) {
  const auto nbs = k_nearest(train, query, k);
  lrd.resize(query.rows());
  neighbor_lrd_mean.resize(query.rows());
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    double reach_sum = 0.0;
    double lrd_sum = 0.0;
    for (std::size_t r = 0; r < nbs[q].index.size(); ++r) {
      const Eigen::Index o = nbs[q].index[r];
      reach_sum += std::max(k_distance(o), nbs[q].distance[r]);
      if (train_lrd) lrd_sum += (*train_lrd)(o);
    }
    const double mean_reach = reach_sum / static_cast<double>(k);
    lrd(q) = 1.0 / std::max(mean_reach, kLofReachFloor);
    neighbor_lrd_mean(q) = lrd_sum / static_cast<double>(k);
  }
}

}  // namespace

LofState::LofState(Matrix train, Eigen::Index k) : train_(std::move(train)), k_(k) {
  const auto nbs = k_nearest(train_, train_, k_);
  k_distance_.resize(train_.rows());
  for (Eigen::Index i = 0; i < train_.rows(); ++i) k_distance_(i) = nbs[i].distance.back();
  Vector unused;
  lof_terms(train_, k_distance_, train_, k_, nullptr, lrd_, unused);
}

LofState::LofState(Matrix train, Eigen::Index k, Vector k_distance, Vector lrd)
    : train_(std::move(train)), k_(k), k_distance_(std::move(k_distance)), lrd_(std::move(lrd)) {
  if (k_distance_.size() != train_.rows() || lrd_.size() != train_.rows()) {
    fail(ErrorCode::kParse, "lof: cached arrays do not match training size");
  }
}

ScoreVector LofState::score(const Matrix& prepared) const {
  Vector lrd;
  Vector neighbor_mean;
  lof_terms(train_, k_distance_, prepared, k_, &lrd_, lrd, neighbor_mean);
  return (neighbor_mean.array() / lrd.array()).matrix();
}

json LofState::to_json() const {
  return {{"k", k_},
          {"train", matrix_to_json(train_)},
          {"k_distance", vector_to_json(k_distance_)},
          {"lrd", vector_to_json(lrd_)}};
}

std::shared_ptr<const LofState> LofState::from_json(const json& j) {
  return std::make_shared<LofState>(matrix_from_json(j.at("train")), j.at("k").get<Eigen::Index>(),
                                    vector_from_json(j.at("k_distance")), vector_from_json(j.at("lrd")));
}

std::shared_ptr<const LofState> fit_lof(const Matrix& x, const LofParams& params) {
  if (x.rows() < 2) fail(ErrorCode::kInvalidArgument, "lof needs at least 2 samples");
  return std::make_shared<LofState>(x, std::min(params.k, x.rows() - 1));
}

// ---------------------------------------------------------------------------

double average_path_length(Eigen::Index n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  constexpr double kEulerGamma = 0.5772156649015329;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, int height_limit, Rng& rng)
      : x_(x), height_limit_(height_limit), rng_(rng) {}

  IsolationTree build(std::vector<Eigen::Index> rows) {
    tree_.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<Eigen::Index>& rows, int depth) {
    const int id = static_cast<int>(tree_.size());
    tree_.push_back(IsolationNode{-1, 0.0, -1, -1, static_cast<Eigen::Index>(rows.size())});
    if (depth >= height_limit_ || rows.size() <= 1) return id;

    const Eigen::Index d = x_.cols();
    int feature = -1;
    double lo = 0.0;
    double hi = 0.0;
    // Constant features are rejected; after d draws the node stays external.
    for (Eigen::Index attempt = 0; attempt < d; ++attempt) {
      const auto f = static_cast<Eigen::Index>(rng_.below(static_cast<std::uint64_t>(d)));
      lo = hi = x_(rows.front(), f);
      for (Eigen::Index r : rows) {
        lo = std::min(lo, x_(r, f));
        hi = std::max(hi, x_(r, f));
      }
      if (hi > lo) {
        feature = static_cast<int>(f);
        break;
      }
    }
    if (feature < 0) return id;

    double split = rng_.uniform(lo, hi);
    if (split <= lo) split = std::nextafter(lo, hi);
    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (Eigen::Index r : rows) (x_(r, feature) < split ? left : right).push_back(r);

    tree_[id].feature = feature;
    tree_[id].split = split;
    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    tree_[id].left = l;
    tree_[id].right = rr;
    return id;
  }

  const Matrix& x_;
  int height_limit_;
  Rng& rng_;
  IsolationTree tree_;
};

}  // namespace

IforestState::IforestState(std::vector<IsolationTree> trees, Eigen::Index subsample)
    : trees_(std::move(trees)), subsample_(subsample) {
  if (trees_.empty()) fail(ErrorCode::kInvalidArgument, "iforest: no trees");
}

double IforestState::path_length(const IsolationTree& tree, const Eigen::Ref<const Vector>& x) const {
  int node = 0;
  double depth = 0.0;
  while (tree[node].feature >= 0) {
    node = x(tree[node].feature) < tree[node].split ? tree[node].left : tree[node].right;
    depth += 1.0;
  }
  return depth + average_path_length(tree[node].size);
}

ScoreVector IforestState::score(const Matrix& prepared) const {
  const double norm = average_path_length(subsample_);
  ScoreVector s(prepared.rows());
  for (Eigen::Index i = 0; i < prepared.rows(); ++i) {
    if (norm <= 0.0) {
      s(i) = 0.5;
      continue;
    }
    const Vector x = prepared.row(i).transpose();
    double total = 0.0;
    for (const auto& tree : trees_) total += path_length(tree, x);
    s(i) = std::exp2(-(total / static_cast<double>(trees_.size())) / norm);
  }
  return s;
}

json IforestState::to_json() const {
  json trees = json::array();
  for (const auto& tree : trees_) {
    json nodes = json::array();
    for (const auto& node : tree) {
      nodes.push_back({node.feature, node.split, node.left, node.right, node.size});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"subsample", subsample_}, {"trees", std::move(trees)}};
}

std::shared_ptr<const IforestState> IforestState::from_json(const json& j) {
  std::vector<IsolationTree> trees;
  for (const auto& t : j.at("trees")) {
    IsolationTree tree;
    for (const auto& n : t) {
      tree.push_back(IsolationNode{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                   n.at(3).get<int>(), n.at(4).get<Eigen::Index>()});
    }
    trees.push_back(std::move(tree));
  }
  return std::make_shared<IforestState>(std::move(trees), j.at("subsample").get<Eigen::Index>());
}

std::shared_ptr<const IforestState> fit_iforest(const Matrix& x, const IforestParams& params,
                                                std::uint64_t seed) {
  if (params.n_trees < 1) fail(ErrorCode::kInvalidArgument, "iforest: n_trees must be >= 1");
  if (params.max_samples < 1) fail(ErrorCode::kInvalidArgument, "iforest: max_samples must be >= 1");
  const Eigen::Index n = x.rows();
  const Eigen::Index psi = std::min(params.max_samples, n);
  const int height = static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<Eigen::Index>(psi, 1)))));
  Rng rng(seed);
  TreeBuilder builder(x, height, rng);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  std::vector<IsolationTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    // Partial Fisher-Yates: the first psi entries are a uniform subsample.
    for (Eigen::Index i = 0; i < psi; ++i) {
      const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - i)));
      std::swap(all[i], all[j]);
    }
    trees.push_back(builder.build(std::vector<Eigen::Index>(all.begin(), all.begin() + psi)));
  }
  return std::make_shared<IforestState>(std::move(trees), psi);
}

}  // namespace odsel
