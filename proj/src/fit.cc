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

#include <charconv>
#include <set>
#include <sstream>

#include "odsel/detectors.h"

namespace odsel {

namespace {

// Consumes keys from a HyperParams map; leftovers are reported as unknown.
class ParamReader {
 public:
  ParamReader(const HyperParams& hp, std::string_view detector) : hp_(hp), detector_(detector) {}

  bool has(const std::string& key) const { return hp_.count(key) > 0; }

  double real(const std::string& key, double fallback) {
    const std::string* v = take(key);
    if (!v) return fallback;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) bad(key, *v, "a real number");
    return out;
  }

  long long integer(const std::string& key, long long fallback) {
    const std::string* v = take(key);
    if (!v) return fallback;
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) bad(key, *v, "an integer");
    return out;
  }

  bool flag(const std::string& key, bool fallback) {
    const std::string* v = take(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true") return true;
    if (*v == "0" || *v == "false") return false;
    bad(key, *v, "0/1 or true/false");
  }

  // Comma-separated positive widths; empty string means no hidden layers.
  std::vector<Eigen::Index> widths(const std::string& key, std::vector<Eigen::Index> fallback) {
    const std::string* v = take(key);
    if (!v) return fallback;
    std::vector<Eigen::Index> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      long long w = 0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), w);
      if (ec != std::errc() || ptr != item.data() + item.size() || w < 1) bad(key, *v, "comma-separated positive widths");
      out.push_back(static_cast<Eigen::Index>(w));
    }
    return out;
  }

  DeepTraining training(DeepTraining t = {}) {
    t.hidden = widths("hidden", t.hidden);
    t.epochs = static_cast<int>(integer("epochs", t.epochs));
    t.batch_size = static_cast<Eigen::Index>(integer("batch_size", t.batch_size));
    t.lr = real("lr", t.lr);
    return t;
  }

  void finish() const {
    for (const auto& [key, value] : hp_) {
      if (!used_.count(key)) {
        fail(ErrorCode::kInvalidArgument,
             "unknown hyperparameter '" + key + "' for detector " + std::string(detector_));
      }
    }
  }

 private:
  const std::string* take(const std::string& key) {
    auto it = hp_.find(key);
    if (it == hp_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  [[noreturn]] void bad(const std::string& key, const std::string& value, const char* expected) const {
    fail(ErrorCode::kInvalidArgument, std::string(detector_) + ": hyperparameter " + key + "='" + value +
                                          "' is not " + expected);
  }

  const HyperParams& hp_;
  std::string_view detector_;
  std::set<std::string> used_;
};

}  // namespace

KnnParams parse_knn_params(const HyperParams& hp) {
  ParamReader r(hp, "knn");
  KnnParams p;
  p.k = r.integer("k", p.k);
  p.standardize = r.flag("standardize", p.standardize);
  r.finish();
  if (p.k < 1) fail(ErrorCode::kInvalidArgument, "knn: k must be >= 1");
  return p;
}

LofParams parse_lof_params(const HyperParams& hp) {
  ParamReader r(hp, "lof");
  LofParams p;
  p.k = r.integer("k", p.k);
  p.standardize = r.flag("standardize", p.standardize);
  r.finish();
  if (p.k < 1) fail(ErrorCode::kInvalidArgument, "lof: k must be >= 1");
  return p;
}

IforestParams parse_iforest_params(const HyperParams& hp) {
  ParamReader r(hp, "iforest");
  IforestParams p;
  p.n_trees = static_cast<int>(r.integer("n_trees", p.n_trees));
  p.max_samples = r.integer("max_samples", p.max_samples);
  p.standardize = r.flag("standardize", p.standardize);
  r.finish();
  return p;
}

AeParams parse_ae_params(const HyperParams& hp) {
  ParamReader r(hp, "ae");
  AeParams p;
  p.training = r.training();
  p.latent = r.integer("latent", p.latent);
  r.finish();
  return p;
}

VaeParams parse_vae_params(const HyperParams& hp) {
  ParamReader r(hp, "vae");
  VaeParams p;
  p.training = r.training();
  p.latent = r.integer("latent", p.latent);
  p.beta = r.real("beta", p.beta);
  r.finish();
  return p;
}

DeepSvddParams parse_deepsvdd_params(const HyperParams& hp) {
  ParamReader r(hp, "deepsvdd");
  DeepSvddParams p;
  p.training = r.training();
  p.latent = r.integer("latent", p.latent);
  r.finish();
  return p;
}

Ae1SvmParams parse_ae1svm_params(const HyperParams& hp) {
  ParamReader r(hp, "ae1svm");
  Ae1SvmParams p;
  p.training = r.training();
  p.latent = r.integer("latent", p.latent);
  p.nu = r.real("nu", p.nu);
  p.alpha = r.real("alpha", p.alpha);
  p.features = r.integer("features", p.features);
  p.gamma = r.real("gamma", p.gamma);
  r.finish();
  return p;
}

DevNetParams parse_devnet_params(const HyperParams& hp) {
  ParamReader r(hp, "devnet");
  DevNetParams p;
  p.training = r.training();
  p.margin = r.real("margin", p.margin);
  p.prior_samples = static_cast<int>(r.integer("prior_samples", p.prior_samples));
  r.finish();
  return p;
}

LunarParams parse_lunar_params(const HyperParams& hp) {
  ParamReader r(hp, "lunar");
  LunarParams p;
  p.training = r.training();
  p.k_explicit = r.has("k");
  p.k = r.integer("k", p.k);
  p.negative_ratio = r.real("negative_ratio", p.negative_ratio);
  p.epsilon = r.real("epsilon", p.epsilon);
  r.finish();
  return p;
}

std::vector<std::string> hyperparameter_keys(DetectorId id) {
  const std::vector<std::string> deep = {"hidden", "epochs", "batch_size", "lr"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> out = deep;
    out.insert(out.end(), extra.begin(), extra.end());
    return out;
  };
  switch (id) {
    case DetectorId::kKnn: return {"k", "standardize"};
    case DetectorId::kLof: return {"k", "standardize"};
    case DetectorId::kIforest: return {"n_trees", "max_samples", "standardize"};
    case DetectorId::kAe: return with({"latent"});
    case DetectorId::kVae: return with({"latent", "beta"});
    case DetectorId::kDeepSvdd: return with({"latent"});
    case DetectorId::kAe1Svm: return with({"latent", "nu", "alpha", "features", "gamma"});
    case DetectorId::kDevNet: return with({"margin", "prior_samples"});
    case DetectorId::kLunar: return with({"k", "negative_ratio", "epsilon"});
  }
  return {};
}

FittedDetector fit(DetectorId id, const DataMatrix& data, double contamination,
                   const HyperParams& hyperparams, std::uint64_t seed, const Labels* labels) {
  if (!(contamination > 0.0 && contamination <= 0.5)) {
    fail(ErrorCode::kInvalidArgument, "contamination must lie in (0, 0.5]");
  }
  if (labels) validate_labels(*labels, data.n());

  Scaler scaler = fit_scaler(data.values());
  bool standardized = is_deep(id);
  std::shared_ptr<const DetectorState> state;

  auto prepared = [&]() { return standardized ? scaler.apply(data.values()) : data.values(); };

  switch (id) {
    case DetectorId::kKnn: {
      const auto p = parse_knn_params(hyperparams);
      standardized = p.standardize;
      state = fit_knn(prepared(), p);
      break;
    }
    case DetectorId::kLof: {
      const auto p = parse_lof_params(hyperparams);
      standardized = p.standardize;
      state = fit_lof(prepared(), p);
      break;
    }
    case DetectorId::kIforest: {
      const auto p = parse_iforest_params(hyperparams);
      standardized = p.standardize;
      state = fit_iforest(prepared(), p, seed);
      break;
    }
    case DetectorId::kAe:
      state = fit_ae(prepared(), parse_ae_params(hyperparams), seed).state;
      break;
    case DetectorId::kVae:
      state = fit_vae(prepared(), parse_vae_params(hyperparams), seed).state;
      break;
    case DetectorId::kDeepSvdd:
      state = fit_deepsvdd(prepared(), parse_deepsvdd_params(hyperparams), seed).state;
      break;
    case DetectorId::kAe1Svm:
      state = fit_ae1svm(prepared(), parse_ae1svm_params(hyperparams), seed).state;
      break;
    case DetectorId::kDevNet: {
      const auto p = parse_devnet_params(hyperparams);
      if (!labels) fail(ErrorCode::kLabelsRequired, "devnet: labels required (at least one labeled anomaly)");
      state = fit_devnet(prepared(), *labels, p, seed).state;
      break;
    }
    case DetectorId::kLunar:
      state = fit_lunar(prepared(), parse_lunar_params(hyperparams), seed).state;
      break;
  }

  ScoreVector train_scores = state->score(prepared());
  if (!train_scores.allFinite()) {
    fail(ErrorCode::kDivergence, std::string(to_string(id)) + ": non-finite training scores");
  }
  const auto flags = threshold_from_contamination(train_scores, contamination);
  return FittedDetector(id, hyperparams, std::move(state), std::move(train_scores), contamination,
                        flags.threshold, std::move(scaler), standardized, seed, data.d());
}

std::shared_ptr<const DetectorState> state_from_json(DetectorId id, const json& j) {
  switch (id) {
    case DetectorId::kKnn: return KnnState::from_json(j);
    case DetectorId::kLof: return LofState::from_json(j);
    case DetectorId::kIforest: return IforestState::from_json(j);
    case DetectorId::kAe: return AeState::from_json(j);
    case DetectorId::kVae: return VaeState::from_json(j);
    case DetectorId::kDeepSvdd: return DeepSvddState::from_json(j);
    case DetectorId::kAe1Svm: return Ae1SvmState::from_json(j);
    case DetectorId::kDevNet: return DevNetState::from_json(j);
    case DetectorId::kLunar: return LunarState::from_json(j);
  }
  fail(ErrorCode::kParse, "unknown detector state");
}

}  // namespace odsel
