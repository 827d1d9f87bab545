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

// Training objectives of the deep detectors, exposed for gradient checks.
// The returned objectives hold references to their arguments.

#include <memory>

#include "odsel/detectors.h"
#include "odsel/nn.h"

namespace odsel::detail {

std::unique_ptr<nn::Objective> autoencoder_objective(nn::Mlp& encoder, nn::Mlp& decoder, const Matrix& x);
std::unique_ptr<nn::Objective> vae_objective(nn::Mlp& encoder, nn::Mlp& decoder, const Matrix& x, double beta);
std::unique_ptr<nn::Objective> svdd_objective(nn::Mlp& embedding, const Vector& center, const Matrix& x);
std::unique_ptr<nn::Objective> ae1svm_objective(nn::Mlp& encoder, nn::Mlp& decoder, const FourierMap& map,
                                                Vector& w, double& rho, const Matrix& x, double nu, double alpha);
std::unique_ptr<nn::Objective> deviation_objective(nn::Mlp& scorer, const Matrix& x, const Labels& labels,
                                                   double prior_mean, double prior_std, double margin);

}  // namespace odsel::detail
