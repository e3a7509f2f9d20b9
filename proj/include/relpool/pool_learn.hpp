// Copyright 2026 The relpool authors
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
#include <map>
#include <string>
#include <vector>

#include "relpool/query.hpp"
#include "relpool/scene.hpp"
#include "relpool/template.hpp"

namespace relpool {

// Logistic relevance model over pooled template responses: for an example
// with relation k, the single feature is pool(template_k, ref, dirac(subj))
// and the prediction is sigmoid(cls[k] * feature + bias). Templates are free
// parameters during training; finalize() re-normalizes each to unit L1 and
// folds the scale into its classifier weight.
struct PoolLearnParams {
  TemplateBank bank;
  double bias = 0.0;
  std::map<std::string, double> cls;  // per-relation classifier weight

  double cls_for(const std::string& relation) const;
};

struct TrainExample {
  SpatialTriplet triplet;
  Scene scene;  // must contain both triplet categories
  int label = 0;  // 1 relevant, 0 not
};

struct PoolHyper {
  double lr = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::uint64_t seed = 0;  // recorded for provenance; training is full-batch
};

// Mean logistic loss over the batch plus l2 * squared norm of all template
// weights. The gradient has the same shape as the parameters; the pooled
// feature is linear in the template weights, so its gradient is the dirac
// mass placed at the subject's offset cell.
std::pair<double, PoolLearnParams> loss_and_grad(
    const PoolLearnParams& params, const std::vector<TrainExample>& batch,
    double l2);

// Full-batch gradient descent from the given bank (classifier weights start
// at 1, bias at 0). Deterministic; loss_curve, when provided, receives the
// pre-update loss of every epoch. DivergenceError when the loss leaves the
// finite range.
PoolLearnParams train_pooling(const std::vector<TrainExample>& data,
                              const TemplateBank& init, const PoolHyper& hyper,
                              std::vector<double>* loss_curve = nullptr);

double predict(const PoolLearnParams& params, const TrainExample& example);

// Examples from relevance annotations: one per (query triplet, annotated
// scene) with the annotation's label, skipping scenes that lack either
// category (no feature is defined there).
std::vector<TrainExample> build_train_examples(
    const Corpus& corpus, const std::vector<StructuredQuery>& queries);

// Bank JSON with "bias" and "cls" alongside the templates.
void save_pool_params(const PoolLearnParams& params, const std::string& path);
PoolLearnParams load_pool_params(const std::string& path);

}  // namespace relpool
