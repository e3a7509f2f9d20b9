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

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "relpool/query.hpp"
#include "relpool/scene.hpp"
#include "relpool/template.hpp"

namespace relpool {

// Scalar weights of the additive query-scene compatibility score: per-noun
// detector weights (alpha), query/context co-occurrence weights (gamma) and
// per-triplet spatial weights (beta). Unlisted keys fall back to defaults.
struct CompatibilityWeights {
  double alpha_default = 1.0;
  double gamma_default = 0.0;
  double beta_default = 1.0;
  std::map<std::string, double> alpha;
  std::map<std::pair<std::string, std::string>, double> gamma;
  std::map<std::tuple<std::string, std::string, std::string>, double> beta;

  double alpha_for(const std::string& noun) const;
  double gamma_for(const std::string& noun, const std::string& context) const;
  double beta_for(const SpatialTriplet& triplet) const;
};

// JSON weight files: {"alpha":{"default":1.0,"bed":2.0},
// "gamma":{"default":0.0,"bed|lamp":0.5},
// "beta":{"default":1.0,"picture|bed|above":2.0}}.
CompatibilityWeights load_weights(const std::string& path);
void save_weights(const CompatibilityWeights& weights, const std::string& path);

struct ScoredScene {
  std::string scene_id;
  double score = 0.0;
};

struct RankedResult {
  std::string query_id;
  std::vector<ScoredScene> ranking;  // scores non-increasing, ties by scene id
};

// Best detector-score-weighted template response over all (reference,
// subject) detection pairs of the triplet's categories: for each pair,
// score_ref * score_subj * pool(template, ref center, dirac(subject)).
// 0 when either category is missing; self-pairs are skipped.
double spatial_term(const TemplateBank& bank, const SpatialTriplet& triplet,
                    const Scene& scene, int grid);

// Additive compatibility: per-noun detector evidence (alpha * best score),
// query/context co-occurrence (gamma * best context score) and spatial terms
// (beta * spatial_term). Missing categories contribute 0.
double score_scene(const StructuredQuery& q, const Scene& scene,
                   const CompatibilityWeights& weights, const TemplateBank& bank,
                   int grid);

// Scores every corpus scene and sorts descending (ties by ascending scene
// id); jobs > 1 scores scenes in parallel with the same result.
RankedResult rank_scenes(const StructuredQuery& q, const Corpus& corpus,
                         const CompatibilityWeights& weights,
                         const TemplateBank& bank, int grid, int jobs = 1);

// CSV with header "query_id,rank,scene_id,score", 12 significant digits.
void save_rankings_csv(const std::vector<RankedResult>& results,
                       const std::string& path);
std::vector<RankedResult> load_rankings_csv(const std::string& path);

}  // namespace relpool
