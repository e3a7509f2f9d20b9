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
#include <set>
#include <string>
#include <vector>

#include "relpool/query.hpp"
#include "relpool/scene.hpp"

namespace relpool {

struct GenConfig {
  std::uint64_t seed = 42;
  int n_scenes = 40;
  std::vector<std::string> categories = {"bed",   "lamp",   "picture", "table",
                                         "chair", "window", "rug",     "shelf"};
  int min_objects = 2;
  int max_objects = 5;
  double tau = 0.15;             // axis offset threshold
  double contain_overlap = 1.0;  // area fraction required for 'in'/'inside of'
  double noise_sigma = 0.0;      // detector score noise
  int n_queries = 30;
  int max_attempts = 20;
};

// Relations that hold for "a <rel> b" under the rule set. Axis relations
// compare box centers against tau (y grows downward, so 'above' means smaller
// center y); 'in'/'inside of' require a's area to overlap b by at least
// contain_overlap; 'on' is 'above' with a vertical gap under tau/2 and
// horizontal overlap. The set may be empty or hold several labels.
std::set<std::string> rule_relation(const Box& a, const Box& b,
                                    const GenConfig& cfg);

// True when the scene holds detections of both categories arranged so that
// rule_relation yields the triplet's preposition (distinct detections).
bool scene_matches_triplet(const Scene& scene, const SpatialTriplet& triplet,
                           const GenConfig& cfg);

struct GeneratedData {
  Corpus corpus;  // scenes plus the full relevance annotation grid
  std::vector<StructuredQuery> queries;
};

// Deterministic rule-based generator: random scenes, single-triplet queries
// sampled from relations that actually hold somewhere, and exhaustive
// relevance labels decided by rule_relation. Every emitted query has at
// least one relevant and one irrelevant scene; GenerationError when that
// cannot be met within the attempt budget.
GeneratedData generate_corpus(const GenConfig& cfg);

}  // namespace relpool
