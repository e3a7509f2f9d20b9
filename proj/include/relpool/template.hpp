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
#include <utility>
#include <vector>

#include "relpool/query.hpp"
#include "relpool/scene.hpp"

namespace relpool {

// A spatial template: an S-by-S grid of weights over positional offsets,
// centered on a reference object. Cell (S/2, S/2) is zero offset; with
// S = 2G-1 the template covers every offset between two cells of a G-grid.
// Estimated templates are nonnegative with weights summing to 1; trained
// templates may hold arbitrary finite weights.
struct Template {
  std::string name;
  int size = 0;
  std::vector<double> weights;  // row-major, weights[jy * size + jx]

  double at(int jx, int jy) const { return weights[jy * size + jx]; }
  double& at(int jx, int jy) { return weights[jy * size + jx]; }
  int center() const { return size / 2; }
  double sum() const;
  double l1_norm() const;
  double max_weight() const;

  static Template zeros(const std::string& name, int size);
  static Template uniform(const std::string& name, int size);
};

// One template per preposition, all sharing the offset grid geometry.
struct TemplateBank {
  int grid = 101;  // G of the score maps the bank pools over
  int size = 201;  // template side, 2*grid - 1
  std::map<std::string, Template> templates;

  const Template& at(const std::string& preposition) const;
  bool contains(const std::string& preposition) const {
    return templates.count(preposition) != 0;
  }
};

// Rectangular partitions of the unit square, e.g. 2x2 + 4x4 (20 regions).
struct PoolingScheme {
  struct Partition {
    int nx = 1;
    int ny = 1;
  };
  std::vector<Partition> partitions;

  int region_count() const;
  std::string to_string() const;  // "2x2+4x4"
  static PoolingScheme parse(const std::string& text);
  static PoolingScheme defaults() { return PoolingScheme{{{2, 2}, {4, 4}}}; }
};

// Weighted pooling of a score map against a template centered at the given
// grid cell: sum over template cells j of w[j] * u[ref - center + j], with
// positions outside the map contributing 0.
double pool(const Template& t, int ref_x, int ref_y, const ScoreMap& u);

// A (triplet, scene id) supervision pair: the triplet holds in the scene.
using TrainingPair = std::pair<SpatialTriplet, std::string>;

// Estimates one template per lexicon preposition by accumulating, for every
// matching (reference, subject) detection pair, the subject's box mask
// (normalized to unit mass) centered at the reference box center. Pairs
// within one scene share weight 1/(pair count); detections never pair with
// themselves. Each template is L1-normalized; prepositions with no training
// pairs fall back to the uniform template.
TemplateBank estimate_templates(const Corpus& corpus,
                                const std::vector<TrainingPair>& pairs,
                                const PrepositionLexicon& lexicon, int grid);

// Region masses of a score map under the scheme, concatenated in scheme
// order, row-major within each partition. Cells belong to the region
// containing their center, so each partition's entries sum to the map mass.
std::vector<double> discretize(const ScoreMap& u, const PoolingScheme& scheme);

// Dirac image of the related detection in reference-centered offset
// coordinates: a (2G-1)-square map with unit mass at (G-1) + cell(rel) -
// cell(ref).
ScoreMap offset_map(const Detection& ref, const Detection& rel, int grid);
ScoreMap offset_map(const Box& ref, const Box& rel, int grid);

// Writes the template as a P2 graymap scaled to maxval 255 (pixel =
// round(255 * w / max_w), negatives clamped to 0, all-zero template stays
// black) plus a CSV twin with the raw weights next to it.
void export_heatmap(const Template& t, const std::string& pgm_path);

// Bank files: {"grid":G,"size":S,"templates":{"above":[row-major floats],..}}
// Files written by pool training additionally carry "bias" and "cls" keys,
// which load_template_bank ignores.
void save_template_bank(const TemplateBank& bank, const std::string& path);
TemplateBank load_template_bank(const std::string& path);

}  // namespace relpool
