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
#include <set>
#include <string>
#include <vector>

#include "relpool/geometry.hpp"

namespace relpool {

// One detector output: a category name, a normalized box and a confidence
// score in [0,1]. The id is unique within its scene.
struct Detection {
  int id = 0;
  std::string category;
  double score = 1.0;
  Box box;
};

struct Scene {
  std::string id;
  int width = 0;   // pixel provenance only, geometry is normalized
  int height = 0;
  std::vector<Detection> detections;

  std::vector<const Detection*> find_category(const std::string& category) const;
  // Highest detector score among detections of the category, 0 when absent.
  double max_score(const std::string& category) const;
  std::set<std::string> categories() const;
};

struct RelevanceAnnotation {
  std::string query_id;
  std::string scene_id;
  bool relevant = false;
};

struct Corpus {
  std::vector<Scene> scenes;
  std::set<std::string> vocabulary;  // union of detection categories
  std::vector<RelevanceAnnotation> annotations;

  const Scene* find_scene(const std::string& id) const;
};

enum class MapForm { dense, dirac, box };

// A G-by-G grid of scores over the unit square, stored row-major: value at
// (ix, iy) is values[iy * resolution + ix]. Resolution is odd so the grid has
// an exact center cell.
struct ScoreMap {
  int resolution = 0;
  MapForm form = MapForm::dense;
  std::vector<double> values;

  double at(int ix, int iy) const { return values[iy * resolution + ix]; }
  double& at(int ix, int iy) { return values[iy * resolution + ix]; }
  double total_mass() const;
};

// Unit mass at the grid cell containing the detection's box center.
ScoreMap dirac_image(const Detection& d, int grid);
ScoreMap dirac_image(const Box& b, int grid);

// 1 for every cell whose center lies inside the box (boundary included).
ScoreMap box_mask(const Detection& d, int grid);
ScoreMap box_mask(const Box& b, int grid);

// Corpus files are UTF-8 JSON lines. Scene line:
//   {"type":"scene","id":str,"width":int,"height":int,
//    "detections":[{"id":int,"category":str,"score":float,
//                   "box":[x_min,y_min,x_max,y_max]}]}
// Annotation line:
//   {"type":"relevance","query":str,"scene":str,"relevant":bool}
// Malformed lines raise ParseError with the line number; invariant violations
// (box out of range, duplicate ids, ...) raise ValidationError.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Annotation-only files (no scenes) use the same line grammar.
std::vector<RelevanceAnnotation> load_annotations(const std::string& path);
void save_annotations(const std::vector<RelevanceAnnotation>& annotations,
                      const std::string& path);

}  // namespace relpool
