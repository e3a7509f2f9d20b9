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

#include "relpool/scene.hpp"

#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace relpool {

using nlohmann::json;

std::vector<const Detection*> Scene::find_category(
    const std::string& category) const {
  std::vector<const Detection*> out;
  for (const Detection& d : detections)
    if (d.category == category) out.push_back(&d);
  return out;
}

double Scene::max_score(const std::string& category) const {
  double best = 0.0;
  for (const Detection& d : detections)
    if (d.category == category && d.score > best) best = d.score;
  return best;
}

std::set<std::string> Scene::categories() const {
  std::set<std::string> out;
  for (const Detection& d : detections) out.insert(d.category);
  return out;
}

const Scene* Corpus::find_scene(const std::string& id) const {
  for (const Scene& s : scenes)
    if (s.id == id) return &s;
  return nullptr;
}

double ScoreMap::total_mass() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

namespace {

void require_odd_grid(int grid) {
  if (grid <= 0 || grid % 2 == 0)
    throw ValidationError("grid resolution must be a positive odd integer, got " +
                          std::to_string(grid));
}

}  // namespace

ScoreMap dirac_image(const Box& b, int grid) {
  require_odd_grid(grid);
  ScoreMap m;
  m.resolution = grid;
  m.form = MapForm::dirac;
  m.values.assign(static_cast<std::size_t>(grid) * grid, 0.0);
  m.at(cell_index(b.center_x(), grid), cell_index(b.center_y(), grid)) = 1.0;
  return m;
}

ScoreMap dirac_image(const Detection& d, int grid) {
  return dirac_image(d.box, grid);
}

ScoreMap box_mask(const Box& b, int grid) {
  require_odd_grid(grid);
  ScoreMap m;
  m.resolution = grid;
  m.form = MapForm::box;
  m.values.assign(static_cast<std::size_t>(grid) * grid, 0.0);
  for (int iy = 0; iy < grid; ++iy) {
    const double cy = (iy + 0.5) / grid;
    if (cy < b.y_min || cy > b.y_max) continue;
    for (int ix = 0; ix < grid; ++ix) {
      const double cx = (ix + 0.5) / grid;
      if (cx >= b.x_min && cx <= b.x_max) m.at(ix, iy) = 1.0;
    }
  }
  return m;
}

ScoreMap box_mask(const Detection& d, int grid) { return box_mask(d.box, grid); }

namespace {

Detection parse_detection(const json& j, std::size_t line_no) {
  if (!j.is_object()) throw ParseError(line_no, "detection must be an object");
  Detection d;
  try {
    d.id = j.at("id").get<int>();
    d.category = j.at("category").get<std::string>();
    d.score = j.at("score").get<double>();
    const auto& box = j.at("box");
    if (!box.is_array() || box.size() != 4)
      throw ParseError(line_no, "box must be [x_min,y_min,x_max,y_max]");
    d.box = Box{box[0].get<double>(), box[1].get<double>(),
                box[2].get<double>(), box[3].get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(line_no, std::string("bad detection: ") + e.what());
  }
  return d;
}

void validate_detection(const Detection& d, const std::string& scene_id) {
  const std::string context =
      "scene '" + scene_id + "' detection " + std::to_string(d.id);
  if (d.category.empty())
    throw ValidationError(context + ": category must be nonempty");
  if (!(d.score >= 0.0 && d.score <= 1.0))
    throw ValidationError(context + ": score must be in [0,1]");
  validate_box(d.box, context);
}

Scene parse_scene(const json& j, std::size_t line_no) {
  Scene s;
  try {
    s.id = j.at("id").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    for (const auto& dj : j.at("detections"))
      s.detections.push_back(parse_detection(dj, line_no));
  } catch (const json::exception& e) {
    throw ParseError(line_no, std::string("bad scene: ") + e.what());
  }
  if (s.width <= 0 || s.height <= 0)
    throw ValidationError("scene '" + s.id + "': width and height must be positive");
  std::set<int> ids;
  for (const Detection& d : s.detections) {
    validate_detection(d, s.id);
    if (!ids.insert(d.id).second)
      throw ValidationError("scene '" + s.id + "': duplicate detection id " +
                            std::to_string(d.id));
  }
  return s;
}

RelevanceAnnotation parse_annotation(const json& j, std::size_t line_no) {
  RelevanceAnnotation a;
  try {
    a.query_id = j.at("query").get<std::string>();
    a.scene_id = j.at("scene").get<std::string>();
    a.relevant = j.at("relevant").get<bool>();
  } catch (const json::exception& e) {
    throw ParseError(line_no, std::string("bad relevance line: ") + e.what());
  }
  return a;
}

json detection_to_json(const Detection& d) {
  return json{{"id", d.id},
              {"category", d.category},
              {"score", d.score},
              {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}};
}

json scene_to_json(const Scene& s) {
  json dets = json::array();
  for (const Detection& d : s.detections) dets.push_back(detection_to_json(d));
  return json{{"type", "scene"},
              {"id", s.id},
              {"width", s.width},
              {"height", s.height},
              {"detections", dets}};
}

json annotation_to_json(const RelevanceAnnotation& a) {
  return json{{"type", "relevance"},
              {"query", a.query_id},
              {"scene", a.scene_id},
              {"relevant", a.relevant}};
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file '" + path + "'");

  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> scene_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    std::string type;
    try {
      type = j.at("type").get<std::string>();
    } catch (const json::exception&) {
      throw ParseError(line_no, "missing \"type\" field");
    }
    if (type == "scene") {
      Scene s = parse_scene(j, line_no);
      if (!scene_ids.insert(s.id).second)
        throw ValidationError("duplicate scene id '" + s.id + "'");
      corpus.scenes.push_back(std::move(s));
    } else if (type == "relevance") {
      corpus.annotations.push_back(parse_annotation(j, line_no));
    } else {
      throw ParseError(line_no, "unknown line type '" + type + "'");
    }
  }

  for (const Scene& s : corpus.scenes)
    for (const Detection& d : s.detections) corpus.vocabulary.insert(d.category);
  // Annotation scene ids are only checkable when the file carries scenes;
  // annotation-only files are paired with a corpus downstream.
  if (!corpus.scenes.empty()) {
    for (const RelevanceAnnotation& a : corpus.annotations)
      if (corpus.find_scene(a.scene_id) == nullptr)
        throw ValidationError("relevance for unknown scene '" + a.scene_id + "'");
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file '" + path + "'");
  for (const Scene& s : corpus.scenes) out << scene_to_json(s).dump() << "\n";
  for (const RelevanceAnnotation& a : corpus.annotations)
    out << annotation_to_json(a).dump() << "\n";
  if (!out) throw IoError("failed writing corpus file '" + path + "'");
}

std::vector<RelevanceAnnotation> load_annotations(const std::string& path) {
  return load_corpus(path).annotations;
}

void save_annotations(const std::vector<RelevanceAnnotation>& annotations,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write relevance file '" + path + "'");
  for (const RelevanceAnnotation& a : annotations)
    out << annotation_to_json(a).dump() << "\n";
  if (!out) throw IoError("failed writing relevance file '" + path + "'");
}

}  // namespace relpool
