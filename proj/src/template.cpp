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

#include "relpool/template.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace relpool {

using nlohmann::json;

double Template::sum() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double Template::l1_norm() const {
  double total = 0.0;
  for (double w : weights) total += std::abs(w);
  return total;
}

double Template::max_weight() const {
  return weights.empty() ? 0.0 : *std::max_element(weights.begin(), weights.end());
}

Template Template::zeros(const std::string& name, int size) {
  if (size <= 0 || size % 2 == 0)
    throw ValidationError("template size must be a positive odd integer");
  Template t;
  t.name = name;
  t.size = size;
  t.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
  return t;
}

Template Template::uniform(const std::string& name, int size) {
  Template t = zeros(name, size);
  const double w = 1.0 / (static_cast<double>(size) * size);
  std::fill(t.weights.begin(), t.weights.end(), w);
  return t;
}

const Template& TemplateBank::at(const std::string& preposition) const {
  const auto it = templates.find(preposition);
  if (it == templates.end()) throw UnknownPreposition(preposition);
  return it->second;
}

int PoolingScheme::region_count() const {
  int total = 0;
  for (const Partition& p : partitions) total += p.nx * p.ny;
  return total;
}

std::string PoolingScheme::to_string() const {
  std::string out;
  for (const Partition& p : partitions) {
    if (!out.empty()) out += '+';
    out += std::to_string(p.nx) + "x" + std::to_string(p.ny);
  }
  return out;
}

PoolingScheme PoolingScheme::parse(const std::string& text) {
  PoolingScheme scheme;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('+', pos);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(pos, end - pos);
    const auto x = part.find('x');
    if (x == std::string::npos)
      throw ValidationError("bad pooling scheme partition '" + part + "'");
    Partition p;
    try {
      p.nx = std::stoi(part.substr(0, x));
      p.ny = std::stoi(part.substr(x + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad pooling scheme partition '" + part + "'");
    }
    if (p.nx <= 0 || p.ny <= 0)
      throw ValidationError("pooling scheme partitions must be positive");
    scheme.partitions.push_back(p);
    pos = end + 1;
  }
  if (scheme.partitions.empty())
    throw ValidationError("pooling scheme must have at least one partition");
  return scheme;
}

double pool(const Template& t, int ref_x, int ref_y, const ScoreMap& u) {
  const int grid = u.resolution;
  if (t.size != 2 * grid - 1)
    throw DimensionMismatch("template size " + std::to_string(t.size) +
                            " does not cover a grid of " + std::to_string(grid));
  if (ref_x < 0 || ref_x >= grid || ref_y < 0 || ref_y >= grid)
    throw DimensionMismatch("reference center outside the grid");
  const int c = t.center();
  double acc = 0.0;
  for (int jy = 0; jy < t.size; ++jy) {
    const int my = ref_y - c + jy;
    if (my < 0 || my >= grid) continue;
    for (int jx = 0; jx < t.size; ++jx) {
      const int mx = ref_x - c + jx;
      if (mx < 0 || mx >= grid) continue;
      acc += t.weights[jy * t.size + jx] * u.values[my * grid + mx];
    }
  }
  return acc;
}

namespace {

struct DetectionPair {
  const Detection* ref;
  const Detection* subject;
};

std::vector<DetectionPair> matching_pairs(const Scene& scene,
                                          const SpatialTriplet& triplet) {
  const auto refs = scene.find_category(triplet.reference);
  const auto subjects = scene.find_category(triplet.subject);
  if (refs.empty()) throw MissingCategory(scene.id, triplet.reference);
  if (subjects.empty()) throw MissingCategory(scene.id, triplet.subject);
  std::vector<DetectionPair> pairs;
  for (const Detection* r : refs)
    for (const Detection* s : subjects)
      if (r->id != s->id) pairs.push_back({r, s});
  return pairs;
}

}  // namespace

TemplateBank estimate_templates(const Corpus& corpus,
                                const std::vector<TrainingPair>& pairs,
                                const PrepositionLexicon& lexicon, int grid) {
  const int size = 2 * grid - 1;
  TemplateBank bank;
  bank.grid = grid;
  bank.size = size;
  std::map<std::string, int> pair_counts;
  for (const std::string& p : lexicon.sorted()) {
    bank.templates.emplace(p, Template::zeros(p, size));
    pair_counts[p] = 0;
  }

  const int c = size / 2;
  for (const TrainingPair& tp : pairs) {
    const SpatialTriplet& triplet = tp.first;
    if (!bank.contains(triplet.preposition))
      throw UnknownPreposition(triplet.preposition);
    const Scene* scene = corpus.find_scene(tp.second);
    if (scene == nullptr)
      throw ValidationError("training pair names unknown scene '" + tp.second + "'");
    const auto det_pairs = matching_pairs(*scene, triplet);
    if (det_pairs.empty()) continue;  // same category, single detection
    const double pair_weight = 1.0 / static_cast<double>(det_pairs.size());
    Template& accum = bank.templates.at(triplet.preposition);
    for (const DetectionPair& dp : det_pairs) {
      const int rx = cell_index(dp.ref->box.center_x(), grid);
      const int ry = cell_index(dp.ref->box.center_y(), grid);
      ScoreMap mask = box_mask(dp.subject->box, grid);
      double mass = mask.total_mass();
      if (mass == 0.0) {
        // Box too small to cover any cell center; fall back to its center.
        mask = dirac_image(dp.subject->box, grid);
        mass = 1.0;
      }
      const double scale = pair_weight / mass;
      for (int my = 0; my < grid; ++my)
        for (int mx = 0; mx < grid; ++mx) {
          const double v = mask.at(mx, my);
          if (v == 0.0) continue;
          accum.at(c + mx - rx, c + my - ry) += scale * v;
        }
    }
    pair_counts[triplet.preposition] += 1;
  }

  for (auto& [name, t] : bank.templates) {
    if (pair_counts[name] == 0) {
      t = Template::uniform(name, size);
      continue;
    }
    const double total = t.sum();
    if (total > 0.0)
      for (double& w : t.weights) w /= total;
  }
  return bank;
}

std::vector<double> discretize(const ScoreMap& u, const PoolingScheme& scheme) {
  const int grid = u.resolution;
  std::vector<double> out;
  out.reserve(scheme.region_count());
  for (const PoolingScheme::Partition& part : scheme.partitions) {
    std::vector<double> bins(static_cast<std::size_t>(part.nx) * part.ny, 0.0);
    for (int iy = 0; iy < grid; ++iy) {
      const int ry = static_cast<int>((iy + 0.5) / grid * part.ny);
      for (int ix = 0; ix < grid; ++ix) {
        const int rx = static_cast<int>((ix + 0.5) / grid * part.nx);
        bins[ry * part.nx + rx] += u.values[iy * grid + ix];
      }
    }
    out.insert(out.end(), bins.begin(), bins.end());
  }
  return out;
}

ScoreMap offset_map(const Box& ref, const Box& rel, int grid) {
  const int size = 2 * grid - 1;
  ScoreMap m;
  m.resolution = size;
  m.form = MapForm::dirac;
  m.values.assign(static_cast<std::size_t>(size) * size, 0.0);
  const int dx = cell_index(rel.center_x(), grid) - cell_index(ref.center_x(), grid);
  const int dy = cell_index(rel.center_y(), grid) - cell_index(ref.center_y(), grid);
  m.at(grid - 1 + dx, grid - 1 + dy) = 1.0;
  return m;
}

ScoreMap offset_map(const Detection& ref, const Detection& rel, int grid) {
  return offset_map(ref.box, rel.box, grid);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void export_heatmap(const Template& t, const std::string& pgm_path) {
  std::ofstream pgm(pgm_path);
  if (!pgm) throw IoError("cannot write heatmap '" + pgm_path + "'");
  const double max_w = t.max_weight();
  pgm << "P2\n" << t.size << " " << t.size << "\n255\n";
  for (int jy = 0; jy < t.size; ++jy) {
    for (int jx = 0; jx < t.size; ++jx) {
      long pixel = 0;
      if (max_w > 0.0) {
        pixel = std::lround(255.0 * t.at(jx, jy) / max_w);
        pixel = std::clamp(pixel, 0L, 255L);
      }
      pgm << pixel << (jx + 1 == t.size ? "" : " ");
    }
    pgm << "\n";
  }
  if (!pgm) throw IoError("failed writing heatmap '" + pgm_path + "'");

  std::string csv_path = pgm_path;
  const auto dot = csv_path.rfind('.');
  if (dot != std::string::npos && csv_path.substr(dot) == ".pgm")
    csv_path.resize(dot);
  csv_path += ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write heatmap csv '" + csv_path + "'");
  for (int jy = 0; jy < t.size; ++jy) {
    for (int jx = 0; jx < t.size; ++jx)
      csv << format_double(t.at(jx, jy)) << (jx + 1 == t.size ? "" : ",");
    csv << "\n";
  }
  if (!csv) throw IoError("failed writing heatmap csv '" + csv_path + "'");
}

void save_template_bank(const TemplateBank& bank, const std::string& path) {
  json j;
  j["grid"] = bank.grid;
  j["size"] = bank.size;
  json templates = json::object();
  for (const auto& [name, t] : bank.templates) templates[name] = t.weights;
  j["templates"] = templates;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write template bank '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing template bank '" + path + "'");
}

TemplateBank load_template_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open template bank '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad template bank: ") + e.what());
  }
  TemplateBank bank;
  try {
    bank.grid = j.at("grid").get<int>();
    bank.size = j.at("size").get<int>();
    for (const auto& [name, weights] : j.at("templates").items()) {
      Template t = Template::zeros(name, bank.size);
      t.weights = weights.get<std::vector<double>>();
      if (static_cast<int>(t.weights.size()) != bank.size * bank.size)
        throw ValidationError("template '" + name + "' has wrong weight count");
      bank.templates.emplace(name, std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad template bank: ") + e.what());
  }
  if (bank.size != 2 * bank.grid - 1)
    throw ValidationError("template bank size must equal 2*grid-1");
  return bank;
}

}  // namespace relpool
