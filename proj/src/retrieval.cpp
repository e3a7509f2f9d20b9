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

#include "relpool/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace relpool {

using nlohmann::json;

double CompatibilityWeights::alpha_for(const std::string& noun) const {
  const auto it = alpha.find(noun);
  return it == alpha.end() ? alpha_default : it->second;
}

double CompatibilityWeights::gamma_for(const std::string& noun,
                                       const std::string& context) const {
  const auto it = gamma.find({noun, context});
  return it == gamma.end() ? gamma_default : it->second;
}

double CompatibilityWeights::beta_for(const SpatialTriplet& triplet) const {
  const auto it =
      beta.find({triplet.subject, triplet.reference, triplet.preposition});
  return it == beta.end() ? beta_default : it->second;
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  parts.push_back(current);
  return parts;
}

}  // namespace

CompatibilityWeights load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weights file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad weights file: ") + e.what());
  }
  CompatibilityWeights w;
  try {
    if (j.contains("alpha")) {
      for (const auto& [key, value] : j["alpha"].items()) {
        if (key == "default")
          w.alpha_default = value.get<double>();
        else
          w.alpha[key] = value.get<double>();
      }
    }
    if (j.contains("gamma")) {
      for (const auto& [key, value] : j["gamma"].items()) {
        if (key == "default") {
          w.gamma_default = value.get<double>();
          continue;
        }
        const auto parts = split_on(key, '|');
        if (parts.size() != 2)
          throw ValidationError("gamma key must be \"noun|context\": " + key);
        w.gamma[{parts[0], parts[1]}] = value.get<double>();
      }
    }
    if (j.contains("beta")) {
      for (const auto& [key, value] : j["beta"].items()) {
        if (key == "default") {
          w.beta_default = value.get<double>();
          continue;
        }
        const auto parts = split_on(key, '|');
        if (parts.size() != 3)
          throw ValidationError(
              "beta key must be \"subject|reference|preposition\": " + key);
        w.beta[{parts[0], parts[1], parts[2]}] = value.get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad weights file: ") + e.what());
  }
  return w;
}

void save_weights(const CompatibilityWeights& weights, const std::string& path) {
  json alpha{{"default", weights.alpha_default}};
  for (const auto& [noun, v] : weights.alpha) alpha[noun] = v;
  json gamma{{"default", weights.gamma_default}};
  for (const auto& [key, v] : weights.gamma)
    gamma[key.first + "|" + key.second] = v;
  json beta{{"default", weights.beta_default}};
  for (const auto& [key, v] : weights.beta)
    beta[std::get<0>(key) + "|" + std::get<1>(key) + "|" + std::get<2>(key)] = v;
  const json j{{"alpha", alpha}, {"gamma", gamma}, {"beta", beta}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weights file '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing weights file '" + path + "'");
}

double spatial_term(const TemplateBank& bank, const SpatialTriplet& triplet,
                    const Scene& scene, int grid) {
  const Template& t = bank.at(triplet.preposition);
  const auto refs = scene.find_category(triplet.reference);
  const auto subjects = scene.find_category(triplet.subject);
  if (refs.empty() || subjects.empty()) return 0.0;
  bool any = false;
  double best = 0.0;
  for (const Detection* ref : refs) {
    const int rx = cell_index(ref->box.center_x(), grid);
    const int ry = cell_index(ref->box.center_y(), grid);
    for (const Detection* subject : subjects) {
      if (subject->id == ref->id) continue;
      const double value =
          ref->score * subject->score *
          pool(t, rx, ry, dirac_image(subject->box, grid));
      if (!any || value > best) {
        best = value;
        any = true;
      }
    }
  }
  return any ? best : 0.0;
}

double score_scene(const StructuredQuery& q, const Scene& scene,
                   const CompatibilityWeights& weights,
                   const TemplateBank& bank, int grid) {
  const std::set<std::string> query_nouns = q.term_nouns();

  double total = 0.0;
  for (const std::string& noun : query_nouns)
    total += weights.alpha_for(noun) * scene.max_score(noun);

  for (const std::string& noun : query_nouns)
    for (const std::string& context : scene.categories()) {
      if (query_nouns.count(context)) continue;
      total += weights.gamma_for(noun, context) * scene.max_score(context);
    }

  for (const SpatialTriplet& triplet : q.triplets)
    total += weights.beta_for(triplet) * spatial_term(bank, triplet, scene, grid);

  return total;
}

RankedResult rank_scenes(const StructuredQuery& q, const Corpus& corpus,
                         const CompatibilityWeights& weights,
                         const TemplateBank& bank, int grid, int jobs) {
  const std::size_t n = corpus.scenes.size();
  std::vector<double> scores(n, 0.0);
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i)
      scores[i] = score_scene(q, corpus.scenes[i], weights, bank, grid);
  } else {
    const std::size_t workers = std::min<std::size_t>(jobs, n);
    std::vector<std::thread> pool_threads;
    for (std::size_t w = 0; w < workers; ++w) {
      pool_threads.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers)
          scores[i] = score_scene(q, corpus.scenes[i], weights, bank, grid);
      });
    }
    for (std::thread& th : pool_threads) th.join();
  }

  RankedResult result;
  result.query_id = q.id;
  result.ranking.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    result.ranking.push_back({corpus.scenes[i].id, scores[i]});
  std::sort(result.ranking.begin(), result.ranking.end(),
            [](const ScoredScene& a, const ScoredScene& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.scene_id < b.scene_id;
            });
  return result;
}

void save_rankings_csv(const std::vector<RankedResult>& results,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ranking file '" + path + "'");
  out << "query_id,rank,scene_id,score\n";
  char buf[64];
  for (const RankedResult& r : results) {
    for (std::size_t i = 0; i < r.ranking.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.12g", r.ranking[i].score);
      out << r.query_id << "," << (i + 1) << "," << r.ranking[i].scene_id << ","
          << buf << "\n";
    }
  }
  if (!out) throw IoError("failed writing ranking file '" + path + "'");
}

std::vector<RankedResult> load_rankings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ranking file '" + path + "'");
  std::vector<RankedResult> results;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("query_id,", 0) == 0) continue;
    const auto parts = split_on(line, ',');
    if (parts.size() != 4)
      throw ParseError(line_no, "expected query_id,rank,scene_id,score");
    double score = 0.0;
    try {
      score = std::stod(parts[3]);
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad score '" + parts[3] + "'");
    }
    if (results.empty() || results.back().query_id != parts[0]) {
      results.push_back({parts[0], {}});
    }
    results.back().ranking.push_back({parts[2], score});
  }
  return results;
}

}  // namespace relpool
