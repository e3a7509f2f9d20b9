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

#include "relpool/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "relpool/log.hpp"
#include "relpool/rng.hpp"

namespace relpool {

std::set<std::string> rule_relation(const Box& a, const Box& b,
                                    const GenConfig& cfg) {
  std::set<std::string> labels;
  const double ax = a.center_x(), ay = a.center_y();
  const double bx = b.center_x(), by = b.center_y();
  const bool above = ay < by - cfg.tau;
  if (above) labels.insert("above");
  if (ay > by + cfg.tau) labels.insert("below");
  if (ax < bx - cfg.tau) labels.insert("left of");
  if (ax > bx + cfg.tau) labels.insert("right of");
  if (a.area() > 0.0 &&
      intersection_area(a, b) / a.area() >= cfg.contain_overlap) {
    labels.insert("in");
    labels.insert("inside of");
  }
  if (above) {
    const double vertical_gap = b.y_min - a.y_max;
    const double horizontal_overlap =
        std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    if (vertical_gap < cfg.tau / 2.0 && horizontal_overlap > 0.0)
      labels.insert("on");
  }
  return labels;
}

bool scene_matches_triplet(const Scene& scene, const SpatialTriplet& triplet,
                           const GenConfig& cfg) {
  for (const Detection& subject : scene.detections) {
    if (subject.category != triplet.subject) continue;
    for (const Detection& ref : scene.detections) {
      if (ref.category != triplet.reference || ref.id == subject.id) continue;
      if (rule_relation(subject.box, ref.box, cfg).count(triplet.preposition))
        return true;
    }
  }
  return false;
}

namespace {

Box random_box(Rng& rng) {
  const double w = rng.uniform(0.06, 0.30);
  const double h = rng.uniform(0.06, 0.30);
  const double cx = rng.uniform(w / 2.0, 1.0 - w / 2.0);
  const double cy = rng.uniform(h / 2.0, 1.0 - h / 2.0);
  return Box{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

// A smaller box fully inside the parent, so containment queries have support.
Box contained_box(Rng& rng, const Box& parent) {
  const double w = parent.width() * rng.uniform(0.3, 0.6);
  const double h = parent.height() * rng.uniform(0.3, 0.6);
  const double cx = rng.uniform(parent.x_min + w / 2.0, parent.x_max - w / 2.0);
  const double cy = rng.uniform(parent.y_min + h / 2.0, parent.y_max - h / 2.0);
  return Box{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

// A box resting on top of the parent: touching gap, horizontal overlap.
Box stacked_box(Rng& rng, const Box& parent, double tau) {
  const double w = rng.uniform(0.06, std::max(0.08, parent.width()));
  const double gap = rng.uniform(0.0, tau / 4.0);
  double h = rng.uniform(0.06, 0.30);
  double y_max = parent.y_min - gap;
  double y_min = y_max - h;
  if (y_min < 0.0) {
    y_min = 0.0;
    h = y_max - y_min;
  }
  double cx = parent.center_x() + rng.uniform(-parent.width() / 4.0,
                                              parent.width() / 4.0);
  cx = std::clamp(cx, w / 2.0, 1.0 - w / 2.0);
  return Box{cx - w / 2.0, y_min, cx + w / 2.0, y_max};
}

double detector_score(Rng& rng, double sigma) {
  if (sigma == 0.0) return 1.0;
  const double noisy = 1.0 - std::abs(rng.normal() * sigma);
  return std::clamp(noisy, 1e-9, 1.0);
}

Scene random_scene(Rng& rng, const GenConfig& cfg, int index) {
  Scene scene;
  scene.id = "s" + std::to_string(1000 + index);
  scene.width = 640;
  scene.height = 480;
  const int count = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  for (int i = 0; i < count; ++i) {
    Detection d;
    d.id = i;
    d.category = cfg.categories[rng.uniform_int(
        0, static_cast<int>(cfg.categories.size()) - 1)];
    const double arrangement = rng.uniform();
    if (i > 0 && arrangement < 0.25) {
      const Box& parent = scene.detections[rng.uniform_int(0, i - 1)].box;
      d.box = contained_box(rng, parent);
    } else if (i > 0 && arrangement < 0.45) {
      const Box& parent = scene.detections[rng.uniform_int(0, i - 1)].box;
      if (parent.y_min > 0.1) {
        d.box = stacked_box(rng, parent, cfg.tau);
      } else {
        d.box = random_box(rng);
      }
    } else {
      d.box = random_box(rng);
    }
    d.score = detector_score(rng, cfg.noise_sigma);
    scene.detections.push_back(std::move(d));
  }
  return scene;
}

using TripletKey = std::tuple<std::string, std::string, std::string>;

}  // namespace

GeneratedData generate_corpus(const GenConfig& cfg) {
  if (cfg.tau <= 0.0) throw ValidationError("tau must be positive");
  if (cfg.noise_sigma < 0.0) throw ValidationError("noise sigma must be >= 0");
  if (cfg.categories.empty()) throw ValidationError("category list is empty");
  if (cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects)
    throw ValidationError("bad objects-per-scene range");

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ull);

    GeneratedData data;
    for (int i = 0; i < cfg.n_scenes; ++i)
      data.corpus.scenes.push_back(random_scene(rng, cfg, i));
    for (const Scene& s : data.corpus.scenes)
      for (const Detection& d : s.detections)
        data.corpus.vocabulary.insert(d.category);

    // Candidate queries: distinct-category triplets that hold somewhere.
    std::set<TripletKey> seen;
    for (const Scene& s : data.corpus.scenes)
      for (const Detection& subject : s.detections)
        for (const Detection& ref : s.detections) {
          if (ref.id == subject.id || ref.category == subject.category) continue;
          for (const std::string& rel :
               rule_relation(subject.box, ref.box, cfg))
            seen.insert({subject.category, rel, ref.category});
        }

    std::vector<SpatialTriplet> candidates;
    for (const auto& [subject, rel, reference] : seen) {
      const SpatialTriplet t{subject, rel, reference};
      int relevant = 0;
      for (const Scene& s : data.corpus.scenes)
        relevant += scene_matches_triplet(s, t, cfg);
      if (relevant >= 1 && relevant < cfg.n_scenes) candidates.push_back(t);
    }
    if (candidates.empty()) {
      log_debug("generator attempt " + std::to_string(attempt) +
                " produced no valid queries, retrying");
      continue;
    }

    // Deterministic shuffle over the (already sorted) candidate list.
    for (std::size_t i = candidates.size(); i > 1; --i)
      std::swap(candidates[i - 1],
                candidates[rng.uniform_int(0, static_cast<int>(i) - 1)]);
    const std::size_t take =
        std::min<std::size_t>(candidates.size(), cfg.n_queries);

    for (std::size_t qi = 0; qi < take; ++qi) {
      StructuredQuery q;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "q%03u", static_cast<unsigned>(qi + 1));
      q.id = buf;
      q.triplets.push_back(candidates[qi]);
      data.queries.push_back(std::move(q));
    }

    for (const StructuredQuery& q : data.queries)
      for (const Scene& s : data.corpus.scenes)
        data.corpus.annotations.push_back(
            {q.id, s.id, scene_matches_triplet(s, q.triplets[0], cfg)});

    return data;
  }
  throw GenerationError("could not satisfy query constraints after " +
                        std::to_string(cfg.max_attempts) + " attempts");
}

}  // namespace relpool
