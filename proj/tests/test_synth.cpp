#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "relpool/scene.hpp"
#include "relpool/synth.hpp"

using namespace relpool;

namespace {

// Independently coded rule oracle for the label check.
std::set<std::string> rule_oracle(const Box& a, const Box& b,
                                  const GenConfig& cfg) {
  std::set<std::string> labels;
  const double ax = (a.x_min + a.x_max) / 2.0;
  const double ay = (a.y_min + a.y_max) / 2.0;
  const double bx = (b.x_min + b.x_max) / 2.0;
  const double by = (b.y_min + b.y_max) / 2.0;
  if (by - ay > cfg.tau) labels.insert("above");
  if (ay - by > cfg.tau) labels.insert("below");
  if (bx - ax > cfg.tau) labels.insert("left of");
  if (ax - bx > cfg.tau) labels.insert("right of");
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (ix > 0 && iy > 0) ? ix * iy : 0.0;
  const double area = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  if (area > 0 && inter / area >= cfg.contain_overlap) {
    labels.insert("in");
    labels.insert("inside of");
  }
  if (by - ay > cfg.tau && b.y_min - a.y_max < cfg.tau / 2.0 && ix > 0.0)
    labels.insert("on");
  return labels;
}

Box mirror_x(const Box& b) {
  return Box{1.0 - b.x_max, b.y_min, 1.0 - b.x_min, b.y_max};
}

Box random_box(std::mt19937_64& gen) {
  const auto u = [&gen] { return (gen() >> 11) * 0x1.0p-53; };
  const double w = 0.05 + u() * 0.4;
  const double h = 0.05 + u() * 0.4;
  const double x0 = u() * (1.0 - w);
  const double y0 = u() * (1.0 - h);
  return Box{x0, y0, x0 + w, y0 + h};
}

}  // namespace

TEST_CASE("rule_relation on hand geometry") {
  GenConfig cfg;
  cfg.tau = 0.1;
  const Box a{0.4, 0.1, 0.6, 0.3};  // center (0.5, 0.2)
  const Box b{0.4, 0.7, 0.6, 0.9};  // center (0.5, 0.8)
  const auto labels = rule_relation(a, b, cfg);
  CHECK(labels.count("above") == 1);
  CHECK(labels.count("below") == 0);
  CHECK(labels.count("left of") == 0);
  CHECK(labels.count("right of") == 0);
}

TEST_CASE("identical boxes hold 'in' but no axis relation") {
  GenConfig cfg;
  const Box a{0.2, 0.2, 0.6, 0.6};
  const auto labels = rule_relation(a, a, cfg);
  CHECK(labels.count("in") == 1);
  CHECK(labels.count("inside of") == 1);
  CHECK(labels.count("above") == 0);
  CHECK(labels.count("below") == 0);
  CHECK(labels.count("left of") == 0);
  CHECK(labels.count("right of") == 0);
  CHECK(labels.count("on") == 0);
}

TEST_CASE("'on' requires contact and horizontal overlap") {
  GenConfig cfg;
  cfg.tau = 0.2;
  const Box top{0.3, 0.1, 0.5, 0.4};
  const Box base{0.3, 0.42, 0.5, 0.8};  // gap 0.02 < tau/2
  CHECK(rule_relation(top, base, cfg).count("on") == 1);

  const Box far_top{0.3, 0.05, 0.5, 0.2};
  const Box far_base{0.3, 0.6, 0.5, 0.9};  // gap 0.4 >= tau/2
  CHECK(rule_relation(far_top, far_base, cfg).count("on") == 0);

  const Box side_top{0.0, 0.1, 0.2, 0.4};
  const Box side_base{0.5, 0.42, 0.9, 0.8};  // no horizontal overlap
  CHECK(rule_relation(side_top, side_base, cfg).count("on") == 0);
}

TEST_CASE("rule_relation agrees with an independent oracle on random pairs") {
  GenConfig cfg;
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 2000; ++trial) {
    const Box a = random_box(gen);
    const Box b = random_box(gen);
    CHECK(rule_relation(a, b, cfg) == rule_oracle(a, b, cfg));
  }
}

TEST_CASE("mirroring boxes in x swaps left and right labels") {
  GenConfig cfg;
  std::mt19937_64 gen(29);
  for (int trial = 0; trial < 1000; ++trial) {
    const Box a = random_box(gen);
    const Box b = random_box(gen);
    auto labels = rule_relation(a, b, cfg);
    auto mirrored = rule_relation(mirror_x(a), mirror_x(b), cfg);
    std::set<std::string> expected;
    for (const std::string& l : labels) {
      if (l == "left of")
        expected.insert("right of");
      else if (l == "right of")
        expected.insert("left of");
      else
        expected.insert(l);
    }
    CHECK(mirrored == expected);
  }
}

TEST_CASE("generation is deterministic per seed") {
  GenConfig cfg;
  cfg.n_scenes = 12;
  cfg.n_queries = 8;
  const GeneratedData a = generate_corpus(cfg);
  const GeneratedData b = generate_corpus(cfg);
  REQUIRE(a.corpus.scenes.size() == b.corpus.scenes.size());
  for (std::size_t i = 0; i < a.corpus.scenes.size(); ++i) {
    const Scene& sa = a.corpus.scenes[i];
    const Scene& sb = b.corpus.scenes[i];
    REQUIRE(sa.detections.size() == sb.detections.size());
    for (std::size_t d = 0; d < sa.detections.size(); ++d) {
      CHECK(sa.detections[d].box == sb.detections[d].box);
      CHECK(sa.detections[d].category == sb.detections[d].category);
      CHECK(sa.detections[d].score == sb.detections[d].score);
    }
  }
  REQUIRE(a.queries.size() == b.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i)
    CHECK(a.queries[i] == b.queries[i]);
}

TEST_CASE("zero noise gives unit detector scores") {
  GenConfig cfg;
  cfg.n_scenes = 10;
  const GeneratedData data = generate_corpus(cfg);
  for (const Scene& s : data.corpus.scenes)
    for (const Detection& d : s.detections) CHECK(d.score == 1.0);
}

TEST_CASE("positive noise keeps scores in (0, 1]") {
  GenConfig cfg;
  cfg.n_scenes = 10;
  cfg.noise_sigma = 0.3;
  const GeneratedData data = generate_corpus(cfg);
  bool any_below_one = false;
  for (const Scene& s : data.corpus.scenes)
    for (const Detection& d : s.detections) {
      CHECK(d.score > 0.0);
      CHECK(d.score <= 1.0);
      any_below_one = any_below_one || d.score < 1.0;
    }
  CHECK(any_below_one);
}

TEST_CASE("relevance labels are regenerable from the emitted geometry") {
  GenConfig cfg;
  const GeneratedData data = generate_corpus(cfg);
  REQUIRE(!data.queries.empty());
  std::map<std::string, const StructuredQuery*> by_id;
  for (const StructuredQuery& q : data.queries) by_id[q.id] = &q;
  CHECK(data.corpus.annotations.size() ==
        data.queries.size() * data.corpus.scenes.size());
  for (const RelevanceAnnotation& a : data.corpus.annotations) {
    const Scene* scene = data.corpus.find_scene(a.scene_id);
    REQUIRE(scene != nullptr);
    const StructuredQuery* q = by_id.at(a.query_id);
    REQUIRE(q->triplets.size() == 1);
    CHECK(a.relevant == scene_matches_triplet(*scene, q->triplets[0], cfg));
  }
}

TEST_CASE("every emitted query has relevant and irrelevant scenes") {
  GenConfig cfg;
  const GeneratedData data = generate_corpus(cfg);
  for (const StructuredQuery& q : data.queries) {
    int relevant = 0, irrelevant = 0;
    for (const RelevanceAnnotation& a : data.corpus.annotations) {
      if (a.query_id != q.id) continue;
      (a.relevant ? relevant : irrelevant) += 1;
    }
    CHECK(relevant >= 1);
    CHECK(irrelevant >= 1);
  }
}

TEST_CASE("generator validates its configuration") {
  GenConfig bad_tau;
  bad_tau.tau = 0.0;
  CHECK_THROWS_AS(generate_corpus(bad_tau), ValidationError);
  GenConfig bad_range;
  bad_range.min_objects = 3;
  bad_range.max_objects = 2;
  CHECK_THROWS_AS(generate_corpus(bad_range), ValidationError);
}

TEST_CASE("unsatisfiable query constraints raise GenerationError") {
  GenConfig cfg;
  cfg.n_scenes = 1;  // no query can have both a relevant and irrelevant scene
  cfg.max_attempts = 3;
  CHECK_THROWS_AS(generate_corpus(cfg), GenerationError);
}
