#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "relpool/retrieval.hpp"
#include "relpool/synth.hpp"

using namespace relpool;

namespace {

Detection det(int id, const std::string& category, double score, Box box) {
  return Detection{id, category, score, box};
}

Scene scene_with(const std::string& id, std::vector<Detection> dets) {
  Scene s;
  s.id = id;
  s.width = 100;
  s.height = 100;
  s.detections = std::move(dets);
  return s;
}

// Bank over a 5-grid with a recognizable 'above' template.
TemplateBank tiny_bank() {
  TemplateBank bank;
  bank.grid = 5;
  bank.size = 9;
  Template above = Template::zeros("above", 9);
  above.at(4, 2) = 0.6;  // offset (0, -2)
  above.at(4, 3) = 0.4;  // offset (0, -1)
  bank.templates.emplace("above", above);
  Template left = Template::zeros("left of", 9);
  left.at(2, 4) = 1.0;  // offset (-2, 0)
  bank.templates.emplace("left of", left);
  return bank;
}

// Direct reimplementation of the additive compatibility score as one flat
// pass, reading template weights straight off the offset (a dirac pooled
// against a template is a single weight lookup).
double score_oracle(const StructuredQuery& q, const Scene& scene,
                    const CompatibilityWeights& weights,
                    const TemplateBank& bank, int grid) {
  std::set<std::string> query_nouns(q.nouns.begin(), q.nouns.end());
  for (const SpatialTriplet& t : q.triplets) {
    query_nouns.insert(t.subject);
    query_nouns.insert(t.reference);
  }
  double total = 0.0;
  for (const std::string& noun : query_nouns) {
    double best = 0.0;
    for (const Detection& d : scene.detections)
      if (d.category == noun) best = std::max(best, d.score);
    total += weights.alpha_for(noun) * best;
  }
  std::set<std::string> context;
  for (const Detection& d : scene.detections)
    if (!query_nouns.count(d.category)) context.insert(d.category);
  for (const std::string& noun : query_nouns)
    for (const std::string& c : context) {
      double best = 0.0;
      for (const Detection& e : scene.detections)
        if (e.category == c) best = std::max(best, e.score);
      total += weights.gamma_for(noun, c) * best;
    }
  for (const SpatialTriplet& t : q.triplets) {
    const Template& templ = bank.at(t.preposition);
    const int c = templ.center();
    double best = 0.0;
    bool any = false;
    for (const Detection& ref : scene.detections) {
      if (ref.category != t.reference) continue;
      for (const Detection& subj : scene.detections) {
        if (subj.category != t.subject || subj.id == ref.id) continue;
        const int rx = cell_index(ref.box.center_x(), grid);
        const int ry = cell_index(ref.box.center_y(), grid);
        const int sx = cell_index(subj.box.center_x(), grid);
        const int sy = cell_index(subj.box.center_y(), grid);
        const double v =
            ref.score * subj.score * templ.at(c + sx - rx, c + sy - ry);
        if (!any || v > best) {
          best = v;
          any = true;
        }
      }
    }
    total += weights.beta_for(t) * (any ? best : 0.0);
  }
  return total;
}

}  // namespace

TEST_CASE("spatial_term is zero when a category is missing") {
  const TemplateBank bank = tiny_bank();
  const Scene s = scene_with(
      "s", {det(0, "bed", 1.0, Box{0.4, 0.4, 0.6, 0.6})});
  CHECK(spatial_term(bank, {"lamp", "above", "bed"}, s, 5) == 0.0);
  CHECK(spatial_term(bank, {"bed", "above", "lamp"}, s, 5) == 0.0);
}

TEST_CASE("spatial_term reads the peak weight for a single pair") {
  const TemplateBank bank = tiny_bank();
  // bed center cell (2,2); lamp center cell (2,0): offset (0,-2), weight 0.6
  const Scene s = scene_with(
      "s", {det(0, "bed", 1.0, Box{0.4, 0.4, 0.6, 0.6}),
            det(1, "lamp", 1.0, Box{0.3, 0.0, 0.5, 0.2})});
  CHECK(spatial_term(bank, {"lamp", "above", "bed"}, s, 5) == 0.6);
}

TEST_CASE("spatial_term scales with detector scores") {
  const TemplateBank bank = tiny_bank();
  const Scene s = scene_with(
      "s", {det(0, "bed", 0.5, Box{0.4, 0.4, 0.6, 0.6}),
            det(1, "lamp", 0.8, Box{0.3, 0.0, 0.5, 0.2})});
  CHECK(spatial_term(bank, {"lamp", "above", "bed"}, s, 5) ==
        doctest::Approx(0.5 * 0.8 * 0.6).epsilon(1e-12));
}

TEST_CASE("spatial_term takes the best pair over brute-force enumeration") {
  const TemplateBank bank = tiny_bank();
  const Scene s = scene_with(
      "s", {det(0, "bed", 1.0, Box{0.4, 0.4, 0.6, 0.6}),
            det(1, "lamp", 0.9, Box{0.3, 0.0, 0.5, 0.2}),    // offset (0,-2): 0.6
            det(2, "lamp", 1.0, Box{0.3, 0.2, 0.5, 0.4})});  // offset (0,-1): 0.4
  // pair scores: 0.9 * 0.6 = 0.54 and 1.0 * 0.4 = 0.4
  const double expected = std::max(0.9 * 0.6, 1.0 * 0.4);
  CHECK(spatial_term(bank, {"lamp", "above", "bed"}, s, 5) == expected);
}

TEST_CASE("score_scene of an empty scene is zero") {
  const TemplateBank bank = tiny_bank();
  const Scene s = scene_with("empty", {});
  StructuredQuery q;
  q.nouns = {"bed"};
  q.triplets.push_back({"lamp", "above", "bed"});
  CHECK(score_scene(q, s, CompatibilityWeights{}, bank, 5) == 0.0);
}

TEST_CASE("single-noun query scores the best detection") {
  const TemplateBank bank = tiny_bank();
  const Scene s = scene_with(
      "s", {det(0, "bed", 0.8, Box{0.4, 0.4, 0.6, 0.6}),
            det(1, "bed", 0.3, Box{0.1, 0.1, 0.3, 0.3})});
  StructuredQuery q;
  q.nouns = {"bed"};
  CHECK(score_scene(q, s, CompatibilityWeights{}, bank, 5) == 0.8);
}

TEST_CASE("score_scene matches the flat-loop oracle on a full instance") {
  const TemplateBank bank = tiny_bank();
  const Scene s = scene_with(
      "s", {det(0, "bed", 0.9, Box{0.4, 0.4, 0.6, 0.6}),
            det(1, "lamp", 0.7, Box{0.3, 0.0, 0.5, 0.2}),
            det(2, "rug", 0.6, Box{0.1, 0.7, 0.5, 0.9})});
  StructuredQuery q;
  q.nouns = {"lamp"};
  q.triplets.push_back({"lamp", "above", "bed"});
  CompatibilityWeights w;
  w.alpha["bed"] = 1.5;
  w.gamma_default = 0.25;
  w.beta_default = 2.0;
  const double got = score_scene(q, s, w, bank, 5);
  const double expected = score_oracle(q, s, w, bank, 5);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  // sanity: all three terms contribute
  CHECK(got > 0.9 * 1.5 + 0.7);
}

TEST_CASE("score_scene matches the oracle on random scenes") {
  GenConfig cfg;
  cfg.n_scenes = 20;
  cfg.n_queries = 10;
  cfg.noise_sigma = 0.2;
  cfg.seed = 99;
  const GeneratedData data = generate_corpus(cfg);
  const PrepositionLexicon lexicon;
  std::vector<TrainingPair> pairs;
  for (const RelevanceAnnotation& a : data.corpus.annotations)
    if (a.relevant)
      for (const StructuredQuery& q : data.queries)
        if (q.id == a.query_id)
          pairs.push_back({q.triplets[0], a.scene_id});
  const TemplateBank bank =
      estimate_templates(data.corpus, pairs, lexicon, 5);
  CompatibilityWeights weights;
  weights.gamma_default = 0.1;
  for (const StructuredQuery& q : data.queries)
    for (const Scene& s : data.corpus.scenes)
      CHECK(score_scene(q, s, weights, bank, 5) ==
            doctest::Approx(score_oracle(q, s, weights, bank, 5))
                .epsilon(1e-12));
}

TEST_CASE("rank_scenes orders by score with id tie-breaks") {
  TemplateBank bank = tiny_bank();
  Corpus corpus;
  corpus.scenes.push_back(scene_with("B", {det(0, "bed", 0.5, Box{0.4, 0.4, 0.6, 0.6})}));
  corpus.scenes.push_back(scene_with("C", {det(0, "bed", 0.9, Box{0.4, 0.4, 0.6, 0.6})}));
  corpus.scenes.push_back(scene_with("A", {det(0, "bed", 0.5, Box{0.4, 0.4, 0.6, 0.6})}));
  StructuredQuery q;
  q.id = "q1";
  q.nouns = {"bed"};
  const RankedResult r = rank_scenes(q, corpus, CompatibilityWeights{}, bank, 5);
  REQUIRE(r.ranking.size() == 3);
  CHECK(r.ranking[0].scene_id == "C");
  CHECK(r.ranking[1].scene_id == "A");
  CHECK(r.ranking[2].scene_id == "B");
}

TEST_CASE("single-scene corpus ranks one entry") {
  TemplateBank bank = tiny_bank();
  Corpus corpus;
  corpus.scenes.push_back(scene_with("only", {}));
  StructuredQuery q;
  q.nouns = {"bed"};
  CHECK(rank_scenes(q, corpus, CompatibilityWeights{}, bank, 5).ranking.size() ==
        1);
}

TEST_CASE("jointly scaling all weights preserves the ranking order") {
  GenConfig cfg;
  cfg.n_scenes = 15;
  cfg.n_queries = 6;
  cfg.noise_sigma = 0.15;
  cfg.seed = 7;
  const GeneratedData data = generate_corpus(cfg);
  const PrepositionLexicon lexicon;
  std::vector<TrainingPair> pairs;
  for (const RelevanceAnnotation& a : data.corpus.annotations)
    if (a.relevant)
      for (const StructuredQuery& q : data.queries)
        if (q.id == a.query_id) pairs.push_back({q.triplets[0], a.scene_id});
  const TemplateBank bank = estimate_templates(data.corpus, pairs, lexicon, 11);

  CompatibilityWeights base;
  base.gamma_default = 0.2;
  for (double lambda : {1e-3, 0.5, 3.0, 1e3}) {
    CompatibilityWeights scaled = base;
    scaled.alpha_default *= lambda;
    scaled.gamma_default *= lambda;
    scaled.beta_default *= lambda;
    for (const StructuredQuery& q : data.queries) {
      const RankedResult a = rank_scenes(q, data.corpus, base, bank, 11);
      const RankedResult b = rank_scenes(q, data.corpus, scaled, bank, 11);
      REQUIRE(a.ranking.size() == b.ranking.size());
      for (std::size_t i = 0; i < a.ranking.size(); ++i)
        CHECK(a.ranking[i].scene_id == b.ranking[i].scene_id);
    }
  }
}

TEST_CASE("raising a noun's detector score never lowers the scene's rank") {
  TemplateBank bank = tiny_bank();
  CompatibilityWeights weights;  // alpha 1, gamma 0, beta 1
  Corpus corpus;
  for (int i = 0; i < 6; ++i) {
    const double score = 0.2 + 0.1 * i;
    corpus.scenes.push_back(scene_with(
        "s" + std::to_string(i),
        {det(0, "bed", score, Box{0.4, 0.4, 0.6, 0.6})}));
  }
  StructuredQuery q;
  q.id = "q";
  q.nouns = {"bed"};
  const RankedResult before = rank_scenes(q, corpus, weights, bank, 5);
  const auto rank_of = [](const RankedResult& r, const std::string& id) {
    for (std::size_t i = 0; i < r.ranking.size(); ++i)
      if (r.ranking[i].scene_id == id) return i;
    return r.ranking.size();
  };
  const std::size_t before_rank = rank_of(before, "s2");
  corpus.scenes[2].detections[0].score = 0.95;
  const RankedResult after = rank_scenes(q, corpus, weights, bank, 5);
  CHECK(rank_of(after, "s2") <= before_rank);
}

TEST_CASE("parallel scoring matches serial scoring bit for bit") {
  GenConfig cfg;
  cfg.n_scenes = 25;
  cfg.n_queries = 4;
  cfg.noise_sigma = 0.1;
  cfg.seed = 3;
  const GeneratedData data = generate_corpus(cfg);
  const PrepositionLexicon lexicon;
  std::vector<TrainingPair> pairs;
  for (const RelevanceAnnotation& a : data.corpus.annotations)
    if (a.relevant)
      for (const StructuredQuery& q : data.queries)
        if (q.id == a.query_id) pairs.push_back({q.triplets[0], a.scene_id});
  const TemplateBank bank = estimate_templates(data.corpus, pairs, lexicon, 11);
  for (const StructuredQuery& q : data.queries) {
    const RankedResult serial =
        rank_scenes(q, data.corpus, CompatibilityWeights{}, bank, 11, 1);
    const RankedResult parallel =
        rank_scenes(q, data.corpus, CompatibilityWeights{}, bank, 11, 4);
    REQUIRE(serial.ranking.size() == parallel.ranking.size());
    for (std::size_t i = 0; i < serial.ranking.size(); ++i) {
      CHECK(serial.ranking[i].scene_id == parallel.ranking[i].scene_id);
      CHECK(serial.ranking[i].score == parallel.ranking[i].score);
    }
  }
}

TEST_CASE("rankings round-trip through CSV") {
  std::vector<RankedResult> results;
  results.push_back({"q1", {{"s2", 1.5}, {"s1", 0.25}}});
  results.push_back({"q2", {{"s1", 0.125}}});
  save_rankings_csv(results, "retr_test_rank.csv");
  const auto loaded = load_rankings_csv("retr_test_rank.csv");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].query_id == "q1");
  REQUIRE(loaded[0].ranking.size() == 2);
  CHECK(loaded[0].ranking[0].scene_id == "s2");
  CHECK(loaded[0].ranking[0].score == 1.5);
  CHECK(loaded[1].ranking[0].score == 0.125);
  std::remove("retr_test_rank.csv");
}

TEST_CASE("weights round-trip through JSON") {
  CompatibilityWeights w;
  w.alpha_default = 2.0;
  w.alpha["bed"] = 0.5;
  w.gamma_default = 0.125;
  w.gamma[{"bed", "lamp"}] = 0.75;
  w.beta[{"lamp", "bed", "above"}] = 3.0;
  save_weights(w, "retr_test_weights.json");
  const CompatibilityWeights loaded = load_weights("retr_test_weights.json");
  CHECK(loaded.alpha_default == 2.0);
  CHECK(loaded.alpha_for("bed") == 0.5);
  CHECK(loaded.alpha_for("rug") == 2.0);
  CHECK(loaded.gamma_for("bed", "lamp") == 0.75);
  CHECK(loaded.gamma_for("bed", "rug") == 0.125);
  CHECK(loaded.beta_for({"lamp", "above", "bed"}) == 3.0);
  CHECK(loaded.beta_for({"lamp", "below", "bed"}) == 1.0);
  std::remove("retr_test_weights.json");
}
