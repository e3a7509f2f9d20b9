#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "relpool/scene.hpp"

using namespace relpool;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = "scene_test_" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

Detection det(int id, const std::string& category, double score, Box box) {
  return Detection{id, category, score, box};
}

}  // namespace

TEST_CASE("load_corpus reads a minimal well-formed file") {
  const std::string path = write_temp(
      "minimal.jsonl",
      R"({"type":"scene","id":"s1","width":640,"height":480,"detections":[)"
      R"({"id":0,"category":"bed","score":0.9,"box":[0.1,0.1,0.5,0.5]},)"
      R"({"id":1,"category":"lamp","score":0.8,"box":[0.6,0.1,0.8,0.3]}]})"
      "\n");
  const Corpus corpus = load_corpus(path);
  CHECK(corpus.scenes.size() == 1);
  CHECK(corpus.scenes[0].detections.size() == 2);
  CHECK(corpus.vocabulary == std::set<std::string>{"bed", "lamp"});
  std::remove(path.c_str());
}

TEST_CASE("load_corpus of an empty file yields an empty corpus") {
  const std::string path = write_temp("empty.jsonl", "");
  const Corpus corpus = load_corpus(path);
  CHECK(corpus.scenes.empty());
  CHECK(corpus.vocabulary.empty());
  std::remove(path.c_str());
}

TEST_CASE("load_corpus rejects out-of-range boxes") {
  const std::string path = write_temp(
      "badbox.jsonl",
      R"({"type":"scene","id":"s1","width":640,"height":480,"detections":[)"
      R"({"id":0,"category":"bed","score":0.9,"box":[1.2,0.1,1.5,0.5]}]})"
      "\n");
  CHECK_THROWS_AS(load_corpus(path), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("load_corpus reports malformed lines with their number") {
  const std::string path = write_temp(
      "badjson.jsonl",
      R"({"type":"scene","id":"s1","width":640,"height":480,"detections":[]})"
      "\nnot json\n");
  try {
    load_corpus(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 2);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_corpus rejects duplicate detection ids") {
  const std::string dup_det = write_temp(
      "dupdet.jsonl",
      R"({"type":"scene","id":"s1","width":10,"height":10,"detections":[)"
      R"({"id":0,"category":"a","score":0.5,"box":[0.1,0.1,0.2,0.2]},)"
      R"({"id":0,"category":"b","score":0.5,"box":[0.3,0.3,0.4,0.4]}]})"
      "\n");
  CHECK_THROWS_AS(load_corpus(dup_det), ValidationError);
  std::remove(dup_det.c_str());
}

TEST_CASE("load_corpus checks annotation scene ids against scenes") {
  const std::string path = write_temp(
      "orphan.jsonl",
      R"({"type":"scene","id":"s1","width":10,"height":10,"detections":[]})"
      "\n"
      R"({"type":"relevance","query":"q1","scene":"nope","relevant":true})"
      "\n");
  CHECK_THROWS_AS(load_corpus(path), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("save_corpus then load_corpus is the identity") {
  Corpus corpus;
  Scene s;
  s.id = "s1";
  s.width = 640;
  s.height = 480;
  s.detections.push_back(det(0, "bed", 0.875, Box{0.1, 0.2, 0.5, 0.7}));
  s.detections.push_back(det(3, "lamp", 1.0 / 3.0, Box{0.55, 0.05, 0.9, 0.45}));
  corpus.scenes.push_back(s);
  corpus.vocabulary = {"bed", "lamp"};
  corpus.annotations.push_back({"q1", "s1", true});

  const std::string path = "scene_test_roundtrip.jsonl";
  save_corpus(corpus, path);
  const Corpus loaded = load_corpus(path);
  REQUIRE(loaded.scenes.size() == 1);
  CHECK(loaded.scenes[0].id == s.id);
  REQUIRE(loaded.scenes[0].detections.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(loaded.scenes[0].detections[i].id == s.detections[i].id);
    CHECK(loaded.scenes[0].detections[i].category == s.detections[i].category);
    CHECK(loaded.scenes[0].detections[i].score == s.detections[i].score);
    CHECK(loaded.scenes[0].detections[i].box == s.detections[i].box);
  }
  CHECK(loaded.vocabulary == corpus.vocabulary);
  REQUIRE(loaded.annotations.size() == 1);
  CHECK(loaded.annotations[0].query_id == "q1");
  CHECK(loaded.annotations[0].relevant);
  std::remove(path.c_str());
}

TEST_CASE("dirac_image places unit mass at the box center cell") {
  const Detection d = det(0, "bed", 1.0, Box{0.4, 0.4, 0.6, 0.6});
  const ScoreMap m = dirac_image(d, 5);
  CHECK(m.at(2, 2) == 1.0);
  CHECK(m.total_mass() == 1.0);

  const Detection corner = det(1, "bed", 1.0, Box{0.0, 0.0, 0.2, 0.2});
  const ScoreMap mc = dirac_image(corner, 5);
  CHECK(mc.at(0, 0) == 1.0);
  CHECK(mc.total_mass() == 1.0);
}

TEST_CASE("dirac_image is deterministic for identical boxes") {
  const Detection a = det(0, "bed", 0.7, Box{0.2, 0.3, 0.7, 0.8});
  const Detection b = det(5, "lamp", 0.2, Box{0.2, 0.3, 0.7, 0.8});
  CHECK(dirac_image(a, 7).values == dirac_image(b, 7).values);
}

TEST_CASE("dirac_image has exactly one nonzero cell over random boxes") {
  std::mt19937_64 gen(11);
  const auto u = [&gen] { return (gen() >> 11) * 0x1.0p-53; };
  for (int trial = 0; trial < 200; ++trial) {
    const double x0 = u() * 0.8, y0 = u() * 0.8;
    const Box b{x0, y0, x0 + 0.05 + u() * (1.0 - x0 - 0.05),
                y0 + 0.05 + u() * (1.0 - y0 - 0.05)};
    const ScoreMap m = dirac_image(Detection{0, "x", 1.0, b}, 9);
    int nonzero = 0;
    for (double v : m.values) nonzero += (v != 0.0);
    CHECK(nonzero == 1);
    CHECK(m.total_mass() == 1.0);
  }
}

TEST_CASE("box_mask covers the whole grid for the unit box") {
  const ScoreMap m = box_mask(det(0, "rug", 1.0, Box{0.0, 0.0, 1.0, 1.0}), 5);
  CHECK(m.total_mass() == 25.0);
}

TEST_CASE("box_mask and dirac_image reject even grids") {
  CHECK_THROWS_AS(box_mask(det(0, "rug", 1.0, Box{0.0, 0.0, 0.5, 0.5}), 4),
                  ValidationError);
  CHECK_THROWS_AS(dirac_image(det(0, "rug", 1.0, Box{0.0, 0.0, 0.5, 0.5}), 4),
                  ValidationError);
}

TEST_CASE("box_mask matches a cell-center membership oracle") {
  const Box b{0.35, 0.35, 0.65, 0.65};
  const int grid = 5;
  const ScoreMap m = box_mask(det(0, "box", 1.0, b), grid);
  for (int iy = 0; iy < grid; ++iy)
    for (int ix = 0; ix < grid; ++ix) {
      const double cx = (ix + 0.5) / grid;
      const double cy = (iy + 0.5) / grid;
      const bool inside =
          cx >= b.x_min && cx <= b.x_max && cy >= b.y_min && cy <= b.y_max;
      CHECK(m.at(ix, iy) == (inside ? 1.0 : 0.0));
    }
  // only the center cell of the 5-grid has its center inside this box
  CHECK(m.total_mass() == 1.0);
  CHECK(m.at(2, 2) == 1.0);
}

TEST_CASE("box_mask grows monotonically with the box") {
  std::mt19937_64 gen(23);
  const auto u = [&gen] { return (gen() >> 11) * 0x1.0p-53; };
  for (int trial = 0; trial < 100; ++trial) {
    const double x0 = 0.1 + u() * 0.4, y0 = 0.1 + u() * 0.4;
    const double x1 = x0 + 0.05 + u() * 0.3, y1 = y0 + 0.05 + u() * 0.3;
    const Box small{x0, y0, x1, y1};
    const Box big{std::max(0.0, x0 - 0.1), std::max(0.0, y0 - 0.1),
                  std::min(1.0, x1 + 0.1), std::min(1.0, y1 + 0.1)};
    const ScoreMap ms = box_mask(Detection{0, "x", 1.0, small}, 11);
    const ScoreMap mb = box_mask(Detection{0, "x", 1.0, big}, 11);
    for (std::size_t i = 0; i < ms.values.size(); ++i)
      CHECK(mb.values[i] >= ms.values[i]);
  }
}
