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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relpool/fragment_embed.hpp"
#include "relpool/log.hpp"
#include "relpool/metrics.hpp"
#include "relpool/pool_learn.hpp"
#include "relpool/query.hpp"
#include "relpool/retrieval.hpp"
#include "relpool/scene.hpp"
#include "relpool/synth.hpp"
#include "relpool/template.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relpool;

namespace {

void ensure_parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory '" + parent.string() + "'");
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory '" + path + "'");
}

std::string heatmap_filename(const std::string& preposition) {
  std::string name = preposition;
  for (char& c : name)
    if (c == ' ') c = '_';
  return name + ".pgm";
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const json& inputs, const json& hyper) {
  json j{{"command", command},
         {"inputs", inputs},
         {"hyper", hyper},
         {"output", out_path}};
  const std::string path = out_path + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << j.dump() << "\n";
}

std::string losses_path(const std::string& out_path) {
  std::string stem = out_path;
  const std::string suffix = ".json";
  if (stem.size() > suffix.size() &&
      stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
    stem.resize(stem.size() - suffix.size());
  return stem + "_losses.csv";
}

void write_losses(const std::vector<double>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss curve '" + path + "'");
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", curve[i]);
    out << i << "," << buf << "\n";
  }
}

std::vector<TrainingPair> relevant_training_pairs(
    const std::vector<StructuredQuery>& queries,
    const std::vector<RelevanceAnnotation>& annotations) {
  std::map<std::string, const StructuredQuery*> by_id;
  for (const StructuredQuery& q : queries) by_id[q.id] = &q;
  std::vector<TrainingPair> pairs;
  for (const RelevanceAnnotation& a : annotations) {
    if (!a.relevant) continue;
    const auto it = by_id.find(a.query_id);
    if (it == by_id.end())
      throw ValidationError("relevance names unknown query '" + a.query_id + "'");
    for (const SpatialTriplet& t : it->second->triplets)
      pairs.push_back({t, a.scene_id});
  }
  return pairs;
}

// ---- subcommand bodies ------------------------------------------------------

struct GenerateOpts {
  std::string out_dir;
  GenConfig cfg;
  std::string categories;
};

int cmd_generate(const GenerateOpts& opts) {
  GenConfig cfg = opts.cfg;
  if (!opts.categories.empty()) {
    cfg.categories.clear();
    std::string current;
    for (char c : opts.categories + ",") {
      if (c == ',') {
        if (!current.empty()) cfg.categories.push_back(current);
        current.clear();
      } else {
        current.push_back(c);
      }
    }
  }
  std::cout << "seed: " << cfg.seed << "\n";
  const GeneratedData data = generate_corpus(cfg);
  ensure_dir(opts.out_dir);
  Corpus scene_only;
  scene_only.scenes = data.corpus.scenes;
  scene_only.vocabulary = data.corpus.vocabulary;
  save_corpus(scene_only, opts.out_dir + "/corpus.jsonl");
  save_queries(data.queries, opts.out_dir + "/queries.tsv");
  save_annotations(data.corpus.annotations, opts.out_dir + "/relevance.jsonl");
  log_info("generated " + std::to_string(data.corpus.scenes.size()) +
           " scenes, " + std::to_string(data.queries.size()) + " queries");
  return 0;
}

struct EstimateOpts {
  std::string corpus, queries, relevance, out, heatmap_dir;
  int grid = 101;
};

int cmd_estimate(const EstimateOpts& opts) {
  const Corpus corpus = load_corpus(opts.corpus);
  const PrepositionLexicon lexicon;
  const auto queries = load_queries(opts.queries, lexicon);
  const auto annotations = load_annotations(opts.relevance);
  for (const StructuredQuery& q : queries)
    for (const std::string& warning : validate_query(q, corpus.vocabulary))
      log_info("query " + q.id + ": " + warning);
  const auto pairs = relevant_training_pairs(queries, annotations);
  const TemplateBank bank = estimate_templates(corpus, pairs, lexicon, opts.grid);
  ensure_parent_dir(opts.out);
  save_template_bank(bank, opts.out);

  std::string heatmap_dir = opts.heatmap_dir;
  if (heatmap_dir.empty())
    heatmap_dir = (fs::path(opts.out).parent_path() / "heatmaps").string();
  ensure_dir(heatmap_dir);
  for (const auto& [name, t] : bank.templates)
    export_heatmap(t, heatmap_dir + "/" + heatmap_filename(name));
  return 0;
}

struct RetrieveOpts {
  std::string corpus, queries, bank, weights, out;
  std::vector<std::string> adhoc;
  int jobs = 1;
};

int cmd_retrieve(const RetrieveOpts& opts) {
  const Corpus corpus = load_corpus(opts.corpus);
  const PrepositionLexicon lexicon;
  std::vector<StructuredQuery> queries;
  if (!opts.queries.empty()) queries = load_queries(opts.queries, lexicon);
  for (std::size_t i = 0; i < opts.adhoc.size(); ++i)
    queries.push_back(parse_query(opts.adhoc[i], lexicon,
                                  "adhoc" + std::to_string(i + 1)));
  for (const StructuredQuery& q : queries)
    for (const std::string& warning : validate_query(q, corpus.vocabulary))
      log_info("query " + q.id + ": " + warning);
  const TemplateBank bank = load_template_bank(opts.bank);
  CompatibilityWeights weights;
  if (!opts.weights.empty()) weights = load_weights(opts.weights);
  std::vector<RankedResult> results;
  for (const StructuredQuery& q : queries)
    results.push_back(
        rank_scenes(q, corpus, weights, bank, bank.grid, opts.jobs));
  ensure_parent_dir(opts.out);
  save_rankings_csv(results, opts.out);
  return 0;
}

struct EvalOpts {
  std::string ranking, relevance, out;
};

int cmd_eval(const EvalOpts& opts) {
  const auto results = load_rankings_csv(opts.ranking);
  const auto annotations = load_annotations(opts.relevance);
  std::map<std::pair<std::string, std::string>, bool> relevant;
  for (const RelevanceAnnotation& a : annotations)
    relevant[{a.query_id, a.scene_id}] = a.relevant;
  std::vector<LabeledRanking> labeled;
  for (const RankedResult& r : results) {
    LabeledRanking l;
    for (const ScoredScene& s : r.ranking) {
      const auto it = relevant.find({r.query_id, s.scene_id});
      l.relevance.push_back(it != relevant.end() && it->second ? 1 : 0);
    }
    labeled.push_back(std::move(l));
  }
  const MetricsReport report = compute_metrics(labeled);
  ensure_parent_dir(opts.out);
  save_metrics_json(report, opts.out);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", report.map);
  std::cout << "mAP: " << buf << " over " << labeled.size() << " queries\n";
  return 0;
}

struct TrainPoolOpts {
  std::string corpus, queries, relevance, init_bank, out;
  PoolHyper hyper;
};

int cmd_train_pool(const TrainPoolOpts& opts) {
  std::cout << "seed: " << opts.hyper.seed << "\n";
  Corpus corpus = load_corpus(opts.corpus);
  const PrepositionLexicon lexicon;
  const auto queries = load_queries(opts.queries, lexicon);
  corpus.annotations = load_annotations(opts.relevance);
  const TemplateBank init = load_template_bank(opts.init_bank);
  const auto examples = build_train_examples(corpus, queries);
  std::vector<double> curve;
  const PoolLearnParams params = train_pooling(examples, init, opts.hyper, &curve);
  ensure_parent_dir(opts.out);
  save_pool_params(params, opts.out);
  write_losses(curve, losses_path(opts.out));
  write_manifest(opts.out, "train-pool",
                 json{{"corpus", opts.corpus},
                      {"queries", opts.queries},
                      {"relevance", opts.relevance},
                      {"init_bank", opts.init_bank}},
                 json{{"lr", opts.hyper.lr},
                      {"epochs", opts.hyper.epochs},
                      {"l2", opts.hyper.l2},
                      {"seed", opts.hyper.seed}});
  return 0;
}

struct TrainEmbedOpts {
  std::string data, vocab, out;
  std::string scheme = "2x2+4x4";
  int grid = 101;
  bool no_self_pairs = false;
  EmbedDims dims;
  EmbedHyper hyper;
};

int cmd_train_embed(const TrainEmbedOpts& opts) {
  std::cout << "seed: " << opts.hyper.seed << "\n";
  const PoolingScheme scheme = PoolingScheme::parse(opts.scheme);
  const EmbedDataset dataset = load_embed_dataset(
      opts.data, opts.vocab, scheme, opts.grid, !opts.no_self_pairs);
  EmbedDims dims = opts.dims;
  dims.regions = scheme.region_count();
  if (!dataset.images.empty() && !dataset.images[0].detections.empty())
    dims.feature =
        static_cast<int>(dataset.images[0].detections[0].feature.size());
  std::vector<double> curve;
  const EmbeddingParams params =
      train_embedding(dataset, dims, opts.hyper, &curve);
  ensure_parent_dir(opts.out);
  save_embed_params(params, opts.out);
  write_losses(curve, losses_path(opts.out));
  write_manifest(opts.out, "train-embed",
                 json{{"data", opts.data}, {"vocab", opts.vocab}},
                 json{{"lr", opts.hyper.lr},
                      {"epochs", opts.hyper.epochs},
                      {"stage1_epochs", opts.hyper.stage1_epochs},
                      {"margin", opts.hyper.margin},
                      {"lambda_rank", opts.hyper.lambda_rank},
                      {"lambda_align", opts.hyper.lambda_align},
                      {"scheme", opts.scheme},
                      {"grid", opts.grid},
                      {"seed", opts.hyper.seed}});

  const Eigen::MatrixXd scores = score_matrix(params, dataset, 1.0);
  const RecallReport retrieval = image_retrieval_recall(scores, dataset);
  const RecallReport annotation = annotation_recall(scores, dataset);
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "retrieval R@1 %.3f | annotation R@1 %.3f | final loss %.6g",
                retrieval.r_at_1, annotation.r_at_1,
                curve.empty() ? 0.0 : curve.back());
  std::cout << buf << "\n";
  return 0;
}

struct AlignOpts {
  std::string data, vocab, params, out, sentence;
  std::string scheme = "2x2+4x4";
  int grid = 101;
  bool no_self_pairs = false;
  int top_k = 4;
  std::uint64_t seed = 0;
};

int cmd_align(const AlignOpts& opts) {
  std::cout << "seed: " << opts.seed << "\n";
  const PoolingScheme scheme = PoolingScheme::parse(opts.scheme);
  const EmbedDataset dataset = load_embed_dataset(
      opts.data, opts.vocab, scheme, opts.grid, !opts.no_self_pairs);
  const EmbeddingParams params = load_embed_params(opts.params);
  ensure_parent_dir(opts.out);
  std::ofstream out(opts.out);
  if (!out) throw IoError("cannot write bindings file '" + opts.out + "'");
  out << "sentence_id,fragment,kind,target,rank,score\n";
  char buf[64];
  for (std::size_t k = 0; k < dataset.sentences.size(); ++k) {
    const EmbedSentence& sentence = dataset.sentences[k];
    if (!opts.sentence.empty() && sentence.id != opts.sentence) continue;
    const EmbedImage& image = dataset.images[dataset.sentence_image[k]];
    for (const AlignmentBinding& b : align(params, image, sentence, opts.top_k)) {
      std::snprintf(buf, sizeof(buf), "%.12g", b.score);
      out << sentence.id << "," << b.text_fragment << ","
          << (b.kind == AlignmentBinding::Kind::visual ? "visual" : "spatial")
          << "," << b.target << "," << b.rank << "," << buf << "\n";
    }
  }
  write_manifest(opts.out, "align",
                 json{{"data", opts.data},
                      {"vocab", opts.vocab},
                      {"params", opts.params}},
                 json{{"top_k", opts.top_k},
                      {"scheme", opts.scheme},
                      {"grid", opts.grid},
                      {"seed", opts.seed}});
  return 0;
}

struct ExportHeatmapOpts {
  std::string bank, out_dir;
};

int cmd_export_heatmap(const ExportHeatmapOpts& opts) {
  const TemplateBank bank = load_template_bank(opts.bank);
  ensure_dir(opts.out_dir);
  for (const auto& [name, t] : bank.templates)
    export_heatmap(t, opts.out_dir + "/" + heatmap_filename(name));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatial relation pooling toolkit"};
  app.require_subcommand(1);

  GenerateOpts gen_opts;
  CLI::App* gen = app.add_subcommand(
      "generate", "produce a synthetic corpus, queries and relevance labels");
  gen->add_option("--out-dir", gen_opts.out_dir, "output directory")->required();
  gen->add_option("--seed", gen_opts.cfg.seed, "generator seed");
  gen->add_option("--scenes", gen_opts.cfg.n_scenes, "scene count");
  gen->add_option("--queries", gen_opts.cfg.n_queries, "query count");
  gen->add_option("--min-objects", gen_opts.cfg.min_objects, "objects per scene lower bound");
  gen->add_option("--max-objects", gen_opts.cfg.max_objects, "objects per scene upper bound");
  gen->add_option("--tau", gen_opts.cfg.tau, "axis relation threshold");
  gen->add_option("--contain-overlap", gen_opts.cfg.contain_overlap,
                  "overlap fraction required for 'in'/'inside of'");
  gen->add_option("--sigma", gen_opts.cfg.noise_sigma, "detector score noise");
  gen->add_option("--categories", gen_opts.categories, "comma-separated category names");

  EstimateOpts est_opts;
  CLI::App* est = app.add_subcommand(
      "estimate", "estimate spatial templates from relevance annotations");
  est->add_option("--corpus", est_opts.corpus, "corpus jsonl")->required();
  est->add_option("--queries", est_opts.queries, "query tsv")->required();
  est->add_option("--relevance", est_opts.relevance, "relevance jsonl")->required();
  est->add_option("--out", est_opts.out, "template bank json")->required();
  est->add_option("--grid", est_opts.grid, "score map resolution (odd)");
  est->add_option("--heatmap-dir", est_opts.heatmap_dir, "heatmap output directory");

  RetrieveOpts ret_opts;
  CLI::App* ret = app.add_subcommand("retrieve", "rank scenes for every query");
  ret->add_option("--corpus", ret_opts.corpus, "corpus jsonl")->required();
  CLI::Option* ret_file = ret->add_option("--queries", ret_opts.queries, "query tsv");
  CLI::Option* ret_adhoc =
      ret->add_option("--query", ret_opts.adhoc, "ad-hoc query text (repeatable)");
  ret->add_option("--bank", ret_opts.bank, "template bank json")->required();
  ret->add_option("--weights", ret_opts.weights, "compatibility weights json");
  ret->add_option("--out", ret_opts.out, "ranking csv")->required();
  ret->add_option("--jobs", ret_opts.jobs, "scoring worker count");
  ret->callback([ret_file, ret_adhoc]() {
    if (ret_file->count() == 0 && ret_adhoc->count() == 0)
      throw CLI::RequiredError("--queries or --query");
  });

  EvalOpts eval_opts;
  CLI::App* ev = app.add_subcommand("eval", "score a ranking against relevance");
  ev->add_option("--ranking", eval_opts.ranking, "ranking csv")->required();
  ev->add_option("--relevance", eval_opts.relevance, "relevance jsonl")->required();
  ev->add_option("--out", eval_opts.out, "metrics json")->required();

  TrainPoolOpts tp_opts;
  CLI::App* tp = app.add_subcommand(
      "train-pool", "jointly train pooling weights and the relevance classifier");
  tp->add_option("--corpus", tp_opts.corpus, "corpus jsonl")->required();
  tp->add_option("--queries", tp_opts.queries, "query tsv")->required();
  tp->add_option("--relevance", tp_opts.relevance, "relevance jsonl")->required();
  tp->add_option("--init-bank", tp_opts.init_bank, "initial template bank")->required();
  tp->add_option("--out", tp_opts.out, "trained parameters json")->required();
  tp->add_option("--lr", tp_opts.hyper.lr, "learning rate");
  tp->add_option("--epochs", tp_opts.hyper.epochs, "epochs");
  tp->add_option("--l2", tp_opts.hyper.l2, "template weight decay");
  tp->add_option("--seed", tp_opts.hyper.seed, "seed");

  TrainEmbedOpts te_opts;
  CLI::App* te = app.add_subcommand(
      "train-embed", "train the bi-directional fragment embedding");
  te->add_option("--data", te_opts.data, "dataset jsonl")->required();
  te->add_option("--vocab", te_opts.vocab, "vocabulary file")->required();
  te->add_option("--out", te_opts.out, "trained parameters json")->required();
  te->add_option("--scheme", te_opts.scheme, "pooling scheme, e.g. 2x2+4x4");
  te->add_option("--grid", te_opts.grid, "score map resolution (odd)");
  te->add_flag("--no-self-pairs", te_opts.no_self_pairs,
               "drop (d,d) spatial fragments");
  te->add_option("--word-dim", te_opts.dims.word, "word embedding width");
  te->add_option("--embed-dim", te_opts.dims.embed, "fragment embedding width");
  te->add_option("--concept-dim", te_opts.dims.concepts, "spatial concept width");
  te->add_option("--lr", te_opts.hyper.lr, "learning rate");
  te->add_option("--epochs", te_opts.hyper.epochs, "total epochs");
  te->add_option("--stage1-epochs", te_opts.hyper.stage1_epochs,
                 "epochs before the spatial pool joins");
  te->add_option("--margin", te_opts.hyper.margin, "hinge margin");
  te->add_option("--lambda-rank", te_opts.hyper.lambda_rank, "ranking term weight");
  te->add_option("--lambda-align", te_opts.hyper.lambda_align, "alignment term weight");
  te->add_option("--seed", te_opts.hyper.seed, "seed");

  AlignOpts al_opts;
  CLI::App* al = app.add_subcommand(
      "align", "emit top-k fragment bindings per sentence");
  al->add_option("--data", al_opts.data, "dataset jsonl")->required();
  al->add_option("--vocab", al_opts.vocab, "vocabulary file")->required();
  al->add_option("--params", al_opts.params, "trained parameters json")->required();
  al->add_option("--out", al_opts.out, "bindings csv")->required();
  al->add_option("--scheme", al_opts.scheme, "pooling scheme");
  al->add_option("--grid", al_opts.grid, "score map resolution (odd)");
  al->add_flag("--no-self-pairs", al_opts.no_self_pairs,
               "drop (d,d) spatial fragments");
  al->add_option("--top-k", al_opts.top_k, "bindings per text fragment");
  al->add_option("--sentence", al_opts.sentence, "restrict to one sentence id");
  al->add_option("--seed", al_opts.seed, "seed (recorded in the manifest)");

  ExportHeatmapOpts hm_opts;
  CLI::App* hm = app.add_subcommand(
      "export-heatmap", "write PGM/CSV heatmaps for every template in a bank");
  hm->add_option("--bank", hm_opts.bank, "template bank json")->required();
  hm->add_option("--out-dir", hm_opts.out_dir, "heatmap directory")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_generate(gen_opts);
    if (est->parsed()) return cmd_estimate(est_opts);
    if (ret->parsed()) return cmd_retrieve(ret_opts);
    if (ev->parsed()) return cmd_eval(eval_opts);
    if (tp->parsed()) return cmd_train_pool(tp_opts);
    if (te->parsed()) return cmd_train_embed(te_opts);
    if (al->parsed()) return cmd_align(al_opts);
    if (hm->parsed()) return cmd_export_heatmap(hm_opts);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const IoError& e) {
    log_error(e.what());
    return 2;
  } catch (const Error& e) {
    log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
  return 0;
}
