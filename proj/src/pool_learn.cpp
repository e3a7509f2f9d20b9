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

#include "relpool/pool_learn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "relpool/log.hpp"

namespace relpool {

using nlohmann::json;

double PoolLearnParams::cls_for(const std::string& relation) const {
  const auto it = cls.find(relation);
  if (it == cls.end()) throw UnknownPreposition(relation);
  return it->second;
}

namespace {

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

// log(1 + exp(m)) without overflow.
double softplus(double m) {
  if (m > 0.0) return m + std::log1p(std::exp(-m));
  return std::log1p(std::exp(m));
}

// Deterministic choice of the detection pair feeding the pooled feature:
// the best-scoring detection per category (ties by lowest id), subject and
// reference kept distinct.
struct FeatureContext {
  const Detection* ref = nullptr;
  const Detection* subject = nullptr;
};

const Detection* best_detection(const std::vector<const Detection*>& dets,
                                const Detection* excluded) {
  const Detection* best = nullptr;
  for (const Detection* d : dets) {
    if (d == excluded) continue;
    if (best == nullptr || d->score > best->score ||
        (d->score == best->score && d->id < best->id))
      best = d;
  }
  return best;
}

FeatureContext feature_context(const TrainExample& example) {
  const auto refs = example.scene.find_category(example.triplet.reference);
  const auto subjects = example.scene.find_category(example.triplet.subject);
  if (refs.empty())
    throw MissingCategory(example.scene.id, example.triplet.reference);
  if (subjects.empty())
    throw MissingCategory(example.scene.id, example.triplet.subject);
  FeatureContext ctx;
  ctx.ref = best_detection(refs, nullptr);
  ctx.subject = best_detection(subjects, ctx.ref);
  if (ctx.subject == nullptr)
    throw MissingCategory(example.scene.id, example.triplet.subject);
  return ctx;
}

PoolLearnParams zeros_like(const PoolLearnParams& params) {
  PoolLearnParams g;
  g.bank.grid = params.bank.grid;
  g.bank.size = params.bank.size;
  for (const auto& [name, t] : params.bank.templates)
    g.bank.templates.emplace(name, Template::zeros(name, t.size));
  g.bias = 0.0;
  for (const auto& [name, c] : params.cls) g.cls[name] = 0.0;
  return g;
}

}  // namespace

double predict(const PoolLearnParams& params, const TrainExample& example) {
  const FeatureContext ctx = feature_context(example);
  const Template& t = params.bank.at(example.triplet.preposition);
  const int grid = params.bank.grid;
  const double feature =
      pool(t, cell_index(ctx.ref->box.center_x(), grid),
           cell_index(ctx.ref->box.center_y(), grid),
           dirac_image(ctx.subject->box, grid));
  return sigmoid(params.cls_for(example.triplet.preposition) * feature +
                 params.bias);
}

std::pair<double, PoolLearnParams> loss_and_grad(
    const PoolLearnParams& params, const std::vector<TrainExample>& batch,
    double l2) {
  if (batch.empty()) throw EmptyBatch("loss_and_grad needs a nonempty batch");
  if (l2 < 0.0) throw ValidationError("l2 must be >= 0");

  const int grid = params.bank.grid;
  const int c = params.bank.size / 2;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  PoolLearnParams grad = zeros_like(params);
  double loss = 0.0;
  for (const TrainExample& example : batch) {
    const std::string& rel = example.triplet.preposition;
    const Template& t = params.bank.at(rel);
    const FeatureContext ctx = feature_context(example);
    const int rx = cell_index(ctx.ref->box.center_x(), grid);
    const int ry = cell_index(ctx.ref->box.center_y(), grid);
    const int sx = cell_index(ctx.subject->box.center_x(), grid);
    const int sy = cell_index(ctx.subject->box.center_y(), grid);
    // pool() against the subject's dirac reads a single template cell.
    const double feature = t.at(c + sx - rx, c + sy - ry);
    const double cls_w = params.cls_for(rel);
    const double margin = cls_w * feature + params.bias;
    loss += (softplus(margin) - example.label * margin) * inv_n;
    const double delta = (sigmoid(margin) - example.label) * inv_n;
    grad.bias += delta;
    grad.cls[rel] += delta * feature;
    grad.bank.templates.at(rel).at(c + sx - rx, c + sy - ry) += delta * cls_w;
  }

  if (l2 > 0.0) {
    for (const auto& [name, t] : params.bank.templates) {
      Template& gt = grad.bank.templates.at(name);
      for (std::size_t i = 0; i < t.weights.size(); ++i) {
        loss += l2 * t.weights[i] * t.weights[i];
        gt.weights[i] += 2.0 * l2 * t.weights[i];
      }
    }
  }
  return {loss, grad};
}

PoolLearnParams train_pooling(const std::vector<TrainExample>& data,
                              const TemplateBank& init, const PoolHyper& hyper,
                              std::vector<double>* loss_curve) {
  if (data.empty()) throw EmptyBatch("train_pooling needs training data");

  PoolLearnParams params;
  params.bank = init;
  params.bias = 0.0;
  for (const auto& [name, t] : init.templates) params.cls[name] = 1.0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto [loss, grad] = loss_and_grad(params, data, hyper.l2);
    if (!std::isfinite(loss))
      throw DivergenceError("loss became non-finite at epoch " +
                            std::to_string(epoch));
    if (loss_curve != nullptr) loss_curve->push_back(loss);
    params.bias -= hyper.lr * grad.bias;
    for (auto& [name, c] : params.cls) c -= hyper.lr * grad.cls.at(name);
    for (auto& [name, t] : params.bank.templates) {
      const Template& gt = grad.bank.templates.at(name);
      for (std::size_t i = 0; i < t.weights.size(); ++i)
        t.weights[i] -= hyper.lr * gt.weights[i];
    }
  }

  // Fold each template's L1 scale into its classifier weight so exported
  // banks are unit-normalized. Already-normalized banks pass through
  // untouched (keeps zero-epoch training a strict no-op).
  for (auto& [name, t] : params.bank.templates) {
    const double scale = t.l1_norm();
    if (scale > 0.0 && std::abs(scale - 1.0) > 1e-12) {
      for (double& w : t.weights) w /= scale;
      params.cls[name] *= scale;
    }
  }
  return params;
}

std::vector<TrainExample> build_train_examples(
    const Corpus& corpus, const std::vector<StructuredQuery>& queries) {
  std::map<std::string, const StructuredQuery*> by_id;
  for (const StructuredQuery& q : queries) by_id[q.id] = &q;

  std::vector<TrainExample> examples;
  std::size_t skipped = 0;
  for (const RelevanceAnnotation& a : corpus.annotations) {
    const auto qit = by_id.find(a.query_id);
    if (qit == by_id.end())
      throw ValidationError("relevance names unknown query '" + a.query_id + "'");
    const Scene* scene = corpus.find_scene(a.scene_id);
    if (scene == nullptr)
      throw ValidationError("relevance names unknown scene '" + a.scene_id + "'");
    for (const SpatialTriplet& triplet : qit->second->triplets) {
      const bool has_subject = !scene->find_category(triplet.subject).empty();
      const bool has_reference = !scene->find_category(triplet.reference).empty();
      if (!has_subject || !has_reference) {
        ++skipped;
        continue;
      }
      examples.push_back({triplet, *scene, a.relevant ? 1 : 0});
    }
  }
  if (skipped > 0)
    log_info("skipped " + std::to_string(skipped) +
             " annotated scenes lacking a query category");
  return examples;
}

void save_pool_params(const PoolLearnParams& params, const std::string& path) {
  json j;
  j["grid"] = params.bank.grid;
  j["size"] = params.bank.size;
  json templates = json::object();
  for (const auto& [name, t] : params.bank.templates) templates[name] = t.weights;
  j["templates"] = templates;
  j["bias"] = params.bias;
  json cls = json::object();
  for (const auto& [name, c] : params.cls) cls[name] = c;
  j["cls"] = cls;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pool params '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing pool params '" + path + "'");
}

PoolLearnParams load_pool_params(const std::string& path) {
  PoolLearnParams params;
  params.bank = load_template_bank(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pool params '" + path + "'");
  json j;
  try {
    in >> j;
    params.bias = j.at("bias").get<double>();
    for (const auto& [name, c] : j.at("cls").items())
      params.cls[name] = c.get<double>();
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad pool params: ") + e.what());
  }
  return params;
}

}  // namespace relpool
