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

#include "relpool/fragment_embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "relpool/rng.hpp"

namespace relpool {

using nlohmann::json;

void EmbedDataset::resolve_sentence_images() {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < images.size(); ++i)
    index[images[i].id] = static_cast<int>(i);
  sentence_image.clear();
  for (const EmbedSentence& s : sentences) {
    const auto it = index.find(s.image_id);
    if (it == index.end())
      throw ValidationError("sentence '" + s.id + "' names unknown image '" +
                            s.image_id + "'");
    sentence_image.push_back(it->second);
  }
}

std::vector<SpatialFragment> build_spatial_fragments(
    const std::vector<EmbedDetection>& detections, const PoolingScheme& scheme,
    int grid, bool include_self_pairs) {
  std::vector<SpatialFragment> out;
  for (std::size_t r = 0; r < detections.size(); ++r)
    for (std::size_t d = 0; d < detections.size(); ++d) {
      if (!include_self_pairs && r == d) continue;
      SpatialFragment frag;
      frag.ref_index = static_cast<int>(r);
      frag.rel_index = static_cast<int>(d);
      const auto binned =
          discretize(offset_map(detections[r].box, detections[d].box, grid),
                     scheme);
      frag.binned = Eigen::Map<const Eigen::VectorXd>(
          binned.data(), static_cast<Eigen::Index>(binned.size()));
      out.push_back(std::move(frag));
    }
  return out;
}

namespace {

Eigen::MatrixXd seeded_matrix(Rng& rng, int rows, int cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

}  // namespace

EmbeddingParams EmbeddingParams::init(const EmbedDims& dims,
                                      std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingParams p;
  p.dims = dims;
  p.W_e = seeded_matrix(rng, dims.vocab, dims.word, 1.0);
  p.W_R = seeded_matrix(rng, dims.embed, 2 * dims.word, 0.1);
  p.b_R = Eigen::VectorXd::Zero(dims.embed);
  p.W_m = seeded_matrix(rng, dims.embed, dims.feature, 0.1);
  p.W_z = seeded_matrix(rng, dims.concepts, 2 * dims.word, 0.1);
  p.b_z = Eigen::VectorXd::Zero(dims.concepts);
  p.W_s = seeded_matrix(rng, dims.concepts, dims.regions, 0.1);
  return p;
}

namespace {

Eigen::VectorXd word_pair(const EmbeddingParams& params,
                          const TextFragment& frag) {
  if (frag.t1 < 0 || frag.t1 >= params.W_e.rows() || frag.t2 < 0 ||
      frag.t2 >= params.W_e.rows())
    throw IndexError("word index outside the embedding table");
  Eigen::VectorXd x(2 * params.dims.word);
  x.head(params.dims.word) = params.W_e.row(frag.t1).transpose();
  x.tail(params.dims.word) = params.W_e.row(frag.t2).transpose();
  return x;
}

Eigen::VectorXd relu(const Eigen::VectorXd& v) { return v.cwiseMax(0.0); }

}  // namespace

Eigen::VectorXd embed_text(const EmbeddingParams& params,
                           const TextFragment& frag) {
  return relu(params.W_R * word_pair(params, frag) + params.b_R);
}

Eigen::VectorXd embed_visual(const EmbeddingParams& params,
                             const EmbedDetection& frag) {
  if (frag.feature.size() != params.W_m.cols())
    throw DimensionMismatch("visual feature width does not match W_m");
  return params.W_m * frag.feature;
}

Eigen::VectorXd embed_spatial(const EmbeddingParams& params, const Box& ref,
                              const Box& rel, const PoolingScheme& scheme,
                              int grid) {
  if (scheme.region_count() != params.W_s.cols())
    throw DimensionMismatch("pooling scheme length does not match W_s");
  const auto binned = discretize(offset_map(ref, rel, grid), scheme);
  return params.W_s * Eigen::Map<const Eigen::VectorXd>(
                          binned.data(), static_cast<Eigen::Index>(binned.size()));
}

Eigen::VectorXd embed_spatio_textual(const EmbeddingParams& params,
                                     const TextFragment& frag) {
  return relu(params.W_z * word_pair(params, frag) + params.b_z);
}

EmbedGrads EmbedGrads::zeros(const EmbedDims& dims) {
  EmbedGrads g;
  g.W_R = Eigen::MatrixXd::Zero(dims.embed, 2 * dims.word);
  g.b_R = Eigen::VectorXd::Zero(dims.embed);
  g.W_m = Eigen::MatrixXd::Zero(dims.embed, dims.feature);
  g.W_z = Eigen::MatrixXd::Zero(dims.concepts, 2 * dims.word);
  g.b_z = Eigen::VectorXd::Zero(dims.concepts);
  g.W_s = Eigen::MatrixXd::Zero(dims.concepts, dims.regions);
  return g;
}

namespace {

struct BestMatch {
  double value = 0.0;
  int index = -1;
};

// Embeddings and pre-activations of the whole batch.
struct Forward {
  std::vector<std::vector<Eigen::VectorXd>> x;      // per sentence fragment, 2E
  std::vector<std::vector<Eigen::VectorXd>> pre_s;  // before the rectifier
  std::vector<std::vector<Eigen::VectorXd>> s;
  std::vector<std::vector<Eigen::VectorXd>> pre_z;
  std::vector<std::vector<Eigen::VectorXd>> z;
  std::vector<std::vector<Eigen::VectorXd>> v;  // per image visual fragment
  std::vector<std::vector<Eigen::VectorXd>> p;  // per image spatial fragment
  // best[i][k][f]: strongest fragment of image i for sentence k's fragment f
  std::vector<std::vector<std::vector<BestMatch>>> best_vis;
  std::vector<std::vector<std::vector<BestMatch>>> best_spa;
};

BestMatch best_inner(const std::vector<Eigen::VectorXd>& candidates,
                     const Eigen::VectorXd& query) {
  BestMatch best;
  for (std::size_t u = 0; u < candidates.size(); ++u) {
    const double value = candidates[u].dot(query);
    if (best.index < 0 || value > best.value) {
      best.value = value;
      best.index = static_cast<int>(u);
    }
  }
  return best;
}

Forward run_forward(const EmbeddingParams& params, const EmbedDataset& dataset) {
  Forward f;
  const std::size_t n_sent = dataset.sentences.size();
  const std::size_t n_img = dataset.images.size();
  f.x.resize(n_sent);
  f.pre_s.resize(n_sent);
  f.s.resize(n_sent);
  f.pre_z.resize(n_sent);
  f.z.resize(n_sent);
  for (std::size_t k = 0; k < n_sent; ++k) {
    for (const TextFragment& frag : dataset.sentences[k].fragments) {
      Eigen::VectorXd x = word_pair(params, frag);
      Eigen::VectorXd pre_s = params.W_R * x + params.b_R;
      Eigen::VectorXd pre_z = params.W_z * x + params.b_z;
      f.s[k].push_back(relu(pre_s));
      f.z[k].push_back(relu(pre_z));
      f.pre_s[k].push_back(std::move(pre_s));
      f.pre_z[k].push_back(std::move(pre_z));
      f.x[k].push_back(std::move(x));
    }
  }
  f.v.resize(n_img);
  f.p.resize(n_img);
  for (std::size_t i = 0; i < n_img; ++i) {
    for (const EmbedDetection& d : dataset.images[i].detections)
      f.v[i].push_back(params.W_m * d.feature);
    for (const SpatialFragment& sp : dataset.images[i].spatial)
      f.p[i].push_back(params.W_s * sp.binned);
  }
  f.best_vis.assign(n_img, {});
  f.best_spa.assign(n_img, {});
  for (std::size_t i = 0; i < n_img; ++i) {
    f.best_vis[i].resize(n_sent);
    f.best_spa[i].resize(n_sent);
    for (std::size_t k = 0; k < n_sent; ++k) {
      const std::size_t frag_count = f.s[k].size();
      f.best_vis[i][k].resize(frag_count);
      f.best_spa[i][k].resize(frag_count);
      for (std::size_t q = 0; q < frag_count; ++q) {
        f.best_vis[i][k][q] = best_inner(f.v[i], f.s[k][q]);
        f.best_spa[i][k][q] = best_inner(f.p[i], f.z[k][q]);
      }
    }
  }
  return f;
}

Eigen::MatrixXd scores_from_forward(const Forward& f, std::size_t n_img,
                                    std::size_t n_sent, double sw) {
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_img, n_sent);
  for (std::size_t i = 0; i < n_img; ++i)
    for (std::size_t k = 0; k < n_sent; ++k) {
      const std::size_t frag_count = f.best_vis[i][k].size();
      if (frag_count == 0) continue;
      double total = 0.0;
      for (std::size_t q = 0; q < frag_count; ++q) {
        if (f.best_vis[i][k][q].index >= 0) total += f.best_vis[i][k][q].value;
        if (sw != 0.0 && f.best_spa[i][k][q].index >= 0)
          total += sw * f.best_spa[i][k][q].value;
      }
      scores(i, k) = total / static_cast<double>(frag_count);
    }
  return scores;
}

}  // namespace

Eigen::MatrixXd score_matrix(const EmbeddingParams& params,
                             const EmbedDataset& dataset,
                             double spatial_weight) {
  const Forward f = run_forward(params, dataset);
  return scores_from_forward(f, dataset.images.size(),
                             dataset.sentences.size(), spatial_weight);
}

double objective(const EmbeddingParams& params, const EmbedDataset& dataset,
                 const ObjectiveConfig& config, EmbedGrads* grads) {
  if (dataset.sentences.empty() || dataset.images.empty())
    throw EmptyBatch("objective needs at least one image and one sentence");
  if (dataset.sentence_image.size() != dataset.sentences.size())
    throw ValidationError("dataset sentence images are unresolved");

  const std::size_t n_img = dataset.images.size();
  const std::size_t n_sent = dataset.sentences.size();
  const double sw = config.spatial_weight;
  const Forward f = run_forward(params, dataset);
  const Eigen::MatrixXd scores = scores_from_forward(f, n_img, n_sent, sw);

  // Gradient accumulators on the embedding vectors.
  std::vector<std::vector<Eigen::VectorXd>> ds(n_sent), dz(n_sent), dv(n_img),
      dp(n_img);
  for (std::size_t k = 0; k < n_sent; ++k) {
    ds[k].assign(f.s[k].size(), Eigen::VectorXd::Zero(params.dims.embed));
    dz[k].assign(f.z[k].size(), Eigen::VectorXd::Zero(params.dims.concepts));
  }
  for (std::size_t i = 0; i < n_img; ++i) {
    dv[i].assign(f.v[i].size(), Eigen::VectorXd::Zero(params.dims.embed));
    dp[i].assign(f.p[i].size(), Eigen::VectorXd::Zero(params.dims.concepts));
  }

  // --- Global ranking term: margin hinges over both retrieval directions.
  std::size_t rank_terms = 0;
  for (std::size_t k = 0; k < n_sent; ++k) {
    const int truth = dataset.sentence_image[k];
    rank_terms += n_img - 1;
    for (std::size_t m = 0; m < n_sent; ++m)
      if (dataset.sentence_image[m] != truth) ++rank_terms;
  }

  Eigen::MatrixXd d_scores = Eigen::MatrixXd::Zero(n_img, n_sent);
  double rank_sum = 0.0;
  if (rank_terms > 0) {
    for (std::size_t k = 0; k < n_sent; ++k) {
      const int truth = dataset.sentence_image[k];
      const double true_score = scores(truth, k);
      for (std::size_t j = 0; j < n_img; ++j) {
        if (static_cast<int>(j) == truth) continue;
        const double hinge = config.margin - true_score + scores(j, k);
        if (hinge > 0.0) {
          rank_sum += hinge;
          d_scores(truth, k) -= 1.0;
          d_scores(j, k) += 1.0;
        }
      }
      for (std::size_t m = 0; m < n_sent; ++m) {
        if (dataset.sentence_image[m] == truth) continue;
        const double hinge = config.margin - true_score + scores(truth, m);
        if (hinge > 0.0) {
          rank_sum += hinge;
          d_scores(truth, k) -= 1.0;
          d_scores(truth, m) += 1.0;
        }
      }
    }
  }
  double loss = 0.0;
  if (rank_terms > 0) {
    loss += config.lambda_rank * rank_sum / static_cast<double>(rank_terms);
    const double scale = config.lambda_rank / static_cast<double>(rank_terms);
    for (std::size_t i = 0; i < n_img; ++i)
      for (std::size_t k = 0; k < n_sent; ++k) {
        const double g = d_scores(i, k) * scale;
        if (g == 0.0) continue;
        const std::size_t frag_count = f.s[k].size();
        const double per_frag = g / static_cast<double>(frag_count);
        for (std::size_t q = 0; q < frag_count; ++q) {
          const BestMatch& bv = f.best_vis[i][k][q];
          if (bv.index >= 0) {
            dv[i][bv.index] += per_frag * f.s[k][q];
            ds[k][q] += per_frag * f.v[i][bv.index];
          }
          if (sw != 0.0) {
            const BestMatch& bp = f.best_spa[i][k][q];
            if (bp.index >= 0) {
              dp[i][bp.index] += per_frag * sw * f.z[k][q];
              dz[k][q] += per_frag * sw * f.p[i][bp.index];
            }
          }
        }
      }
  }

  // --- Fragment alignment term: the best fragment of the true image stays
  // above the margin, every fragment of other images below its negative.
  const auto alignment_pool =
      [&](const std::vector<std::vector<std::vector<BestMatch>>>& best,
          const std::vector<std::vector<Eigen::VectorXd>>& queries,
          const std::vector<std::vector<Eigen::VectorXd>>& targets,
          std::vector<std::vector<Eigen::VectorXd>>& d_queries,
          std::vector<std::vector<Eigen::VectorXd>>& d_targets,
          double weight) {
        if (weight == 0.0) return;
        std::size_t terms = 0;
        for (std::size_t k = 0; k < n_sent; ++k) {
          const int truth = dataset.sentence_image[k];
          std::size_t per_fragment = targets[truth].empty() ? 0 : 1;
          for (std::size_t j = 0; j < n_img; ++j)
            if (static_cast<int>(j) != truth) per_fragment += targets[j].size();
          terms += queries[k].size() * per_fragment;
        }
        if (terms == 0) return;
        const double scale = weight / static_cast<double>(terms);
        for (std::size_t k = 0; k < n_sent; ++k) {
          const int truth = dataset.sentence_image[k];
          for (std::size_t q = 0; q < queries[k].size(); ++q) {
            const BestMatch& bm = best[truth][k][q];
            if (bm.index >= 0) {
              const double hinge = config.margin - bm.value;
              if (hinge > 0.0) {
                loss += scale * hinge;
                d_targets[truth][bm.index] -= scale * queries[k][q];
                d_queries[k][q] -= scale * targets[truth][bm.index];
              }
            }
            for (std::size_t j = 0; j < n_img; ++j) {
              if (static_cast<int>(j) == truth) continue;
              for (std::size_t u = 0; u < targets[j].size(); ++u) {
                const double hinge =
                    config.margin + targets[j][u].dot(queries[k][q]);
                if (hinge > 0.0) {
                  loss += scale * hinge;
                  d_targets[j][u] += scale * queries[k][q];
                  d_queries[k][q] += scale * targets[j][u];
                }
              }
            }
          }
        }
      };

  alignment_pool(f.best_vis, f.s, f.v, ds, dv, config.lambda_align);
  alignment_pool(f.best_spa, f.z, f.p, dz, dp, config.lambda_align * sw);

  if (grads != nullptr) {
    *grads = EmbedGrads::zeros(params.dims);
    for (std::size_t k = 0; k < n_sent; ++k)
      for (std::size_t q = 0; q < f.s[k].size(); ++q) {
        const Eigen::VectorXd mask_s =
            (f.pre_s[k][q].array() > 0.0).cast<double>();
        const Eigen::VectorXd dpre_s = ds[k][q].cwiseProduct(mask_s);
        grads->W_R += dpre_s * f.x[k][q].transpose();
        grads->b_R += dpre_s;
        const Eigen::VectorXd mask_z =
            (f.pre_z[k][q].array() > 0.0).cast<double>();
        const Eigen::VectorXd dpre_z = dz[k][q].cwiseProduct(mask_z);
        grads->W_z += dpre_z * f.x[k][q].transpose();
        grads->b_z += dpre_z;
      }
    for (std::size_t i = 0; i < n_img; ++i) {
      for (std::size_t u = 0; u < f.v[i].size(); ++u)
        grads->W_m +=
            dv[i][u] * dataset.images[i].detections[u].feature.transpose();
      for (std::size_t u = 0; u < f.p[i].size(); ++u)
        grads->W_s += dp[i][u] * dataset.images[i].spatial[u].binned.transpose();
    }
  }
  return loss;
}

EmbeddingParams train_embedding(const EmbedDataset& dataset,
                                const EmbedDims& dims, const EmbedHyper& hyper,
                                std::vector<double>* loss_curve) {
  if (dataset.sentences.empty() || dataset.images.empty())
    throw EmptyBatch("train_embedding needs a nonempty dataset");

  EmbedDims sized = dims;
  sized.vocab = static_cast<int>(dataset.vocab.size());
  for (const EmbedImage& image : dataset.images) {
    for (const EmbedDetection& d : image.detections)
      if (d.feature.size() != sized.feature)
        throw DimensionMismatch("dataset feature width does not match dims");
    for (const SpatialFragment& sp : image.spatial)
      if (sp.binned.size() != sized.regions)
        throw DimensionMismatch("dataset pooling regions do not match dims");
  }

  EmbeddingParams params = EmbeddingParams::init(sized, hyper.seed);
  ObjectiveConfig config;
  config.margin = hyper.margin;
  config.lambda_rank = hyper.lambda_rank;
  config.lambda_align = hyper.lambda_align;

  EmbedGrads grads = EmbedGrads::zeros(sized);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    config.spatial_weight = epoch < hyper.stage1_epochs ? 0.0 : 1.0;
    const double loss = objective(params, dataset, config, &grads);
    if (!std::isfinite(loss))
      throw DivergenceError("loss became non-finite at epoch " +
                            std::to_string(epoch));
    if (loss_curve != nullptr) loss_curve->push_back(loss);
    params.W_R -= hyper.lr * grads.W_R;
    params.b_R -= hyper.lr * grads.b_R;
    params.W_m -= hyper.lr * grads.W_m;
    params.W_z -= hyper.lr * grads.W_z;
    params.b_z -= hyper.lr * grads.b_z;
    params.W_s -= hyper.lr * grads.W_s;
  }
  return params;
}

namespace {

int rank_in_column(const Eigen::MatrixXd& scores, std::size_t column,
                   std::size_t row) {
  int rank = 1;
  for (Eigen::Index j = 0; j < scores.rows(); ++j) {
    if (static_cast<std::size_t>(j) == row) continue;
    const double other = scores(j, column);
    const double own = scores(row, column);
    if (other > own || (other == own && static_cast<std::size_t>(j) < row))
      ++rank;
  }
  return rank;
}

int rank_in_row(const Eigen::MatrixXd& scores, std::size_t row,
                std::size_t column) {
  int rank = 1;
  for (Eigen::Index m = 0; m < scores.cols(); ++m) {
    if (static_cast<std::size_t>(m) == column) continue;
    const double other = scores(row, m);
    const double own = scores(row, column);
    if (other > own || (other == own && static_cast<std::size_t>(m) < column))
      ++rank;
  }
  return rank;
}

RecallReport report_from_ranks(const std::vector<int>& ranks) {
  RecallReport report;
  if (ranks.empty()) return report;
  double total = 0.0;
  int at1 = 0, at5 = 0, at10 = 0;
  for (int r : ranks) {
    total += r;
    at1 += (r <= 1);
    at5 += (r <= 5);
    at10 += (r <= 10);
  }
  const double n = static_cast<double>(ranks.size());
  report.r_at_1 = at1 / n;
  report.r_at_5 = at5 / n;
  report.r_at_10 = at10 / n;
  report.mean_r = total / n;
  return report;
}

}  // namespace

RecallReport image_retrieval_recall(const Eigen::MatrixXd& scores,
                                    const EmbedDataset& dataset) {
  std::vector<int> ranks;
  for (std::size_t k = 0; k < dataset.sentences.size(); ++k)
    ranks.push_back(rank_in_column(scores, k, dataset.sentence_image[k]));
  return report_from_ranks(ranks);
}

RecallReport annotation_recall(const Eigen::MatrixXd& scores,
                               const EmbedDataset& dataset) {
  std::vector<int> ranks;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    int best = 0;
    for (std::size_t k = 0; k < dataset.sentences.size(); ++k) {
      if (dataset.sentence_image[k] != static_cast<int>(i)) continue;
      const int rank = rank_in_row(scores, i, k);
      if (best == 0 || rank < best) best = rank;
    }
    if (best > 0) ranks.push_back(best);
  }
  return report_from_ranks(ranks);
}

std::vector<AlignmentBinding> align(const EmbeddingParams& params,
                                    const EmbedImage& image,
                                    const EmbedSentence& sentence, int top_k) {
  std::vector<Eigen::VectorXd> v, p;
  for (const EmbedDetection& d : image.detections)
    v.push_back(embed_visual(params, d));
  for (const SpatialFragment& sp : image.spatial)
    p.push_back(params.W_s * sp.binned);

  std::vector<AlignmentBinding> out;
  for (std::size_t q = 0; q < sentence.fragments.size(); ++q) {
    const Eigen::VectorXd s = embed_text(params, sentence.fragments[q]);
    const Eigen::VectorXd z = embed_spatio_textual(params, sentence.fragments[q]);
    std::vector<AlignmentBinding> candidates;
    for (std::size_t u = 0; u < v.size(); ++u)
      candidates.push_back({static_cast<int>(q), AlignmentBinding::Kind::visual,
                            static_cast<int>(u), 0, v[u].dot(s)});
    for (std::size_t u = 0; u < p.size(); ++u)
      candidates.push_back({static_cast<int>(q), AlignmentBinding::Kind::spatial,
                            static_cast<int>(u), 0, p[u].dot(z)});
    std::sort(candidates.begin(), candidates.end(),
              [](const AlignmentBinding& a, const AlignmentBinding& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.kind != b.kind)
                  return a.kind == AlignmentBinding::Kind::visual;
                return a.target < b.target;
              });
    const std::size_t keep =
        std::min<std::size_t>(top_k, candidates.size());
    for (std::size_t r = 0; r < keep; ++r) {
      candidates[r].rank = static_cast<int>(r) + 1;
      out.push_back(candidates[r]);
    }
  }
  return out;
}

// --- File formats -----------------------------------------------------------

std::vector<std::string> load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file '" + path + "'");
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen.insert(line).second)
      throw ValidationError("duplicate vocab word '" + line + "'");
    vocab.push_back(line);
  }
  return vocab;
}

void save_vocab(const std::vector<std::string>& vocab,
                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocab file '" + path + "'");
  for (const std::string& w : vocab) out << w << "\n";
  if (!out) throw IoError("failed writing vocab file '" + path + "'");
}

EmbedDataset load_embed_dataset(const std::string& data_path,
                                const std::string& vocab_path,
                                const PoolingScheme& scheme, int grid,
                                bool include_self_pairs) {
  EmbedDataset dataset;
  dataset.vocab = load_vocab(vocab_path);
  std::map<std::string, int> word_index;
  for (std::size_t i = 0; i < dataset.vocab.size(); ++i)
    word_index[dataset.vocab[i]] = static_cast<int>(i);

  std::ifstream in(data_path);
  if (!in) throw IoError("cannot open dataset file '" + data_path + "'");
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index feature_dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "image") {
        EmbedImage image;
        image.id = j.at("id").get<std::string>();
        for (const auto& fj : j.at("fragments")) {
          EmbedDetection d;
          d.id = fj.at("id").get<int>();
          const auto feature = fj.at("feature").get<std::vector<double>>();
          d.feature = Eigen::Map<const Eigen::VectorXd>(
              feature.data(), static_cast<Eigen::Index>(feature.size()));
          const auto& box = fj.at("box");
          if (!box.is_array() || box.size() != 4)
            throw ParseError(line_no, "box must be [x_min,y_min,x_max,y_max]");
          d.box = Box{box[0].get<double>(), box[1].get<double>(),
                      box[2].get<double>(), box[3].get<double>()};
          validate_box(d.box, "image '" + image.id + "'");
          if (feature_dim < 0) feature_dim = d.feature.size();
          if (d.feature.size() != feature_dim)
            throw DimensionMismatch("inconsistent feature width in '" +
                                    image.id + "'");
          image.detections.push_back(std::move(d));
        }
        if (image.detections.empty())
          throw ValidationError("image '" + image.id + "' has no fragments");
        image.spatial = build_spatial_fragments(image.detections, scheme, grid,
                                                include_self_pairs);
        dataset.images.push_back(std::move(image));
      } else if (type == "sentence") {
        EmbedSentence sentence;
        sentence.id = j.at("id").get<std::string>();
        sentence.image_id = j.at("image").get<std::string>();
        for (const auto& tj : j.at("triplets")) {
          if (!tj.is_array() || tj.size() != 3)
            throw ParseError(line_no, "triplet must be [relation,word,word]");
          TextFragment frag;
          frag.relation = tj[0].get<std::string>();
          for (int side = 1; side <= 2; ++side) {
            const std::string word = tj[side].get<std::string>();
            const auto it = word_index.find(word);
            if (it == word_index.end())
              throw ValidationError("word '" + word + "' not in vocabulary");
            (side == 1 ? frag.t1 : frag.t2) = it->second;
          }
          sentence.fragments.push_back(std::move(frag));
        }
        if (sentence.fragments.empty())
          throw ValidationError("sentence '" + sentence.id + "' has no triplets");
        dataset.sentences.push_back(std::move(sentence));
      } else {
        throw ParseError(line_no, "unknown line type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  dataset.resolve_sentence_images();
  return dataset;
}

void save_embed_dataset(const EmbedDataset& dataset,
                        const std::string& data_path) {
  std::ofstream out(data_path);
  if (!out) throw IoError("cannot write dataset file '" + data_path + "'");
  for (const EmbedImage& image : dataset.images) {
    json fragments = json::array();
    for (const EmbedDetection& d : image.detections) {
      std::vector<double> feature(d.feature.data(),
                                  d.feature.data() + d.feature.size());
      fragments.push_back(
          json{{"id", d.id},
               {"feature", feature},
               {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}});
    }
    out << json{{"type", "image"}, {"id", image.id}, {"fragments", fragments}}
               .dump()
        << "\n";
  }
  for (const EmbedSentence& sentence : dataset.sentences) {
    json triplets = json::array();
    for (const TextFragment& frag : sentence.fragments) {
      if (frag.t1 < 0 || frag.t1 >= static_cast<int>(dataset.vocab.size()) ||
          frag.t2 < 0 || frag.t2 >= static_cast<int>(dataset.vocab.size()))
        throw IndexError("text fragment word index outside the vocabulary");
      triplets.push_back(json::array({frag.relation, dataset.vocab[frag.t1],
                                      dataset.vocab[frag.t2]}));
    }
    out << json{{"type", "sentence"},
                {"id", sentence.id},
                {"image", sentence.image_id},
                {"triplets", triplets}}
               .dump()
        << "\n";
  }
  if (!out) throw IoError("failed writing dataset file '" + data_path + "'");
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows,
                                 Eigen::Index cols, const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ValidationError("matrix '" + name + "' has wrong row count");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError("matrix '" + name + "' has wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size,
                                 const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw ValidationError("vector '" + name + "' has wrong length");
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

void save_embed_params(const EmbeddingParams& params, const std::string& path) {
  json j;
  j["dims"] = {{"vocab", params.dims.vocab},     {"word", params.dims.word},
               {"embed", params.dims.embed},     {"concepts", params.dims.concepts},
               {"regions", params.dims.regions}, {"feature", params.dims.feature}};
  j["W_e"] = matrix_to_json(params.W_e);
  j["W_R"] = matrix_to_json(params.W_R);
  j["b_R"] = vector_to_json(params.b_R);
  j["W_m"] = matrix_to_json(params.W_m);
  j["W_z"] = matrix_to_json(params.W_z);
  j["b_z"] = vector_to_json(params.b_z);
  j["W_s"] = matrix_to_json(params.W_s);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write params file '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing params file '" + path + "'");
}

EmbeddingParams load_embed_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open params file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad params file: ") + e.what());
  }
  EmbeddingParams params;
  try {
    const auto& d = j.at("dims");
    params.dims.vocab = d.at("vocab").get<int>();
    params.dims.word = d.at("word").get<int>();
    params.dims.embed = d.at("embed").get<int>();
    params.dims.concepts = d.at("concepts").get<int>();
    params.dims.regions = d.at("regions").get<int>();
    params.dims.feature = d.at("feature").get<int>();
    const EmbedDims& dims = params.dims;
    params.W_e = matrix_from_json(j.at("W_e"), dims.vocab, dims.word, "W_e");
    params.W_R = matrix_from_json(j.at("W_R"), dims.embed, 2 * dims.word, "W_R");
    params.b_R = vector_from_json(j.at("b_R"), dims.embed, "b_R");
    params.W_m = matrix_from_json(j.at("W_m"), dims.embed, dims.feature, "W_m");
    params.W_z =
        matrix_from_json(j.at("W_z"), dims.concepts, 2 * dims.word, "W_z");
    params.b_z = vector_from_json(j.at("b_z"), dims.concepts, "b_z");
    params.W_s =
        matrix_from_json(j.at("W_s"), dims.concepts, dims.regions, "W_s");
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad params file: ") + e.what());
  }
  return params;
}

EmbedDataset make_planted_dataset(const PlantedConfig& cfg,
                                  const PoolingScheme& scheme, int grid) {
  static const std::vector<std::string> base_nouns = {
      "bed",    "lamp",  "picture", "table", "chair",  "window", "rug",
      "shelf",  "book",  "vase",    "plant", "clock",  "mirror", "sofa",
      "stool",  "box",   "cup",     "bottle", "phone", "bowl"};
  static const std::vector<std::string> relations = {"above", "below",
                                                     "left of", "right of"};

  EmbedDataset dataset;
  for (int i = 0; i < 2 * cfg.n_images; ++i) {
    if (i < static_cast<int>(base_nouns.size()))
      dataset.vocab.push_back(base_nouns[i]);
    else
      dataset.vocab.push_back("object" + std::to_string(i));
  }

  Rng rng(cfg.seed);
  std::vector<Eigen::VectorXd> signatures;
  for (int i = 0; i < 2 * cfg.n_images; ++i) {
    Eigen::VectorXd sig(cfg.feature_dim);
    for (int c = 0; c < cfg.feature_dim; ++c) sig(c) = rng.normal();
    signatures.push_back(std::move(sig));
  }

  const auto noisy_feature = [&](int category) {
    Eigen::VectorXd f = signatures[category];
    for (int c = 0; c < cfg.feature_dim; ++c)
      f(c) += cfg.feature_noise * rng.normal();
    return f;
  };

  for (int i = 0; i < cfg.n_images; ++i) {
    const std::string& rel = relations[i % relations.size()];
    double dx = 0.0, dy = 0.0;
    if (rel == "above") dy = -0.3;
    if (rel == "below") dy = 0.3;
    if (rel == "left of") dx = -0.3;
    if (rel == "right of") dx = 0.3;

    const double jx = rng.uniform(-0.02, 0.02);
    const double jy = rng.uniform(-0.02, 0.02);
    const double ref_cx = 0.5 - dx / 2.0 + jx;
    const double ref_cy = 0.5 - dy / 2.0 + jy;
    const double subj_cx = ref_cx + dx + rng.uniform(-0.02, 0.02);
    const double subj_cy = ref_cy + dy + rng.uniform(-0.02, 0.02);

    const auto box_at = [](double cx, double cy) {
      return Box{cx - 0.1, cy - 0.1, cx + 0.1, cy + 0.1};
    };

    EmbedImage image;
    image.id = "img" + std::to_string(i);
    image.detections.push_back({0, box_at(subj_cx, subj_cy), noisy_feature(2 * i)});
    image.detections.push_back(
        {1, box_at(ref_cx, ref_cy), noisy_feature(2 * i + 1)});
    image.spatial = build_spatial_fragments(image.detections, scheme, grid);
    dataset.images.push_back(std::move(image));

    EmbedSentence sentence;
    sentence.id = "sen" + std::to_string(i);
    sentence.image_id = "img" + std::to_string(i);
    sentence.fragments.push_back({rel, 2 * i, 2 * i + 1});
    dataset.sentences.push_back(std::move(sentence));
  }
  dataset.resolve_sentence_images();
  return dataset;
}

}  // namespace relpool
