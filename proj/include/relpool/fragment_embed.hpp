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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relpool/query.hpp"
#include "relpool/scene.hpp"
#include "relpool/template.hpp"

namespace relpool {

// A word pair under a binary relation. Only the words are embedded; the
// relation string is carried for interpretation and display.
struct TextFragment {
  std::string relation;
  int t1 = 0;
  int t2 = 0;
};

// A detection with an ingested appearance feature. The box feeds the spatial
// fragments; visual fragments embed the feature vector.
struct EmbedDetection {
  int id = 0;
  Box box;
  Eigen::VectorXd feature;
};

// An ordered detection pair, represented by the region masses of the related
// detection's dirac image in reference-centered offset coordinates.
struct SpatialFragment {
  int ref_index = 0;
  int rel_index = 0;
  Eigen::VectorXd binned;  // g(u), length = scheme region count
};

struct EmbedImage {
  std::string id;
  std::vector<EmbedDetection> detections;  // one visual fragment each
  std::vector<SpatialFragment> spatial;
};

struct EmbedSentence {
  std::string id;
  std::string image_id;
  std::vector<TextFragment> fragments;
};

struct EmbedDataset {
  std::vector<std::string> vocab;
  std::vector<EmbedImage> images;
  std::vector<EmbedSentence> sentences;
  std::vector<int> sentence_image;  // image index per sentence

  void resolve_sentence_images();  // fills sentence_image from image ids
};

// All ordered detection pairs of an image (D^2 with self-pairs, the default;
// D^2-D without).
std::vector<SpatialFragment> build_spatial_fragments(
    const std::vector<EmbedDetection>& detections, const PoolingScheme& scheme,
    int grid, bool include_self_pairs = true);

struct EmbedDims {
  int vocab = 200;    // V, word table rows
  int word = 16;      // E, word embedding width
  int embed = 24;     // E', textual/visual fragment space
  int concepts = 4;   // K, spatial concept space
  int regions = 20;   // P, pooling scheme length
  int feature = 32;   // F, ingested visual feature width
};

// Learnable maps of the bi-directional fragment embedding. W_e is drawn once
// from a seeded unit-variance generator and stays fixed during training.
struct EmbeddingParams {
  EmbedDims dims;
  Eigen::MatrixXd W_e;  // V x E, fixed
  Eigen::MatrixXd W_R;  // E' x 2E
  Eigen::VectorXd b_R;  // E'
  Eigen::MatrixXd W_m;  // E' x F
  Eigen::MatrixXd W_z;  // K x 2E
  Eigen::VectorXd b_z;  // K
  Eigen::MatrixXd W_s;  // K x P

  static EmbeddingParams init(const EmbedDims& dims, std::uint64_t seed);
};

// s = relu(W_R [W_e t1; W_e t2] + b_R)
Eigen::VectorXd embed_text(const EmbeddingParams& params,
                           const TextFragment& frag);
// v = W_m feature
Eigen::VectorXd embed_visual(const EmbeddingParams& params,
                             const EmbedDetection& frag);
// p = W_s g(offset dirac of rel centered on ref)
Eigen::VectorXd embed_spatial(const EmbeddingParams& params, const Box& ref,
                              const Box& rel, const PoolingScheme& scheme,
                              int grid);
// z = relu(W_z [W_e t1; W_e t2] + b_z)
Eigen::VectorXd embed_spatio_textual(const EmbeddingParams& params,
                                     const TextFragment& frag);

struct ObjectiveConfig {
  double margin = 1.0;
  double lambda_rank = 1.0;   // global ranking term weight
  double lambda_align = 1.0;  // fragment alignment term weight
  double spatial_weight = 1.0;  // 0 disables the spatial/spatio-textual pool
};

struct EmbedGrads {
  Eigen::MatrixXd W_R, W_m, W_z, W_s;
  Eigen::VectorXd b_R, b_z;

  static EmbedGrads zeros(const EmbedDims& dims);
};

// Image-sentence score: mean over the sentence's fragments of the best
// visual match (inner product) plus spatial_weight times the best spatial
// match, pools kept separate. Rows are images, columns sentences.
Eigen::MatrixXd score_matrix(const EmbeddingParams& params,
                             const EmbedDataset& dataset,
                             double spatial_weight);

// Margin ranking over image-sentence scores (both directions) plus a
// fragment alignment term: per text fragment, the best fragment of the true
// image must score above the margin and every fragment of other images below
// its negative. Both terms are means over their hinge counts. Gradients
// cover every learnable map (W_e excluded).
double objective(const EmbeddingParams& params, const EmbedDataset& dataset,
                 const ObjectiveConfig& config, EmbedGrads* grads = nullptr);

struct EmbedHyper {
  double lr = 0.1;
  int epochs = 600;
  int stage1_epochs = 200;  // epochs with the spatial pool disabled
  double margin = 1.0;
  double lambda_rank = 1.0;
  double lambda_align = 1.0;
  std::uint64_t seed = 0;
};

// Two-stage full-batch descent: the spatial pool is switched off for the
// first stage1_epochs, then training continues jointly. Deterministic given
// the seed; loss_curve receives each epoch's pre-update loss.
EmbeddingParams train_embedding(const EmbedDataset& dataset,
                                const EmbedDims& dims, const EmbedHyper& hyper,
                                std::vector<double>* loss_curve = nullptr);

struct RecallReport {
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double r_at_10 = 0.0;
  double mean_r = 0.0;
};

// Image retrieval: rank images per sentence. Annotation: rank sentences per
// image, first own sentence counts. Ties resolve by ascending index.
RecallReport image_retrieval_recall(const Eigen::MatrixXd& scores,
                                    const EmbedDataset& dataset);
RecallReport annotation_recall(const Eigen::MatrixXd& scores,
                               const EmbedDataset& dataset);

struct AlignmentBinding {
  enum class Kind { visual, spatial };
  int text_fragment = 0;
  Kind kind = Kind::visual;
  int target = 0;  // fragment index within its kind
  int rank = 1;
  double score = 0.0;
};

// Per text fragment, the top_k highest-scoring fragments of the image across
// both pools, scores descending, ties by (visual first, lower index first).
std::vector<AlignmentBinding> align(const EmbeddingParams& params,
                                    const EmbedImage& image,
                                    const EmbedSentence& sentence,
                                    int top_k = 4);

// Dataset files are JSON lines over a plain-text vocabulary (one word per
// line). Image line:
//   {"type":"image","id":str,"fragments":[{"id":int,"feature":[...],
//    "box":[x_min,y_min,x_max,y_max]},...]}
// Sentence line:
//   {"type":"sentence","id":str,"image":str,"triplets":[[rel,word,word],...]}
EmbedDataset load_embed_dataset(const std::string& data_path,
                                const std::string& vocab_path,
                                const PoolingScheme& scheme, int grid,
                                bool include_self_pairs = true);
void save_embed_dataset(const EmbedDataset& dataset,
                        const std::string& data_path);
std::vector<std::string> load_vocab(const std::string& path);
void save_vocab(const std::vector<std::string>& vocab,
                const std::string& path);

void save_embed_params(const EmbeddingParams& params, const std::string& path);
EmbeddingParams load_embed_params(const std::string& path);

// Small self-labelling fixture: every image holds one category pair, unique
// to it, arranged under one of the in-plane relations; its sentence names
// exactly that triplet. Detector features are seeded per-category signatures
// plus instance noise.
struct PlantedConfig {
  int n_images = 10;
  std::uint64_t seed = 7;
  int feature_dim = 32;
  double feature_noise = 0.01;
};

EmbedDataset make_planted_dataset(const PlantedConfig& cfg,
                                  const PoolingScheme& scheme, int grid);

}  // namespace relpool
