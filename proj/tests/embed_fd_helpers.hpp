// Shared test-side machinery for gradient checks of the embedding objective:
// finite differences over every trainable parameter, plus a kink check that
// rejects parameter points sitting too close to a rectifier zero, a hinge
// boundary, or a max tie (central differences are only valid away from those).
#pragma once

#include <cmath>
#include <vector>

#include "relpool/fragment_embed.hpp"

namespace fdcheck {

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// True when every non-smooth argument of the objective keeps a margin of at
// least tol, so an eps-sized probe cannot cross a kink.
inline bool away_from_kinks(const relpool::EmbeddingParams& params,
                            const relpool::EmbedDataset& dataset,
                            const relpool::ObjectiveConfig& config,
                            double tol = 1e-3) {
  using Eigen::VectorXd;
  const std::size_t n_img = dataset.images.size();
  const std::size_t n_sent = dataset.sentences.size();

  std::vector<std::vector<VectorXd>> s(n_sent), z(n_sent);
  for (std::size_t k = 0; k < n_sent; ++k) {
    for (const relpool::TextFragment& frag : dataset.sentences[k].fragments) {
      VectorXd x(2 * params.dims.word);
      x.head(params.dims.word) = params.W_e.row(frag.t1).transpose();
      x.tail(params.dims.word) = params.W_e.row(frag.t2).transpose();
      const VectorXd pre_s = params.W_R * x + params.b_R;
      const VectorXd pre_z = params.W_z * x + params.b_z;
      for (Eigen::Index i = 0; i < pre_s.size(); ++i)
        if (std::abs(pre_s(i)) < tol) return false;
      for (Eigen::Index i = 0; i < pre_z.size(); ++i)
        if (std::abs(pre_z(i)) < tol) return false;
      s[k].push_back(pre_s.cwiseMax(0.0));
      z[k].push_back(pre_z.cwiseMax(0.0));
    }
  }

  std::vector<std::vector<VectorXd>> v(n_img), p(n_img);
  for (std::size_t i = 0; i < n_img; ++i) {
    for (const relpool::EmbedDetection& d : dataset.images[i].detections)
      v[i].push_back(params.W_m * d.feature);
    for (const relpool::SpatialFragment& sp : dataset.images[i].spatial)
      p[i].push_back(params.W_s * sp.binned);
  }

  // max gaps and alignment hinge margins, per pool
  const auto pool_ok = [&](const std::vector<std::vector<VectorXd>>& queries,
                           const std::vector<std::vector<VectorXd>>& targets) {
    for (std::size_t k = 0; k < n_sent; ++k) {
      const int truth = dataset.sentence_image[k];
      for (const VectorXd& q : queries[k]) {
        for (std::size_t i = 0; i < n_img; ++i) {
          if (targets[i].empty()) continue;
          double best = -1e300, second = -1e300;
          for (const VectorXd& t : targets[i]) {
            const double score = t.dot(q);
            if (score > best) {
              second = best;
              best = score;
            } else if (score > second) {
              second = score;
            }
            // negative alignment hinge boundary
            if (static_cast<int>(i) != truth &&
                std::abs(config.margin + score) < tol)
              return false;
          }
          if (targets[i].size() >= 2 && best - second < tol) return false;
          if (static_cast<int>(i) == truth &&
              std::abs(config.margin - best) < tol)
            return false;
        }
      }
    }
    return true;
  };
  if (!pool_ok(s, v)) return false;
  if (config.spatial_weight != 0.0 && !pool_ok(z, p)) return false;

  // ranking hinge margins
  const Eigen::MatrixXd scores =
      relpool::score_matrix(params, dataset, config.spatial_weight);
  for (std::size_t k = 0; k < n_sent; ++k) {
    const int truth = dataset.sentence_image[k];
    for (std::size_t j = 0; j < n_img; ++j) {
      if (static_cast<int>(j) == truth) continue;
      if (std::abs(config.margin - scores(truth, k) + scores(j, k)) < tol)
        return false;
    }
    for (std::size_t m = 0; m < n_sent; ++m) {
      if (dataset.sentence_image[m] == truth) continue;
      if (std::abs(config.margin - scores(truth, k) + scores(truth, m)) < tol)
        return false;
    }
  }
  return true;
}

// Max relative error between analytic gradients and central differences over
// every trainable parameter.
inline double max_grad_error(relpool::EmbeddingParams& params,
                             const relpool::EmbedDataset& dataset,
                             const relpool::ObjectiveConfig& config,
                             double eps = 1e-5) {
  relpool::EmbedGrads grads = relpool::EmbedGrads::zeros(params.dims);
  relpool::objective(params, dataset, config, &grads);

  double worst = 0.0;
  const auto probe = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + eps;
    const double hi = relpool::objective(params, dataset, config);
    slot = saved - eps;
    const double lo = relpool::objective(params, dataset, config);
    slot = saved;
    worst = std::max(worst, relative_error(analytic, (hi - lo) / (2 * eps)));
  };
  const auto probe_matrix = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& g) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) probe(m(r, c), g(r, c));
  };
  const auto probe_vector = [&](Eigen::VectorXd& v, const Eigen::VectorXd& g) {
    for (Eigen::Index i = 0; i < v.size(); ++i) probe(v(i), g(i));
  };

  probe_matrix(params.W_R, grads.W_R);
  probe_vector(params.b_R, grads.b_R);
  probe_matrix(params.W_m, grads.W_m);
  probe_matrix(params.W_z, grads.W_z);
  probe_vector(params.b_z, grads.b_z);
  probe_matrix(params.W_s, grads.W_s);
  return worst;
}

}  // namespace fdcheck
