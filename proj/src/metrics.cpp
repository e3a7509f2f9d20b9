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

#include "relpool/metrics.hpp"

#include <fstream>

#include <json.hpp>

#include "relpool/errors.hpp"

namespace relpool {

int LabeledRanking::first_relevant_rank() const {
  for (std::size_t i = 0; i < relevance.size(); ++i)
    if (relevance[i] != 0) return static_cast<int>(i) + 1;
  return 0;
}

LabeledRanking LabeledRanking::from_rank(int rank, int size) {
  if (rank < 1 || rank > size)
    throw ValidationError("rank must lie in [1, size]");
  LabeledRanking r;
  r.relevance.assign(size, 0);
  r.relevance[rank - 1] = 1;
  return r;
}

double average_precision(const LabeledRanking& r) {
  int relevant_total = 0;
  for (int v : r.relevance) relevant_total += (v != 0);
  if (relevant_total == 0) return 0.0;
  double ap = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < r.relevance.size(); ++i) {
    if (r.relevance[i] == 0) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return ap / relevant_total;
}

double mean_average_precision(const std::vector<LabeledRanking>& rankings) {
  if (rankings.empty()) return 0.0;
  double total = 0.0;
  for (const LabeledRanking& r : rankings) total += average_precision(r);
  return total / rankings.size();
}

double recall_at_k(const std::vector<LabeledRanking>& rankings, int k) {
  if (rankings.empty()) return 0.0;
  int hits = 0;
  for (const LabeledRanking& r : rankings) {
    const int rank = r.first_relevant_rank();
    if (rank >= 1 && rank <= k) ++hits;
  }
  return static_cast<double>(hits) / rankings.size();
}

double mean_rank(const std::vector<LabeledRanking>& rankings) {
  double total = 0.0;
  int counted = 0;
  for (const LabeledRanking& r : rankings) {
    const int rank = r.first_relevant_rank();
    if (rank >= 1) {
      total += rank;
      ++counted;
    }
  }
  return counted == 0 ? 0.0 : total / counted;
}

MetricsReport compute_metrics(const std::vector<LabeledRanking>& rankings) {
  MetricsReport report;
  report.map = mean_average_precision(rankings);
  report.recall_at_1 = recall_at_k(rankings, 1);
  report.recall_at_5 = recall_at_k(rankings, 5);
  report.recall_at_10 = recall_at_k(rankings, 10);
  report.mean_r = mean_rank(rankings);
  return report;
}

void save_metrics_json(const MetricsReport& report, const std::string& path) {
  nlohmann::json j{{"mAP", report.map},
                   {"R@1", report.recall_at_1},
                   {"R@5", report.recall_at_5},
                   {"R@10", report.recall_at_10},
                   {"mean_r", report.mean_r}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics file '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing metrics file '" + path + "'");
}

}  // namespace relpool
