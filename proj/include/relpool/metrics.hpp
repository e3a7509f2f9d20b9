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

#include <string>
#include <vector>

namespace relpool {

// Binary relevance of one query's ranked results, best rank first.
struct LabeledRanking {
  std::vector<int> relevance;  // 0/1 per rank position

  // 1-based rank of the first relevant item, 0 when none is relevant.
  int first_relevant_rank() const;

  // For annotation-style tasks where a single item is correct.
  static LabeledRanking from_rank(int rank, int size);
};

// AP = (1/R) * sum over relevant positions k of precision@k. A ranking with
// no relevant item scores 0 and still counts toward the mean.
double average_precision(const LabeledRanking& r);
double mean_average_precision(const std::vector<LabeledRanking>& rankings);

// Fraction of queries whose first relevant item has rank <= k.
double recall_at_k(const std::vector<LabeledRanking>& rankings, int k);

// Mean over queries of the first relevant rank; queries without any relevant
// item are skipped (0 when every query lacks one).
double mean_rank(const std::vector<LabeledRanking>& rankings);

struct MetricsReport {
  double map = 0.0;
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  double mean_r = 0.0;
};

MetricsReport compute_metrics(const std::vector<LabeledRanking>& rankings);

// {"mAP":..., "R@1":..., "R@5":..., "R@10":..., "mean_r":...}
void save_metrics_json(const MetricsReport& report, const std::string& path);

}  // namespace relpool
