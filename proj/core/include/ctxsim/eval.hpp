#pragma once

#include <vector>

#include "ctxsim/matrix.hpp"

namespace ctxsim {

// Every query retrieves from all other rows (self excluded), ranked by
// ascending Euclidean distance with ties broken by ascending index.
struct RetrievalResult {
  std::vector<std::vector<int>> ranked;  // per query, the other indices in order
  std::vector<int> labels;
};

RetrievalResult rank_self_retrieval(const Matrix& emb, const std::vector<int>& labels);

// Fraction of queries with at least one same-label row among the first k.
// Requires every label to appear at least twice.
std::vector<double> recall_at_k(const RetrievalResult& r, const std::vector<int>& ks);
double recall_at_1(const Matrix& emb, const std::vector<int>& labels);

struct ApSummary {
  double map = 0.0;       // precision-at-k averaged over the positive hits
  double map_at_r = 0.0;  // same sum truncated at the per-query positive count
};

// map_at_r <= map always holds; equality when all positives rank first.
ApSummary mean_average_precision(const RetrievalResult& r);

struct DistanceStats {
  double mean = 0.0;                // Euclidean, over unordered pairs
  std::vector<long long> histogram; // fixed bins over [0, 2]; out-of-range clamps
  double bin_width = 0.0;
};

DistanceStats pairwise_distance_stats(const Matrix& emb, int bins = 20);

}  // namespace ctxsim
