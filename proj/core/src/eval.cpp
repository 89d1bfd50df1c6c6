#include "ctxsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctxsim {

namespace {

double sq_distance(const Matrix& emb, int a, int b) {
  double s = 0.0;
  for (int j = 0; j < emb.cols(); ++j) {
    double diff = emb(a, j) - emb(b, j);
    s += diff * diff;
  }
  return s;
}

void require_repeated_labels(const std::vector<int>& labels) {
  std::vector<int> counts;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("retrieval: negative label");
    if (l >= static_cast<int>(counts.size())) counts.resize(l + 1, 0);
    counts[l]++;
  }
  for (int l : labels) {
    if (counts[l] < 2) {
      throw std::invalid_argument("retrieval: label " + std::to_string(l) +
                                  " appears only once; every query needs a positive");
    }
  }
}

}  // namespace

RetrievalResult rank_self_retrieval(const Matrix& emb, const std::vector<int>& labels) {
  int n = emb.rows();
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("rank_self_retrieval: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " rows");
  }
  require_repeated_labels(labels);

  RetrievalResult r;
  r.labels = labels;
  r.ranked.resize(n);
  std::vector<std::pair<double, int>> order;
  for (int q = 0; q < n; ++q) {
    order.clear();
    for (int j = 0; j < n; ++j) {
      if (j == q) continue;
      order.emplace_back(sq_distance(emb, q, j), j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    r.ranked[q].reserve(order.size());
    for (const auto& [dist, j] : order) r.ranked[q].push_back(j);
  }
  return r;
}

std::vector<double> recall_at_k(const RetrievalResult& r, const std::vector<int>& ks) {
  int n = static_cast<int>(r.ranked.size());
  if (n == 0) throw std::invalid_argument("recall_at_k: empty retrieval");
  std::vector<double> out;
  out.reserve(ks.size());
  for (int k : ks) {
    if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
    int hits = 0;
    for (int q = 0; q < n; ++q) {
      int limit = std::min<int>(k, static_cast<int>(r.ranked[q].size()));
      for (int i = 0; i < limit; ++i) {
        if (r.labels[r.ranked[q][i]] == r.labels[q]) {
          hits++;
          break;
        }
      }
    }
    out.push_back(static_cast<double>(hits) / n);
  }
  return out;
}

double recall_at_1(const Matrix& emb, const std::vector<int>& labels) {
  return recall_at_k(rank_self_retrieval(emb, labels), {1})[0];
}

ApSummary mean_average_precision(const RetrievalResult& r) {
  int n = static_cast<int>(r.ranked.size());
  if (n == 0) throw std::invalid_argument("mean_average_precision: empty retrieval");
  ApSummary out;
  for (int q = 0; q < n; ++q) {
    const auto& ranked = r.ranked[q];
    int positives = 0;
    for (int j : ranked)
      if (r.labels[j] == r.labels[q]) positives++;
    if (positives == 0) {
      throw std::invalid_argument("mean_average_precision: query without positives");
    }
    double ap = 0.0, ap_r = 0.0;
    int seen_pos = 0;
    for (int i = 0; i < static_cast<int>(ranked.size()); ++i) {
      if (r.labels[ranked[i]] != r.labels[q]) continue;
      seen_pos++;
      double prec = static_cast<double>(seen_pos) / (i + 1);
      ap += prec;
      if (i + 1 <= positives) ap_r += prec;
    }
    out.map += ap / positives;
    out.map_at_r += ap_r / positives;
  }
  out.map /= n;
  out.map_at_r /= n;
  return out;
}

DistanceStats pairwise_distance_stats(const Matrix& emb, int bins) {
  int n = emb.rows();
  if (n < 2) throw std::invalid_argument("pairwise_distance_stats: need at least two rows");
  if (bins < 1) throw std::invalid_argument("pairwise_distance_stats: bins must be >= 1");
  DistanceStats st;
  st.histogram.assign(bins, 0);
  st.bin_width = 2.0 / bins;
  long long pairs = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double d = std::sqrt(sq_distance(emb, i, j));
      st.mean += d;
      int b = static_cast<int>(d / st.bin_width);
      if (b < 0) b = 0;
      if (b >= bins) b = bins - 1;
      st.histogram[b]++;
      pairs++;
    }
  }
  st.mean /= static_cast<double>(pairs);
  return st;
}

}  // namespace ctxsim
