#pragma once

#include <vector>

#include "ctxsim/ops.hpp"

namespace ctxsim {

struct ThetaConfig {
  enum class Kind { HardStep, Sigmoid };
  Kind kind = Kind::HardStep;
  double alpha = 10.0;  // backward rate of the hard step
  double tau = 0.01;    // sigmoid temperature
};

// Labeled batch of unit-norm embeddings plus its binary same-label matrix.
struct Batch {
  Tensor f;                 // n x d, rows unit norm
  std::vector<int> labels;  // size n
  Matrix y;                 // n x n, y(i,j) = [label_i == label_j]
  int n = 0;
  int d = 0;
};

Batch make_batch(const Tensor& f, std::vector<int> labels);

// S = F F^T. Requires unit-norm rows (checked to 1e-9).
Tensor pairwise_cosine(const Tensor& f);

// D = 2 - 2 S, the squared Euclidean distance between unit vectors.
Tensor pairwise_sqdist_from_cosine(const Tensor& s);

// Per-row k-th smallest entry of row i of d (the zero self-distance occupies
// rank 1). The result depends only on values, so ties cannot change it.
// Returns plain doubles: thresholds never carry gradient.
std::vector<double> kth_threshold(const Matrix& d, int k);

struct NeighborIndicator {
  Tensor mask;                    // n x n, mask(i,j) ~ [j in N(i)]
  std::vector<double> row_sizes;  // forward |N(i)| per row (soft under sigmoid)
  int k = 0;
  double epsilon = 0.0;
};

// mask = theta(-d + t_i + epsilon) with detached per-row thresholds t_i.
NeighborIndicator neighbor_indicator(const Tensor& d, int k, double epsilon,
                                     const ThetaConfig& theta);

struct IntersectionOptions {
  bool drop_complement = false;   // keep only the shared-neighbor term
  bool use_min_and = false;       // min instead of indicator products
  bool no_stop_gradient = false;  // keep gradient through the row-size divisors
};

// Shared-neighbor counts normalized by detached neighborhood sizes:
//   W~ = 1/2 (mask mask^T / |N(i)| + cmask cmask^T / |Nc(i)|) o mask
// where cmask = 1 - mask. With drop_complement the first ratio alone is used
// (no 1/2, so self-similarity stays 1).
Tensor intersection_step(const NeighborIndicator& ind, const IntersectionOptions& opt = {});

struct QueryExpansionOptions {
  bool detach_reciprocal = false;  // detach the reciprocal-count divisor
  bool use_min_and = false;        // min instead of o for the reciprocal mask
};

struct ContextualSimilarityMatrix {
  Tensor w;       // symmetrized result
  Tensor w_hat;   // pre-symmetrization reciprocal average
  Tensor r_mask;  // reciprocal-neighbor indicator
};

// Averages w_tilde rows over reciprocal max(1, k/2)-neighborhoods, dividing by
// the (attached) reciprocal counts, then symmetrizes: W = (W^ + W^T) / 2.
ContextualSimilarityMatrix query_expansion_step(const Tensor& w_tilde, const Tensor& d, int k,
                                                double epsilon, const ThetaConfig& theta,
                                                const QueryExpansionOptions& opt = {});

// Sum of (y - x)^2 over off-diagonal entries, divided by n^2.
Tensor contextual_loss(const Tensor& x, const Matrix& y);

struct PipelineOptions {
  bool drop_complement = false;
  bool use_min_and = false;
  bool no_stop_gradient = false;
  bool skip_intersection = false;  // feed the indicator itself into expansion
  bool detach_reciprocal = false;
};

struct PipelineResult {
  NeighborIndicator step1;
  Tensor w_tilde;
  ContextualSimilarityMatrix step3;
};

PipelineResult contextual_similarity_pipeline(const Tensor& d, int k, double epsilon,
                                              const ThetaConfig& theta,
                                              const PipelineOptions& opt = {});

}  // namespace ctxsim
