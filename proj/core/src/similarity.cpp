#include "ctxsim/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctxsim {

namespace {

void require_square(const char* op, const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(op) + ": expected square matrix, got " +
                                shape_str(m));
  }
}

Tensor apply_theta(const Tensor& arg, const ThetaConfig& theta) {
  switch (theta.kind) {
    case ThetaConfig::Kind::HardStep:
      return heaviside_ste(arg, theta.alpha);
    case ThetaConfig::Kind::Sigmoid:
      return heaviside_sigmoid(arg, theta.tau);
  }
  throw std::invalid_argument("apply_theta: unknown kind");
}

}  // namespace

Batch make_batch(const Tensor& f, std::vector<int> labels) {
  if (!f.valid()) throw std::invalid_argument("make_batch: empty tensor handle");
  const Matrix& fv = f.value();
  if (static_cast<int>(labels.size()) != fv.rows()) {
    throw std::invalid_argument("make_batch: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(fv.rows()) + " rows");
  }
  Batch b;
  b.f = f;
  b.n = fv.rows();
  b.d = fv.cols();
  b.y = Matrix(b.n, b.n);
  for (int i = 0; i < b.n; ++i)
    for (int j = 0; j < b.n; ++j) b.y(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
  b.labels = std::move(labels);
  return b;
}

Tensor pairwise_cosine(const Tensor& f) {
  const Matrix& fv = f.value();
  for (int i = 0; i < fv.rows(); ++i) {
    double sq = 0.0;
    for (int j = 0; j < fv.cols(); ++j) sq += fv(i, j) * fv(i, j);
    if (std::abs(sq - 1.0) > 1e-9) {
      throw std::invalid_argument("pairwise_cosine: row " + std::to_string(i) +
                                  " is not unit norm (|f_i|^2 = " + std::to_string(sq) + ")");
    }
  }
  return matmul(f, transpose(f));
}

Tensor pairwise_sqdist_from_cosine(const Tensor& s) {
  require_square("pairwise_sqdist_from_cosine", s.value());
  return add_scalar(scalar_mul(s, -2.0), 2.0);
}

std::vector<double> kth_threshold(const Matrix& d, int k) {
  require_square("kth_threshold", d);
  int n = d.rows();
  if (k < 1 || k > n) {
    throw std::invalid_argument("kth_threshold: k = " + std::to_string(k) +
                                " out of range for n = " + std::to_string(n));
  }
  std::vector<double> t(n);
  std::vector<double> row(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) row[j] = d(i, j);
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    t[i] = row[k - 1];
  }
  return t;
}

NeighborIndicator neighbor_indicator(const Tensor& d, int k, double epsilon,
                                     const ThetaConfig& theta) {
  const Matrix& dv = d.value();
  require_square("neighbor_indicator", dv);
  if (epsilon < 0.0) throw std::invalid_argument("neighbor_indicator: epsilon must be >= 0");
  int n = dv.rows();
  std::vector<double> t = kth_threshold(dv, k);

  Matrix shift(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) shift(i, j) = t[i] + epsilon;

  Tensor arg = add(scalar_mul(d, -1.0), d.tape()->constant(std::move(shift)));
  NeighborIndicator ind;
  ind.mask = apply_theta(arg, theta);
  ind.k = k;
  ind.epsilon = epsilon;
  ind.row_sizes.assign(n, 0.0);
  const Matrix& mv = ind.mask.value();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ind.row_sizes[i] += mv(i, j);
  return ind;
}

Tensor intersection_step(const NeighborIndicator& ind, const IntersectionOptions& opt) {
  const Tensor& mask = ind.mask;
  int n = mask.rows();

  Tensor shared = opt.use_min_and ? pairwise_min_sum(mask) : matmul(mask, transpose(mask));

  Tensor size_pos = row_sum(mask);
  for (int i = 0; i < n; ++i) {
    if (size_pos.value()(i, 0) <= 0.0) {
      throw std::invalid_argument("intersection_step: empty neighborhood in row " +
                                  std::to_string(i));
    }
  }
  Tensor size_pos_div = opt.no_stop_gradient ? size_pos : stop_gradient(size_pos);

  if (opt.drop_complement) {
    // Shared-neighbor ratio alone; no 1/2 factor, so self-similarity stays 1.
    return mul(div_rowbroadcast(shared, size_pos_div), mask);
  }

  Tensor cmask = rsub_scalar(mask, 1.0);
  Tensor shared_c = opt.use_min_and ? pairwise_min_sum(cmask) : matmul(cmask, transpose(cmask));
  Tensor size_neg = row_sum(cmask);
  for (int i = 0; i < n; ++i) {
    if (size_neg.value()(i, 0) <= 0.0) {
      throw std::invalid_argument(
          "intersection_step: row " + std::to_string(i) +
          " has an empty neighborhood complement; reduce epsilon or enlarge the batch");
    }
  }
  Tensor size_neg_div = opt.no_stop_gradient ? size_neg : stop_gradient(size_neg);

  Tensor avg = scalar_mul(
      add(div_rowbroadcast(shared, size_pos_div), div_rowbroadcast(shared_c, size_neg_div)),
      0.5);
  return mul(avg, mask);
}

ContextualSimilarityMatrix query_expansion_step(const Tensor& w_tilde, const Tensor& d, int k,
                                                double epsilon, const ThetaConfig& theta,
                                                const QueryExpansionOptions& opt) {
  require_square("query_expansion_step", w_tilde.value());
  if (w_tilde.rows() != d.rows()) {
    throw std::invalid_argument("query_expansion_step: w_tilde " + shape_str(w_tilde.value()) +
                                " does not match d " + shape_str(d.value()));
  }
  int k_half = std::max(1, k / 2);
  NeighborIndicator half = neighbor_indicator(d, k_half, epsilon, theta);

  Tensor r_mask = opt.use_min_and ? min_elementwise(half.mask, transpose(half.mask))
                                  : mul(half.mask, transpose(half.mask));

  Tensor r_size = row_sum(r_mask);
  for (int i = 0; i < r_size.rows(); ++i) {
    if (r_size.value()(i, 0) <= 0.0) {
      throw std::invalid_argument("query_expansion_step: empty reciprocal set in row " +
                                  std::to_string(i));
    }
  }
  Tensor r_div = opt.detach_reciprocal ? stop_gradient(r_size) : r_size;

  Tensor w_hat = div_rowbroadcast(matmul(r_mask, w_tilde), r_div);

  ContextualSimilarityMatrix out;
  out.w = scalar_mul(add(w_hat, transpose(w_hat)), 0.5);
  out.w_hat = w_hat;
  out.r_mask = r_mask;
  return out;
}

Tensor contextual_loss(const Tensor& x, const Matrix& y) {
  const Matrix& xv = x.value();
  require_square("contextual_loss", xv);
  if (!xv.same_shape(y)) {
    throw std::invalid_argument("contextual_loss: x " + shape_str(xv) + " vs y " + shape_str(y));
  }
  int n = xv.rows();
  Tape* tape = x.tape();
  Matrix off_diag(n, n, 1.0);
  for (int i = 0; i < n; ++i) off_diag(i, i) = 0.0;
  Tensor masked = mul(sub(tape->constant(y), x), tape->constant(std::move(off_diag)));
  return scalar_mul(sum(square(masked)), 1.0 / (static_cast<double>(n) * n));
}

PipelineResult contextual_similarity_pipeline(const Tensor& d, int k, double epsilon,
                                              const ThetaConfig& theta,
                                              const PipelineOptions& opt) {
  PipelineResult out;
  out.step1 = neighbor_indicator(d, k, epsilon, theta);
  if (opt.skip_intersection) {
    out.w_tilde = out.step1.mask;
  } else {
    IntersectionOptions io;
    io.drop_complement = opt.drop_complement;
    io.use_min_and = opt.use_min_and;
    io.no_stop_gradient = opt.no_stop_gradient;
    out.w_tilde = intersection_step(out.step1, io);
  }
  QueryExpansionOptions qo;
  qo.detach_reciprocal = opt.detach_reciprocal;
  qo.use_min_and = opt.use_min_and;
  out.step3 = query_expansion_step(out.w_tilde, d, k, epsilon, theta, qo);
  return out;
}

}  // namespace ctxsim
