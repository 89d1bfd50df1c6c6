#pragma once

#include <vector>

#include "ctxsim/matrix.hpp"

namespace ctxsim {

// Set-enumeration references for the contextual similarity computation.
// Everything here works on plain values with explicit membership sets and
// never touches the tape, so it can arbitrate what the tensor path produces.
// Hard thresholding only; the sigmoid relaxation has no set semantics.

// member[i][j] = 1 iff d(i,j) <= t_i + eps, with t_i the k-th smallest entry
// of row i (the zero self-distance counts). d is derived from s as 2 - 2 s.
std::vector<std::vector<char>> oracle_neighbor_sets(const Matrix& s, int k, double eps);

struct OracleStages {
  Matrix indicator;             // n x n 0/1 membership
  Matrix w_tilde;               // after the intersection stage
  Matrix w_hat;                 // after reciprocal averaging
  Matrix w;                     // symmetrized result
  std::vector<double> n_sizes;  // |N(i)|
};

// Ratio form: w~(i,j) = |N(i) n N(j)| / |N(i)| gated on j in N(i), averaged
// over reciprocal max(1, k/2)-neighborhoods, symmetrized.
OracleStages oracle_definition(const Matrix& s, int k, double eps);

struct OracleOptions {
  bool drop_complement = false;
  bool skip_intersection = false;
};

// Mirrors the three-step tensor pipeline: intersection counts of both the
// neighborhoods and their complements, normalized by the respective set
// sizes, gated, then reciprocal-averaged and symmetrized. Operation order
// matches the tensor path so results agree to the last bit.
OracleStages oracle_pipeline(const Matrix& s, int k, double eps, const OracleOptions& opt = {});

Matrix oracle_contextual_similarity(const Matrix& s, int k, double eps);
Matrix oracle_pipeline_forward(const Matrix& s, int k, double eps, const OracleOptions& opt = {});

}  // namespace ctxsim
