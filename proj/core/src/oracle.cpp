#include "ctxsim/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctxsim {

namespace {

Matrix distances(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument("oracle: similarity matrix must be square, got " + shape_str(s));
  }
  Matrix d(s.rows(), s.cols());
  for (int i = 0; i < s.rows(); ++i)
    for (int j = 0; j < s.cols(); ++j) d(i, j) = 2.0 + (-2.0) * s(i, j);
  return d;
}

std::vector<std::vector<char>> neighbor_sets(const Matrix& d, int k, double eps) {
  int n = d.rows();
  if (k < 1 || k > n) throw std::invalid_argument("oracle: k out of range");
  if (eps < 0.0) throw std::invalid_argument("oracle: eps must be >= 0");
  std::vector<std::vector<char>> member(n, std::vector<char>(n, 0));
  std::vector<double> row(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) row[j] = d(i, j);
    std::sort(row.begin(), row.end());
    double cutoff = row[k - 1] + eps;
    for (int j = 0; j < n; ++j) member[i][j] = (cutoff - d(i, j) >= 0.0) ? 1 : 0;
  }
  return member;
}

std::vector<std::vector<char>> reciprocal_sets(const Matrix& d, int k, double eps) {
  int k_half = std::max(1, k / 2);
  auto half = neighbor_sets(d, k_half, eps);
  int n = d.rows();
  std::vector<std::vector<char>> rec(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) rec[i][j] = (half[i][j] && half[j][i]) ? 1 : 0;
  return rec;
}

// Reciprocal averaging and symmetrization shared by both oracle forms.
void expand_and_symmetrize(const Matrix& d, int k, double eps, OracleStages& st) {
  int n = d.rows();
  auto rec = reciprocal_sets(d, k, eps);
  st.w_hat = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    double r_size = 0.0;
    for (int p = 0; p < n; ++p) r_size += rec[i][p] ? 1.0 : 0.0;
    if (r_size <= 0.0) throw std::invalid_argument("oracle: empty reciprocal set");
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < n; ++p)
        if (rec[i][p]) acc += st.w_tilde(p, j);
      st.w_hat(i, j) = acc / r_size;
    }
  }
  st.w = Matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) st.w(i, j) = 0.5 * (st.w_hat(i, j) + st.w_hat(j, i));
}

void fill_indicator(const std::vector<std::vector<char>>& sets, OracleStages& st) {
  int n = static_cast<int>(sets.size());
  st.indicator = Matrix(n, n);
  st.n_sizes.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      st.indicator(i, j) = sets[i][j] ? 1.0 : 0.0;
      st.n_sizes[i] += st.indicator(i, j);
    }
}

}  // namespace

std::vector<std::vector<char>> oracle_neighbor_sets(const Matrix& s, int k, double eps) {
  return neighbor_sets(distances(s), k, eps);
}

OracleStages oracle_definition(const Matrix& s, int k, double eps) {
  Matrix d = distances(s);
  auto sets = neighbor_sets(d, k, eps);
  int n = d.rows();
  OracleStages st;
  fill_indicator(sets, st);
  st.w_tilde = Matrix(n, n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!sets[i][j]) continue;
      double overlap = 0.0;
      for (int p = 0; p < n; ++p)
        if (sets[i][p] && sets[j][p]) overlap += 1.0;
      st.w_tilde(i, j) = overlap / st.n_sizes[i];
    }
  }
  expand_and_symmetrize(d, k, eps, st);
  return st;
}

OracleStages oracle_pipeline(const Matrix& s, int k, double eps, const OracleOptions& opt) {
  Matrix d = distances(s);
  auto sets = neighbor_sets(d, k, eps);
  int n = d.rows();
  OracleStages st;
  fill_indicator(sets, st);

  if (opt.skip_intersection) {
    st.w_tilde = st.indicator;
  } else {
    st.w_tilde = Matrix(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
      double size_pos = st.n_sizes[i];
      double size_neg = 0.0;
      for (int p = 0; p < n; ++p) size_neg += sets[i][p] ? 0.0 : 1.0;
      if (size_pos <= 0.0) throw std::invalid_argument("oracle: empty neighborhood");
      if (!opt.drop_complement && size_neg <= 0.0) {
        throw std::invalid_argument("oracle: empty neighborhood complement");
      }
      for (int j = 0; j < n; ++j) {
        if (!sets[i][j]) continue;
        double shared = 0.0, shared_c = 0.0;
        for (int p = 0; p < n; ++p) {
          if (sets[i][p] && sets[j][p]) shared += 1.0;
          if (!sets[i][p] && !sets[j][p]) shared_c += 1.0;
        }
        if (opt.drop_complement) {
          st.w_tilde(i, j) = shared / size_pos;
        } else {
          st.w_tilde(i, j) = 0.5 * (shared / size_pos + shared_c / size_neg);
        }
      }
    }
  }
  expand_and_symmetrize(d, k, eps, st);
  return st;
}

Matrix oracle_contextual_similarity(const Matrix& s, int k, double eps) {
  return oracle_definition(s, k, eps).w;
}

Matrix oracle_pipeline_forward(const Matrix& s, int k, double eps, const OracleOptions& opt) {
  return oracle_pipeline(s, k, eps, opt).w;
}

}  // namespace ctxsim
