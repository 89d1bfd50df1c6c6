#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctxsim/matrix.hpp"

namespace ctxsim {

// Central differences, one coordinate at a time. f must be smooth at x.
Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f,
                                  const Matrix& x, double h);

struct CheckItem {
  std::string name;
  double metric = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckItem> items;
  bool all_passed = true;

  void add(CheckItem item);
};

struct OracleCheckOptions {
  int batches = 200;
  unsigned long long seed = 20240601ULL;
  double tolerance = 1e-9;
  // Negative control: perturbs one oracle denominator so the comparison must
  // report a mismatch. Verifies the harness can actually detect errors.
  bool corrupt_denominator = false;
};

CheckReport run_oracle_equivalence(const OracleCheckOptions& opt);

// Closed-form d(loss)/d(dist) for loss = contextual_loss(w_tilde, y), where
// w_tilde comes from the intersection step under a hard step function with
// detached thresholds and row sizes. Derived by hand from the product rule;
// shares no code with the tape.
Matrix predicted_intersection_loss_ddist(const Matrix& dist, const Matrix& y,
                                         int k, double epsilon, double alpha);

CheckReport run_gradient_checks(unsigned long long seed);

}  // namespace ctxsim
