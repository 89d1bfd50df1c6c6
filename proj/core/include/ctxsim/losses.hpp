#pragma once

#include <string>

#include "ctxsim/similarity.hpp"

namespace ctxsim {

// Which contextual term the combined objective uses. Each value is one of the
// ablation arms; Full is the shipping configuration.
enum class LossVariant {
  Full,                 // all three steps, hard step function
  IndicatorMse,         // squared error against the step-1 indicator
  IndicatorMseSigmoid,  // same, sigmoid relaxation
  IntersectionMse,      // squared error against the step-2 matrix
  SkipIntersection,     // steps 1 and 3 only
  MinAnd,               // min in place of products for set logic
  SigmoidAll,           // sigmoid relaxation in steps 1 and 3
  DropComplement,       // intersection without the complement term
  NoStopGradient,       // gradient kept through the size divisors
  DetachReciprocal,     // reciprocal-count divisor detached
};

LossVariant parse_loss_variant(const std::string& name);
std::string loss_variant_name(LossVariant v);

struct LossConfig {
  double lambda = 0.4;       // weight of the contextual term
  double gamma = 0.1;        // weight of the regularizer
  double delta_plus = 0.75;  // positive-pair margin
  double delta_minus = 0.6;  // negative-pair margin
  double s_tilde = 0.25;     // regularizer target mean similarity
  double alpha = 10.0;       // backward rate of the hard step
  double epsilon = 0.05;     // neighborhood slack
  double tau = 0.01;         // sigmoid temperature
  int k = 4;                 // samples per label and neighborhood size
  LossVariant variant = LossVariant::Full;

  void validate() const;  // throws std::invalid_argument
};

// Margin loss over similarities: hinge terms averaged over the strict
// violators of each margin. A term with no violators contributes exactly 0.
// The diagonal never participates.
Tensor contrastive_loss(const Tensor& s, const Matrix& y, double delta_plus,
                        double delta_minus);

// (mean(S) - s_tilde)^2 over all n^2 entries, diagonal included.
Tensor similarity_regularizer(const Tensor& s, double s_tilde);

// Squared-error losses against the early pipeline stages.
Tensor loss_indicator_mse(const Batch& batch, const LossConfig& cfg, bool sigmoid_theta = false);
Tensor loss_intersection_mse(const Batch& batch, const LossConfig& cfg);

struct LossBreakdown {
  Tensor total;
  Tensor context;   // the variant's contextual term, unweighted
  Tensor contrast;  // unweighted
  Tensor reg;       // unweighted
};

// total = lambda * context + gamma * reg + (1 - lambda - gamma) * contrast.
// All components are built even at zero weight so curves can be logged.
LossBreakdown combined_loss(const Batch& batch, const LossConfig& cfg);

}  // namespace ctxsim
