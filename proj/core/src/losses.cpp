#include "ctxsim/losses.hpp"

#include <limits>
#include <stdexcept>

namespace ctxsim {

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "full") return LossVariant::Full;
  if (name == "indicator_mse") return LossVariant::IndicatorMse;
  if (name == "indicator_mse_sigmoid") return LossVariant::IndicatorMseSigmoid;
  if (name == "intersection_mse") return LossVariant::IntersectionMse;
  if (name == "skip_intersection") return LossVariant::SkipIntersection;
  if (name == "min_and") return LossVariant::MinAnd;
  if (name == "sigmoid_all") return LossVariant::SigmoidAll;
  if (name == "drop_complement") return LossVariant::DropComplement;
  if (name == "no_stop_gradient") return LossVariant::NoStopGradient;
  if (name == "detach_reciprocal") return LossVariant::DetachReciprocal;
  throw std::invalid_argument("unknown loss variant: " + name);
}

std::string loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::Full: return "full";
    case LossVariant::IndicatorMse: return "indicator_mse";
    case LossVariant::IndicatorMseSigmoid: return "indicator_mse_sigmoid";
    case LossVariant::IntersectionMse: return "intersection_mse";
    case LossVariant::SkipIntersection: return "skip_intersection";
    case LossVariant::MinAnd: return "min_and";
    case LossVariant::SigmoidAll: return "sigmoid_all";
    case LossVariant::DropComplement: return "drop_complement";
    case LossVariant::NoStopGradient: return "no_stop_gradient";
    case LossVariant::DetachReciprocal: return "detach_reciprocal";
  }
  throw std::invalid_argument("unknown loss variant value");
}

void LossConfig::validate() const {
  if (lambda < 0.0 || gamma < 0.0 || lambda + gamma > 1.0) {
    throw std::invalid_argument("LossConfig: need lambda, gamma >= 0 and lambda + gamma <= 1");
  }
  if (!(delta_minus < delta_plus)) {
    throw std::invalid_argument("LossConfig: delta_minus must be < delta_plus");
  }
  if (delta_plus < -1.0 || delta_plus > 1.0 || delta_minus < -1.0 || delta_minus > 1.0) {
    throw std::invalid_argument("LossConfig: margins must lie in [-1, 1]");
  }
  if (s_tilde < -1.0 || s_tilde > 1.0) {
    throw std::invalid_argument("LossConfig: s_tilde must lie in [-1, 1]");
  }
  if (!(alpha > 0.0)) throw std::invalid_argument("LossConfig: alpha must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("LossConfig: tau must be positive");
  if (epsilon < 0.0) throw std::invalid_argument("LossConfig: epsilon must be >= 0");
  if (k < 1) throw std::invalid_argument("LossConfig: k must be >= 1");
}

Tensor contrastive_loss(const Tensor& s, const Matrix& y, double delta_plus,
                        double delta_minus) {
  const Matrix& sv = s.value();
  if (sv.rows() != sv.cols() || !sv.same_shape(y)) {
    throw std::invalid_argument("contrastive_loss: s " + shape_str(sv) + " vs y " +
                                shape_str(y));
  }
  if (!(delta_minus < delta_plus)) {
    throw std::invalid_argument("contrastive_loss: delta_minus must be < delta_plus");
  }
  int n = sv.rows();
  Tape* tape = s.tape();

  Matrix pos_mask(n, n, 0.0), neg_mask(n, n, 0.0);
  double pos_violators = 0.0, neg_violators = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (y(i, j) == 1.0) {
        pos_mask(i, j) = 1.0;
        if (delta_plus - sv(i, j) > 0.0) pos_violators += 1.0;
      } else {
        neg_mask(i, j) = 1.0;
        if (sv(i, j) - delta_minus > 0.0) neg_violators += 1.0;
      }
    }
  }

  Tensor zero = tape->scalar(0.0);
  Tensor pos_term = zero, neg_term = zero;
  if (pos_violators > 0.0) {
    Tensor hinged = hinge_pos(rsub_scalar(s, delta_plus));
    pos_term = scalar_mul(sum(mul(hinged, tape->constant(pos_mask))), 1.0 / pos_violators);
  }
  if (neg_violators > 0.0) {
    Tensor hinged = hinge_pos(add_scalar(s, -delta_minus));
    neg_term = scalar_mul(sum(mul(hinged, tape->constant(neg_mask))), 1.0 / neg_violators);
  }
  return add(pos_term, neg_term);
}

Tensor similarity_regularizer(const Tensor& s, double s_tilde) {
  const Matrix& sv = s.value();
  if (sv.rows() != sv.cols()) {
    throw std::invalid_argument("similarity_regularizer: s must be square, got " +
                                shape_str(sv));
  }
  return square(add_scalar(mean(s), -s_tilde));
}

namespace {

struct ContextSetup {
  Tensor s;
  Tensor d;
};

ContextSetup batch_distances(const Batch& batch) {
  ContextSetup cs;
  cs.s = pairwise_cosine(batch.f);
  cs.d = pairwise_sqdist_from_cosine(cs.s);
  return cs;
}

ThetaConfig theta_for(const LossConfig& cfg, bool sigmoid) {
  ThetaConfig th;
  th.kind = sigmoid ? ThetaConfig::Kind::Sigmoid : ThetaConfig::Kind::HardStep;
  th.alpha = cfg.alpha;
  th.tau = cfg.tau;
  return th;
}

Tensor context_term(const Batch& batch, const LossConfig& cfg, const Tensor& d) {
  switch (cfg.variant) {
    case LossVariant::IndicatorMse:
    case LossVariant::IndicatorMseSigmoid: {
      bool sigmoid = cfg.variant == LossVariant::IndicatorMseSigmoid;
      NeighborIndicator ind =
          neighbor_indicator(d, cfg.k, cfg.epsilon, theta_for(cfg, sigmoid));
      return contextual_loss(ind.mask, batch.y);
    }
    case LossVariant::IntersectionMse: {
      NeighborIndicator ind = neighbor_indicator(d, cfg.k, cfg.epsilon, theta_for(cfg, false));
      return contextual_loss(intersection_step(ind), batch.y);
    }
    default: {
      PipelineOptions opt;
      bool sigmoid = cfg.variant == LossVariant::SigmoidAll;
      opt.use_min_and = cfg.variant == LossVariant::MinAnd;
      opt.drop_complement = cfg.variant == LossVariant::DropComplement;
      opt.no_stop_gradient = cfg.variant == LossVariant::NoStopGradient;
      opt.skip_intersection = cfg.variant == LossVariant::SkipIntersection;
      opt.detach_reciprocal = cfg.variant == LossVariant::DetachReciprocal;
      PipelineResult pipe =
          contextual_similarity_pipeline(d, cfg.k, cfg.epsilon, theta_for(cfg, sigmoid), opt);
      return contextual_loss(pipe.step3.w, batch.y);
    }
  }
}

}  // namespace

Tensor loss_indicator_mse(const Batch& batch, const LossConfig& cfg, bool sigmoid_theta) {
  ContextSetup cs = batch_distances(batch);
  NeighborIndicator ind =
      neighbor_indicator(cs.d, cfg.k, cfg.epsilon, theta_for(cfg, sigmoid_theta));
  return contextual_loss(ind.mask, batch.y);
}

Tensor loss_intersection_mse(const Batch& batch, const LossConfig& cfg) {
  ContextSetup cs = batch_distances(batch);
  NeighborIndicator ind = neighbor_indicator(cs.d, cfg.k, cfg.epsilon, theta_for(cfg, false));
  return contextual_loss(intersection_step(ind), batch.y);
}

LossBreakdown combined_loss(const Batch& batch, const LossConfig& cfg) {
  cfg.validate();
  ContextSetup cs = batch_distances(batch);

  LossBreakdown out;
  // At lambda 0 the objective contains no contextual term; it is still built
  // for the loss curves when the batch geometry allows it, but a rejected
  // batch must not fail a step it would not have contributed to.
  bool have_context = true;
  try {
    out.context = context_term(batch, cfg, cs.d);
  } catch (const std::invalid_argument&) {
    if (cfg.lambda != 0.0) throw;
    have_context = false;
    out.context = batch.f.tape()->scalar(std::numeric_limits<double>::quiet_NaN());
  }
  out.contrast = contrastive_loss(cs.s, batch.y, cfg.delta_plus, cfg.delta_minus);
  out.reg = similarity_regularizer(cs.s, cfg.s_tilde);
  out.total = add(scalar_mul(out.reg, cfg.gamma),
                  scalar_mul(out.contrast, 1.0 - cfg.lambda - cfg.gamma));
  if (cfg.lambda != 0.0 && have_context) {
    out.total = add(scalar_mul(out.context, cfg.lambda), out.total);
  }
  return out;
}

}  // namespace ctxsim
