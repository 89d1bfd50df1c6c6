#include "ctxsim/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ctxsim {

namespace {

Tape* common_tape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.valid() || !b.valid()) {
    throw std::invalid_argument(std::string(op) + ": empty tensor handle");
  }
  if (a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands on different tapes");
  }
  return a.tape();
}

Tape* require_tape(const char* op, const Tensor& x) {
  if (!x.valid()) throw std::invalid_argument(std::string(op) + ": empty tensor handle");
  return x.tape();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.value()) +
                                " vs " + shape_str(b.value()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tape* t = common_tape("add", a, b);
  require_same_shape("add", a, b);
  Matrix out = a.value();
  out.add_inplace(b.value());
  int aid = a.id(), bid = b.id();
  return t->push_node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, const Matrix& g) {
    tp.add_adjoint(aid, g);
    tp.add_adjoint(bid, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape* t = common_tape("sub", a, b);
  require_same_shape("sub", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) - bv(i, j);
  int aid = a.id(), bid = b.id();
  return t->push_node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, const Matrix& g) {
    tp.add_adjoint(aid, g);
    Matrix neg(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) neg(i, j) = -g(i, j);
    tp.add_adjoint(bid, neg);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape* t = common_tape("mul", a, b);
  require_same_shape("mul", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) * bv(i, j);
  int aid = a.id(), bid = b.id();
  return t->push_node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value_of(aid);
    const Matrix& bv = tp.value_of(bid);
    Matrix ga(g.rows(), g.cols()), gb(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) {
        ga(i, j) = g(i, j) * bv(i, j);
        gb(i, j) = g(i, j) * av(i, j);
      }
    }
    tp.add_adjoint(aid, ga);
    tp.add_adjoint(bid, gb);
  });
}

Tensor min_elementwise(const Tensor& a, const Tensor& b) {
  Tape* t = common_tape("min_elementwise", a, b);
  require_same_shape("min_elementwise", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) out(i, j) = std::min(av(i, j), bv(i, j));
  int aid = a.id(), bid = b.id();
  return t->push_node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value_of(aid);
    const Matrix& bv = tp.value_of(bid);
    Matrix ga(g.rows(), g.cols()), gb(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i) {
      for (int j = 0; j < g.cols(); ++j) {
        if (av(i, j) < bv(i, j)) {
          ga(i, j) = g(i, j);
        } else if (av(i, j) > bv(i, j)) {
          gb(i, j) = g(i, j);
        } else {
          ga(i, j) = 0.5 * g(i, j);
          gb(i, j) = 0.5 * g(i, j);
        }
      }
    }
    tp.add_adjoint(aid, ga);
    tp.add_adjoint(bid, gb);
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape* t = common_tape("matmul", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions " + shape_str(av) + " vs " +
                                shape_str(bv));
  }
  Matrix out(av.rows(), bv.cols(), 0.0);
  for (int i = 0; i < av.rows(); ++i)
    for (int k = 0; k < av.cols(); ++k) {
      double aik = av(i, k);
      for (int j = 0; j < bv.cols(); ++j) out(i, j) += aik * bv(k, j);
    }
  int aid = a.id(), bid = b.id();
  return t->push_node(std::move(out), {aid, bid}, [aid, bid](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value_of(aid);
    const Matrix& bv = tp.value_of(bid);
    // dA = g * B^T
    Matrix ga(av.rows(), av.cols(), 0.0);
    for (int i = 0; i < av.rows(); ++i)
      for (int j = 0; j < bv.cols(); ++j) {
        double gij = g(i, j);
        for (int k = 0; k < av.cols(); ++k) ga(i, k) += gij * bv(k, j);
      }
    // dB = A^T * g
    Matrix gb(bv.rows(), bv.cols(), 0.0);
    for (int i = 0; i < av.rows(); ++i)
      for (int k = 0; k < av.cols(); ++k) {
        double aik = av(i, k);
        for (int j = 0; j < bv.cols(); ++j) gb(k, j) += aik * g(i, j);
      }
    tp.add_adjoint(aid, ga);
    tp.add_adjoint(bid, gb);
  });
}

Tensor transpose(const Tensor& x) {
  Tape* t = require_tape("transpose", x);
  int xid = x.id();
  return t->push_node(x.value().transposed(), {xid}, [xid](Tape& tp, const Matrix& g) {
    tp.add_adjoint(xid, g.transposed());
  });
}

Tensor scalar_mul(const Tensor& x, double c) {
  Tape* t = require_tape("scalar_mul", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = c * xv(i, j);
  int xid = x.id();
  return t->push_node(std::move(out), {xid}, [xid, c](Tape& tp, const Matrix& g) {
    Matrix gx(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) gx(i, j) = c * g(i, j);
    tp.add_adjoint(xid, gx);
  });
}

Tensor add_scalar(const Tensor& x, double c) {
  Tape* t = require_tape("add_scalar", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) + c;
  int xid = x.id();
  return t->push_node(std::move(out), {xid},
                      [xid](Tape& tp, const Matrix& g) { tp.add_adjoint(xid, g); });
}

Tensor rsub_scalar(const Tensor& x, double c) {
  Tape* t = require_tape("rsub_scalar", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = c - xv(i, j);
  int xid = x.id();
  return t->push_node(std::move(out), {xid}, [xid](Tape& tp, const Matrix& g) {
    Matrix gx(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) gx(i, j) = -g(i, j);
    tp.add_adjoint(xid, gx);
  });
}

namespace {

Tensor positive_part(const char* op, const Tensor& x) {
  Tape* t = require_tape(op, x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) > 0.0 ? xv(i, j) : 0.0;
  int xid = x.id();
  return t->push_node(std::move(out), {xid}, [xid](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value_of(xid);
    Matrix gx(g.rows(), g.cols(), 0.0);
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        if (xv(i, j) > 0.0) gx(i, j) = g(i, j);
    tp.add_adjoint(xid, gx);
  });
}

}  // namespace

Tensor relu(const Tensor& x) { return positive_part("relu", x); }
Tensor hinge_pos(const Tensor& x) { return positive_part("hinge_pos", x); }

Tensor square(const Tensor& x) {
  Tape* t = require_tape("square", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) * xv(i, j);
  int xid = x.id();
  return t->push_node(std::move(out), {xid}, [xid](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value_of(xid);
    Matrix gx(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) gx(i, j) = 2.0 * xv(i, j) * g(i, j);
    tp.add_adjoint(xid, gx);
  });
}

Tensor sum(const Tensor& x) {
  Tape* t = require_tape("sum", x);
  const Matrix& xv = x.value();
  double s = 0.0;
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) s += xv(i, j);
  int xid = x.id();
  return t->push_node(Matrix(1, 1, s), {xid}, [xid](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value_of(xid);
    Matrix gx(xv.rows(), xv.cols(), g(0, 0));
    tp.add_adjoint(xid, gx);
  });
}

Tensor mean(const Tensor& x) {
  Tape* t = require_tape("mean", x);
  const Matrix& xv = x.value();
  if (xv.size() == 0) throw std::invalid_argument("mean: empty tensor");
  double s = 0.0;
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) s += xv(i, j);
  double inv = 1.0 / static_cast<double>(xv.size());
  int xid = x.id();
  return t->push_node(Matrix(1, 1, s * inv), {xid}, [xid, inv](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value_of(xid);
    Matrix gx(xv.rows(), xv.cols(), g(0, 0) * inv);
    tp.add_adjoint(xid, gx);
  });
}

Tensor row_sum(const Tensor& x) {
  Tape* t = require_tape("row_sum", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), 1, 0.0);
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, 0) += xv(i, j);
  int xid = x.id();
  return t->push_node(std::move(out), {xid}, [xid](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value_of(xid);
    Matrix gx(xv.rows(), xv.cols());
    for (int i = 0; i < xv.rows(); ++i)
      for (int j = 0; j < xv.cols(); ++j) gx(i, j) = g(i, 0);
    tp.add_adjoint(xid, gx);
  });
}

Tensor row_l2_normalize(const Tensor& x) {
  Tape* t = require_tape("row_l2_normalize", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i) {
    double sq = 0.0;
    for (int j = 0; j < xv.cols(); ++j) sq += xv(i, j) * xv(i, j);
    double r = std::sqrt(sq);
    if (!(r > 0.0)) {
      throw std::domain_error("row_l2_normalize: zero-norm row " + std::to_string(i));
    }
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) / r;
  }
  int xid = x.id();
  return t->push_node(std::move(out), {xid}, [xid](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value_of(xid);
    Matrix gx(xv.rows(), xv.cols());
    for (int i = 0; i < xv.rows(); ++i) {
      double sq = 0.0, dot = 0.0;
      for (int j = 0; j < xv.cols(); ++j) sq += xv(i, j) * xv(i, j);
      double r = std::sqrt(sq);
      for (int j = 0; j < xv.cols(); ++j) dot += xv(i, j) * g(i, j);
      double r3 = r * r * r;
      for (int j = 0; j < xv.cols(); ++j) gx(i, j) = g(i, j) / r - xv(i, j) * dot / r3;
    }
    tp.add_adjoint(xid, gx);
  });
}

Tensor div_rowbroadcast(const Tensor& x, const Tensor& v) {
  Tape* t = common_tape("div_rowbroadcast", x, v);
  const Matrix& xv = x.value();
  const Matrix& vv = v.value();
  if (vv.cols() != 1 || vv.rows() != xv.rows()) {
    throw std::invalid_argument("div_rowbroadcast: divisor must be " +
                                std::to_string(xv.rows()) + "x1, got " + shape_str(vv));
  }
  for (int i = 0; i < vv.rows(); ++i) {
    if (vv(i, 0) == 0.0) {
      throw std::domain_error("div_rowbroadcast: zero divisor in row " + std::to_string(i));
    }
  }
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) / vv(i, 0);
  int xid = x.id(), vid = v.id();
  return t->push_node(std::move(out), {xid, vid}, [xid, vid](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value_of(xid);
    const Matrix& vv = tp.value_of(vid);
    Matrix gx(xv.rows(), xv.cols());
    Matrix gv(vv.rows(), 1, 0.0);
    for (int i = 0; i < xv.rows(); ++i) {
      double vi = vv(i, 0);
      for (int j = 0; j < xv.cols(); ++j) {
        gx(i, j) = g(i, j) / vi;
        gv(i, 0) -= g(i, j) * xv(i, j) / (vi * vi);
      }
    }
    tp.add_adjoint(xid, gx);
    tp.add_adjoint(vid, gv);
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  Tape* t = common_tape("add_bias", x, b);
  const Matrix& xv = x.value();
  const Matrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw std::invalid_argument("add_bias: bias must be 1x" + std::to_string(xv.cols()) +
                                ", got " + shape_str(bv));
  }
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) + bv(0, j);
  int xid = x.id(), bid = b.id();
  return t->push_node(std::move(out), {xid, bid}, [xid, bid](Tape& tp, const Matrix& g) {
    tp.add_adjoint(xid, g);
    Matrix gb(1, g.cols(), 0.0);
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
    tp.add_adjoint(bid, gb);
  });
}

Tensor heaviside_ste(const Tensor& x, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("heaviside_ste: alpha must be positive");
  Tape* t = require_tape("heaviside_ste", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) >= 0.0 ? 1.0 : 0.0;
  int xid = x.id();
  return t->push_node(std::move(out), {xid}, [xid, alpha](Tape& tp, const Matrix& g) {
    Matrix gx(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) gx(i, j) = alpha * g(i, j);
    tp.add_adjoint(xid, gx);
  });
}

Tensor heaviside_sigmoid(const Tensor& x, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("heaviside_sigmoid: tau must be positive");
  Tape* t = require_tape("heaviside_sigmoid", x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) out(i, j) = 1.0 / (1.0 + std::exp(-xv(i, j) / tau));
  int xid = x.id();
  // Rule reads its own forward value: d/dx sigma(x/tau) = s(1-s)/tau.
  int out_id = static_cast<int>(t->num_nodes());
  return t->push_node(std::move(out), {xid}, [xid, out_id, tau](Tape& tp, const Matrix& g) {
    const Matrix& s = tp.value_of(out_id);
    Matrix gx(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        gx(i, j) = g(i, j) * s(i, j) * (1.0 - s(i, j)) / tau;
    tp.add_adjoint(xid, gx);
  });
}

Tensor stop_gradient(const Tensor& x) {
  Tape* t = require_tape("stop_gradient", x);
  return t->constant(x.value());
}

Tensor pairwise_min_sum(const Tensor& a) {
  Tape* t = require_tape("pairwise_min_sum", a);
  const Matrix& av = a.value();
  int n = av.rows(), m = av.cols();
  Matrix out(n, n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < m; ++p) s += std::min(av(i, p), av(j, p));
      out(i, j) = s;
    }
  int aid = a.id();
  return t->push_node(std::move(out), {aid}, [aid](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value_of(aid);
    int n = av.rows(), m = av.cols();
    Matrix ga(n, m, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double gij = g(i, j);
        if (gij == 0.0) continue;
        for (int p = 0; p < m; ++p) {
          if (av(i, p) < av(j, p)) {
            ga(i, p) += gij;
          } else if (av(i, p) > av(j, p)) {
            ga(j, p) += gij;
          } else {
            ga(i, p) += 0.5 * gij;
            ga(j, p) += 0.5 * gij;
          }
        }
      }
    tp.add_adjoint(aid, ga);
  });
}

}  // namespace ctxsim
