#pragma once

#include "ctxsim/tensor.hpp"

namespace ctxsim {

// Elementwise; operands must share a tape and a shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Ties send half the upstream gradient to each operand.
Tensor min_elementwise(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor scalar_mul(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
// c - x, elementwise.
Tensor rsub_scalar(const Tensor& x, double c);

// Derivative at 0 is 0 for both.
Tensor relu(const Tensor& x);
Tensor hinge_pos(const Tensor& x);

Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);      // 1x1
Tensor mean(const Tensor& x);     // 1x1
Tensor row_sum(const Tensor& x);  // n x 1

// Rows scaled to unit Euclidean norm; zero rows are a domain error.
Tensor row_l2_normalize(const Tensor& x);

// y(i,j) = x(i,j) / v(i,0); v must be n x 1 and nonzero. Gradient flows into
// both arguments; pass a constant or stop_gradient v to detach the divisor.
Tensor div_rowbroadcast(const Tensor& x, const Tensor& v);

// y(i,j) = x(i,j) + b(0,j); b must be 1 x m.
Tensor add_bias(const Tensor& x, const Tensor& b);

// Forward 1 if x >= 0 else 0. Backward is the constant alpha regardless of x,
// so gradients pass through the step at a fixed rate.
Tensor heaviside_ste(const Tensor& x, double alpha);

// Smooth relaxation 1 / (1 + exp(-x / tau)) with its true derivative.
Tensor heaviside_sigmoid(const Tensor& x, double tau);

// Identity forward, blocks all gradient flow.
Tensor stop_gradient(const Tensor& x);

// M(i,j) = sum_p min(a(i,p), a(j,p)). Ties split the gradient equally.
Tensor pairwise_min_sum(const Tensor& a);

}  // namespace ctxsim
