#include "ctxsim/tensor.hpp"

#include <stdexcept>

namespace ctxsim {

int Tensor::rows() const { return value().rows(); }
int Tensor::cols() const { return value().cols(); }

const Matrix& Tensor::value() const {
  if (!valid()) throw std::invalid_argument("Tensor: empty handle");
  return tape_->nodes_[id_].value;
}

const Matrix& Tensor::grad() const {
  if (!valid()) throw std::invalid_argument("Tensor: empty handle");
  const Matrix& g = tape_->nodes_[id_].grad;
  if (g.empty()) {
    throw std::invalid_argument("Tensor::grad: no gradient accumulated for this node");
  }
  return g;
}

bool Tensor::has_grad() const { return valid() && !tape_->nodes_[id_].grad.empty(); }

bool Tensor::requires_grad() const { return valid() && tape_->nodes_[id_].requires_grad; }

Tensor Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::push_node(Matrix value, std::vector<int> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) {
    if (p < 0 || p >= static_cast<int>(nodes_.size())) {
      throw std::invalid_argument("Tape::push_node: parent not on this tape");
    }
    if (nodes_[p].requires_grad) n.requires_grad = true;
  }
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::ensure_adjoint(int id) {
  Matrix& a = adjoints_[id];
  if (a.empty()) a = Matrix(nodes_[id].value.rows(), nodes_[id].value.cols(), 0.0);
}

void Tape::add_adjoint(int id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  if (!g.same_shape(nodes_[id].value)) {
    throw std::invalid_argument("Tape::add_adjoint: gradient shape mismatch");
  }
  ensure_adjoint(id);
  adjoints_[id].add_inplace(g);
}

void Tape::add_adjoint_at(int id, int i, int j, double g) {
  if (!nodes_[id].requires_grad) return;
  ensure_adjoint(id);
  adjoints_[id](i, j) += g;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw std::invalid_argument("Tape::backward: tensor from another tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be 1x1, got " + shape_str(loss.value()));
  }
  if (in_backward_) throw std::runtime_error("Tape::backward: reentrant call");
  in_backward_ = true;

  adjoints_.assign(nodes_.size(), Matrix());
  if (nodes_[loss.id()].requires_grad) {
    ensure_adjoint(loss.id());
    adjoints_[loss.id()](0, 0) = 1.0;
  }

  for (int id = loss.id(); id >= 0; --id) {
    if (adjoints_[id].empty()) continue;
    if (nodes_[id].backward) nodes_[id].backward(*this, adjoints_[id]);
  }

  for (size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].requires_grad || adjoints_[id].empty()) continue;
    if (nodes_[id].grad.empty()) {
      nodes_[id].grad = std::move(adjoints_[id]);
    } else {
      nodes_[id].grad.add_inplace(adjoints_[id]);
    }
  }
  adjoints_.clear();
  in_backward_ = false;
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad = Matrix();
}

}  // namespace ctxsim
