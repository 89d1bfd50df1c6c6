#pragma once

#include <functional>
#include <vector>

#include "ctxsim/matrix.hpp"

namespace ctxsim {

class Tape;

// Lightweight handle to a node on a tape. Copies alias the same node.
class Tensor {
 public:
  Tensor() = default;

  int rows() const;
  int cols() const;
  const Matrix& value() const;

  // Accumulated gradient. Throws if no backward pass has reached this node.
  const Matrix& grad() const;
  bool has_grad() const;
  bool requires_grad() const;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Define-by-run gradient tape. The graph is append-only and topologically
// ordered by construction; it is rebuilt from scratch for every forward pass.
// Single-threaded; independent tapes may live on different threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Matrix value, bool requires_grad);
  Tensor constant(Matrix value) { return leaf(std::move(value), false); }
  Tensor scalar(double v, bool requires_grad = false) {
    return leaf(Matrix(1, 1, v), requires_grad);
  }

  // Reverse sweep from a 1x1 loss node. Visits each node at most once per
  // call. Gradients accumulate across calls until zero_grad().
  void backward(const Tensor& loss);

  void zero_grad();

  size_t num_nodes() const { return nodes_.size(); }

  // --- graph construction, used by the op implementations ---

  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  Tensor push_node(Matrix value, std::vector<int> parents, BackwardFn backward);

  const Matrix& value_of(int id) const { return nodes_[id].value; }
  bool node_requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Adds g into the scratch adjoint of a node during the current backward
  // sweep. No-op for nodes that do not require gradients.
  void add_adjoint(int id, const Matrix& g);
  void add_adjoint_at(int id, int i, int j, double g);

 private:
  friend class Tensor;

  struct Node {
    Matrix value;
    Matrix grad;  // empty until a backward pass reaches the node
    bool requires_grad = false;
    std::vector<int> parents;
    BackwardFn backward;
  };

  void ensure_adjoint(int id);

  std::vector<Node> nodes_;
  std::vector<Matrix> adjoints_;  // scratch, alive only inside backward()
  bool in_backward_ = false;
};

}  // namespace ctxsim
