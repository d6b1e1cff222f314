#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation applied to Vars. Calling backward() on a
// 1x1 Var propagates adjoints to every node that requires a gradient.
// Tapes are single-use and not thread-safe; build one per forward pass.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace ntpp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);  // leaf that receives a gradient

  // Creates an interior node. `backprop` receives the node's adjoint and is
  // responsible for calling accumulate() on its inputs.
  Var record(Matrix value, bool requires_grad,
             std::function<void(Tape&, const Matrix&)> backprop);

  void accumulate(const Var& v, const Matrix& g);
  void backward(const Var& root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::function<void(Tape&, const Matrix&)> backprop;
  };
  std::vector<Node> nodes_;
  Matrix empty_;
};

// ---- elementwise and linear algebra ----
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // Hadamard
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);

// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(const Var& a, const Var& row);
// a (n x m) * col (n x 1) broadcast over columns.
Var mul_col(const Var& a, const Var& col);
// a (n x 1), b (n x 1) -> S(i, k) = a(i) + b(k).
Var outer_sum(const Var& a, const Var& b);

Var exp(const Var& a);
Var log(const Var& a);
Var gelu(const Var& a);
Var softplus(const Var& a);
Var sigmoid(const Var& a);
// Clamps to [lo, hi]; the gradient is zero where the clamp is active.
Var clamp(const Var& a, double lo, double hi);

// ---- shape ----
Var hcat(std::span<const Var> parts);
Var vcat(std::span<const Var> parts);
Var hcat(std::initializer_list<Var> parts);
Var vcat(std::initializer_list<Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
// Row r of the result is row index[r] of a, or zeros when index[r] < 0.
Var gather_rows(const Var& a, std::span<const int> index);
// Stops gradient flow: a constant copy of the current value.
Var detach(const Var& a);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_rows(const Var& a);  // (n x m) -> (n x 1)

// ---- normalisation / attention ----
// Row-wise softmax restricted to entries where `visible` is true. Rows with
// no visible entry produce an all-zero row.
Var masked_softmax_rows(const Var& a, const BoolMatrix& visible);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias,
                    double eps = 1e-5);

// Numeric helpers shared with scalar oracles.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
double softplus_scalar(double x);
double sigmoid_scalar(double x);

}  // namespace ntpp
