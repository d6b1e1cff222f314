#include "ntpp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ntpp {

namespace {

void require_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) {
    throw std::logic_error("autodiff: operands recorded on different tapes");
  }
}

void require_shape(bool ok, const char* op, const Var& a, const Var& b) {
  if (!ok) {
    throw std::invalid_argument(
        std::string("autodiff: shape mismatch in ") + op + ": (" +
        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ") vs (" +
        std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad_scalar(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double softplus_scalar(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------- Var / Tape

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, bool requires_grad,
                 std::function<void(Tape&, const Matrix&)> backprop) {
  Node node{std::move(value), Matrix(), requires_grad, false, nullptr};
  if (requires_grad) {
    node.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) {
    return;
  }
  if (!node.has_grad) {
    node.grad = g;
    node.has_grad = true;
  } else {
    node.grad += g;
  }
}

const Matrix& Tape::grad(int id) const {
  const Node& node = nodes_[id];
  return node.has_grad ? node.grad : empty_;
}

void Tape::backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::invalid_argument("autodiff: backward() needs a 1x1 root");
  }
  accumulate(root, Matrix::Ones(1, 1));
  for (int id = root.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backprop) {
      continue;
    }
    // The closure may accumulate into lower ids only, so the reference is
    // stable for the duration of the call.
    node.backprop(*this, node.grad);
  }
}

// ---------------------------------------------------------------- algebra

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.cols() == b.rows(), "matmul", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape()->record(a.value() * b.value(), rg,
                          [a, b](Tape& t, const Matrix& g) {
                            if (a.requires_grad()) {
                              t.accumulate(a, g * b.value().transpose());
                            }
                            if (b.requires_grad()) {
                              t.accumulate(b, a.value().transpose() * g);
                            }
                          });
}

Var transpose(const Var& a) {
  return a.tape()->record(a.value().transpose(), a.requires_grad(),
                          [a](Tape& t, const Matrix& g) {
                            t.accumulate(a, g.transpose());
                          });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape()->record(a.value() + b.value(), rg,
                          [a, b](Tape& t, const Matrix& g) {
                            t.accumulate(a, g);
                            t.accumulate(b, g);
                          });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape()->record(a.value() - b.value(), rg,
                          [a, b](Tape& t, const Matrix& g) {
                            t.accumulate(a, g);
                            t.accumulate(b, -g);
                          });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape()->record(a.value().cwiseProduct(b.value()), rg,
                          [a, b](Tape& t, const Matrix& g) {
                            if (a.requires_grad()) {
                              t.accumulate(a, g.cwiseProduct(b.value()));
                            }
                            if (b.requires_grad()) {
                              t.accumulate(b, g.cwiseProduct(a.value()));
                            }
                          });
}

Var scale(const Var& a, double s) {
  return a.tape()->record(a.value() * s, a.requires_grad(),
                          [a, s](Tape& t, const Matrix& g) {
                            t.accumulate(a, g * s);
                          });
}

Var add_scalar(const Var& a, double s) {
  return a.tape()->record(a.value().array() + s, a.requires_grad(),
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var add_row(const Var& a, const Var& row) {
  require_same_tape(a, row);
  require_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row", a, row);
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  const bool rg = a.requires_grad() || row.requires_grad();
  return a.tape()->record(std::move(out), rg,
                          [a, row](Tape& t, const Matrix& g) {
                            t.accumulate(a, g);
                            if (row.requires_grad()) {
                              t.accumulate(row, g.colwise().sum());
                            }
                          });
}

Var mul_col(const Var& a, const Var& col) {
  require_same_tape(a, col);
  require_shape(col.cols() == 1 && col.rows() == a.rows(), "mul_col", a, col);
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  const bool rg = a.requires_grad() || col.requires_grad();
  return a.tape()->record(
      std::move(out), rg, [a, col](Tape& t, const Matrix& g) {
        if (a.requires_grad()) {
          Matrix ga = g.array().colwise() * col.value().col(0).array();
          t.accumulate(a, ga);
        }
        if (col.requires_grad()) {
          t.accumulate(col, g.cwiseProduct(a.value()).rowwise().sum());
        }
      });
}

Var outer_sum(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_shape(a.cols() == 1 && b.cols() == 1, "outer_sum", a, b);
  Matrix out = a.value().col(0).replicate(1, b.rows());
  out.rowwise() += b.value().col(0).transpose();
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape()->record(std::move(out), rg,
                          [a, b](Tape& t, const Matrix& g) {
                            t.accumulate(a, g.rowwise().sum());
                            t.accumulate(b, g.colwise().sum().transpose());
                          });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  return a.tape()->record(out, a.requires_grad(),
                          [a, out](Tape& t, const Matrix& g) {
                            t.accumulate(a, g.cwiseProduct(out));
                          });
}

Var log(const Var& a) {
  return a.tape()->record(a.value().array().log(), a.requires_grad(),
                          [a](Tape& t, const Matrix& g) {
                            t.accumulate(a, g.cwiseQuotient(a.value()));
                          });
}

Var gelu(const Var& a) {
  return a.tape()->record(a.value().unaryExpr(&gelu_scalar), a.requires_grad(),
                          [a](Tape& t, const Matrix& g) {
                            t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(
                                                &gelu_grad_scalar)));
                          });
}

Var softplus(const Var& a) {
  return a.tape()->record(a.value().unaryExpr(&softplus_scalar),
                          a.requires_grad(), [a](Tape& t, const Matrix& g) {
                            t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(
                                                &sigmoid_scalar)));
                          });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr(&sigmoid_scalar);
  return a.tape()->record(out, a.requires_grad(),
                          [a, out](Tape& t, const Matrix& g) {
                            Matrix d = out.array() * (1.0 - out.array());
                            t.accumulate(a, g.cwiseProduct(d));
                          });
}

Var clamp(const Var& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape()->record(
      std::move(out), a.requires_grad(), [a, lo, hi](Tape& t, const Matrix& g) {
        Matrix pass = g;
        const Matrix& x = a.value();
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          if (x(i) < lo || x(i) > hi) {
            pass(i) = 0.0;
          }
        }
        t.accumulate(a, pass);
      });
}

// ---------------------------------------------------------------- shape

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) {
    throw std::invalid_argument("autodiff: hcat of nothing");
  }
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    require_shape(p.rows() == rows, "hcat", parts[0], p);
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(
      std::move(out), rg, [inputs](Tape& t, const Matrix& g) {
        Eigen::Index at = 0;
        for (const Var& p : inputs) {
          if (p.requires_grad()) {
            t.accumulate(p, g.middleCols(at, p.cols()));
          }
          at += p.cols();
        }
      });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) {
    throw std::invalid_argument("autodiff: vcat of nothing");
  }
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    require_shape(p.cols() == cols, "vcat", parts[0], p);
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(
      std::move(out), rg, [inputs](Tape& t, const Matrix& g) {
        Eigen::Index at = 0;
        for (const Var& p : inputs) {
          if (p.requires_grad()) {
            t.accumulate(p, g.middleRows(at, p.rows()));
          }
          at += p.rows();
        }
      });
}

Var hcat(std::initializer_list<Var> parts) {
  return hcat(std::span<const Var>(parts.begin(), parts.size()));
}

Var vcat(std::initializer_list<Var> parts) {
  return vcat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::out_of_range("autodiff: slice_cols out of range");
  }
  return a.tape()->record(
      a.value().middleCols(start, count), a.requires_grad(),
      [a, start, count](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(a.rows(), a.cols());
        full.middleCols(start, count) = g;
        t.accumulate(a, full);
      });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::out_of_range("autodiff: slice_rows out of range");
  }
  return a.tape()->record(
      a.value().middleRows(start, count), a.requires_grad(),
      [a, start, count](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(a.rows(), a.cols());
        full.middleRows(start, count) = g;
        t.accumulate(a, full);
      });
}

Var gather_rows(const Var& a, std::span<const int> index) {
  const auto n = static_cast<Eigen::Index>(index.size());
  Matrix out = Matrix::Zero(n, a.cols());
  std::vector<int> idx(index.begin(), index.end());
  for (Eigen::Index r = 0; r < n; ++r) {
    if (idx[r] >= 0) {
      if (idx[r] >= a.rows()) {
        throw std::out_of_range("autodiff: gather_rows index out of range");
      }
      out.row(r) = a.value().row(idx[r]);
    }
  }
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [a, idx](Tape& t, const Matrix& g) {
                            Matrix full = Matrix::Zero(a.rows(), a.cols());
                            for (std::size_t r = 0; r < idx.size(); ++r) {
                              if (idx[r] >= 0) {
                                full.row(idx[r]) += g.row(r);
                              }
                            }
                            t.accumulate(a, full);
                          });
}

Var detach(const Var& a) { return a.tape()->constant(a.value()); }

// ---------------------------------------------------------------- reductions

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [a](Tape& t, const Matrix& g) {
                            t.accumulate(a, Matrix::Constant(a.rows(), a.cols(),
                                                             g(0, 0)));
                          });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var sum_rows(const Var& a) {
  return a.tape()->record(a.value().rowwise().sum(), a.requires_grad(),
                          [a](Tape& t, const Matrix& g) {
                            t.accumulate(a, g.col(0).replicate(1, a.cols()));
                          });
}

// ---------------------------------------------------------------- attention

Var masked_softmax_rows(const Var& a, const BoolMatrix& visible) {
  if (visible.rows() != a.rows() || visible.cols() != a.cols()) {
    throw std::invalid_argument("autodiff: mask shape mismatch");
  }
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (visible(i, k)) {
        top = std::max(top, x(i, k));
      }
    }
    if (!std::isfinite(top)) {
      continue;
    }
    double total = 0.0;
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (visible(i, k)) {
        out(i, k) = std::exp(x(i, k) - top);
        total += out(i, k);
      }
    }
    out.row(i) /= total;
  }
  return a.tape()->record(out, a.requires_grad(),
                          [a, out](Tape& t, const Matrix& g) {
                            Matrix gy = g.cwiseProduct(out);
                            Vector dot = gy.rowwise().sum();
                            Matrix ga = gy - (out.array().colwise() *
                                              dot.array()).matrix();
                            t.accumulate(a, ga);
                          });
}

Var log_softmax_rows(const Var& a) {
  const Matrix& x = a.value();
  Vector top = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - top;
  Vector lse = shifted.array().exp().rowwise().sum().log();
  Matrix out = shifted.colwise() - lse;
  Matrix prob = out.array().exp();
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [a, prob](Tape& t, const Matrix& g) {
                            Vector gsum = g.rowwise().sum();
                            Matrix ga = g - (prob.array().colwise() *
                                             gsum.array()).matrix();
                            t.accumulate(a, ga);
                          });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias,
                    double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  const Eigen::Index n = x.cols();
  require_shape(gain.rows() == 1 && gain.cols() == n, "layer_norm", x, gain);
  require_shape(bias.rows() == 1 && bias.cols() == n, "layer_norm", x, bias);
  const Matrix& v = x.value();
  Vector mu = v.rowwise().mean();
  Matrix centered = v.colwise() - mu;
  Vector inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) +
       eps)
          .rsqrt();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  const bool rg =
      x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  return x.tape()->record(
      std::move(out), rg,
      [x, gain, bias, xhat, inv_std, n](Tape& t, const Matrix& g) {
        if (gain.requires_grad()) {
          t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        }
        if (bias.requires_grad()) {
          t.accumulate(bias, g.colwise().sum());
        }
        if (x.requires_grad()) {
          Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
          Vector s1 = dxhat.rowwise().sum();
          Vector s2 = dxhat.cwiseProduct(xhat).rowwise().sum();
          const double dn = static_cast<double>(n);
          Matrix dx = (dn * dxhat).colwise() - s1;
          dx -= (xhat.array().colwise() * s2.array()).matrix();
          dx = dx.array().colwise() * (inv_std.array() / dn);
          t.accumulate(x, dx);
        }
      });
}

}  // namespace ntpp
