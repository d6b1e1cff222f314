#include "helpers.hpp"

#include "ntpp/decoder.hpp"
#include "ntpp/layers.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace ntpp;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Max relative error between the tape gradient and central differences of
// f(inputs) summed against fixed random weights.
double gradient_error(const std::vector<Matrix>& inputs,
                      const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                      double h = 1e-6) {
  std::mt19937_64 rng(99);
  Matrix weights;
  auto evaluate = [&](const std::vector<Matrix>& xs, std::vector<Matrix>* grads) {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& x : xs) vars.push_back(tape.variable(x));
    const Var out = f(tape, vars);
    if (weights.size() == 0) weights = random_matrix(out.rows(), out.cols(), rng);
    const Var loss = sum(mul(out, tape.constant(weights)));
    if (grads) {
      tape.backward(loss);
      for (const Var& v : vars) grads->push_back(v.grad());
    }
    return loss.scalar();
  };
  std::vector<Matrix> grads;
  evaluate(inputs, &grads);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index e = 0; e < inputs[i].size(); ++e) {
      auto plus = inputs, minus = inputs;
      plus[i].data()[e] += h;
      minus[i].data()[e] -= h;
      const double numeric = (evaluate(plus, nullptr) - evaluate(minus, nullptr)) / (2 * h);
      const double analytic = grads[i].data()[e];
      worst = std::max(worst, std::abs(numeric - analytic) /
                                  std::max(1.0, std::abs(numeric) + std::abs(analytic)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("autodiff: elementwise and linear algebra gradients") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng);
  const Matrix c = random_matrix(4, 2, rng), row = random_matrix(1, 4, rng);
  const Matrix col = random_matrix(3, 1, rng), pos = random_matrix(3, 4, rng, 0.2, 2.0);
  using V = std::vector<Var>;
  CHECK(gradient_error({a, c}, [](Tape&, const V& x) { return matmul(x[0], x[1]); }) < 1e-7);
  CHECK(gradient_error({a, b}, [](Tape&, const V& x) { return mul(x[0], x[1]); }) < 1e-7);
  CHECK(gradient_error({a, b}, [](Tape&, const V& x) { return sub(x[0], scale(x[1], 3)); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return transpose(x[0]); }) < 1e-7);
  CHECK(gradient_error({a, row}, [](Tape&, const V& x) { return add_row(x[0], x[1]); }) < 1e-7);
  CHECK(gradient_error({a, col}, [](Tape&, const V& x) { return mul_col(x[0], x[1]); }) < 1e-7);
  CHECK(gradient_error({col, col * 2}, [](Tape&, const V& x) { return outer_sum(x[0], x[1]); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return exp(x[0]); }) < 1e-7);
  CHECK(gradient_error({pos}, [](Tape&, const V& x) { return log(x[0]); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return gelu(x[0]); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return softplus(x[0]); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return sigmoid(x[0]); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return sum_rows(x[0]); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return mean(x[0]); }) < 1e-7);
}

TEST_CASE("autodiff: shape operations") {
  std::mt19937_64 rng(2);
  const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 2, rng);
  using V = std::vector<Var>;
  CHECK(gradient_error({a, b}, [](Tape&, const V& x) { return hcat({x[0], x[1]}); }) < 1e-7);
  CHECK(gradient_error({a, a}, [](Tape&, const V& x) { return vcat({x[0], x[1]}); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return slice_cols(x[0], 1, 2); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return slice_rows(x[0], 1, 2); }) < 1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) {
          const std::vector<int> index = {2, -1, 0, 2};
          return gather_rows(x[0], index);
        }) < 1e-7);
}

TEST_CASE("autodiff: softmax, log-softmax and layer norm") {
  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(4, 4, rng, -2, 2);
  const Matrix gain = random_matrix(1, 4, rng), bias = random_matrix(1, 4, rng);
  using V = std::vector<Var>;
  BoolMatrix mask(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) mask(i, j) = j <= i;
  CHECK(gradient_error({a}, [&](Tape&, const V& x) { return masked_softmax_rows(x[0], mask); }) <
        1e-7);
  CHECK(gradient_error({a}, [](Tape&, const V& x) { return log_softmax_rows(x[0]); }) < 1e-7);
  CHECK(gradient_error({a, gain, bias}, [](Tape&, const V& x) {
          return layer_norm_rows(x[0], x[1], x[2]);
        }) < 1e-6);
}

TEST_CASE("autodiff: masked softmax rows") {
  Tape tape;
  BoolMatrix mask(2, 3);
  mask << false, false, false, true, true, false;
  Matrix m(2, 3);
  m << 1, 2, 3, 0, 0, 50;
  const Matrix out = masked_softmax_rows(tape.constant(m), mask).value();
  CHECK(out.row(0).isZero());
  CHECK(out(1, 0) == doctest::Approx(0.5));
  CHECK(out(1, 1) == doctest::Approx(0.5));
  CHECK(out(1, 2) == 0.0);
}

TEST_CASE("autodiff: clamp and detach stop gradients") {
  Tape tape;
  Matrix m(1, 3);
  m << -2.0, 0.5, 2.0;
  const Var x = tape.variable(m);
  tape.backward(sum(add(clamp(x, 0.0, 1.0), detach(x))));
  CHECK(x.grad()(0, 0) == 0.0);
  CHECK(x.grad()(0, 1) == 1.0);
  CHECK(x.grad()(0, 2) == 0.0);
}

TEST_CASE("autodiff: scalar helpers") {
  CHECK(softplus_scalar(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus_scalar(800.0) == doctest::Approx(800.0));
  CHECK(sigmoid_scalar(0.0) == 0.5);
  CHECK(gelu_scalar(0.0) == 0.0);
  const double h = 1e-6;
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    CHECK(gelu_grad_scalar(x) ==
          doctest::Approx((gelu_scalar(x + h) - gelu_scalar(x - h)) / (2 * h)).epsilon(1e-6));
  }
}

// Whole-model gradients with fixed quadrature nodes, every objective.
TEST_CASE("autodiff: full model gradient matches finite differences") {
  struct Case {
    Objective objective;
    MarkMode mode;
  };
  for (const Case c : {Case{Objective::kPpMultiClass, MarkMode::kMultiClass},
                       Case{Objective::kPpMultiLabel, MarkMode::kMultiLabel},
                       Case{Objective::kPpMarked, MarkMode::kMultiClass},
                       Case{Objective::kAutoEncoder, MarkMode::kMultiLabel}}) {
    CAPTURE(to_string(c.objective));
    Model model = build_model(testing::toy_config(c.objective, c.mode), 5);
    const Record r = testing::toy_record(c.mode);
    const Integration integ{Quadrature::kMonteCarlo, 4, 17};
    auto loss = [&]() {
      Graph g(model.params);
      const Forward fwd = encode_record(g, model, r);
      return objective_loss(g, model, r, fwd, integ).total.scalar();
    };
    Graph g(model.params);
    const Forward fwd = encode_record(g, model, r);
    const LossReport report = objective_loss(g, model, r, fwd, integ);
    g.backward(report.total);
    const Gradients grads = g.gradients();
    double worst = 0.0;
    const double h = 1e-6;
    for (auto& [name, p] : model.params.items()) {
      if (name.rfind("probe", 0) == 0 || name.rfind("classifier", 0) == 0) continue;
      for (Eigen::Index e = 0; e < p.value.size(); ++e) {
        const double saved = p.value.data()[e];
        p.value.data()[e] = saved + h;
        const double up = loss();
        p.value.data()[e] = saved - h;
        const double down = loss();
        p.value.data()[e] = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = grads.at(name).data()[e];
        worst = std::max(worst, std::abs(numeric - analytic) /
                                    std::max(1.0, std::abs(numeric) + std::abs(analytic)));
      }
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("graph: frozen groups get zero gradients") {
  Model model = build_model(
      testing::toy_config(Objective::kPpMultiClass, MarkMode::kMultiClass), 1);
  const Record r = testing::toy_record(MarkMode::kMultiClass);
  Graph g(model.params, {"tee"});
  const Forward fwd = encode_record(g, model, r);
  g.backward(objective_loss(g, model, r, fwd, {}).total);
  const Gradients grads = g.gradients();
  for (const auto& name : model.params.names_in("tee")) CHECK(grads.at(name).isZero());
  bool any = false;
  for (const auto& name : model.params.names_in("decoder")) any |= !grads.at(name).isZero();
  CHECK(any);
}
