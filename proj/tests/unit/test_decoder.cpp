#include "helpers.hpp"

#include "ntpp/decoder.hpp"
#include "ntpp/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ntpp;
using ntpp::testing::sequence;

namespace {

const ParameterStore kNoParameters;

// Constant intensity state: gelu(z) for mu = eta, gamma arbitrary.
IntensityState constant_state(Graph& g, Eigen::Index rows, const Matrix& mu_row,
                              const Matrix& eta_row, const Matrix& gamma_row,
                              const Matrix& rate_row) {
  auto tile = [&](const Matrix& r) {
    return g.constant(Matrix(r.replicate(rows, 1)));
  };
  return {tile(mu_row), tile(eta_row), tile(gamma_row), tile(rate_row)};
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

// lambda = c everywhere: mu = eta = 0 gives softplus(0) = ln 2, rate c / ln 2.
IntensityState poisson_state(Graph& g, Eigen::Index rows, double c) {
  return constant_state(g, rows, row({0.0}), row({0.0}), row({1.0}),
                        row({c / std::log(2.0)}));
}

}  // namespace

TEST_CASE("intensity: zero weights give ln 2 everywhere") {
  ParameterStore store;
  std::mt19937_64 rng(1);
  add_decoder_parameters(store, "decoder", 3, 2, rng);
  for (auto& [name, p] : store.items()) p.value.setZero();
  Graph g(store);
  const IntensityState state = decode_intensity(g, "decoder", g.constant(Matrix::Random(4, 3)));
  Matrix elapsed(4, 1);
  elapsed << 0.0, 0.5, 3.0, 100.0;
  const Matrix lambda = intensity(state, g.constant(elapsed)).value();
  CHECK((lambda.array() - std::log(2.0)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("intensity: recovery shape and the decay-free case") {
  const IntensityParams rising{1.5, -0.5, 0.8, 1.0};
  double previous = rising.at(0.0);
  for (int i = 1; i <= 100; ++i) {
    const double now = rising.at(0.1 * i);
    CHECK(now >= previous);
    previous = now;
  }
  CHECK(rising.at(1e3) == doctest::Approx(softplus_scalar(1.5)));
  const IntensityParams flat{0.3, 1.1, 0.0, 1.0};
  CHECK(flat.at(0.0) == doctest::Approx(softplus_scalar(1.1)));
  CHECK(flat.at(7.0) == doctest::Approx(softplus_scalar(1.1)));
  const IntensityParams scaled{0.3, 1.1, 0.0, 0.25};
  CHECK(scaled.at(2.0) == doctest::Approx(0.25 * softplus_scalar(1.1)));
}

TEST_CASE("integral: constant intensity is exact for any node count") {
  const IntensityParams c{0.0, 0.0, 1.0, 1.0};
  for (auto scheme : {Quadrature::kMonteCarlo, Quadrature::kIndependent, Quadrature::kTrapezoid}) {
    for (int n : {1, 3, 20}) {
      CHECK(integral_nonevent(c, 2.0, {scheme, n, 4}) ==
            doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    }
  }
  CHECK(integral_nonevent(c, 0.0, {}) == 0.0);
}

TEST_CASE("integral: decaying state converges to dense trapezoid") {
  const IntensityParams p{0.2, 2.5, 1.3, 1.0};
  const double reference = integral_nonevent(p, 3.0, {Quadrature::kTrapezoid, 100000, 0});
  const double mc = integral_nonevent(p, 3.0, {Quadrature::kMonteCarlo, 10000, 7});
  const double iid = integral_nonevent(p, 3.0, {Quadrature::kIndependent, 10000, 7});
  CHECK(std::abs(mc - reference) < 1e-3);
  CHECK(std::abs(iid - reference) < 1e-2);
  CHECK(integral_nonevent(p, 3.0, {Quadrature::kMonteCarlo, 20, 7}) ==
        integral_nonevent(p, 3.0, {Quadrature::kMonteCarlo, 20, 7}));
}

TEST_CASE("integral: shifted lattice nodes are stratified and keyed by interval") {
  const QuadratureNodes a = quadrature_nodes(3, {Quadrature::kMonteCarlo, 5, 9});
  const QuadratureNodes b = quadrature_nodes(2, {Quadrature::kMonteCarlo, 5, 9}, 1);
  CHECK(a.fractions.bottomRows(2) == b.fractions);
  for (Eigen::Index s = 0; s < 5; ++s) {
    CHECK(a.fractions(0, s) >= s / 5.0);
    CHECK(a.fractions(0, s) < (s + 1) / 5.0);
  }
  CHECK_THROWS_AS(quadrature_nodes(1, {Quadrature::kMonteCarlo, 0, 0}), ConfigError);
}

TEST_CASE("pp-mc: constant intensity matches the Poisson closed form") {
  const double c = 0.7;
  const EventSequence seq = sequence({0.3, 1.0, 1.4, 3.9, 4.2}, {{1}, {1}, {1}, {1}, {1}});
  Graph g(kNoParameters);
  const LossReport r = loss_pp_multiclass(g, seq, poisson_state(g, 5, c), {});
  // The first event is the origin: events 2..L are scored over (t_1, t_L].
  const double expected = 4.0 * std::log(c) - c * (4.2 - 0.3);
  CHECK(r.log_likelihood() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.events == 5);
}

TEST_CASE("pp-mc: a single event contributes nothing") {
  Graph g(kNoParameters);
  const LossReport r = loss_pp_multiclass(g, sequence({2.0}, {{1}}), poisson_state(g, 1, 0.5), {});
  CHECK(r.total.scalar() == 0.0);
  CHECK(r.integral_term == 0.0);
}

TEST_CASE("pp-ml: one mark always present reduces to pp-mc") {
  const EventSequence mc = sequence({0.0, 0.5, 2.0}, {{1}, {1}, {1}});
  EventSequence ml = mc;
  ml.mode = MarkMode::kMultiLabel;
  Graph g(kNoParameters);
  const IntensityState s = constant_state(g, 3, row({0.4}), row({1.2}), row({0.9}), row({1.0}));
  const Integration integ{Quadrature::kTrapezoid, 50, 0};
  CHECK(loss_pp_multilabel(g, ml, s, integ).total.scalar() ==
        doctest::Approx(loss_pp_multiclass(g, mc, s, integ).total.scalar()).epsilon(1e-14));
}

TEST_CASE("pp-ml: two events, two marks against a scalar oracle") {
  const EventSequence seq =
      sequence({0.2, 1.1}, {{1, 1}, {0, 1}}, MarkMode::kMultiLabel);
  const IntensityParams m0{0.3, 1.0, 0.7, 0.8}, m1{-0.2, 0.5, 1.4, 1.3};
  Graph g(kNoParameters);
  const IntensityState s = constant_state(g, 2, row({m0.mu, m1.mu}), row({m0.eta, m1.eta}),
                                          row({m0.gamma, m1.gamma}), row({m0.rate, m1.rate}));
  const Integration integ{Quadrature::kTrapezoid, 64, 0};
  const LossReport r = loss_pp_multilabel(g, seq, s, integ);

  const double span = 0.9;
  const double i0 = integral_nonevent(m0, span, integ), i1 = integral_nonevent(m1, span, integ);
  const double p0 = m0.at(span) * std::exp(-(i0 + i1));
  const double expected = -(std::log(m1.at(span)) - (i0 + i1) + std::log(1.0 - p0));
  CHECK(r.total.scalar() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.complement_term == doctest::Approx(std::log(1.0 - p0)).epsilon(1e-12));
}

TEST_CASE("pp-ml: saturated probability stays finite") {
  const EventSequence seq = sequence({0.0, 1e-9}, {{1, 0}, {1, 0}}, MarkMode::kMultiLabel);
  Graph g(kNoParameters);
  const IntensityState s = constant_state(g, 2, row({50.0, 50.0}), row({50.0, 50.0}),
                                          row({0.0, 0.0}), row({1.0, 1.0}));
  CHECK(std::isfinite(loss_pp_multilabel(g, seq, s, {}).total.scalar()));
}

TEST_CASE("pp-marked: uniform head and a constant ground process") {
  const EventSequence seq =
      sequence({0.5, 1.0, 2.5}, {{1, 0, 0, 0}, {0, 0, 1, 0}, {0, 1, 0, 0}});
  Graph g(kNoParameters);
  const Var logits = g.constant(Matrix::Zero(3, 4));
  const LossReport r = loss_pp_marked(g, seq, logits, poisson_state(g, 3, 0.4), {});
  CHECK(r.mark_term == doctest::Approx(2.0 * std::log(0.25)));
  CHECK(r.event_term - r.integral_term ==
        doctest::Approx(2.0 * std::log(0.4) - 0.4 * 2.0).epsilon(1e-12));

  // Shuffling marks leaves the time terms alone.
  EventSequence shuffled = seq;
  std::swap(shuffled.marks[0], shuffled.marks[2]);
  const LossReport s = loss_pp_marked(g, shuffled, logits, poisson_state(g, 3, 0.4), {});
  CHECK(s.event_term == r.event_term);
  CHECK(s.integral_term == r.integral_term);
}

TEST_CASE("ae: perfect, uniform and multi-label cases") {
  const EventSequence seq = sequence({0.0, 1.0, 2.0}, {{1, 0}, {0, 1}, {1, 0}});
  Graph g(kNoParameters);
  Matrix perfect(3, 2);
  perfect << -1e3, 1e3, 1e3, -1e3, 0, 0;
  CHECK(loss_ae(g, seq, g.constant(perfect)).total.scalar() == doctest::Approx(0.0));
  const LossReport uniform = loss_ae(g, seq, g.constant(Matrix::Zero(3, 2)));
  CHECK(uniform.total.scalar() / 2.0 == doctest::Approx(std::log(2.0)));
  CHECK(std::isnan(uniform.log_likelihood()));

  EventSequence ml = seq;
  ml.mode = MarkMode::kMultiLabel;
  CHECK(loss_ae(g, ml, g.constant(Matrix::Zero(3, 2))).total.scalar() ==
        doctest::Approx(4.0 * std::log(2.0)));
}

TEST_CASE("pp-mc without the integral is the cross-entropy of the intensity shares") {
  const EventSequence seq = sequence({0.1, 0.9, 1.6, 3.0}, {{1, 0, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}});
  Graph g(kNoParameters);
  const IntensityState s = constant_state(g, 4, row({0.1, 0.9, -0.4}), row({1.3, -0.2, 0.6}),
                                          row({0.5, 1.1, 2.0}), row({1.0, 0.6, 1.7}));
  const LossReport pp = loss_pp_multiclass(g, seq, s, {});
  double total_log = 0.0;
  Matrix logits(4, 3);
  for (Eigen::Index j = 0; j + 1 < 4; ++j) {
    const double elapsed = seq.times[j + 1] - seq.times[j];
    double total = 0.0;
    for (int m = 0; m < 3; ++m) {
      logits(j, m) = std::log(s.at(j, m).at(elapsed));
      total += s.at(j, m).at(elapsed);
    }
    total_log += std::log(total);
  }
  logits.row(3).setZero();
  const LossReport ae = loss_ae(g, seq, g.constant(logits));
  CHECK(pp.event_term - total_log == doctest::Approx(ae.mark_term).epsilon(1e-12));
}

TEST_CASE("next-mark scores") {
  // One mark: always predicted.
  {
    Graph g(kNoParameters);
    const EventSequence seq = sequence({0.0, 1.0}, {{1}, {1}});
    const IntensityState s = poisson_state(g, 2, 0.3);
    const Matrix p = predict_next_marks(seq, Objective::kPpMultiClass, &s, nullptr);
    CHECK(p.rows() == 1);
    CHECK(p(0, 0) == doctest::Approx(1.0));
  }
  Matrix lambda(1, 2);
  lambda << 0.2, 0.6;
  const Matrix shares = mark_distribution_from_intensity(lambda);
  CHECK(shares(0, 0) == doctest::Approx(0.25));
  CHECK(shares(0, 1) == doctest::Approx(0.75));

  // Multi-label PP scores are shares too.
  Graph g(kNoParameters);
  const EventSequence ml = sequence({0.0, 1.0}, {{1, 1}, {0, 1}}, MarkMode::kMultiLabel);
  const IntensityState s = constant_state(g, 2, row({0.0, 0.0}), row({0.0, 0.0}),
                                          row({0.0, 0.0}), row({0.2, 0.6}));
  const Matrix p = predict_next_marks(ml, Objective::kPpMultiLabel, &s, nullptr);
  CHECK(p(0, 0) == doctest::Approx(0.25));
  CHECK(p(0, 1) == doctest::Approx(0.75));

  const Var logits = g.constant(Matrix::Zero(2, 2));
  const Matrix ae = predict_next_marks(ml, Objective::kAutoEncoder, nullptr, &logits);
  CHECK(ae(0, 0) == doctest::Approx(0.5));
  CHECK(ae(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("objective names") {
  for (auto o : {Objective::kPpMultiClass, Objective::kPpMultiLabel, Objective::kPpMarked,
                 Objective::kAutoEncoder}) {
    CHECK(parse_objective(to_string(o)) == o);
  }
  CHECK(parse_objective("pp-single") == Objective::kPpMarked);
  CHECK_THROWS_AS(parse_objective("gru"), ConfigError);
  CHECK(has_intensity(Objective::kPpMarked));
  CHECK_FALSE(has_intensity(Objective::kAutoEncoder));
}

TEST_CASE("intensity never drops below the floor") {
  std::mt19937_64 rng(40);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int i = 0; i < 2000; ++i) {
    const IntensityParams p{n(rng), n(rng), std::abs(n(rng)), std::exp(n(rng) / 3.0)};
    CHECK(p.at(std::abs(n(rng))) >= kIntensityFloor);
  }
}

TEST_CASE("shifted-lattice estimator is unbiased over many seeds") {
  const IntensityParams p{0.2, 2.5, 1.3, 1.0};
  const double reference = integral_nonevent(p, 3.0, {Quadrature::kTrapezoid, 100000, 0});
  for (auto scheme : {Quadrature::kMonteCarlo, Quadrature::kIndependent}) {
    std::vector<double> draws;
    for (std::uint64_t s = 0; s < 1000; ++s) draws.push_back(integral_nonevent(p, 3.0, {scheme, 20, s}));
    double mean = 0.0, var = 0.0;
    for (double d : draws) mean += d;
    mean /= 1000.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    var /= 999.0;
    CHECK(std::abs(mean - reference) < 3.0 * std::sqrt(var / 1000.0));
  }
}

TEST_CASE("pp-ml loss is at least pp-mc on a one-hot record") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  const EventSequence mc = sequence({0.1, 0.6, 1.9, 2.3}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 1, 0}});
  EventSequence ml = mc;
  ml.mode = MarkMode::kMultiLabel;
  for (int trial = 0; trial < 50; ++trial) {
    Graph g(kNoParameters);
    auto r = [&]() { return row({n(rng), n(rng), n(rng)}); };
    const IntensityState s = constant_state(g, 4, r(), r(), r().cwiseAbs(), r().array().exp().matrix());
    const Integration integ{Quadrature::kMonteCarlo, 8, static_cast<std::uint64_t>(trial)};
    CHECK(loss_pp_multilabel(g, ml, s, integ).total.scalar() >=
          loss_pp_multiclass(g, mc, s, integ).total.scalar());
  }
}
