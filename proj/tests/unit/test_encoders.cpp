#include "helpers.hpp"

#include "ntpp/dam.hpp"
#include "ntpp/error.hpp"
#include "ntpp/tee.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ntpp;
using ntpp::testing::sequence;

namespace {

// ---- scalar references, loop by loop ----

Matrix ref_linear(const ParameterStore& s, const std::string& p, const Matrix& x) {
  Matrix out(x.rows(), s.value(p + ".w").cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index o = 0; o < out.cols(); ++o) {
      double acc = s.value(p + ".b")(0, o);
      for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * s.value(p + ".w")(k, o);
      out(i, o) = acc;
    }
  }
  return out;
}

Matrix ref_gelu(Matrix x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    x.data()[i] = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  }
  return x;
}

Matrix ref_mlp(const ParameterStore& s, const std::string& p, const Matrix& x) {
  return ref_linear(s, p + ".1", ref_gelu(ref_linear(s, p + ".0", x)));
}

Matrix ref_layer_norm(const ParameterStore& s, const std::string& p, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (Eigen::Index k = 0; k < x.cols(); ++k) mean += x(i, k);
    mean /= static_cast<double>(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) var += (x(i, k) - mean) * (x(i, k) - mean);
    var /= static_cast<double>(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      out(i, k) = (x(i, k) - mean) / std::sqrt(var + 1e-5) * s.value(p + ".gain")(0, k) +
                  s.value(p + ".bias")(0, k);
    }
  }
  return out;
}

TeeConfig one_head(int shift) {
  TeeConfig cfg;
  cfg.num_marks = 2;
  cfg.d_emb = 2;
  cfg.d_time = 2;
  cfg.time_scale = 10.0;
  cfg.n_layers = 1;
  cfg.n_heads = 1;
  cfg.shift = shift;
  return cfg;
}

}  // namespace

TEST_CASE("time encoding: zero time and the scalar formula") {
  const Vector zero = time_encode(0.0, 6, 10000.0);
  for (int d = 0; d < 6; ++d) CHECK(zero(d) == (d % 2 == 0 ? 1.0 : 0.0));

  const double scale = 10000.0, t = scale * 2.0 * M_PI;
  const Vector two = time_encode(t, 2, scale);
  CHECK(two(0) == doctest::Approx(std::cos(t)));
  CHECK(two(1) == doctest::Approx(std::sin(t / scale)));

  const Vector eight = time_encode(3.7, 8, 50.0);
  for (int d = 1; d <= 8; ++d) {
    const double expected = d % 2 == 1 ? std::cos(3.7 / std::pow(50.0, (d - 1) / 8.0))
                                       : std::sin(3.7 / std::pow(50.0, d / 8.0));
    CHECK(eight(d - 1) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("time encoding: distinct times differ") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng);
    if (a == b) continue;
    CHECK((time_encode(a, 8, 10000.0) - time_encode(b, 8, 10000.0)).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("mask: shift 0, shift 1 and over-shift") {
  const BoolMatrix w0 = build_mask(3, 0);
  const BoolMatrix w1 = build_mask(3, 1);
  BoolMatrix expect0(3, 3), expect1(3, 3);
  expect0 << 1, 0, 0, 1, 1, 0, 1, 1, 1;
  expect1 << 0, 0, 0, 1, 0, 0, 1, 1, 0;
  CHECK(w0 == expect0);
  CHECK(w1 == expect1);
  CHECK_FALSE(build_mask(2, 5).any());
}

TEST_CASE("tee: config validation") {
  TeeConfig cfg;
  cfg.d_time = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TeeConfig{};
  cfg.time_mode = TimeMode::kSum;
  cfg.d_time = 16;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TeeConfig{};
  cfg.n_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("tee: one layer, one head, two events against a scalar reference") {
  for (int shift : {0, 1}) {
    CAPTURE(shift);
    const TeeConfig cfg = one_head(shift);
    ParameterStore store;
    std::mt19937_64 rng(8);
    add_tee_parameters(store, cfg, rng);
    // Non-trivial norms and biases.
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& [name, p] : store.items()) {
      if (name.find(".gain") != std::string::npos || name.find(".bias") != std::string::npos ||
          name.find(".b") != std::string::npos) {
        for (Eigen::Index e = 0; e < p.value.size(); ++e) p.value.data()[e] += n(rng);
      }
    }
    const EventSequence seq = sequence({0.5, 1.75}, {{0, 1}, {1, 0}});

    Graph g(store);
    const EncodedHistory enc = encode_events(g, seq, cfg);

    Matrix full(2, 4), query(2, 4);
    const Matrix te = time_encode(seq.times, 2, 10.0);
    for (int j = 0; j < 2; ++j) {
      for (int d = 0; d < 2; ++d) {
        full(j, d) = store.value("tee.emb")(seq.mark_index(j), d);
        full(j, 2 + d) = te(j, d);
        query(j, d) = shift == 0 ? full(j, d) : 0.0;
        query(j, 2 + d) = te(j, d);
      }
    }
    const Matrix qn = ref_layer_norm(store, "tee.l0.ln1", query);
    const Matrix kvn = ref_layer_norm(store, "tee.l0.ln1", full);
    const Matrix q = ref_linear(store, "tee.l0.q", qn);
    const Matrix k = ref_linear(store, "tee.l0.k", kvn);
    const Matrix v = ref_linear(store, "tee.l0.v", kvn);
    Matrix attn = Matrix::Zero(2, 2), mixed = Matrix::Zero(2, 4);
    for (int j = 0; j < 2; ++j) {
      double norm = 0.0;
      std::vector<double> w(2, 0.0);
      for (int key = 0; key <= j - shift; ++key) {
        w[key] = std::exp(q.row(j).dot(k.row(key)) / 2.0);
        norm += w[key];
      }
      for (int key = 0; key <= j - shift; ++key) {
        attn(j, key) = w[key] / norm;
        mixed.row(j) += attn(j, key) * v.row(key);
      }
    }
    const Matrix z = query + mixed * store.value("tee.l0.o.w");
    const Matrix out = z + ref_mlp(store, "tee.l0.ffn", ref_layer_norm(store, "tee.l0.ln2", z));
    const Matrix expected = ref_layer_norm(store, "tee.ln_f", out);

    CHECK((enc.attention[0][0] - attn).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((enc.hidden.value() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("tee: masked marks leave the state bit-identical") {
  TeeConfig cfg = one_head(2);
  cfg.n_layers = 2;
  cfg.num_marks = 3;
  ParameterStore store;
  std::mt19937_64 rng(5);
  add_tee_parameters(store, cfg, rng);
  const EventSequence base =
      sequence({0.1, 0.4, 1.0, 1.2, 2.0}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}});
  Graph g0(store);
  const Matrix h0 = encode_events(g0, base, cfg).hidden.value();
  for (std::size_t k = 0; k < base.size(); ++k) {
    EventSequence changed = base;
    changed.marks[k] = {0, 0, 1};
    if (base.marks[k] == changed.marks[k]) changed.marks[k] = {1, 0, 0};
    Graph g(store);
    const Matrix h = encode_events(g, changed, cfg).hidden.value();
    // Rows j with k > j - w cannot see event k.
    for (std::size_t j = 0; j < base.size(); ++j) {
      if (static_cast<long>(k) > static_cast<long>(j) - 2) {
        CHECK(h.row(static_cast<Eigen::Index>(j)) == h0.row(static_cast<Eigen::Index>(j)));
      }
    }
  }
}

TEST_CASE("tee: one event with shift 1 depends on its time only") {
  const TeeConfig cfg = one_head(1);
  ParameterStore store;
  std::mt19937_64 rng(6);
  add_tee_parameters(store, cfg, rng);
  Graph g1(store), g2(store);
  const EncodedHistory a = encode_events(g1, sequence({0.7}, {{1, 0}}), cfg);
  const EncodedHistory b = encode_events(g2, sequence({0.7}, {{0, 1}}), cfg);
  CHECK(a.hidden.value() == b.hidden.value());
  CHECK(a.attention[0][0].isZero());
}

TEST_CASE("tee: mismatched mark count") {
  const TeeConfig cfg = one_head(1);
  ParameterStore store;
  std::mt19937_64 rng(6);
  add_tee_parameters(store, cfg, rng);
  Graph g(store);
  CHECK_THROWS_AS(encode_events(g, sequence({0.0}, {{1, 0, 0}}), cfg), ConfigError);
}

// ---- DAM ----

namespace {

DamConfig small_dam() {
  DamConfig cfg;
  cfg.num_variables = 2;
  cfg.d_time = 4;
  cfg.d_hidden = 5;
  cfg.d_hprime = 4;
  cfg.d_gprime = 3;
  cfg.d_prod = 3;
  cfg.n_heads = 2;
  cfg.d_h = 4;
  cfg.d_g = 4;
  return cfg;
}

ObservationSet three_observations() {
  ObservationSet obs;
  obs.observations = {{0.5, 0, 1.2}, {1.0, 1, -0.4}, {2.0, 0, 0.8}};
  return obs;
}

}  // namespace

TEST_CASE("dam: set summary is a running mean then transform") {
  const DamConfig cfg = small_dam();
  ParameterStore store;
  std::mt19937_64 rng(9);
  add_dam_parameters(store, cfg, rng);
  const Matrix u = observation_inputs(three_observations(), cfg);
  Graph g(store);
  const Matrix summary = set_summary(g, cfg, g.constant(u)).value();
  const Matrix h = ref_mlp(store, "dam.hprime", u);
  for (int p = 0; p < 3; ++p) {
    const Matrix mean = h.topRows(p + 1).colwise().mean();
    const Matrix expected = ref_mlp(store, "dam.gprime", mean);
    CHECK((summary.row(p) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  // Duplicates do not move the mean.
  Matrix dup(3, u.cols());
  dup << u.row(0), u.row(0), u.row(0);
  Graph g2(store);
  const Matrix s2 = set_summary(g2, cfg, g2.constant(dup)).value();
  CHECK((s2.row(2) - s2.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dam: attention weights match a scalar softmax") {
  const DamConfig cfg = small_dam();
  ParameterStore store;
  std::mt19937_64 rng(10);
  add_dam_parameters(store, cfg, rng);
  const Matrix u = observation_inputs(three_observations(), cfg);
  Graph g(store);
  const auto attn = dam_attention(g, cfg, g.constant(u));
  const Matrix summary = set_summary(g, cfg, g.constant(u)).value();
  const Matrix& key = store.value("dam.key");
  const Matrix& query = store.value("dam.query");
  for (int h = 0; h < cfg.n_heads; ++h) {
    CHECK(attn[h].value()(0, 0) == doctest::Approx(1.0));
    for (int p = 0; p < 3; ++p) {
      std::vector<double> scores;
      for (int k = 0; k <= p; ++k) {
        Matrix joined(1, cfg.d_gprime + cfg.d_input());
        joined << summary.row(p), u.row(k);
        scores.push_back((joined * key * query.col(h))(0, 0) / std::sqrt(3.0));
      }
      double norm = 0.0;
      for (double s : scores) norm += std::exp(s);
      double total = 0.0;
      for (int k = 0; k <= p; ++k) {
        CHECK(attn[h].value()(p, k) == doctest::Approx(std::exp(scores[k]) / norm));
        total += attn[h].value()(p, k);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("dam: equal keys share attention evenly") {
  const DamConfig cfg = small_dam();
  ParameterStore store;
  std::mt19937_64 rng(11);
  add_dam_parameters(store, cfg, rng);
  ObservationSet obs;
  obs.observations = {{1.0, 0, 0.5}, {1.0, 0, 0.5}};
  Graph g(store);
  const auto attn = dam_attention(g, cfg, g.constant(observation_inputs(obs, cfg)));
  CHECK(attn[0].value()(1, 0) == doctest::Approx(0.5));
  CHECK(attn[0].value()(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("dam: states are sampled at the last observation before each event") {
  ObservationSet obs;
  obs.observations = {{1.0, 0, 0.1}, {2.0, 1, 0.2}};
  const std::vector<double> events = {0.5, 1.5, 3.0};
  CHECK(align_to_events(obs, events) == std::vector<int>{-1, 0, 1});

  const DamConfig cfg = small_dam();
  ParameterStore store;
  std::mt19937_64 rng(12);
  add_dam_parameters(store, cfg, rng);
  Graph g(store);
  const StateTrack track = encode_observations(g, obs, events, cfg);
  CHECK(track.at_events.value().row(0).isZero());
  CHECK(track.at_events.value().row(1) == track.per_observation.value().row(0));
  CHECK(track.at_events.value().row(2) == track.per_observation.value().row(1));
}

TEST_CASE("dam: end to end against the composed reference") {
  DamConfig cfg = small_dam();
  cfg.num_statics = 2;
  cfg.d_static = 3;
  ParameterStore store;
  std::mt19937_64 rng(13);
  add_dam_parameters(store, cfg, rng);
  ObservationSet obs = three_observations();
  obs.statics = {64.0, std::nan("")};
  const std::vector<double> events = {2.5};
  Graph g(store);
  const Matrix got = encode_observations(g, obs, events, cfg).at_events.value();

  const Matrix u = observation_inputs(obs, cfg);
  const Matrix values = ref_mlp(store, "dam.h", u);
  Graph g2(store);
  const auto attn = dam_attention(g2, cfg, g2.constant(u));
  Matrix heads(1, cfg.n_heads * cfg.d_h);
  for (int h = 0; h < cfg.n_heads; ++h) {
    Matrix mixed = Matrix::Zero(1, cfg.d_h);
    for (int k = 0; k < 3; ++k) mixed += attn[h].value()(2, k) * values.row(k);
    heads.block(0, h * cfg.d_h, 1, cfg.d_h) = mixed;
  }
  Matrix statics(1, 4);
  statics << 64.0, 1.0, 0.0, 0.0;
  Matrix expected(1, cfg.d_state());
  expected << ref_mlp(store, "dam.g", heads), ref_mlp(store, "dam.static", statics);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dam: no observations gives zero dynamic state") {
  const DamConfig cfg = small_dam();
  ParameterStore store;
  std::mt19937_64 rng(14);
  add_dam_parameters(store, cfg, rng);
  Graph g(store);
  const std::vector<double> events = {0.0, 1.0};
  const StateTrack track = encode_observations(g, ObservationSet{}, events, cfg);
  CHECK(track.at_events.value().isZero());
}

TEST_CASE("tee: future timestamps never reach earlier rows; attention rows sum to one") {
  TeeConfig cfg = one_head(1);
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  ParameterStore store;
  std::mt19937_64 rng(15);
  add_tee_parameters(store, cfg, rng);
  const EventSequence base = sequence({0.2, 0.9, 1.4, 2.2}, {{1, 0}, {0, 1}, {0, 1}, {1, 0}});
  Graph g0(store);
  const EncodedHistory e0 = encode_events(g0, base, cfg);
  for (const auto& layer : e0.attention) {
    for (const Matrix& a : layer) {
      for (Eigen::Index j = 1; j < a.rows(); ++j) CHECK(a.row(j).sum() == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
  for (std::size_t k = 1; k < base.size(); ++k) {
    EventSequence later = base;
    for (std::size_t i = k; i < later.size(); ++i) later.times[i] += 0.37;
    Graph g(store);
    const Matrix h = encode_events(g, later, cfg).hidden.value();
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(h.row(static_cast<Eigen::Index>(j)) == e0.hidden.value().row(static_cast<Eigen::Index>(j)));
    }
  }
}

TEST_CASE("dam: event states ignore later observations") {
  const DamConfig cfg = small_dam();
  ParameterStore store;
  std::mt19937_64 rng(16);
  add_dam_parameters(store, cfg, rng);
  ObservationSet obs;
  obs.observations = {{0.5, 0, 1.0}, {1.2, 1, -0.3}, {2.5, 0, 0.4}, {3.0, 1, 2.0}};
  const std::vector<double> events = {1.0, 2.0, 3.5};
  Graph g0(store);
  const Matrix base = encode_observations(g0, obs, events, cfg).at_events.value();
  ObservationSet changed = obs;
  changed.observations[2].value = -5.0;
  changed.observations[3].variable = 0;
  Graph g1(store);
  const Matrix after = encode_observations(g1, changed, events, cfg).at_events.value();
  CHECK(after.row(0) == base.row(0));
  CHECK(after.row(1) == base.row(1));
  CHECK(after.row(2) != base.row(2));
}

TEST_CASE("dam: a complete prefix does not depend on the order of tied observations") {
  const DamConfig cfg = small_dam();
  ParameterStore store;
  std::mt19937_64 rng(17);
  add_dam_parameters(store, cfg, rng);
  ObservationSet a, b;
  a.observations = {{0.5, 1, 0.2}, {1.0, 0, 1.5}, {1.0, 1, -0.7}};
  b.observations = {{0.5, 1, 0.2}, {1.0, 1, -0.7}, {1.0, 0, 1.5}};
  const std::vector<double> events = {1.0};
  Graph ga(store), gb(store);
  const Matrix ya = encode_observations(ga, a, events, cfg).at_events.value();
  const Matrix yb = encode_observations(gb, b, events, cfg).at_events.value();
  CHECK((ya - yb).cwiseAbs().maxCoeff() < 1e-12);
}
