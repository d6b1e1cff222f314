#include "ntpp/decoder.hpp"

#include "ntpp/error.hpp"
#include "ntpp/layers.hpp"
#include "ntpp/simulate.hpp"

#include <cmath>
#include <limits>

namespace ntpp {

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::kPpMultiClass: return "pp-mc";
    case Objective::kPpMultiLabel: return "pp-ml";
    case Objective::kPpMarked: return "pp-marked";
    case Objective::kAutoEncoder: return "ae";
  }
  return "?";
}

Objective parse_objective(const std::string& text) {
  if (text == "pp-mc") return Objective::kPpMultiClass;
  if (text == "pp-ml") return Objective::kPpMultiLabel;
  if (text == "pp-marked" || text == "pp-single") return Objective::kPpMarked;
  if (text == "ae") return Objective::kAutoEncoder;
  throw ConfigError("unknown objective '" + text +
                    "' (expected pp-mc, pp-ml, pp-marked or ae)");
}

bool has_intensity(Objective objective) {
  return objective != Objective::kAutoEncoder;
}

double IntensityParams::at(double elapsed) const {
  const double z = mu + (eta - mu) * std::exp(-gamma * elapsed);
  return std::max(rate * softplus_scalar(z), kIntensityFloor);
}

IntensityState IntensityState::slice(Eigen::Index start,
                                     Eigen::Index count) const {
  return {slice_rows(mu, start, count), slice_rows(eta, start, count),
          slice_rows(gamma, start, count),
          rate.valid() ? slice_rows(rate, start, count) : Var{}};
}

IntensityParams IntensityState::at(Eigen::Index row, int mark) const {
  return {mu.value()(row, mark), eta.value()(row, mark),
          gamma.value()(row, mark),
          rate.valid() ? rate.value()(row, mark) : 1.0};
}

QuadratureNodes quadrature_nodes(Eigen::Index intervals,
                                 const Integration& integration,
                                 std::uint64_t first_interval) {
  if (integration.samples < 1) {
    throw ConfigError("integration needs at least one sample");
  }
  const int n = integration.samples;
  QuadratureNodes nodes;
  if (integration.scheme == Quadrature::kTrapezoid) {
    nodes.fractions.resize(intervals, n + 1);
    nodes.weights.resize(intervals, n + 1);
    for (int k = 0; k <= n; ++k) {
      nodes.fractions.col(k).setConstant(static_cast<double>(k) / n);
      const double w = (k == 0 || k == n) ? 0.5 / n : 1.0 / n;
      nodes.weights.col(k).setConstant(w);
    }
    return nodes;
  }
  nodes.fractions.resize(intervals, n);
  nodes.weights = Matrix::Constant(intervals, n, 1.0 / n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index r = 0; r < intervals; ++r) {
    std::mt19937_64 rng(derive_seed(integration.seed,
                                    first_interval + static_cast<std::uint64_t>(r)));
    if (integration.scheme == Quadrature::kIndependent) {
      for (int s = 0; s < n; ++s) nodes.fractions(r, s) = unit(rng);
    } else {
      const double offset = unit(rng);
      for (int s = 0; s < n; ++s) nodes.fractions(r, s) = (s + offset) / n;
    }
  }
  return nodes;
}

double integral_nonevent(const IntensityParams& params, double span,
                         const Integration& integration,
                         std::uint64_t interval) {
  if (!(span > 0.0)) return 0.0;
  const QuadratureNodes nodes = quadrature_nodes(1, integration, interval);
  double acc = 0.0;
  for (Eigen::Index s = 0; s < nodes.fractions.cols(); ++s) {
    acc += nodes.weights(0, s) * params.at(nodes.fractions(0, s) * span);
  }
  return span * acc;
}

void add_decoder_parameters(ParameterStore& store, const std::string& prefix,
                            Eigen::Index state_width, int num_marks,
                            std::mt19937_64& rng) {
  for (const char* part : {".mu", ".eta", ".gamma"}) {
    add_linear(store, prefix + part, prefix, state_width, num_marks, rng);
  }
  store.add(prefix + ".log_rate", prefix, Matrix::Zero(1, num_marks));
}

IntensityState decode_intensity(Graph& g, const std::string& prefix,
                                const Var& states) {
  const Var ones = g.constant(Matrix::Ones(states.rows(), 1));
  return {gelu(linear(g, prefix + ".mu", states)),
          gelu(linear(g, prefix + ".eta", states)),
          gelu(linear(g, prefix + ".gamma", states)),
          matmul(ones, exp(g.param(prefix + ".log_rate")))};
}

Var intensity(const IntensityState& state, const Var& elapsed) {
  const Var decay = exp(neg(mul_col(state.gamma, elapsed)));
  const Var z = add(state.mu, mul(sub(state.eta, state.mu), decay));
  const Var base = state.rate.valid() ? mul(state.rate, softplus(z)) : softplus(z);
  return clamp(base, kIntensityFloor, std::numeric_limits<double>::infinity());
}

namespace {

// Integral of softplus(z) without the rate scale.
Var integrate_unscaled(const IntensityState& state, const Matrix& spans,
                       const QuadratureNodes& nodes) {
  const Matrix& mu = state.mu.value();
  const Matrix& eta = state.eta.value();
  const Matrix& gamma = state.gamma.value();
  const Eigen::Index rows = mu.rows();
  const Eigen::Index marks = mu.cols();
  const Eigen::Index samples = nodes.fractions.cols();
  if (spans.rows() != rows || nodes.fractions.rows() != rows) {
    throw ConfigError("integrate_intensity: interval count mismatch");
  }

  Matrix value = Matrix::Zero(rows, marks);
  Matrix d_mu = Matrix::Zero(rows, marks);
  Matrix d_eta = Matrix::Zero(rows, marks);
  Matrix d_gamma = Matrix::Zero(rows, marks);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double span = spans(r, 0);
    if (!(span > 0.0)) continue;
    for (Eigen::Index m = 0; m < marks; ++m) {
      double v = 0.0, gm = 0.0, ge = 0.0, gg = 0.0;
      for (Eigen::Index s = 0; s < samples; ++s) {
        const double w = nodes.weights(r, s);
        const double elapsed = nodes.fractions(r, s) * span;
        const double decay = std::exp(-gamma(r, m) * elapsed);
        const double z = mu(r, m) + (eta(r, m) - mu(r, m)) * decay;
        const double slope = w * sigmoid_scalar(z);
        v += w * softplus_scalar(z);
        gm += slope * (1.0 - decay);
        ge += slope * decay;
        gg -= slope * (eta(r, m) - mu(r, m)) * decay * elapsed;
      }
      value(r, m) = span * v;
      d_mu(r, m) = span * gm;
      d_eta(r, m) = span * ge;
      d_gamma(r, m) = span * gg;
    }
  }

  const Var mu_v = state.mu, eta_v = state.eta, gamma_v = state.gamma;
  const bool needs = mu_v.requires_grad() || eta_v.requires_grad() ||
                     gamma_v.requires_grad();
  return mu_v.tape()->record(
      std::move(value), needs,
      [mu_v, eta_v, gamma_v, d_mu = std::move(d_mu), d_eta = std::move(d_eta),
       d_gamma = std::move(d_gamma)](Tape& t, const Matrix& adj) {
        if (mu_v.requires_grad()) t.accumulate(mu_v, adj.cwiseProduct(d_mu));
        if (eta_v.requires_grad()) t.accumulate(eta_v, adj.cwiseProduct(d_eta));
        if (gamma_v.requires_grad()) {
          t.accumulate(gamma_v, adj.cwiseProduct(d_gamma));
        }
      });
}

}  // namespace

Var integrate_intensity(const IntensityState& state, const Matrix& spans,
                        const QuadratureNodes& nodes) {
  const Var raw = integrate_unscaled(state, spans, nodes);
  return state.rate.valid() ? mul(state.rate, raw) : raw;
}

double LossReport::log_likelihood() const {
  return likelihood ? -total.scalar() : std::numeric_limits<double>::quiet_NaN();
}

namespace {

void check_sequence(const EventSequence& seq, Eigen::Index state_rows) {
  if (seq.empty()) throw FormatError("loss: empty event sequence");
  if (state_rows != static_cast<Eigen::Index>(seq.size())) {
    throw ConfigError("loss: state rows must equal sequence length");
  }
}

Matrix interval_spans(const EventSequence& seq) {
  const auto n = static_cast<Eigen::Index>(seq.size()) - 1;
  Matrix out(std::max<Eigen::Index>(n, 0), 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, 0) = seq.times[static_cast<std::size_t>(j) + 1] -
                seq.times[static_cast<std::size_t>(j)];
  }
  return out;
}

// Events 2..L against rows 1..L-1.
struct TimeTerms {
  Var lambda_at_events;  // (L-1) x M
  Var event_term;        // scalar, weighted by the targets
  Var integrals;         // (L-1) x M
  Var integral_term;     // scalar
};

TimeTerms time_terms(Graph& g, const EventSequence& seq,
                     const IntensityState& state, const Matrix& targets,
                     const Integration& integration) {
  const Eigen::Index n = static_cast<Eigen::Index>(seq.size()) - 1;
  const Matrix spans = interval_spans(seq);
  const IntensityState rows = state.slice(0, n);
  TimeTerms out;
  out.lambda_at_events = intensity(rows, g.constant(spans));
  out.event_term = sum(mul(g.constant(targets), log(out.lambda_at_events)));
  out.integrals = integrate_intensity(rows, spans, quadrature_nodes(n, integration));
  out.integral_term = sum(out.integrals);
  return out;
}

LossReport empty_report(Graph& g, const EventSequence& seq, bool likelihood) {
  LossReport report;
  report.total = g.constant(Matrix::Zero(1, 1));
  report.events = seq.size();
  report.likelihood = likelihood;
  return report;
}

Matrix next_targets(const EventSequence& seq) {
  return seq.mark_matrix().bottomRows(static_cast<Eigen::Index>(seq.size()) - 1);
}

}  // namespace

LossReport loss_pp_multiclass(Graph& g, const EventSequence& seq,
                              const IntensityState& state,
                              const Integration& integration) {
  check_sequence(seq, state.rows());
  if (seq.size() < 2) return empty_report(g, seq, true);
  const TimeTerms terms = time_terms(g, seq, state, next_targets(seq), integration);
  LossReport report;
  report.total = sub(terms.integral_term, terms.event_term);
  report.event_term = terms.event_term.scalar();
  report.integral_term = terms.integral_term.scalar();
  report.events = seq.size();
  report.likelihood = true;
  return report;
}

LossReport loss_pp_multilabel(Graph& g, const EventSequence& seq,
                              const IntensityState& state,
                              const Integration& integration) {
  check_sequence(seq, state.rows());
  if (seq.size() < 2) return empty_report(g, seq, true);
  const Matrix targets = next_targets(seq);
  const TimeTerms terms = time_terms(g, seq, state, targets, integration);

  // Density of each mark at the event: lambda_m times the survival of the
  // whole process over the preceding interval.
  const Var survival = exp(neg(sum_rows(terms.integrals)));
  const Var p = clamp(mul_col(terms.lambda_at_events, survival), kProbabilityClamp,
                      1.0 - kProbabilityClamp);
  const Matrix absent = Matrix::Ones(targets.rows(), targets.cols()) - targets;
  const Var complement =
      sum(mul(g.constant(absent), log(add_scalar(neg(p), 1.0))));

  LossReport report;
  report.total = neg(add(sub(terms.event_term, terms.integral_term), complement));
  report.event_term = terms.event_term.scalar();
  report.integral_term = terms.integral_term.scalar();
  report.complement_term = complement.scalar();
  report.events = seq.size();
  report.likelihood = true;
  return report;
}

LossReport loss_pp_marked(Graph& g, const EventSequence& seq,
                          const Var& mark_logits, const IntensityState& ground,
                          const Integration& integration) {
  check_sequence(seq, ground.rows());
  if (mark_logits.rows() != ground.rows() || ground.num_marks() != 1) {
    throw ConfigError("loss_pp_marked: head/ground shapes do not match");
  }
  if (seq.size() < 2) return empty_report(g, seq, true);
  const Eigen::Index n = static_cast<Eigen::Index>(seq.size()) - 1;
  const TimeTerms terms =
      time_terms(g, seq, ground, Matrix::Ones(n, 1), integration);
  const Var log_probs = log_softmax_rows(slice_rows(mark_logits, 0, n));
  const Var mark_term = sum(mul(g.constant(next_targets(seq)), log_probs));

  LossReport report;
  report.total =
      neg(add(sub(terms.event_term, terms.integral_term), mark_term));
  report.event_term = terms.event_term.scalar();
  report.integral_term = terms.integral_term.scalar();
  report.mark_term = mark_term.scalar();
  report.events = seq.size();
  report.likelihood = true;
  return report;
}

LossReport loss_ae(Graph& g, const EventSequence& seq, const Var& mark_logits) {
  check_sequence(seq, mark_logits.rows());
  if (seq.size() < 2) return empty_report(g, seq, false);
  const Eigen::Index n = static_cast<Eigen::Index>(seq.size()) - 1;
  const Matrix targets = next_targets(seq);
  const Var logits = slice_rows(mark_logits, 0, n);
  Var mark_term;
  if (seq.mode == MarkMode::kMultiClass) {
    mark_term = sum(mul(g.constant(targets), log_softmax_rows(logits)));
  } else {
    // log sigmoid(x) = -softplus(-x), log(1 - sigmoid(x)) = -softplus(x).
    const Matrix absent = Matrix::Ones(targets.rows(), targets.cols()) - targets;
    mark_term = neg(add(sum(mul(g.constant(targets), softplus(neg(logits)))),
                        sum(mul(g.constant(absent), softplus(logits)))));
  }
  LossReport report;
  report.total = neg(mark_term);
  report.mark_term = mark_term.scalar();
  report.events = seq.size();
  return report;
}

Matrix mark_distribution_from_intensity(const Matrix& lambda) {
  Matrix out = lambda;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double total = out.row(r).sum();
    if (total > 0.0) out.row(r) /= total;
  }
  return out;
}

Matrix predict_next_marks(const EventSequence& seq, Objective objective,
                          const IntensityState* state, const Var* mark_logits) {
  const auto length = static_cast<Eigen::Index>(seq.size());
  const int marks = seq.num_marks();
  if (length < 2) return Matrix(0, marks);
  const Eigen::Index n = length - 1;

  if (objective == Objective::kPpMultiClass ||
      objective == Objective::kPpMultiLabel) {
    if (state == nullptr) throw ConfigError("predict: intensity state required");
    Matrix lambda(n, state->num_marks());
    for (Eigen::Index j = 0; j < n; ++j) {
      const double elapsed = seq.times[static_cast<std::size_t>(j) + 1] -
                             seq.times[static_cast<std::size_t>(j)];
      for (int m = 0; m < state->num_marks(); ++m) {
        lambda(j, m) = state->at(j, m).at(elapsed);
      }
    }
    return mark_distribution_from_intensity(lambda);
  }

  if (mark_logits == nullptr) throw ConfigError("predict: mark head required");
  const Matrix logits = mark_logits->value().topRows(n);
  Matrix out(n, logits.cols());
  const bool softmax =
      objective == Objective::kPpMarked || seq.mode == MarkMode::kMultiClass;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (softmax) {
      const double top = logits.row(j).maxCoeff();
      const Eigen::RowVectorXd e = (logits.row(j).array() - top).exp().matrix();
      out.row(j) = e / e.sum();
    } else {
      for (Eigen::Index m = 0; m < logits.cols(); ++m) {
        out(j, m) = sigmoid_scalar(logits(j, m));
      }
    }
  }
  return out;
}

}  // namespace ntpp
