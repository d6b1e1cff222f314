#pragma once

// Conditional intensity decoder and point-process objectives.
//
// A state row s (the history after some event at time t0) is mapped to
//   mu = gelu(s W_mu + b_mu), eta = gelu(s W_eta + b_eta),
//   gamma = gelu(s W_gamma + b_gamma)
// and defines, for t > t0,
//   lambda_m(t) = r_m softplus(mu_m + (eta_m - mu_m) exp(-gamma_m (t - t0))).
// r_m = exp(log_rate_m) is a learned per-mark rate scale. Without it the
// intensity could not fall below softplus(min gelu) ~ 0.61 per time unit.
//
// Row layout used by every objective: a state matrix with L rows, row j
// (1-based) the history after event j. Row j integrates the interval
// (t_j, t_{j+1}] and scores event j + 1 at elapsed time t_{j+1} - t_j. The
// first event is the conditioning origin and carries no term of its own.

#include "ntpp/data.hpp"
#include "ntpp/params.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace ntpp {

inline constexpr double kIntensityFloor = 1e-9;
inline constexpr double kProbabilityClamp = 1e-6;
inline constexpr int kTrainingSamples = 20;
inline constexpr int kEvaluationSamples = 200;

enum class Objective { kPpMultiClass, kPpMultiLabel, kPpMarked, kAutoEncoder };

std::string to_string(Objective objective);
Objective parse_objective(const std::string& text);
bool has_intensity(Objective objective);

// Scalar view of one mark on one interval.
struct IntensityParams {
  double mu = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double rate = 1.0;

  double at(double elapsed) const;
};

struct IntensityState {
  Var mu;
  Var eta;
  Var gamma;
  Var rate;  // rows x marks; unset means 1

  Eigen::Index rows() const { return mu.rows(); }
  int num_marks() const { return static_cast<int>(mu.cols()); }
  IntensityState slice(Eigen::Index start, Eigen::Index count) const;
  IntensityParams at(Eigen::Index row, int mark) const;
};

// kMonteCarlo draws one random offset u per interval and uses the nodes
// (s + u) / n, s = 0..n-1: every node is uniform on the interval, so the
// estimate is unbiased, with far lower variance than independent draws
// (kIndependent). kTrapezoid uses n + 1 equally spaced nodes.
enum class Quadrature { kMonteCarlo, kIndependent, kTrapezoid };

struct Integration {
  Quadrature scheme = Quadrature::kMonteCarlo;
  int samples = kTrainingSamples;  // random nodes, or trapezoid panels
  std::uint64_t seed = 0;
};

// Nodes as fractions of each interval plus their weights. Random rows draw
// from a stream keyed by (seed, first_interval + row), so a given interval
// sees the same points regardless of batching.
struct QuadratureNodes {
  Matrix fractions;
  Matrix weights;
};
QuadratureNodes quadrature_nodes(Eigen::Index intervals,
                                 const Integration& integration,
                                 std::uint64_t first_interval = 0);

// Estimate of the integral of lambda over an interval of length `span`.
// Degenerate (span <= 0) intervals contribute zero.
double integral_nonevent(const IntensityParams& params, double span,
                         const Integration& integration,
                         std::uint64_t interval = 0);

// Adds <prefix>.mu/.eta/.gamma linear maps and <prefix>.log_rate (1 x M,
// zero) under group `prefix`.
void add_decoder_parameters(ParameterStore& store, const std::string& prefix,
                            Eigen::Index state_width, int num_marks,
                            std::mt19937_64& rng);

IntensityState decode_intensity(Graph& g, const std::string& prefix,
                                const Var& states);

// lambda at `elapsed` (rows x 1) time after each row's origin, floored at
// kIntensityFloor.
Var intensity(const IntensityState& state, const Var& elapsed);

// Integral of lambda over each row's interval: rows x marks.
Var integrate_intensity(const IntensityState& state, const Matrix& spans,
                        const QuadratureNodes& nodes);

struct LossReport {
  Var total;  // negative log-likelihood (or cross-entropy) to minimise
  double event_term = 0.0;
  double integral_term = 0.0;
  double complement_term = 0.0;
  double mark_term = 0.0;
  std::size_t events = 0;
  bool likelihood = false;
  // Log-likelihood for the PP objectives; NaN for the auto-encoder.
  double log_likelihood() const;
};

// `state` has L rows (see the row layout above). Sequences of one event
// contribute zero.
LossReport loss_pp_multiclass(Graph& g, const EventSequence& seq,
                              const IntensityState& state,
                              const Integration& integration);
LossReport loss_pp_multilabel(Graph& g, const EventSequence& seq,
                              const IntensityState& state,
                              const Integration& integration);
// `mark_logits` (L x M) come from the mark head on the same rows; `ground`
// is a one-mark intensity state.
LossReport loss_pp_marked(Graph& g, const EventSequence& seq,
                          const Var& mark_logits, const IntensityState& ground,
                          const Integration& integration);
LossReport loss_ae(Graph& g, const EventSequence& seq, const Var& mark_logits);

// Next-mark scores for events 2..L ((L - 1) x M). PP objectives use the
// share lambda_m(t_{j+1}) / sum_n lambda_n(t_{j+1}) from row j, in both mark
// modes: raw intensities mostly rank rows by overall activity. Head-based
// objectives use softmax (multi-class, marked) or sigmoid (multi-label AE)
// of the logits on row j.
Matrix predict_next_marks(const EventSequence& seq, Objective objective,
                          const IntensityState* state, const Var* mark_logits);

// Mark distribution implied by intensities: lambda_m / sum_n lambda_n.
Matrix mark_distribution_from_intensity(const Matrix& lambda);

}  // namespace ntpp
