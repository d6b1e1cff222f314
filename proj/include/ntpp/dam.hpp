#pragma once

// Deep attention module: a set-function encoder for irregular
// (time, variable, value) observations.
//
// Each observation becomes u_p = [TE(t_p), onehot(k_p), v_p]. For every
// prefix U_p = {u_1..u_p}:
//   f'(U_p)   = g'(mean_{k<=p} h'(u_k))
//   key(p, k) = [f'(U_p), u_k] W^K
//   a(p, k)   = softmax_k(key(p, k) . w_q / sqrt(d_prod))      per head
//   y'_p      = g(concat_heads(sum_k a(p, k) h(u_k)))
// Y' is then sampled at event times (last observation with t_p <= t_j) and
// concatenated with an embedding of the static descriptors.

#include "ntpp/data.hpp"
#include "ntpp/params.hpp"

#include <vector>

namespace ntpp {

struct DamConfig {
  int num_variables = 1;
  int d_time = 16;
  double time_scale = 10000.0;
  int d_hidden = 32;  // hidden width of the h', g', h, g networks
  int d_hprime = 32;
  int d_gprime = 16;
  int d_prod = 16;
  int n_heads = 2;
  int d_h = 32;
  int d_g = 32;
  int num_statics = 0;
  int d_static = 8;

  int d_input() const { return d_time + num_variables + 1; }
  int static_width() const { return num_statics > 0 ? d_static : 0; }
  int d_state() const { return d_g + static_width(); }
  void validate() const;
};

// P x d_input matrix of observation encodings.
Matrix observation_inputs(const ObservationSet& obs, const DamConfig& cfg);

// Static descriptors as [value-or-0, present-flag] pairs (1 x 2S).
Matrix static_inputs(const ObservationSet& obs, const DamConfig& cfg);

// For each event time, the index of the last observation with t_p <= t_j,
// or -1 when none precedes it.
std::vector<int> align_to_events(const ObservationSet& obs,
                                 std::span<const double> event_times);

void add_dam_parameters(ParameterStore& store, const DamConfig& cfg,
                        std::mt19937_64& rng);

// Rows are f'(U_1) .. f'(U_P).
Var set_summary(Graph& g, const DamConfig& cfg, const Var& inputs);

// One P x P row-stochastic lower-triangular matrix per head; row p holds
// a(U_p, u_k) for k <= p.
std::vector<Var> dam_attention(Graph& g, const DamConfig& cfg,
                               const Var& inputs);

struct StateTrack {
  Var per_observation;  // P x d_g (invalid when P == 0)
  Var at_events;        // L x d_state
  std::vector<Matrix> attention;
};

StateTrack encode_observations(Graph& g, const ObservationSet& obs,
                               std::span<const double> event_times,
                               const DamConfig& cfg);

}  // namespace ntpp
