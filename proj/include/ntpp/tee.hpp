#pragma once

// Transformer event encoder.
//
// Marks are embedded (E W_emb) and combined with a sinusoidal encoding of
// the raw timestamps, either by concatenation or by summation. The stack is
// pre-norm (LayerNorm -> attention -> residual, LayerNorm -> GELU FFN ->
// residual) followed by a final LayerNorm.
//
// Masking: query j may attend to key k iff k <= j - w. With w >= 1 the
// residual stream of row j starts from the time encoding alone (the mark
// embedding slot is zero), so h_j is a function of events 1..j-w and
// timestamps 1..j only. With w = 0 the standard causal encoder is obtained.

#include "ntpp/data.hpp"
#include "ntpp/params.hpp"

#include <vector>

namespace ntpp {

enum class TimeMode { kConcatenate, kSum };

struct TeeConfig {
  int num_marks = 1;
  int d_emb = 32;
  int d_time = 32;
  double time_scale = 10000.0;
  int n_layers = 2;
  int n_heads = 2;
  TimeMode time_mode = TimeMode::kConcatenate;
  int shift = 1;
  int d_ff = 0;  // 0 means 2 * d_model

  int d_model() const {
    return time_mode == TimeMode::kConcatenate ? d_emb + d_time : d_emb;
  }
  int ffn_width() const { return d_ff > 0 ? d_ff : 2 * d_model(); }
  void validate() const;
};

// Component d (1-indexed) is cos(t / T^((d-1)/D)) for odd d and
// sin(t / T^(d/D)) for even d, with T the time scale and D = d_time.
Vector time_encode(double t, int d_time, double time_scale);
Matrix time_encode(std::span<const double> times, int d_time,
                   double time_scale);

// visible(j, k) is true iff key k is unmasked for query j (0-based k <= j - w).
BoolMatrix build_mask(Eigen::Index length, int shift);

struct EncodedHistory {
  Var hidden;                                   // L x d_model
  std::vector<std::vector<Matrix>> attention;   // [layer][head] L x L
  BoolMatrix visible;

  // Head-averaged attention of one layer (-1 means the last).
  Matrix mean_attention(int layer = -1) const;
};

void add_tee_parameters(ParameterStore& store, const TeeConfig& cfg,
                        std::mt19937_64& rng);

EncodedHistory encode_events(Graph& g, const EventSequence& seq,
                             const TeeConfig& cfg);

}  // namespace ntpp
