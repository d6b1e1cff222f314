#pragma once

#include "ntpp/data.hpp"
#include "ntpp/lab_events.hpp"

#include <cstdint>

namespace ntpp {

// Mixes a base seed with stream indices into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b = 0);

// Exact sample of a multivariate Hawkes process on [0, horizon] by Ogata
// thinning. May return an empty sequence when nothing fires.
EventSequence simulate_hawkes(const HawkesSpec& spec, std::uint64_t seed);

// n sequences (empty draws are redrawn with the next stream index), split
// 70/15/15 into train/validation/test.
Dataset simulate_hawkes_dataset(const HawkesSpec& spec, int n,
                                std::uint64_t seed);

// Homogeneous Poisson convenience wrapper (one type, alpha = 0).
HawkesSpec poisson_spec(double rate, double horizon);

struct EhrSimulationOptions {
  int num_variables = 8;
  double positive_fraction = 0.3;
  double min_stay_hours = 24.0;
  double max_stay_hours = 72.0;
  int pattern_vocab_size = 10;
  double bin_width = kDefaultBinWidth;
  // Multiplier on panel ordering rates for positive patients on the
  // "acuity" panels and its reciprocal-ish damping on the rest.
  double positive_rate_boost = 3.0;
  double positive_rate_damping = 0.6;
  // Gamma shape of per-patient, per-panel rate heterogeneity (mean 1).
  double heterogeneity_shape = 4.0;
  double missing_static_probability = 0.1;
};

struct EhrSimulation {
  Dataset data;  // multi-label pattern events + observations + labels
  PatternVocab vocab;
  std::vector<VariableSet> panels;
  Matrix panel_rates;  // 2 x panels: row 0 negative class, row 1 positive
};

// Stand-in for an ICU corpus: two latent outcome classes whose lab panels
// are ordered at different rates, Gaussian values, two statics (age,
// gender). Every stay gets an admission panel at t = 0.
EhrSimulation simulate_ehr_like(int n_patients, std::uint64_t seed,
                                const EhrSimulationOptions& options = {});

}  // namespace ntpp
