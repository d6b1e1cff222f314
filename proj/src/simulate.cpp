#include "ntpp/simulate.hpp"

#include "ntpp/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace ntpp {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(base), hi(base), lo(a), hi(a), lo(b), hi(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

EventSequence simulate_hawkes(const HawkesSpec& spec, std::uint64_t seed) {
  validate(spec);
  const int m = spec.num_types();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // excitation(i, n): sum over past type-n events of exp(-beta(i, n) * age).
  Matrix excitation = Matrix::Zero(m, m);
  const Matrix weight = spec.alpha.cwiseProduct(spec.beta);
  auto intensities = [&]() -> Vector {
    return spec.mu + weight.cwiseProduct(excitation).rowwise().sum();
  };

  EventSequence seq;
  seq.mode = MarkMode::kMultiClass;
  double t = 0.0;
  while (true) {
    const double bound = intensities().sum();
    if (!(bound > 0.0)) {
      break;
    }
    std::exponential_distribution<double> wait(bound);
    const double dt = wait(rng);
    if (t + dt > spec.horizon) {
      break;
    }
    t += dt;
    excitation = excitation.cwiseProduct((-spec.beta * dt).array().exp().matrix());
    const Vector lambda = intensities();
    const double total = lambda.sum();
    if (uniform(rng) * bound > total) {
      continue;
    }
    std::discrete_distribution<int> pick(lambda.data(), lambda.data() + m);
    const int type = pick(rng);
    excitation.col(type).array() += 1.0;
    std::vector<std::uint8_t> bits(m, 0);
    bits[type] = 1;
    seq.times.push_back(t);
    seq.marks.push_back(std::move(bits));
  }
  return seq;
}

Dataset simulate_hawkes_dataset(const HawkesSpec& spec, int n,
                                std::uint64_t seed) {
  validate(spec);
  if (n < 1) {
    throw ConfigError("need at least one sequence");
  }
  Dataset data;
  data.mode = MarkMode::kMultiClass;
  data.num_marks = spec.num_types();
  std::uint64_t stream = 0;
  while (static_cast<int>(data.records.size()) < n) {
    EventSequence seq = simulate_hawkes(spec, derive_seed(seed, stream++));
    if (seq.empty()) {
      continue;
    }
    seq.id = "seq-" + std::to_string(data.records.size());
    Record r{std::move(seq), ObservationSet{}, Split::kTrain};
    r.observations.id = r.events.id;
    data.records.push_back(std::move(r));
  }
  assign_splits(data, 0.7, 0.15, derive_seed(seed, 0xC0FFEE));
  return data;
}

HawkesSpec poisson_spec(double rate, double horizon) {
  HawkesSpec spec;
  spec.mu = Vector::Constant(1, rate);
  spec.alpha = Matrix::Zero(1, 1);
  spec.beta = Matrix::Ones(1, 1);
  spec.horizon = horizon;
  return spec;
}

namespace {

std::vector<VariableSet> default_panels(int num_variables) {
  std::vector<VariableSet> panels;
  for (int v = 0; v < num_variables; ++v) {
    panels.push_back({v});
  }
  for (int v = 0; v + 2 < num_variables; v += 3) {
    panels.push_back({v, v + 1, v + 2});
  }
  return panels;
}

}  // namespace

EhrSimulation simulate_ehr_like(int n_patients, std::uint64_t seed,
                                const EhrSimulationOptions& options) {
  if (n_patients < 1) {
    throw ConfigError("n_patients must be >= 1");
  }
  if (options.num_variables < 1) {
    throw ConfigError("num_variables must be >= 1");
  }
  if (!(options.min_stay_hours > 0.0) ||
      options.max_stay_hours < options.min_stay_hours) {
    throw ConfigError("invalid stay-length range");
  }
  if (options.positive_fraction < 0.0 || options.positive_fraction > 1.0) {
    throw ConfigError("positive_fraction must lie in [0, 1]");
  }

  EhrSimulation sim;
  sim.panels = default_panels(options.num_variables);
  const auto n_panels = static_cast<Eigen::Index>(sim.panels.size());

  std::mt19937_64 world(derive_seed(seed, 0));
  std::uniform_real_distribution<double> base_rate(0.04, 0.16);
  sim.panel_rates.resize(2, n_panels);
  for (Eigen::Index p = 0; p < n_panels; ++p) {
    const double r = base_rate(world);
    const bool acuity = p % 3 == 0;
    sim.panel_rates(0, p) = r;
    sim.panel_rates(1, p) = r * (acuity ? options.positive_rate_boost
                                        : options.positive_rate_damping);
  }
  Vector value_mean(options.num_variables);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  for (int v = 0; v < options.num_variables; ++v) {
    value_mean(v) = stdnorm(world);
  }

  Dataset& data = sim.data;
  data.mode = MarkMode::kMultiLabel;
  data.num_variables = options.num_variables;
  for (int i = 0; i < n_patients; ++i) {
    std::mt19937_64 rng(derive_seed(seed, 1, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int y = unit(rng) < options.positive_fraction ? 1 : 0;
    const double stay =
        options.min_stay_hours +
        unit(rng) * (options.max_stay_hours - options.min_stay_hours);
    std::gamma_distribution<double> spread(options.heterogeneity_shape,
                                           1.0 / options.heterogeneity_shape);

    ObservationSet obs;
    obs.id = "patient-" + std::to_string(i);
    obs.label = y;
    auto order_panel = [&](Eigen::Index p, double t) {
      for (int v : sim.panels[static_cast<std::size_t>(p)]) {
        obs.observations.push_back(
            Observation{t, v, value_mean(v) + 0.5 * y + stdnorm(rng)});
      }
    };
    std::uniform_int_distribution<Eigen::Index> any_panel(0, n_panels - 1);
    order_panel(any_panel(rng), 0.0);
    for (Eigen::Index p = 0; p < n_panels; ++p) {
      const double rate = sim.panel_rates(y, p) * spread(rng);
      std::poisson_distribution<int> count(rate * stay);
      const int n = count(rng);
      for (int k = 0; k < n; ++k) {
        order_panel(p, unit(rng) * stay);
      }
    }
    std::stable_sort(obs.observations.begin(), obs.observations.end(),
                     [](const Observation& a, const Observation& b) {
                       return a.time < b.time;
                     });
    std::normal_distribution<double> age(60.0 + 8.0 * y, 12.0);
    obs.statics = {age(rng), unit(rng) < 0.5 ? 0.0 : 1.0};
    for (double& s : obs.statics) {
      if (unit(rng) < options.missing_static_probability) {
        s = std::numeric_limits<double>::quiet_NaN();
      }
    }
    Record r;
    r.observations = std::move(obs);
    r.events.id = r.observations.id;
    r.events.mode = MarkMode::kMultiLabel;
    data.records.push_back(std::move(r));
  }
  if (n_patients == 1) {
    data.records.front().split = Split::kTrain;
  } else {
    assign_splits(data, 0.7, 0.15, derive_seed(seed, 2));
  }

  sim.vocab = build_pattern_vocab(data, options.pattern_vocab_size,
                                  options.bin_width);
  data.num_marks = sim.vocab.num_marks();
  for (Record& r : data.records) {
    r.events = extract_lab_events(r.observations, sim.vocab, options.bin_width);
  }
  return sim;
}

}  // namespace ntpp
