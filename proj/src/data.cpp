#include "ntpp/data.hpp"

#include "ntpp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ntpp {

std::string to_string(MarkMode mode) {
  return mode == MarkMode::kMultiClass ? "multi-class" : "multi-label";
}

MarkMode parse_mark_mode(const std::string& text) {
  if (text == "multi-class" || text == "mc") {
    return MarkMode::kMultiClass;
  }
  if (text == "multi-label" || text == "ml") {
    return MarkMode::kMultiLabel;
  }
  throw ConfigError("unknown mark mode '" + text +
                    "' (expected multi-class or multi-label)");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Matrix EventSequence::mark_matrix() const {
  const int m = num_marks();
  Matrix out(static_cast<Eigen::Index>(size()), m);
  for (std::size_t j = 0; j < size(); ++j) {
    for (int k = 0; k < m; ++k) {
      out(static_cast<Eigen::Index>(j), k) = marks[j][k];
    }
  }
  return out;
}

int EventSequence::mark_index(std::size_t j) const {
  const auto& row = marks.at(j);
  const auto it = std::find(row.begin(), row.end(), std::uint8_t{1});
  return it == row.end() ? -1 : static_cast<int>(it - row.begin());
}

void validate(const EventSequence& seq, int num_marks) {
  const std::string where = "record '" + seq.id + "'";
  if (seq.times.empty()) {
    throw FormatError(where + ": empty event sequence");
  }
  if (seq.marks.size() != seq.times.size()) {
    throw FormatError(where + ": " + std::to_string(seq.times.size()) +
                      " times but " + std::to_string(seq.marks.size()) +
                      " mark vectors");
  }
  for (std::size_t j = 0; j < seq.times.size(); ++j) {
    if (!std::isfinite(seq.times[j])) {
      throw FormatError(where + ": non-finite time at event " +
                        std::to_string(j + 1));
    }
    if (j > 0 && seq.times[j] < seq.times[j - 1]) {
      throw FormatError(where + ": non-monotonic time at event " +
                        std::to_string(j + 1));
    }
  }
  for (std::size_t j = 0; j < seq.marks.size(); ++j) {
    const auto& row = seq.marks[j];
    if (static_cast<int>(row.size()) != num_marks) {
      throw VocabularyError(where + ": event " + std::to_string(j + 1) +
                            " has a mark vector of length " +
                            std::to_string(row.size()) + ", expected " +
                            std::to_string(num_marks));
    }
    int active = 0;
    for (auto bit : row) {
      if (bit > 1) {
        throw FormatError(where + ": event " + std::to_string(j + 1) +
                          " has a non-binary mark entry");
      }
      active += bit;
    }
    if (seq.mode == MarkMode::kMultiClass && active != 1) {
      throw ModeError(where + ": event " + std::to_string(j + 1) + " has " +
                      std::to_string(active) +
                      " active marks in multi-class mode");
    }
    if (seq.mode == MarkMode::kMultiLabel && active < 1) {
      throw ModeError(where + ": event " + std::to_string(j + 1) +
                      " has no active mark");
    }
  }
}

void validate(const ObservationSet& obs, int num_variables) {
  const std::string where = "record '" + obs.id + "'";
  for (std::size_t p = 0; p < obs.observations.size(); ++p) {
    const Observation& o = obs.observations[p];
    if (!std::isfinite(o.time) || !std::isfinite(o.value)) {
      throw FormatError(where + ": non-finite observation " +
                        std::to_string(p + 1));
    }
    if (p > 0 && o.time < obs.observations[p - 1].time) {
      throw FormatError(where + ": non-monotonic time at observation " +
                        std::to_string(p + 1));
    }
    if (o.variable < 0 || o.variable >= num_variables) {
      throw VocabularyError(where + ": observation " + std::to_string(p + 1) +
                            " has variable " + std::to_string(o.variable) +
                            " outside [0, " + std::to_string(num_variables) +
                            ")");
    }
  }
  if (obs.label && *obs.label != 0 && *obs.label != 1) {
    throw FormatError(where + ": label must be 0, 1 or null");
  }
}

std::vector<const Record*> Dataset::split(Split which) const {
  std::vector<const Record*> out;
  for (const Record& r : records) {
    if (r.split == which) {
      out.push_back(&r);
    }
  }
  return out;
}

std::size_t Dataset::total_events() const {
  std::size_t n = 0;
  for (const Record& r : records) {
    n += r.events.size();
  }
  return n;
}

bool Dataset::has_labels() const {
  return std::any_of(records.begin(), records.end(), [](const Record& r) {
    return r.observations.label.has_value();
  });
}

void validate(const Dataset& data) {
  if (data.num_marks < 1) {
    throw ConfigError("dataset declares no marks");
  }
  for (const Record& r : data.records) {
    if (r.events.mode != data.mode) {
      throw ModeError("record '" + r.events.id +
                      "': mode differs from the dataset mode");
    }
    validate(r.events, data.num_marks);
    validate(r.observations, std::max(data.num_variables, 0));
  }
}

void truncate_events(EventSequence& seq, std::size_t max_events) {
  if (max_events == 0 || seq.size() <= max_events) {
    return;
  }
  const auto drop = static_cast<std::ptrdiff_t>(seq.size() - max_events);
  seq.times.erase(seq.times.begin(), seq.times.begin() + drop);
  seq.marks.erase(seq.marks.begin(), seq.marks.begin() + drop);
}

void assign_splits(Dataset& data, double train_fraction,
                   double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(data.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(order.size());
  const auto n_train = static_cast<std::size_t>(std::round(train_fraction * n));
  const auto n_val =
      static_cast<std::size_t>(std::round(validation_fraction * n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    Split s = Split::kTest;
    if (i < n_train) {
      s = Split::kTrain;
    } else if (i < n_train + n_val) {
      s = Split::kValidation;
    }
    data.records[order[i]].split = s;
  }
}

double HawkesSpec::spectral_radius() const {
  if (alpha.size() == 0) {
    return 0.0;
  }
  Eigen::EigenSolver<Matrix> solver(alpha, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Vector HawkesSpec::stationary_rates() const {
  const Eigen::Index m = mu.size();
  return (Matrix::Identity(m, m) - alpha).lu().solve(mu);
}

void validate(const HawkesSpec& spec) {
  const Eigen::Index m = spec.mu.size();
  if (m < 1) {
    throw ConfigError("hawkes: need at least one event type");
  }
  if (spec.alpha.rows() != m || spec.alpha.cols() != m ||
      spec.beta.rows() != m || spec.beta.cols() != m) {
    throw ConfigError("hawkes: alpha and beta must be " + std::to_string(m) +
                      "x" + std::to_string(m));
  }
  if ((spec.mu.array() < 0.0).any() || !spec.mu.allFinite()) {
    throw ConfigError("hawkes: base rates must be finite and nonnegative");
  }
  if ((spec.alpha.array() < 0.0).any() || !spec.alpha.allFinite()) {
    throw ConfigError("hawkes: branching ratios must be nonnegative");
  }
  if ((spec.beta.array() <= 0.0).any() || !spec.beta.allFinite()) {
    throw ConfigError("hawkes: decay rates must be positive");
  }
  if (!(spec.horizon > 0.0)) {
    throw ConfigError("hawkes: horizon must be positive");
  }
  const double rho = spec.spectral_radius();
  if (!(rho < 1.0)) {
    throw ConfigError("hawkes: spectral radius of alpha is " +
                      std::to_string(rho) + " (stationarity needs < 1)");
  }
}

}  // namespace ntpp
