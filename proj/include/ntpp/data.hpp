#pragma once

#include "ntpp/autodiff.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ntpp {

enum class MarkMode { kMultiClass, kMultiLabel };

std::string to_string(MarkMode mode);
MarkMode parse_mark_mode(const std::string& text);

// Timestamps plus binary mark vectors, all of width num_marks.
struct EventSequence {
  std::string id;
  std::vector<double> times;
  std::vector<std::vector<std::uint8_t>> marks;
  MarkMode mode = MarkMode::kMultiClass;
  // Set by extract_lab_events for records with no observations.
  bool excluded = false;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  int num_marks() const {
    return marks.empty() ? 0 : static_cast<int>(marks.front().size());
  }
  // L x M 0/1 matrix.
  Matrix mark_matrix() const;
  // Index of the single active mark (multi-class records).
  int mark_index(std::size_t j) const;
};

// Throws FormatError / ModeError / VocabularyError when the invariants fail.
void validate(const EventSequence& seq, int num_marks);

struct Observation {
  double time = 0.0;
  int variable = 0;  // zero-based, < num_variables
  double value = 0.0;
};

struct ObservationSet {
  std::string id;
  std::vector<Observation> observations;
  // NaN entries denote missing descriptors.
  std::vector<double> statics;
  std::optional<int> label;

  std::size_t size() const { return observations.size(); }
};

void validate(const ObservationSet& obs, int num_variables);

enum class Split { kTrain, kValidation, kTest };

std::string to_string(Split split);

struct Record {
  EventSequence events;
  ObservationSet observations;
  Split split = Split::kTrain;
};

struct Dataset {
  std::vector<Record> records;
  int num_marks = 0;
  int num_variables = 0;
  MarkMode mode = MarkMode::kMultiClass;

  std::vector<const Record*> split(Split which) const;
  std::size_t total_events() const;
  bool has_labels() const;
};

void validate(const Dataset& data);

// Left-truncates sequences longer than `max_events`, keeping the most recent.
void truncate_events(EventSequence& seq, std::size_t max_events);

// Assigns split tags deterministically: the first `train_fraction` share of a
// seeded permutation becomes train, the next `validation_fraction` share
// validation, the rest test.
void assign_splits(Dataset& data, double train_fraction,
                   double validation_fraction, std::uint64_t seed);

// Multivariate Hawkes process with exponential kernels
//   phi_mn(t) = alpha_mn * beta_mn * exp(-beta_mn t).
struct HawkesSpec {
  Vector mu;     // base rates, length M
  Matrix alpha;  // branching ratios, M x M; alpha(m, n): n excites m
  Matrix beta;   // decay rates, M x M
  double horizon = 0.0;

  int num_types() const { return static_cast<int>(mu.size()); }
  double spectral_radius() const;
  // Stationary mean rates (I - alpha)^-1 mu.
  Vector stationary_rates() const;
};

// Throws ConfigError on shape errors, negative rates or non-stationarity.
void validate(const HawkesSpec& spec);

}  // namespace ntpp
