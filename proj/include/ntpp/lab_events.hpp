#pragma once

// Turning irregular laboratory observations into event sequences.
//
// Observations are grouped into bins of width `bin_width` (floor(t / width));
// the set of variables measured in a bin is a "measurement pattern".

#include "ntpp/data.hpp"

#include <vector>

namespace ntpp {

using VariableSet = std::vector<int>;  // sorted, unique

inline constexpr double kDefaultBinWidth = 1.0;

enum class PatternMatch {
  // A bin maps to the vocabulary entry equal to its variable set, otherwise
  // to the trailing "other" mark. Produces one active mark per event.
  kExactSet,
  // Every vocabulary entry contained in the bin's variable set is active;
  // "other" is active only when nothing matched. With singleton vocabularies
  // this yields per-variable multi-hot marks.
  kContained,
};

struct PatternVocab {
  std::vector<VariableSet> patterns;
  // How many of the requested K patterns could not be filled.
  int shortfall = 0;

  int num_marks() const { return static_cast<int>(patterns.size()) + 1; }
};

// Variable sets of every bin, in bin order.
std::vector<VariableSet> bin_patterns(const ObservationSet& obs,
                                      double bin_width = kDefaultBinWidth);

// K most frequent patterns over the training records, ties broken by the
// lexicographic order of the sorted variable identifiers.
PatternVocab build_pattern_vocab(const Dataset& data, int k,
                                 double bin_width = kDefaultBinWidth);
PatternVocab build_pattern_vocab(const std::vector<const ObservationSet*>& sets,
                                 int k, double bin_width = kDefaultBinWidth);

// One singleton pattern per variable.
PatternVocab singleton_vocab(int num_variables);

// Multi-label sequence over vocab.num_marks() marks; each event is stamped
// with the earliest observation time in its bin. An empty observation set
// yields an empty sequence with `excluded` set.
EventSequence extract_lab_events(const ObservationSet& obs,
                                 const PatternVocab& vocab,
                                 double bin_width = kDefaultBinWidth,
                                 PatternMatch rule = PatternMatch::kExactSet);

}  // namespace ntpp
