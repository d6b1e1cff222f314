#include "ntpp/lab_events.hpp"

#include "ntpp/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ntpp {

namespace {

struct Bin {
  double first_time = 0.0;
  VariableSet variables;
};

std::vector<Bin> make_bins(const ObservationSet& obs, double bin_width) {
  if (!(bin_width > 0.0)) {
    throw ConfigError("bin width must be positive");
  }
  std::map<long long, Bin> bins;
  for (const Observation& o : obs.observations) {
    const auto key = static_cast<long long>(std::floor(o.time / bin_width));
    auto [it, inserted] = bins.try_emplace(key, Bin{o.time, {}});
    Bin& bin = it->second;
    bin.first_time = std::min(bin.first_time, o.time);
    bin.variables.push_back(o.variable);
  }
  std::vector<Bin> out;
  out.reserve(bins.size());
  for (auto& [key, bin] : bins) {
    std::sort(bin.variables.begin(), bin.variables.end());
    bin.variables.erase(std::unique(bin.variables.begin(), bin.variables.end()),
                        bin.variables.end());
    out.push_back(std::move(bin));
  }
  return out;
}

}  // namespace

std::vector<VariableSet> bin_patterns(const ObservationSet& obs,
                                      double bin_width) {
  std::vector<VariableSet> out;
  for (Bin& b : make_bins(obs, bin_width)) {
    out.push_back(std::move(b.variables));
  }
  return out;
}

PatternVocab build_pattern_vocab(const std::vector<const ObservationSet*>& sets,
                                 int k, double bin_width) {
  if (k < 1) {
    throw ConfigError("pattern vocabulary size must be >= 1");
  }
  std::map<VariableSet, long long> counts;
  for (const ObservationSet* s : sets) {
    for (VariableSet& p : bin_patterns(*s, bin_width)) {
      ++counts[std::move(p)];
    }
  }
  std::vector<std::pair<VariableSet, long long>> ranked(counts.begin(),
                                                        counts.end());
  // std::map iteration is already lexicographic, so a stable sort on count
  // keeps the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  PatternVocab vocab;
  for (const auto& [pattern, count] : ranked) {
    if (static_cast<int>(vocab.patterns.size()) == k) {
      break;
    }
    vocab.patterns.push_back(pattern);
  }
  vocab.shortfall = k - static_cast<int>(vocab.patterns.size());
  return vocab;
}

PatternVocab build_pattern_vocab(const Dataset& data, int k, double bin_width) {
  std::vector<const ObservationSet*> sets;
  for (const Record& r : data.records) {
    if (r.split == Split::kTrain) {
      sets.push_back(&r.observations);
    }
  }
  return build_pattern_vocab(sets, k, bin_width);
}

PatternVocab singleton_vocab(int num_variables) {
  PatternVocab vocab;
  for (int v = 0; v < num_variables; ++v) {
    vocab.patterns.push_back({v});
  }
  return vocab;
}

EventSequence extract_lab_events(const ObservationSet& obs,
                                 const PatternVocab& vocab, double bin_width,
                                 PatternMatch rule) {
  if (vocab.patterns.empty()) {
    throw ConfigError("pattern vocabulary is empty");
  }
  EventSequence seq;
  seq.id = obs.id;
  seq.mode = MarkMode::kMultiLabel;
  if (obs.observations.empty()) {
    seq.excluded = true;
    return seq;
  }
  const int m = vocab.num_marks();
  const int other = m - 1;
  for (const Bin& bin : make_bins(obs, bin_width)) {
    std::vector<std::uint8_t> bits(m, 0);
    bool matched = false;
    for (int i = 0; i < other; ++i) {
      const VariableSet& p = vocab.patterns[i];
      const bool hit =
          rule == PatternMatch::kExactSet
              ? p == bin.variables
              : std::includes(bin.variables.begin(), bin.variables.end(),
                              p.begin(), p.end());
      if (hit) {
        bits[i] = 1;
        matched = true;
        if (rule == PatternMatch::kExactSet) {
          break;
        }
      }
    }
    if (!matched) {
      bits[other] = 1;
    }
    seq.times.push_back(bin.first_time);
    seq.marks.push_back(std::move(bits));
  }
  return seq;
}

}  // namespace ntpp
