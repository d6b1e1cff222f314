#pragma once

// Canonical line-delimited record files.
//
// Event file, one JSON object per line:
//   {"id":"r1","times":[0.0,1.5],"marks":[[1,0],[0,1]],"split":"train"}
// Observation file, one JSON object per line:
//   {"id":"r1","obs":[[0.5,3,1.2]],"statics":[61.0,null],"label":1}
// Variable indices in "obs" are zero-based. Missing statics are null.
// Lines starting with '#' are comments (writers put provenance there).

#include "ntpp/data.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ntpp {

inline constexpr std::size_t kDefaultMaxEvents = 512;

struct EventFileOptions {
  MarkMode mode = MarkMode::kMultiClass;
  // Inferred from the first record when unset.
  std::optional<int> num_marks;
  std::size_t max_events = kDefaultMaxEvents;
};

EventSequence parse_event_line(const std::string& line, MarkMode mode,
                               std::optional<Split>* split = nullptr);
std::string serialize_event_line(const EventSequence& seq, Split split);

ObservationSet parse_observation_line(const std::string& line);
std::string serialize_observation_line(const ObservationSet& obs);

Dataset load_event_file(const std::filesystem::path& path,
                        const EventFileOptions& options);
// `comment`, when non-empty, becomes a leading "# ..." line.
void save_event_file(const std::filesystem::path& path, const Dataset& data,
                     const std::string& comment = "");

std::vector<ObservationSet> load_observation_file(
    const std::filesystem::path& path);
void save_observation_file(const std::filesystem::path& path,
                           const Dataset& data, const std::string& comment = "");

// Attaches observation sets to records by id; records without a match keep
// an empty set. num_variables is raised to cover every variable seen.
void attach_observations(Dataset& data, std::vector<ObservationSet> sets,
                         std::optional<int> num_variables = std::nullopt);

// ---- adapters for published corpora -------------------------------------

// JSON export of the neural-Hawkes / transformer-Hawkes pickles (SO, RT-MC):
//   {"dim_process": M, "train": [[{"time_since_start": t,
//                                  "type_event": k}, ...], ...],
//    "dev": [...], "test": [...]}
// Either one file holding all splits or one file per split.
Dataset adapt_hawkes_pickle_json(const std::filesystem::path& path,
                                 std::size_t max_events = kDefaultMaxEvents);

// Multi-label export (RT-ML, SYN): a JSON array of sequences, each an array
// of {"time": t, "labels": [k, ...]}; `split` tags every record.
Dataset adapt_multilabel_json(const std::filesystem::path& path, Split split,
                              int num_marks,
                              std::size_t max_events = kDefaultMaxEvents);

// PhysioNet 2012 per-stay text files ("Time,Parameter,Value", HH:MM times).
// Variables outside `variables` are dropped; General Descriptors listed in
// `statics` are read at time zero. Outcomes come from the challenge
// Outcomes file (RecordID,...,In-hospital_death).
struct PhysioNet2012Options {
  std::vector<std::string> variables;
  std::vector<std::string> statics = {"Age", "Gender", "Height", "ICUType",
                                      "Weight"};
  std::optional<std::filesystem::path> outcomes;
};
std::vector<ObservationSet> adapt_physionet2012(
    const std::vector<std::filesystem::path>& files,
    const PhysioNet2012Options& options);

// PhysioNet 2019 pipe-separated hourly files; the label is 1 when any
// SepsisLabel row is 1. Age and Gender become statics.
std::vector<ObservationSet> adapt_physionet2019(
    const std::vector<std::filesystem::path>& files,
    const std::vector<std::string>& variables);

}  // namespace ntpp
