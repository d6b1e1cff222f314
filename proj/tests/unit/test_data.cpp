#include "helpers.hpp"

#include "ntpp/error.hpp"
#include "ntpp/io.hpp"
#include "ntpp/lab_events.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace ntpp;
using ntpp::testing::scratch;
using ntpp::testing::sequence;

namespace {

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ObservationSet observations(std::vector<Observation> obs) {
  ObservationSet s;
  s.id = "o";
  s.observations = std::move(obs);
  return s;
}

}  // namespace

TEST_CASE("event line: minimal record") {
  const EventSequence s = parse_event_line(
      R"({"id":"r1","times":[0.0,1.5],"marks":[[1,0],[0,1]]})", MarkMode::kMultiClass);
  CHECK(s.size() == 2);
  CHECK(s.num_marks() == 2);
  CHECK(s.mark_index(1) == 1);
  validate(s, 2);
}

TEST_CASE("event line: decreasing times are rejected with the event index") {
  const EventSequence s = parse_event_line(
      R"({"id":"r1","times":[2.0,1.0],"marks":[[1,0],[0,1]]})", MarkMode::kMultiClass);
  try {
    validate(s, 2);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("non-monotonic time at event 2") != std::string::npos);
  }
}

TEST_CASE("event line: co-occurring marks violate multi-class mode") {
  const EventSequence s = parse_event_line(
      R"({"id":"r1","times":[0.0],"marks":[[1,1,0]]})", MarkMode::kMultiClass);
  CHECK_THROWS_AS(validate(s, 3), ModeError);
  const EventSequence ml = parse_event_line(
      R"({"id":"r1","times":[0.0],"marks":[[1,1,0]]})", MarkMode::kMultiLabel);
  validate(ml, 3);
}

TEST_CASE("event line: empty multi-label mark vector is rejected") {
  const EventSequence s = parse_event_line(
      R"({"id":"r1","times":[0.0],"marks":[[0,0]]})", MarkMode::kMultiLabel);
  CHECK_THROWS_AS(validate(s, 2), ModeError);
}

TEST_CASE("event line: mark wider than the vocabulary") {
  const EventSequence s = parse_event_line(
      R"({"id":"r1","times":[0.0],"marks":[[0,0,1]]})", MarkMode::kMultiClass);
  CHECK_THROWS_AS(validate(s, 2), VocabularyError);
}

TEST_CASE("event line: malformed JSON") {
  CHECK_THROWS_AS(parse_event_line("{not json", MarkMode::kMultiClass), FormatError);
  CHECK_THROWS_AS(parse_event_line(R"({"times":[0.0],"marks":[[1]]})", MarkMode::kMultiClass),
                  FormatError);
}

TEST_CASE("event file round trip is byte-identical, comments skipped") {
  const auto dir = scratch("io_roundtrip");
  const std::string canonical =
      "{\"id\":\"a\",\"times\":[0.0,1.5,2.25],\"marks\":[[1,0],[0,1],[1,0]],\"split\":\"train\"}\n"
      "{\"id\":\"b\",\"times\":[0.5],\"marks\":[[0,1]],\"split\":\"test\"}\n";
  write_text(dir / "in.jsonl", "# provenance line\n\n" + canonical);
  const Dataset d = load_event_file(dir / "in.jsonl", {});
  REQUIRE(d.records.size() == 2);
  CHECK(d.num_marks == 2);
  CHECK(d.records[1].split == Split::kTest);
  save_event_file(dir / "out.jsonl", d);
  CHECK(read_text(dir / "out.jsonl") == canonical);
  save_event_file(dir / "commented.jsonl", d, "fingerprint 0 seed 1");
  CHECK(read_text(dir / "commented.jsonl") == "# fingerprint 0 seed 1\n" + canonical);
  const Dataset again = load_event_file(dir / "commented.jsonl", {});
  CHECK(again.records.size() == 2);
}

TEST_CASE("event file: errors carry file and line") {
  const auto dir = scratch("io_errors");
  write_text(dir / "bad.jsonl",
             "{\"id\":\"a\",\"times\":[0.0],\"marks\":[[1,0]]}\n"
             "{\"id\":\"b\",\"times\":[1.0,0.5],\"marks\":[[1,0],[1,0]]}\n");
  try {
    load_event_file(dir / "bad.jsonl", {});
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_event_file(dir / "missing.jsonl", {}), IoError);
}

TEST_CASE("event file: long records keep the most recent events") {
  EventSequence s = sequence({0, 1, 2, 3, 4}, {{1}, {1}, {1}, {1}, {1}});
  truncate_events(s, 3);
  CHECK(s.times == std::vector<double>{2, 3, 4});
  CHECK(s.marks.size() == 3);
}

TEST_CASE("observation file round trip and attach") {
  const auto dir = scratch("io_obs");
  const std::string canonical =
      "{\"id\":\"a\",\"obs\":[[0.5,1,1.25],[1.0,0,-2.0]],\"statics\":[61.0,null],\"label\":1}\n";
  write_text(dir / "obs.jsonl", "# c\n" + canonical);
  auto sets = load_observation_file(dir / "obs.jsonl");
  REQUIRE(sets.size() == 1);
  CHECK(std::isnan(sets[0].statics[1]));
  CHECK(serialize_observation_line(sets[0]) + "\n" == canonical);

  Dataset d;
  d.num_marks = 1;
  Record r;
  r.events = sequence({0.0}, {{1}});
  r.events.id = "a";
  d.records.push_back(r);
  attach_observations(d, std::move(sets));
  CHECK(d.num_variables == 2);
  CHECK(d.records[0].observations.label == 1);
  CHECK(d.has_labels());
}

TEST_CASE("observation set: variable outside the vocabulary") {
  ObservationSet s = observations({{0.0, 3, 1.0}});
  CHECK_THROWS_AS(validate(s, 2), VocabularyError);
}

TEST_CASE("splits are deterministic and cover every record") {
  Dataset d;
  d.num_marks = 1;
  for (int i = 0; i < 100; ++i) {
    Record r;
    r.events = sequence({0.0}, {{1}});
    r.events.id = std::to_string(i);
    d.records.push_back(r);
  }
  Dataset e = d;
  assign_splits(d, 0.7, 0.15, 5);
  assign_splits(e, 0.7, 0.15, 5);
  CHECK(d.split(Split::kTrain).size() == 70);
  CHECK(d.split(Split::kValidation).size() == 15);
  CHECK(d.split(Split::kTest).size() == 15);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    CHECK(d.records[i].split == e.records[i].split);
  }
}

// ---- lab events ----

TEST_CASE("lab events: exact pattern match and the fallback mark") {
  PatternVocab vocab;
  vocab.patterns = {{0, 1, 2}, {3}};
  const EventSequence s =
      extract_lab_events(observations({{1.0, 2, 7.4}, {1.0, 0, 40.0}, {1.0, 1, 90.0}}), vocab);
  REQUIRE(s.size() == 1);
  CHECK(s.marks[0] == std::vector<std::uint8_t>{1, 0, 0});

  const EventSequence other = extract_lab_events(observations({{0.2, 4, 1.0}}), vocab);
  REQUIRE(other.size() == 1);
  CHECK(other.marks[0] == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("lab events: repeated bins repeat the mark, stamped at the earliest time") {
  PatternVocab vocab;
  vocab.patterns = {{3}};
  const EventSequence s = extract_lab_events(
      observations({{0.6, 3, 1.0}, {0.9, 3, 1.1}, {2.25, 3, 1.2}}), vocab);
  REQUIRE(s.size() == 2);
  CHECK(s.marks[0] == s.marks[1]);
  CHECK(s.times[0] == 0.6);
  CHECK(s.times[1] == 2.25);
}

TEST_CASE("lab events: order within a bin does not matter") {
  PatternVocab vocab;
  vocab.patterns = {{0, 1}, {1}};
  const auto a = extract_lab_events(observations({{1.1, 0, 1.0}, {1.1, 1, 2.0}}), vocab);
  const auto b = extract_lab_events(observations({{1.1, 1, 2.0}, {1.1, 0, 1.0}}), vocab);
  CHECK(a.marks == b.marks);
  CHECK(a.times == b.times);
}

TEST_CASE("lab events: contained matching yields multi-hot marks") {
  const PatternVocab vocab = singleton_vocab(3);
  const auto s = extract_lab_events(observations({{0.0, 0, 1.0}, {0.5, 2, 1.0}}), vocab,
                                    kDefaultBinWidth, PatternMatch::kContained);
  REQUIRE(s.size() == 1);
  CHECK(s.marks[0] == std::vector<std::uint8_t>{1, 0, 1, 0});
}

TEST_CASE("lab events: empty observation set is excluded") {
  const auto s = extract_lab_events(observations({}), singleton_vocab(2));
  CHECK(s.empty());
  CHECK(s.excluded);
}

TEST_CASE("pattern vocabulary: frequency order, lexicographic ties, shortfall") {
  std::vector<ObservationSet> sets;
  auto add_bins = [&](VariableSet pattern, int times) {
    ObservationSet s;
    for (int b = 0; b < times; ++b) {
      for (int v : pattern) s.observations.push_back({static_cast<double>(b), v, 0.0});
    }
    sets.push_back(s);
  };
  add_bins({0}, 10);     // A
  add_bins({1, 2}, 5);   // B
  add_bins({0, 3}, 5);   // ties with B, lexicographically smaller
  add_bins({4}, 1);
  std::vector<const ObservationSet*> ptrs;
  for (const auto& s : sets) ptrs.push_back(&s);

  const PatternVocab two = build_pattern_vocab(ptrs, 2);
  REQUIRE(two.patterns.size() == 2);
  CHECK(two.patterns[0] == VariableSet{0});
  CHECK(two.patterns[1] == VariableSet{0, 3});

  const PatternVocab all = build_pattern_vocab(ptrs, 6);
  CHECK(all.patterns.size() == 4);
  CHECK(all.shortfall == 2);
  CHECK(build_pattern_vocab(ptrs, 6).patterns == all.patterns);
}
