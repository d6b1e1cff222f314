#include "ntpp/io.hpp"

#include "ntpp/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace ntpp {

using json = nlohmann::ordered_json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation" || s == "dev" || s == "val") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split tag '" + s + "'");
}

json parse_json(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
}

std::string record_id(const json& j) {
  if (!j.contains("id")) {
    throw FormatError("missing field 'id'");
  }
  const json& id = j.at("id");
  return id.is_string() ? id.get<std::string>() : id.dump();
}

// Blank or comment line.
bool skip_line(const std::string& line) {
  const auto first = std::find_if_not(line.begin(), line.end(),
                                      [](unsigned char c) { return std::isspace(c); });
  return first == line.end() || *first == '#';
}

}  // namespace

EventSequence parse_event_line(const std::string& line, MarkMode mode,
                               std::optional<Split>* split) {
  const json j = parse_json(line);
  EventSequence seq;
  seq.mode = mode;
  seq.id = record_id(j);
  try {
    seq.times = j.at("times").get<std::vector<double>>();
    for (const json& row : j.at("marks")) {
      std::vector<std::uint8_t> bits;
      bits.reserve(row.size());
      for (const json& b : row) {
        const int v = b.get<int>();
        if (v != 0 && v != 1) {
          throw FormatError("record '" + seq.id + "': mark entries must be 0/1");
        }
        bits.push_back(static_cast<std::uint8_t>(v));
      }
      seq.marks.push_back(std::move(bits));
    }
    if (split != nullptr) {
      *split = j.contains("split")
                   ? std::optional<Split>(parse_split(j.at("split").get<std::string>()))
                   : std::nullopt;
    }
  } catch (const json::exception& e) {
    throw FormatError("record '" + seq.id + "': " + e.what());
  }
  return seq;
}

std::string serialize_event_line(const EventSequence& seq, Split split) {
  json j;
  j["id"] = seq.id;
  j["times"] = seq.times;
  json marks = json::array();
  for (const auto& row : seq.marks) {
    json r = json::array();
    for (auto b : row) {
      r.push_back(static_cast<int>(b));
    }
    marks.push_back(std::move(r));
  }
  j["marks"] = std::move(marks);
  j["split"] = to_string(split);
  return j.dump();
}

ObservationSet parse_observation_line(const std::string& line) {
  const json j = parse_json(line);
  ObservationSet obs;
  obs.id = record_id(j);
  try {
    if (j.contains("obs")) {
      for (const json& triple : j.at("obs")) {
        if (!triple.is_array() || triple.size() != 3) {
          throw FormatError("record '" + obs.id +
                            "': observations must be [t, k, v] triples");
        }
        obs.observations.push_back(Observation{
            triple[0].get<double>(), triple[1].get<int>(), triple[2].get<double>()});
      }
    }
    if (j.contains("statics")) {
      for (const json& s : j.at("statics")) {
        obs.statics.push_back(s.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                          : s.get<double>());
      }
    }
    if (j.contains("label") && !j.at("label").is_null()) {
      obs.label = j.at("label").get<int>();
    }
  } catch (const json::exception& e) {
    throw FormatError("record '" + obs.id + "': " + e.what());
  }
  return obs;
}

std::string serialize_observation_line(const ObservationSet& obs) {
  json j;
  j["id"] = obs.id;
  json triples = json::array();
  for (const Observation& o : obs.observations) {
    triples.push_back(json::array({o.time, o.variable, o.value}));
  }
  j["obs"] = std::move(triples);
  json statics = json::array();
  for (double s : obs.statics) {
    statics.push_back(std::isnan(s) ? json(nullptr) : json(s));
  }
  j["statics"] = std::move(statics);
  j["label"] = obs.label ? json(*obs.label) : json(nullptr);
  return j.dump();
}

Dataset load_event_file(const std::filesystem::path& path,
                        const EventFileOptions& options) {
  auto in = open_input(path);
  Dataset data;
  data.mode = options.mode;
  data.num_marks = options.num_marks.value_or(0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      std::optional<Split> split;
      EventSequence seq = parse_event_line(line, options.mode, &split);
      if (data.num_marks == 0) {
        data.num_marks = seq.num_marks();
      }
      validate(seq, data.num_marks);
      truncate_events(seq, options.max_events);
      data.records.push_back(
          Record{std::move(seq), ObservationSet{}, split.value_or(Split::kTrain)});
      data.records.back().observations.id = data.records.back().events.id;
    } catch (const ModeError& e) {
      throw ModeError(where + e.what());
    } catch (const VocabularyError& e) {
      throw VocabularyError(where + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
  }
  return data;
}

void save_event_file(const std::filesystem::path& path, const Dataset& data,
                     const std::string& comment) {
  auto out = open_output(path);
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const Record& r : data.records) {
    out << serialize_event_line(r.events, r.split) << '\n';
  }
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

std::vector<ObservationSet> load_observation_file(
    const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<ObservationSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) {
      continue;
    }
    try {
      out.push_back(parse_observation_line(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return out;
}

void save_observation_file(const std::filesystem::path& path,
                           const Dataset& data, const std::string& comment) {
  auto out = open_output(path);
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const Record& r : data.records) {
    out << serialize_observation_line(r.observations) << '\n';
  }
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

void attach_observations(Dataset& data, std::vector<ObservationSet> sets,
                         std::optional<int> num_variables) {
  std::map<std::string, ObservationSet*> by_id;
  int max_var = -1;
  for (ObservationSet& s : sets) {
    by_id[s.id] = &s;
    for (const Observation& o : s.observations) {
      max_var = std::max(max_var, o.variable);
    }
  }
  data.num_variables = num_variables.value_or(std::max(data.num_variables, max_var + 1));
  for (Record& r : data.records) {
    auto it = by_id.find(r.events.id);
    if (it != by_id.end()) {
      r.observations = std::move(*it->second);
    }
    validate(r.observations, data.num_variables);
  }
}

// ---------------------------------------------------------------- adapters

Dataset adapt_hawkes_pickle_json(const std::filesystem::path& path,
                                 std::size_t max_events) {
  auto in = open_input(path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Dataset data;
  data.mode = MarkMode::kMultiClass;
  data.num_marks = root.value("dim_process", 0);
  if (data.num_marks < 1) {
    throw FormatError(path.string() + ": missing 'dim_process'");
  }
  const std::pair<const char*, Split> splits[] = {
      {"train", Split::kTrain}, {"dev", Split::kValidation}, {"test", Split::kTest}};
  for (const auto& [key, split] : splits) {
    if (!root.contains(key)) {
      continue;
    }
    std::size_t index = 0;
    for (const json& sequence : root.at(key)) {
      EventSequence seq;
      seq.mode = MarkMode::kMultiClass;
      seq.id = std::string(key) + "-" + std::to_string(index++);
      for (const json& ev : sequence) {
        seq.times.push_back(ev.at("time_since_start").get<double>());
        const int type = ev.at("type_event").get<int>();
        if (type < 0 || type >= data.num_marks) {
          throw VocabularyError("record '" + seq.id + "': type_event " +
                                std::to_string(type) + " outside dim_process");
        }
        std::vector<std::uint8_t> bits(data.num_marks, 0);
        bits[type] = 1;
        seq.marks.push_back(std::move(bits));
      }
      if (seq.empty()) {
        continue;
      }
      validate(seq, data.num_marks);
      truncate_events(seq, max_events);
      Record r{std::move(seq), ObservationSet{}, split};
      r.observations.id = r.events.id;
      data.records.push_back(std::move(r));
    }
  }
  return data;
}

Dataset adapt_multilabel_json(const std::filesystem::path& path, Split split,
                              int num_marks, std::size_t max_events) {
  auto in = open_input(path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Dataset data;
  data.mode = MarkMode::kMultiLabel;
  data.num_marks = num_marks;
  std::size_t index = 0;
  for (const json& sequence : root) {
    EventSequence seq;
    seq.mode = MarkMode::kMultiLabel;
    seq.id = to_string(split) + "-" + std::to_string(index++);
    for (const json& ev : sequence) {
      seq.times.push_back(ev.at("time").get<double>());
      std::vector<std::uint8_t> bits(num_marks, 0);
      for (const json& k : ev.at("labels")) {
        const int label = k.get<int>();
        if (label < 0 || label >= num_marks) {
          throw VocabularyError("record '" + seq.id + "': label " +
                                std::to_string(label) + " >= " +
                                std::to_string(num_marks));
        }
        bits[label] = 1;
      }
      seq.marks.push_back(std::move(bits));
    }
    if (seq.empty()) {
      continue;
    }
    validate(seq, num_marks);
    truncate_events(seq, max_events);
    Record r{std::move(seq), ObservationSet{}, split};
    r.observations.id = r.events.id;
    data.records.push_back(std::move(r));
  }
  return data;
}

namespace {

double parse_hhmm(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) {
    throw FormatError("bad HH:MM time '" + s + "'");
  }
  return std::stod(s.substr(0, colon)) + std::stod(s.substr(colon + 1)) / 60.0;
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) {
    if (!field.empty() && field.back() == '\r') {
      field.pop_back();
    }
    out.push_back(field);
  }
  return out;
}

}  // namespace

std::vector<ObservationSet> adapt_physionet2012(
    const std::vector<std::filesystem::path>& files,
    const PhysioNet2012Options& options) {
  std::map<std::string, int> outcomes;
  if (options.outcomes) {
    auto in = open_input(*options.outcomes);
    std::string line;
    std::getline(in, line);
    const auto header = split_on(line, ',');
    const auto col = std::find(header.begin(), header.end(), "In-hospital_death");
    if (col == header.end()) {
      throw FormatError(options.outcomes->string() +
                        ": no In-hospital_death column");
    }
    const auto idx = static_cast<std::size_t>(col - header.begin());
    while (std::getline(in, line)) {
      const auto fields = split_on(line, ',');
      if (fields.size() > idx) {
        outcomes[fields[0]] = std::stoi(fields[idx]);
      }
    }
  }
  std::vector<ObservationSet> out;
  for (const auto& path : files) {
    auto in = open_input(path);
    ObservationSet obs;
    obs.statics.assign(options.statics.size(),
                       std::numeric_limits<double>::quiet_NaN());
    std::string line;
    std::getline(in, line);  // header
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      const auto fields = split_on(line, ',');
      if (fields.size() != 3) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": expected Time,Parameter,Value");
      }
      const std::string& name = fields[1];
      const double value = std::stod(fields[2]);
      if (name == "RecordID") {
        obs.id = fields[2];
        continue;
      }
      const auto s = std::find(options.statics.begin(), options.statics.end(), name);
      if (s != options.statics.end()) {
        const double v = value < 0 ? std::numeric_limits<double>::quiet_NaN() : value;
        obs.statics[static_cast<std::size_t>(s - options.statics.begin())] = v;
        continue;
      }
      const auto v = std::find(options.variables.begin(), options.variables.end(), name);
      if (v == options.variables.end()) {
        continue;
      }
      obs.observations.push_back(Observation{
          parse_hhmm(fields[0]),
          static_cast<int>(v - options.variables.begin()), value});
    }
    std::stable_sort(obs.observations.begin(), obs.observations.end(),
                     [](const Observation& a, const Observation& b) {
                       return a.time < b.time;
                     });
    if (obs.id.empty()) {
      obs.id = path.stem().string();
    }
    if (auto it = outcomes.find(obs.id); it != outcomes.end()) {
      obs.label = it->second;
    }
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<ObservationSet> adapt_physionet2019(
    const std::vector<std::filesystem::path>& files,
    const std::vector<std::string>& variables) {
  std::vector<ObservationSet> out;
  for (const auto& path : files) {
    auto in = open_input(path);
    std::string line;
    std::getline(in, line);
    const auto header = split_on(line, '|');
    auto column = [&](const std::string& name) -> int {
      const auto it = std::find(header.begin(), header.end(), name);
      return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int age = column("Age");
    const int gender = column("Gender");
    const int sepsis = column("SepsisLabel");
    const int iculos = column("ICULOS");
    std::vector<int> var_cols;
    for (const auto& v : variables) {
      var_cols.push_back(column(v));
    }
    ObservationSet obs;
    obs.id = path.stem().string();
    obs.statics.assign(2, std::numeric_limits<double>::quiet_NaN());
    int label = 0;
    double hour = 0.0;
    while (std::getline(in, line)) {
      const auto fields = split_on(line, '|');
      auto number = [&](int c) {
        if (c < 0 || c >= static_cast<int>(fields.size()) || fields[c] == "NaN" ||
            fields[c].empty()) {
          return std::numeric_limits<double>::quiet_NaN();
        }
        return std::stod(fields[c]);
      };
      const double t = iculos >= 0 ? number(iculos) : hour;
      hour += 1.0;
      if (age >= 0) obs.statics[0] = number(age);
      if (gender >= 0) obs.statics[1] = number(gender);
      if (sepsis >= 0 && number(sepsis) == 1.0) label = 1;
      for (std::size_t k = 0; k < var_cols.size(); ++k) {
        const double v = number(var_cols[k]);
        if (!std::isnan(v)) {
          obs.observations.push_back(Observation{t, static_cast<int>(k), v});
        }
      }
    }
    obs.label = label;
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace ntpp
