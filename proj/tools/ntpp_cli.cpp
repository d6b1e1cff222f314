// ntpp: simulate event data, train and fine-tune models, evaluate
// checkpoints, and run the attention and embedding analyses.
//
// Exit codes: 0 success, 1 usage or data error, 2 rejected configuration or
// generator spec, 3 numerical failure during optimisation.

#include "ntpp/analysis.hpp"
#include "ntpp/error.hpp"
#include "ntpp/io.hpp"
#include "ntpp/lab_events.hpp"
#include "ntpp/metrics.hpp"
#include "ntpp/simulate.hpp"
#include "ntpp/train.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ntpp;

namespace {

// ------------------------------------------------------------------ helpers

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string provenance_line(const std::string& fingerprint, std::uint64_t seed) {
  return "fingerprint " + fingerprint + " seed " + std::to_string(seed);
}

// Metric value or the string "not-applicable".
Json metric(const std::optional<double>& value) {
  if (value && std::isfinite(*value)) return *value;
  return "not-applicable";
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ------------------------------------------------------------------ data

struct DataFlags {
  std::string events;
  std::string observations;
  std::string mode = "auto";
  std::optional<int> num_marks;
  std::size_t max_events = kDefaultMaxEvents;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--events", f.events, "Event file (one JSON record per line)")
      ->required();
  cmd->add_option("--observations", f.observations,
                  "Observation file matched to events by id");
  cmd->add_option("--mode", f.mode,
                  "Mark mode: mc (one-hot), ml (multi-hot) or auto (mc when every event "
                  "has exactly one mark)")
      ->check(CLI::IsMember({"auto", "mc", "ml", "multi-class", "multi-label"}))
      ->capture_default_str();
  cmd->add_option("--num-marks", f.num_marks,
                  "Mark vocabulary size (default: width of the first record)");
  cmd->add_option("--max-events", f.max_events,
                  "Keep only the most recent events of longer records")
      ->capture_default_str();
}

MarkMode mode_from_flag(const std::string& text) {
  if (text == "mc") return MarkMode::kMultiClass;
  if (text == "ml") return MarkMode::kMultiLabel;
  return parse_mark_mode(text);
}

// `forced` (from a checkpoint) wins over the flag.
Dataset load_data(const DataFlags& f, std::optional<MarkMode> forced = std::nullopt) {
  EventFileOptions opt;
  opt.num_marks = f.num_marks;
  opt.max_events = f.max_events;
  Dataset data;
  if (forced) {
    opt.mode = *forced;
    data = load_event_file(f.events, opt);
  } else if (f.mode != "auto") {
    opt.mode = mode_from_flag(f.mode);
    data = load_event_file(f.events, opt);
  } else {
    // One-hot everywhere reads as multi-class, anything else multi-label.
    try {
      opt.mode = MarkMode::kMultiClass;
      data = load_event_file(f.events, opt);
    } catch (const ModeError&) {
      opt.mode = MarkMode::kMultiLabel;
      data = load_event_file(f.events, opt);
    }
  }
  if (!f.observations.empty()) {
    attach_observations(data, load_observation_file(f.observations));
  }
  validate(data);
  return data;
}

int statics_width(const Dataset& data) {
  std::size_t width = 0;
  for (const Record& r : data.records) {
    width = std::max(width, r.observations.statics.size());
  }
  return static_cast<int>(width);
}

bool has_observations(const Dataset& data) {
  return std::any_of(data.records.begin(), data.records.end(),
                     [](const Record& r) { return !r.observations.observations.empty(); });
}

std::vector<const Record*> select_split(const Dataset& data, const std::string& split) {
  if (split == "train") return data.split(Split::kTrain);
  if (split == "validation") return data.split(Split::kValidation);
  if (split == "test") return data.split(Split::kTest);
  std::vector<const Record*> all;
  for (const Record& r : data.records) all.push_back(&r);
  return all;
}

// ------------------------------------------------------------------ configs

struct ModelFlags {
  std::optional<std::string> loss;
  bool no_tee = false;
  bool no_dam = false;
  bool dam = false;
  std::optional<int> d_emb, d_time, layers, heads, shift, d_ff;
  std::optional<double> time_scale;
  std::optional<std::string> time_mode;
  std::optional<int> dam_time, dam_hidden, dam_heads, dam_out, dam_static;
  std::optional<int> head_hidden;
  std::optional<std::string> pooling;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  const TeeConfig tee;
  const DamConfig dam;
  const ModelConfig model;
  cmd->add_option("--loss", f.loss,
                  "Objective: pp-mc, pp-ml, pp-marked (alias pp-single) or ae "
                  "[pp-mc for one-hot data, pp-ml for multi-hot]");
  cmd->add_flag("--no-tee", f.no_tee, "Drop the transformer event encoder");
  cmd->add_flag("--no-dam", f.no_dam, "Drop the observation encoder");
  cmd->add_flag("--dam", f.dam,
                "Force the observation encoder on [on when observations are given]");
  cmd->add_option("--d-emb", f.d_emb,
                  "Mark-embedding width [" + std::to_string(tee.d_emb) + "; local choice]");
  cmd->add_option("--d-time", f.d_time,
                  "Time-encoding width, even [" + std::to_string(tee.d_time) +
                      "; local choice]");
  cmd->add_option("--time-scale", f.time_scale,
                  "Largest period of the time encoding [10000; published setting]");
  cmd->add_option("--time-mode", f.time_mode,
                  "concat or sum of mark and time encodings [concat; published "
                  "best setting]")
      ->check(CLI::IsMember({"concat", "sum"}));
  cmd->add_option("--layers", f.layers,
                  "Encoder layers [" + std::to_string(tee.n_layers) + "; local choice]");
  cmd->add_option("--heads", f.heads,
                  "Attention heads [" + std::to_string(tee.n_heads) + "; local choice]");
  cmd->add_option("--shift", f.shift,
                  "Masking shift w: event j's state hides the w most recent events "
                  "[" + std::to_string(tee.shift) + "; published best setting]");
  cmd->add_option("--d-ff", f.d_ff, "Feed-forward width [2 x model width; local choice]");
  cmd->add_option("--dam-time", f.dam_time,
                  "Observation time-encoding width [" + std::to_string(dam.d_time) +
                      "; local choice]");
  cmd->add_option("--dam-hidden", f.dam_hidden,
                  "Hidden width of the observation networks [" +
                      std::to_string(dam.d_hidden) + "; local choice]");
  cmd->add_option("--dam-heads", f.dam_heads,
                  "Observation attention heads [" + std::to_string(dam.n_heads) +
                      "; local choice]");
  cmd->add_option("--dam-out", f.dam_out,
                  "Observation state width [" + std::to_string(dam.d_g) +
                      "; local choice]");
  cmd->add_option("--dam-static", f.dam_static,
                  "Static-descriptor embedding width [" + std::to_string(dam.d_static) +
                      "; local choice]");
  cmd->add_option("--head-hidden", f.head_hidden,
                  "Hidden width of the outcome heads [" +
                      std::to_string(model.head_hidden) + "; local choice]");
  cmd->add_option("--pooling", f.pooling,
                  "Record embedding: last event state or mean over events [last]")
      ->check(CLI::IsMember({"last", "mean"}));
}

struct TrainFlags {
  std::optional<std::string> preset;
  std::optional<double> lr, min_lr;
  std::optional<int> batch_size, epochs, period, patience, mc_samples;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> freeze;
  bool no_probe = false;
  bool quiet = false;
};

// Learning rate and batch size by corpus type.
const std::map<std::string, std::pair<double, int>>& presets() {
  static const std::map<std::string, std::pair<double, int>> table = {
      {"so", {1e-3, 4}},    {"rt", {3e-3, 64}},   {"syn", {3e-3, 64}},
      {"p12", {2e-2, 128}}, {"p19", {1e-2, 128}},
  };
  return table;
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  const TrainConfig d;
  cmd->add_option("--preset", f.preset,
                  "Learning rate and batch size of a corpus type: so (1e-3, 4), "
                  "rt (3e-3, 64), syn (3e-3, 64), p12 (2e-2, 128), p19 (1e-2, 128) "
                  "[published settings; so's rate read as 1e-3]")
      ->check(CLI::IsMember({"so", "rt", "syn", "p12", "p19"}));
  cmd->add_option("--lr", f.lr, "Initial learning rate [3e-3; published setting for rt/syn]");
  cmd->add_option("--min-lr", f.min_lr, "Cosine floor [0; local choice]");
  cmd->add_option("--batch-size", f.batch_size,
                  "Records per step [" + std::to_string(d.batch_size) + "; published setting for so]");
  cmd->add_option("--epochs", f.epochs,
                  "Maximum epochs [" + std::to_string(d.epochs) + "; local choice]");
  cmd->add_option("--period", f.period,
                  "Cosine period in epochs, 0 = epochs [0; local choice]");
  cmd->add_option("--patience", f.patience,
                  "Early-stopping patience in epochs, 0 disables [" +
                      std::to_string(d.patience) + "; local choice]");
  cmd->add_option("--mc-samples", f.mc_samples,
                  "Integral nodes per interval while training [" +
                      std::to_string(kTrainingSamples) + "; local choice]");
  cmd->add_option("--seed", f.seed, "Seed for initialisation, order and sampling [0]");
  cmd->add_option("--freeze", f.freeze,
                  "Parameter groups left untouched: tee, dam, decoder, ground, "
                  "mark_head, probe, classifier")
      ->delimiter(',');
  cmd->add_flag("--no-probe", f.no_probe, "Skip the detached outcome probe");
  cmd->add_flag("-q,--quiet", f.quiet, "No per-epoch progress on stderr");
}

struct Configs {
  ModelConfig model;
  TrainConfig train;
};

// Defaults, then the {"model", "train"} file, then flags.
Configs resolve_configs(const std::string& config_path, const ModelFlags& mf,
                        const TrainFlags& tf, const Dataset& data,
                        std::optional<ModelConfig> base = std::nullopt) {
  Configs c;
  Json file = Json::object();
  if (!config_path.empty()) file = read_json(config_path);
  const Json model_json = file.contains("model") ? file.at("model") : Json::object();
  const Json train_json = file.contains("train") ? file.at("train") : Json::object();
  if (base) {
    c.model = *base;
    if (!model_json.empty()) {
      Json merged = to_json(*base);
      merged.update(model_json, true);
      c.model = model_config_from_json(merged);
    }
  } else {
    c.model = model_config_from_json(model_json);
  }
  c.train = train_config_from_json(train_json);

  ModelConfig& m = c.model;
  m.mode = data.mode;
  m.num_marks = data.num_marks;
  m.tee.num_marks = data.num_marks;
  if (!base) {
    if (!model_json.contains("objective")) {
      m.objective = data.mode == MarkMode::kMultiLabel ? Objective::kPpMultiLabel
                                                       : Objective::kPpMultiClass;
    }
    if (!model_json.contains("use_dam")) m.use_dam = has_observations(data);
  }
  if (mf.loss) m.objective = parse_objective(*mf.loss);
  if (mf.no_tee) m.use_tee = false;
  if (mf.dam) m.use_dam = true;
  if (mf.no_dam) m.use_dam = false;
  if (mf.d_emb) m.tee.d_emb = *mf.d_emb;
  if (mf.d_time) m.tee.d_time = *mf.d_time;
  if (mf.time_scale) m.tee.time_scale = *mf.time_scale;
  if (mf.time_mode) {
    m.tee.time_mode = *mf.time_mode == "sum" ? TimeMode::kSum : TimeMode::kConcatenate;
  }
  if (mf.layers) m.tee.n_layers = *mf.layers;
  if (mf.heads) m.tee.n_heads = *mf.heads;
  if (mf.shift) m.tee.shift = *mf.shift;
  if (mf.d_ff) m.tee.d_ff = *mf.d_ff;
  if (mf.dam_time) m.dam.d_time = *mf.dam_time;
  if (mf.dam_hidden) m.dam.d_hidden = *mf.dam_hidden;
  if (mf.dam_heads) m.dam.n_heads = *mf.dam_heads;
  if (mf.dam_out) m.dam.d_g = *mf.dam_out;
  if (mf.dam_static) m.dam.d_static = *mf.dam_static;
  if (mf.head_hidden) m.head_hidden = *mf.head_hidden;
  if (mf.pooling) m.pooling = *mf.pooling == "mean" ? Pooling::kMean : Pooling::kLast;
  if (m.use_dam) {
    if (base && m.dam.num_variables != data.num_variables) {
      throw ConfigError("data has " + std::to_string(data.num_variables) +
                        " variables, the checkpoint expects " +
                        std::to_string(m.dam.num_variables));
    }
    m.dam.num_variables = std::max(data.num_variables, 1);
    if (!base) m.dam.num_statics = statics_width(data);
  }

  TrainConfig& t = c.train;
  if (tf.preset) {
    const auto& [lr, batch] = presets().at(*tf.preset);
    t.learning_rate = lr;
    t.batch_size = batch;
  }
  if (tf.lr) t.learning_rate = *tf.lr;
  if (tf.min_lr) t.min_learning_rate = *tf.min_lr;
  if (tf.batch_size) t.batch_size = *tf.batch_size;
  if (tf.epochs) t.epochs = *tf.epochs;
  if (tf.period) t.period = *tf.period;
  if (tf.patience) t.patience = *tf.patience;
  if (tf.mc_samples) t.mc_samples = *tf.mc_samples;
  if (tf.seed) t.seed = *tf.seed;
  if (!tf.freeze.empty()) t.freeze = {tf.freeze.begin(), tf.freeze.end()};
  if (tf.no_probe) t.train_probe = false;
  if (!tf.quiet) {
    t.on_epoch = [](int epoch, double train_loss, double validation_loss) {
      std::cerr << "epoch " << epoch << "  train " << train_loss << "  validation "
                << validation_loss << std::endl;
    };
  }
  m.validate();
  t.validate();
  return c;
}

// ------------------------------------------------------------------ evaluation

Json next_mark_metrics(const Model& model, const std::vector<const Record*>& records) {
  Json out = Json::object();
  const MarkPredictions pred = collect_next_marks(model, records);
  if (pred.scores.rows() == 0) {
    out["weighted_f1"] = "not-applicable";
    out["auroc"] = "not-applicable";
    return out;
  }
  MetricSet m;
  try {
    m = classification_metrics(pred.scores, pred.targets, model.config.mode);
  } catch (const AnalysisError&) {
  }
  if (model.config.mode == MarkMode::kMultiClass) {
    out["weighted_f1"] = metric(m.weighted_f1);
    out["auroc"] = metric(m.auroc);
  } else {
    out["auroc"] = metric(m.auroc);
    out["auprc"] = metric(m.auprc);
  }
  out["events"] = pred.scores.rows();
  return out;
}

Json outcome_metrics(const Model& model, const std::string& head,
                     const std::vector<const Record*>& records) {
  const OutcomePredictions pred = collect_outcomes(model, head, records);
  Json out = Json::object();
  out["records"] = pred.labels.size();
  MetricSet m;
  try {
    if (!pred.labels.empty()) m = binary_metrics(pred.scores, pred.labels);
  } catch (const AnalysisError&) {
  }
  out["f1"] = metric(m.weighted_f1);
  out["auroc"] = metric(m.auroc);
  out["auprc"] = metric(m.auprc);
  return out;
}

Json objective_metrics(const Model& model, const std::vector<const Record*>& records,
                       int samples, std::uint64_t seed) {
  Json out = Json::object();
  try {
    const ObjectiveSummary s = evaluate_objective(model, records, samples, seed);
    out["ll_per_event"] = metric(std::isnan(s.ll_per_event)
                                     ? std::nullopt
                                     : std::optional<double>(s.ll_per_event));
    out["loss_per_event"] = s.loss_per_event;
    out["events"] = s.events;
  } catch (const AnalysisError&) {
    out["ll_per_event"] = "not-applicable";
  }
  return out;
}

Json summary_metrics(const Checkpoint& ckpt, const Dataset& data) {
  std::vector<const Record*> test = data.split(Split::kTest);
  std::string split = "test";
  if (test.empty()) {
    test = data.split(Split::kValidation);
    split = "validation";
  }
  Json out = Json::object();
  out["fingerprint"] = ckpt.fingerprint;
  out["seed"] = ckpt.train.seed;
  out["task"] = ckpt.task;
  out["split"] = split;
  if (test.empty()) return out;
  if (ckpt.task == kSupervisedTask) {
    out["outcome"] = outcome_metrics(ckpt.model, "classifier", test);
  } else {
    out["objective"] = objective_metrics(ckpt.model, test, kEvaluationSamples,
                                         derive_seed(ckpt.train.seed, 0xe7a1));
    out["next_mark"] = next_mark_metrics(ckpt.model, test);
  }
  for (const auto& [key, value] : ckpt.metrics.items()) out[key] = value;
  return out;
}

void write_run(const Checkpoint& ckpt, const Dataset& data, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  save_checkpoint(ckpt, out_dir / "checkpoint.json");
  save_history_csv(ckpt, out_dir / "history.csv");
  const Json metrics = summary_metrics(ckpt, data);
  write_json(out_dir / "metrics.json", metrics);
  std::cout << metrics.dump(2) << std::endl;
}

// ------------------------------------------------------------------ simulate

struct HawkesFlags {
  std::vector<double> mu = {0.2};
  double alpha = 0.5;
  double alpha_cross = 0.0;
  double beta = 1.0;
  double tmax = 100.0;
  int n = 500;
  int types = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_simulate_hawkes(const HawkesFlags& f) {
  if (f.types < 1) throw ConfigError("--types must be >= 1");
  if (f.n < 1) throw ConfigError("--n must be >= 1");
  HawkesSpec spec;
  if (f.mu.size() == 1) {
    spec.mu = Vector::Constant(f.types, f.mu.front());
  } else if (static_cast<int>(f.mu.size()) == f.types) {
    spec.mu = Eigen::Map<const Vector>(f.mu.data(), f.types);
  } else {
    throw ConfigError("--mu needs one value or one per type");
  }
  spec.alpha = Matrix::Constant(f.types, f.types, f.alpha_cross);
  spec.alpha.diagonal().setConstant(f.alpha);
  spec.beta = Matrix::Constant(f.types, f.types, f.beta);
  spec.horizon = f.tmax;
  validate(spec);

  Json params;
  params["generator"] = "hawkes";
  params["mu"] = std::vector<double>(spec.mu.data(), spec.mu.data() + spec.mu.size());
  params["alpha"] = f.alpha;
  params["alpha_cross"] = f.alpha_cross;
  params["beta"] = f.beta;
  params["tmax"] = f.tmax;
  params["n"] = f.n;
  params["types"] = f.types;
  params["seed"] = f.seed;
  const std::string fingerprint = json_fingerprint(params);

  const Dataset data = simulate_hawkes_dataset(spec, f.n, f.seed);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  save_event_file(dir / "events.jsonl", data, provenance_line(fingerprint, f.seed));

  Json truth = params;
  truth["fingerprint"] = fingerprint;
  const Vector rates = spec.stationary_rates();
  truth["stationary_rates"] = std::vector<double>(rates.data(), rates.data() + rates.size());
  truth["spectral_radius"] = spec.spectral_radius();
  Json alpha = Json::array();
  for (Eigen::Index r = 0; r < spec.alpha.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < spec.alpha.cols(); ++c) row.push_back(spec.alpha(r, c));
    alpha.push_back(row);
  }
  truth["alpha_matrix"] = alpha;
  truth["records"] = data.records.size();
  truth["events"] = data.total_events();
  write_json(dir / "truth.json", truth);
  std::cout << "wrote " << data.records.size() << " sequences (" << data.total_events()
            << " events) to " << (dir / "events.jsonl").string() << std::endl;
  return 0;
}

struct EhrFlags {
  int n = 500;
  std::uint64_t seed = 0;
  EhrSimulationOptions options;
  std::string out;
};

int run_simulate_ehr(const EhrFlags& f) {
  const EhrSimulation sim = simulate_ehr_like(f.n, f.seed, f.options);
  const EhrSimulationOptions& o = f.options;
  Json params;
  params["generator"] = "ehr";
  params["n"] = f.n;
  params["seed"] = f.seed;
  params["variables"] = o.num_variables;
  params["positive_fraction"] = o.positive_fraction;
  params["min_stay_hours"] = o.min_stay_hours;
  params["max_stay_hours"] = o.max_stay_hours;
  params["patterns"] = o.pattern_vocab_size;
  params["bin_width"] = o.bin_width;
  const std::string fingerprint = json_fingerprint(params);

  const fs::path dir(f.out);
  fs::create_directories(dir);
  const std::string line = provenance_line(fingerprint, f.seed);
  save_event_file(dir / "events.jsonl", sim.data, line);
  save_observation_file(dir / "observations.jsonl", sim.data, line);

  Json truth = params;
  truth["fingerprint"] = fingerprint;
  Json panels = Json::array();
  for (const VariableSet& p : sim.panels) panels.push_back(p);
  truth["panels"] = panels;
  Json rates = Json::object();
  for (int y = 0; y < 2; ++y) {
    const auto row = sim.panel_rates.row(y);
    rates[y == 0 ? "negative" : "positive"] =
        std::vector<double>(row.data(), row.data() + row.size());
  }
  // panel_rates is column-major; copy through a vector explicitly.
  for (int y = 0; y < 2; ++y) {
    std::vector<double> v;
    for (Eigen::Index p = 0; p < sim.panel_rates.cols(); ++p) {
      v.push_back(sim.panel_rates(y, p));
    }
    rates[y == 0 ? "negative" : "positive"] = v;
  }
  truth["panel_rates_per_hour"] = rates;
  Json vocab = Json::array();
  for (const VariableSet& p : sim.vocab.patterns) vocab.push_back(p);
  truth["pattern_vocab"] = vocab;

  // Mean measurement density of each class over the generated stays.
  std::vector<Vector> sums(2, Vector::Zero(sim.data.num_marks));
  std::vector<int> counts(2, 0);
  for (const Record& r : sim.data.records) {
    if (r.events.excluded || r.events.empty() || !(r.events.times.back() > 0.0)) continue;
    const int y = r.observations.label.value_or(0);
    sums[static_cast<std::size_t>(y)] += measurement_density(r.events).density;
    ++counts[static_cast<std::size_t>(y)];
  }
  Json densities = Json::object();
  for (int y = 0; y < 2; ++y) {
    Vector mean = sums[static_cast<std::size_t>(y)];
    if (counts[static_cast<std::size_t>(y)] > 0) mean /= counts[static_cast<std::size_t>(y)];
    densities[y == 0 ? "negative" : "positive"] =
        std::vector<double>(mean.data(), mean.data() + mean.size());
  }
  truth["class_densities"] = densities;
  truth["records"] = sim.data.records.size();
  write_json(dir / "truth.json", truth);
  std::cout << "wrote " << sim.data.records.size() << " stays, "
            << sim.data.num_marks << " marks, to " << dir.string() << std::endl;
  return 0;
}

// ------------------------------------------------------------------ analysis

// Group definitions: all | label=<0|1> | ids=<a,b,...> | predicted=<0|1>.
std::vector<const Record*> select_group(const std::string& spec, const Checkpoint& ckpt,
                                        const std::vector<const Record*>& pool) {
  std::vector<const Record*> out;
  if (spec == "all") return pool;
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("group '" + spec + "': expected all, label=, ids= or predicted=");
  }
  const std::string key = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);
  if (key == "ids") {
    const auto ids = split_list(value);
    for (const Record* r : pool) {
      if (std::find(ids.begin(), ids.end(), r->events.id) != ids.end()) out.push_back(r);
    }
  } else if (key == "label" || key == "predicted") {
    int wanted = 0;
    try {
      wanted = std::stoi(value);
    } catch (const std::exception&) {
      throw ConfigError("group '" + spec + "': label must be 0 or 1");
    }
    const std::string head = ckpt.task == kSupervisedTask ? "classifier" : "probe";
    for (const Record* r : pool) {
      if (key == "label") {
        if (r->observations.label && *r->observations.label == wanted) out.push_back(r);
        continue;
      }
      Graph g(ckpt.model.params);
      const Forward fwd = encode_record(g, ckpt.model, *r);
      const double p = sigmoid_scalar(
          outcome_logit(g, head, record_embedding(fwd, ckpt.model.config.pooling)).scalar());
      if ((p >= 0.5 ? 1 : 0) == wanted) out.push_back(r);
    }
  } else {
    throw ConfigError("group '" + spec + "': unknown selector '" + key + "'");
  }
  return out;
}

std::string file_safe(const std::string& text) {
  std::string out;
  for (char c : text) {
    out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  }
  return out;
}

struct AnalysisFlags {
  std::string checkpoint;
  DataFlags data;
  std::string split = "all";
  std::string out;
  std::vector<std::string> groups;
  double epsilon = kDefaultInfluenceThreshold;
};

int run_aggregate(const AnalysisFlags& f) {
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  if (!ckpt.model.config.use_tee) throw ConfigError("aggregate needs a model with a TEE");
  const Dataset data = load_data(f.data, ckpt.model.config.mode);
  const auto pool = select_split(data, f.split);
  const std::vector<std::string> groups =
      f.groups.empty() ? std::vector<std::string>{"all"} : f.groups;
  const Provenance provenance{ckpt.fingerprint, ckpt.train.seed};
  const fs::path dir(f.out);
  fs::create_directories(dir);
  for (const std::string& group : groups) {
    const auto members = select_group(group, ckpt, pool);
    std::vector<AttentionRecord> records;
    for (const Record* r : members) {
      if (r->events.empty()) continue;
      AttentionRecord a;
      a.id = r->events.id;
      a.attention = last_layer_attention(ckpt.model, *r);
      a.visible = build_mask(static_cast<Eigen::Index>(r->events.size()),
                             ckpt.model.config.tee.shift);
      a.marks = r->events.mark_matrix();
      records.push_back(std::move(a));
    }
    if (records.empty()) throw AnalysisError("group '" + group + "' is empty");
    const InfluenceReport report = aggregate_attention(records, group, f.epsilon);
    const fs::path prefix = dir / ("influence_" + file_safe(group));
    write_influence_report(report, prefix, provenance);
    std::cout << "group " << group << ": " << report.records << " records -> "
              << prefix.string() << ".json" << std::endl;
  }
  return 0;
}

int run_embed(const AnalysisFlags& f) {
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const Dataset data = load_data(f.data, ckpt.model.config.mode);
  std::vector<const Record*> records;
  for (const Record* r : select_split(data, f.split)) {
    if (!r->events.empty()) records.push_back(r);
  }
  const Matrix emb = collect_embeddings(ckpt.model, records);
  std::vector<std::string> ids;
  std::vector<std::optional<int>> labels;
  for (const Record* r : records) {
    ids.push_back(r->events.id);
    labels.push_back(r->observations.label);
  }
  write_embeddings(f.out, ids, labels, emb, {ckpt.fingerprint, ckpt.train.seed});
  std::cout << "wrote " << records.size() << " embeddings of width " << emb.cols()
            << " to " << f.out << std::endl;
  return 0;
}

struct KnnFlags {
  std::string embeddings;
  DataFlags data;
  int k = 10;
  std::string out;
};

// Provenance of a "# fingerprint <hex> seed <n>" header, if present.
Provenance read_provenance(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  Provenance p;
  if (std::getline(in, line) && line.rfind("# fingerprint ", 0) == 0) {
    std::istringstream ss(line.substr(2));
    std::string word;
    ss >> word >> p.fingerprint >> word >> p.seed;
  }
  return p;
}

int run_knnps(const KnnFlags& f) {
  const EmbeddingTable table = read_embeddings(f.embeddings);
  const Dataset data = load_data(f.data);
  std::map<std::string, const Record*> by_id;
  for (const Record& r : data.records) by_id[r.events.id] = &r;
  Matrix densities(static_cast<Eigen::Index>(table.ids.size()), data.num_marks);
  std::vector<int> labels;
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    const auto it = by_id.find(table.ids[i]);
    if (it == by_id.end()) {
      throw FormatError("record '" + table.ids[i] + "' is not in " + f.data.events);
    }
    densities.row(static_cast<Eigen::Index>(i)) =
        measurement_density(it->second->events).density.transpose();
    const std::optional<int> label =
        table.labels[i] ? table.labels[i] : it->second->observations.label;
    if (!label) throw FormatError("record '" + table.ids[i] + "' has no label");
    labels.push_back(*label);
  }
  const KnnSimilarity result =
      knn_pattern_similarity(table.embeddings, densities, labels, f.k);
  const Provenance provenance = read_provenance(f.embeddings);
  Json out;
  out["fingerprint"] = provenance.fingerprint;
  out["seed"] = provenance.seed;
  out["k"] = f.k;
  out["value"] = result.value;
  out["positive_records"] = result.records.size();
  out["zero_norm_pairs"] = result.zero_norm_pairs;
  Json breakdown = Json::array();
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    breakdown.push_back({{"id", table.ids[result.records[i]]},
                         {"cs_avg", result.per_record[i]}});
  }
  out["per_record"] = breakdown;
  if (!f.out.empty()) write_json(f.out, out);
  std::cout << "10nn-ps (k=" << f.k << "): " << result.value << " over "
            << result.records.size() << " positive records" << std::endl;
  return 0;
}

// ------------------------------------------------------------------ convert

struct ConvertFlags {
  std::string format;
  std::vector<std::string> inputs;
  std::string train, validation, test;
  int num_marks = 0;
  std::vector<std::string> variables;
  std::vector<std::string> statics;
  std::string outcomes;
  int patterns = 10;
  double bin_width = kDefaultBinWidth;
  bool contained = false;
  std::uint64_t seed = 0;
  std::size_t max_events = kDefaultMaxEvents;
  std::string out;
};

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs,
                                    const std::string& extension) {
  std::vector<fs::path> out;
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      out.emplace_back(in);
    } else {
      throw IoError("input '" + in + "' does not exist");
    }
  }
  if (out.empty()) throw IoError("no input files found");
  return out;
}

int run_convert(const ConvertFlags& f) {
  Json params;
  params["format"] = f.format;
  params["seed"] = f.seed;
  Dataset data;
  if (f.format == "hawkes-json") {
    if (f.inputs.empty()) throw ConfigError("hawkes-json needs --input");
    for (const fs::path& p : expand_inputs(f.inputs, ".json")) {
      Dataset part = adapt_hawkes_pickle_json(p, f.max_events);
      if (data.records.empty()) {
        data = std::move(part);
      } else {
        for (Record& r : part.records) data.records.push_back(std::move(r));
      }
    }
  } else if (f.format == "multilabel-json") {
    if (f.num_marks < 1) throw ConfigError("multilabel-json needs --num-marks");
    const std::vector<std::pair<std::string, Split>> parts = {
        {f.train, Split::kTrain}, {f.validation, Split::kValidation}, {f.test, Split::kTest}};
    for (const auto& [path, split] : parts) {
      if (path.empty()) continue;
      Dataset part = adapt_multilabel_json(path, split, f.num_marks, f.max_events);
      if (data.records.empty()) {
        data = std::move(part);
      } else {
        for (Record& r : part.records) data.records.push_back(std::move(r));
      }
    }
    if (data.records.empty()) throw ConfigError("multilabel-json needs --train/--validation/--test");
  } else {
    if (f.variables.empty()) throw ConfigError(f.format + " needs --variables");
    std::vector<ObservationSet> sets;
    if (f.format == "physionet2012") {
      PhysioNet2012Options opt;
      opt.variables = f.variables;
      if (!f.statics.empty()) opt.statics = f.statics;
      if (!f.outcomes.empty()) opt.outcomes = fs::path(f.outcomes);
      sets = adapt_physionet2012(expand_inputs(f.inputs, ".txt"), opt);
    } else {
      sets = adapt_physionet2019(expand_inputs(f.inputs, ".psv"), f.variables);
    }
    data.mode = MarkMode::kMultiLabel;
    data.num_variables = static_cast<int>(f.variables.size());
    for (ObservationSet& s : sets) {
      Record r;
      r.events.id = s.id;
      r.observations = std::move(s);
      data.records.push_back(std::move(r));
    }
    assign_splits(data, 0.7, 0.15, f.seed);
    const PatternVocab vocab = build_pattern_vocab(data, f.patterns, f.bin_width);
    if (vocab.shortfall > 0) {
      std::cerr << "note: only " << vocab.patterns.size() << " of " << f.patterns
                << " patterns occur in the training split" << std::endl;
    }
    data.num_marks = vocab.num_marks();
    const PatternMatch rule = f.contained ? PatternMatch::kContained : PatternMatch::kExactSet;
    std::size_t dropped = 0;
    std::vector<Record> kept;
    for (Record& r : data.records) {
      r.events = extract_lab_events(r.observations, vocab, f.bin_width, rule);
      truncate_events(r.events, f.max_events);
      if (r.events.excluded) {
        ++dropped;
      } else {
        kept.push_back(std::move(r));
      }
    }
    data.records = std::move(kept);
    if (dropped > 0) {
      std::cerr << "note: dropped " << dropped << " stays without observations" << std::endl;
    }
    params["variables"] = f.variables;
    params["patterns"] = f.patterns;
    params["bin_width"] = f.bin_width;
    params["match"] = f.contained ? "contained" : "exact";
  }
  validate(data);
  const std::string fingerprint = json_fingerprint(params);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  const std::string line = provenance_line(fingerprint, f.seed);
  save_event_file(dir / "events.jsonl", data, line);
  if (has_observations(data)) save_observation_file(dir / "observations.jsonl", data, line);
  std::cout << "wrote " << data.records.size() << " records (" << data.num_marks
            << " marks) to " << dir.string() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ntpp: neural temporal point processes for event sequences and "
               "irregular observations"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic data");
  simulate->require_subcommand(1);
  HawkesFlags hawkes;
  auto* sim_hawkes = simulate->add_subcommand("hawkes", "Multivariate Hawkes sequences");
  sim_hawkes->add_option("--mu", hawkes.mu, "Base rate, one value or one per type")
      ->capture_default_str();
  sim_hawkes->add_option("--alpha", hawkes.alpha, "Self-excitation branching ratio")
      ->capture_default_str();
  sim_hawkes->add_option("--alpha-cross", hawkes.alpha_cross,
                         "Branching ratio between different types")
      ->capture_default_str();
  sim_hawkes->add_option("--beta", hawkes.beta, "Kernel decay rate")->capture_default_str();
  sim_hawkes->add_option("--tmax", hawkes.tmax, "Observation horizon")->capture_default_str();
  sim_hawkes->add_option("--n", hawkes.n, "Number of sequences")->capture_default_str();
  sim_hawkes->add_option("--types", hawkes.types, "Number of event types")
      ->capture_default_str();
  sim_hawkes->add_option("--seed", hawkes.seed, "Generator seed")->capture_default_str();
  sim_hawkes->add_option("--out", hawkes.out, "Output directory")->required();

  EhrFlags ehr;
  auto* sim_ehr = simulate->add_subcommand(
      "ehr", "ICU-like stays: lab panels, values, statics, binary outcome");
  sim_ehr->add_option("--n", ehr.n, "Number of stays")->capture_default_str();
  sim_ehr->add_option("--seed", ehr.seed, "Generator seed")->capture_default_str();
  sim_ehr->add_option("--variables", ehr.options.num_variables, "Lab variables")
      ->capture_default_str();
  sim_ehr->add_option("--positive-fraction", ehr.options.positive_fraction,
                      "Share of positive outcomes")
      ->capture_default_str();
  sim_ehr->add_option("--min-stay", ehr.options.min_stay_hours, "Shortest stay, hours")
      ->capture_default_str();
  sim_ehr->add_option("--max-stay", ehr.options.max_stay_hours, "Longest stay, hours")
      ->capture_default_str();
  sim_ehr->add_option("--patterns", ehr.options.pattern_vocab_size,
                      "Measurement patterns kept as marks (plus one catch-all)")
      ->capture_default_str();
  sim_ehr->add_option("--bin-width", ehr.options.bin_width,
                      "Width of the bins that define a measurement pattern, hours")
      ->capture_default_str();
  sim_ehr->add_option("--out", ehr.out, "Output directory")->required();

  // train / pretrain / finetune
  DataFlags train_data;
  ModelFlags train_model;
  TrainFlags train_flags;
  std::string train_config, train_out;
  auto* train_cmd = app.add_subcommand(
      "train", "Self-supervised training on the chosen objective");
  auto* pretrain_cmd = app.add_subcommand(
      "pretrain", "Self-supervised training plus the detached outcome probe, "
                  "reporting probe AUROC/AUPRC");
  for (auto* cmd : {train_cmd, pretrain_cmd}) {
    add_data_flags(cmd, train_data);
    add_model_flags(cmd, train_model);
    add_train_flags(cmd, train_flags);
    cmd->add_option("--config", train_config,
                    "JSON file {\"model\": {...}, \"train\": {...}}; flags override it");
    cmd->add_option("--out", train_out,
                    "Output directory (checkpoint.json, history.csv, metrics.json)")
        ->required();
  }

  std::string pretrained_path;
  std::vector<std::string> transfer;
  auto* finetune_cmd = app.add_subcommand(
      "finetune", "Supervised outcome training, optionally from transferred groups");
  add_data_flags(finetune_cmd, train_data);
  add_model_flags(finetune_cmd, train_model);
  add_train_flags(finetune_cmd, train_flags);
  finetune_cmd->add_option("--config", train_config,
                           "JSON file {\"model\": {...}, \"train\": {...}}");
  finetune_cmd->add_option("--pretrained", pretrained_path,
                           "Checkpoint supplying the architecture and transferred groups");
  finetune_cmd->add_option("--transfer", transfer,
                           "Groups copied from the pretrained checkpoint, e.g. tee")
      ->delimiter(',');
  finetune_cmd->add_option("--out", train_out, "Output directory")->required();

  // evaluate
  std::string eval_checkpoint, eval_split = "test", eval_out;
  std::optional<int> eval_samples;
  std::optional<std::uint64_t> eval_seed;
  DataFlags eval_data;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Metrics of a checkpoint on one split");
  evaluate_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  add_data_flags(evaluate_cmd, eval_data);
  evaluate_cmd->add_option("--split", eval_split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  evaluate_cmd->add_option("--samples", eval_samples,
                           "Integral nodes per interval [" +
                               std::to_string(kEvaluationSamples) + "]");
  evaluate_cmd->add_option("--seed", eval_seed,
                           "Seed of the integral nodes [checkpoint seed]");
  evaluate_cmd->add_option("--out", eval_out, "Metrics JSON file (stdout only if unset)");

  // aggregate / embed
  AnalysisFlags agg;
  auto* aggregate_cmd = app.add_subcommand(
      "aggregate", "Aggregate last-layer attention into mark co-occurrence and "
                   "influence matrices per group");
  aggregate_cmd->add_option("--checkpoint", agg.checkpoint, "Checkpoint file")->required();
  add_data_flags(aggregate_cmd, agg.data);
  aggregate_cmd->add_option("--split", agg.split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  aggregate_cmd->add_option("--group", agg.groups,
                            "Repeatable: all, label=<0|1>, ids=<a,b,...> or "
                            "predicted=<0|1> (outcome head at 0.5) [all]");
  aggregate_cmd->add_option("--epsilon", agg.epsilon,
                            "Influence threshold on rescaled attention; 1 means "
                            "above a uniform share [local choice]")
      ->capture_default_str();
  aggregate_cmd->add_option("--out", agg.out, "Output directory")->required();

  AnalysisFlags emb;
  auto* embed_cmd = app.add_subcommand("embed", "Export record embeddings as TSV");
  embed_cmd->add_option("--checkpoint", emb.checkpoint, "Checkpoint file")->required();
  add_data_flags(embed_cmd, emb.data);
  embed_cmd->add_option("--split", emb.split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  embed_cmd->add_option("--out", emb.out, "TSV file")->required();

  KnnFlags knn;
  auto* knn_cmd = app.add_subcommand(
      "knnps", "Nearest-neighbour pattern similarity of exported embeddings");
  knn_cmd->add_option("--embeddings", knn.embeddings, "TSV from `embed`")->required();
  add_data_flags(knn_cmd, knn.data);
  knn_cmd->add_option("--k", knn.k, "Neighbours per positive record")->capture_default_str();
  knn_cmd->add_option("--out", knn.out, "JSON file with the per-record breakdown");

  ConvertFlags conv;
  auto* convert_cmd = app.add_subcommand(
      "convert", "Convert published corpus exports into event/observation files");
  convert_cmd->add_option("format", conv.format,
                          "hawkes-json, multilabel-json, physionet2012 or physionet2019")
      ->required()
      ->check(CLI::IsMember({"hawkes-json", "multilabel-json", "physionet2012",
                             "physionet2019"}));
  convert_cmd->add_option("--input", conv.inputs, "Input files or directories");
  convert_cmd->add_option("--train", conv.train, "multilabel-json: training split");
  convert_cmd->add_option("--validation", conv.validation,
                          "multilabel-json: validation split");
  convert_cmd->add_option("--test", conv.test, "multilabel-json: test split");
  convert_cmd->add_option("--num-marks", conv.num_marks, "multilabel-json: mark count");
  convert_cmd->add_option("--variables", conv.variables,
                          "physionet: lab variables kept, comma separated")
      ->delimiter(',');
  convert_cmd->add_option("--statics", conv.statics,
                          "physionet2012: descriptors read at time zero "
                          "[Age,Gender,Height,ICUType,Weight]")
      ->delimiter(',');
  convert_cmd->add_option("--outcomes", conv.outcomes, "physionet2012: outcomes file");
  convert_cmd->add_option("--patterns", conv.patterns,
                          "physionet: measurement patterns kept as marks")
      ->capture_default_str();
  convert_cmd->add_option("--bin-width", conv.bin_width, "physionet: pattern bin width, hours")
      ->capture_default_str();
  convert_cmd->add_flag("--contained", conv.contained,
                        "physionet: mark every pattern contained in a bin instead of "
                        "the exact match");
  convert_cmd->add_option("--seed", conv.seed, "physionet: split seed (70/15/15)")
      ->capture_default_str();
  convert_cmd->add_option("--max-events", conv.max_events, "Most recent events kept")
      ->capture_default_str();
  convert_cmd->add_option("--out", conv.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (sim_hawkes->parsed()) return run_simulate_hawkes(hawkes);
    if (sim_ehr->parsed()) return run_simulate_ehr(ehr);

    if (train_cmd->parsed() || pretrain_cmd->parsed()) {
      const Dataset data = load_data(train_data);
      const Configs c = resolve_configs(train_config, train_model, train_flags, data);
      Checkpoint ckpt;
      if (pretrain_cmd->parsed()) {
        auto [trained, probe] = train_selfsupervised_with_probe(data, c.model, c.train);
        ckpt = std::move(trained);
        if (!probe.available) {
          std::cerr << "note: no labelled held-out records, probe not evaluated"
                    << std::endl;
        }
      } else {
        ckpt = train(data, c.model, c.train);
      }
      write_run(ckpt, data, train_out);
      return 0;
    }

    if (finetune_cmd->parsed()) {
      std::optional<Checkpoint> pretrained;
      if (!pretrained_path.empty()) pretrained = load_checkpoint(pretrained_path);
      const Dataset data = load_data(
          train_data, pretrained ? std::optional<MarkMode>(pretrained->model.config.mode)
                                 : std::nullopt);
      const Configs c = resolve_configs(
          train_config, train_model, train_flags, data,
          pretrained ? std::optional<ModelConfig>(pretrained->model.config) : std::nullopt);
      FinetuneOptions options;
      options.model = c.model;
      options.transfer = {transfer.begin(), transfer.end()};
      const Checkpoint ckpt = finetune_supervised(
          data, pretrained ? &*pretrained : nullptr, options, c.train);
      write_run(ckpt, data, train_out);
      return 0;
    }

    if (evaluate_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(eval_checkpoint);
      const Dataset data = load_data(eval_data, ckpt.model.config.mode);
      const auto records = select_split(data, eval_split);
      if (records.empty()) throw AnalysisError("split '" + eval_split + "' is empty");
      Json out;
      out["fingerprint"] = ckpt.fingerprint;
      out["seed"] = ckpt.train.seed;
      out["checkpoint"] = eval_checkpoint;
      out["task"] = ckpt.task;
      out["objective"] = to_string(ckpt.model.config.objective);
      out["split"] = eval_split;
      out["records"] = records.size();
      if (ckpt.task == kSupervisedTask) {
        out["outcome"] = outcome_metrics(ckpt.model, "classifier", records);
      } else {
        const Json obj = objective_metrics(
            ckpt.model, records, eval_samples.value_or(kEvaluationSamples),
            derive_seed(eval_seed.value_or(ckpt.train.seed), 0xe7a1));
        for (const auto& [key, value] : obj.items()) out[key] = value;
        out["next_mark"] = next_mark_metrics(ckpt.model, records);
        if (ckpt.train.train_probe && data.has_labels()) {
          out["probe"] = outcome_metrics(ckpt.model, "probe", records);
        }
      }
      if (!eval_out.empty()) write_json(eval_out, out);
      std::cout << out.dump(2) << std::endl;
      return 0;
    }

    if (aggregate_cmd->parsed()) return run_aggregate(agg);
    if (embed_cmd->parsed()) return run_embed(emb);
    if (knn_cmd->parsed()) return run_knnps(knn);
    if (convert_cmd->parsed()) return run_convert(conv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return static_cast<int>(ExitCode::kUsage);
  }
  return static_cast<int>(ExitCode::kUsage);
}
