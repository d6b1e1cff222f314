#include "ntpp/train.hpp"

#include "ntpp/error.hpp"
#include "ntpp/metrics.hpp"
#include "ntpp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

namespace ntpp {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
  if (!(min_learning_rate >= 0.0) || min_learning_rate > learning_rate) {
    throw ConfigError("train: min learning rate must lie in [0, learning rate]");
  }
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (period < 0) throw ConfigError("train: cosine period must be >= 0");
  if (patience < 0) throw ConfigError("train: patience must be >= 0");
  if (mc_samples < 1) throw ConfigError("train: mc_samples must be >= 1");
}

Json to_json(const TrainConfig& cfg) {
  Json j;
  j["learning_rate"] = cfg.learning_rate;
  j["min_learning_rate"] = cfg.min_learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["period"] = cfg.period;
  j["seed"] = cfg.seed;
  j["freeze"] = std::vector<std::string>(cfg.freeze.begin(), cfg.freeze.end());
  j["patience"] = cfg.patience;
  j["mc_samples"] = cfg.mc_samples;
  j["train_probe"] = cfg.train_probe;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig cfg;
  try {
    auto read = [&](const char* key, auto& out) {
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    read("learning_rate", cfg.learning_rate);
    read("min_learning_rate", cfg.min_learning_rate);
    read("batch_size", cfg.batch_size);
    read("epochs", cfg.epochs);
    read("period", cfg.period);
    read("seed", cfg.seed);
    read("patience", cfg.patience);
    read("mc_samples", cfg.mc_samples);
    read("train_probe", cfg.train_probe);
    if (j.contains("freeze")) {
      for (const auto& g : j.at("freeze")) cfg.freeze.insert(g.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return cfg;
}

double cosine_learning_rate(double lr0, double lr_min, int epoch, int period) {
  if (period <= 0) return lr0;
  const double phase = std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                static_cast<double>(period));
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + phase);
}

void Adam::step(ParameterStore& store, const Gradients& grads, double lr,
                const std::set<std::string>& frozen_groups) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (auto& [name, param] : store.items()) {
    if (frozen_groups.count(param.group)) continue;
    const auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Matrix& g = it->second;
    auto [mi, fresh_m] = m_.try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
    auto [vi, fresh_v] = v_.try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
    (void)fresh_m;
    (void)fresh_v;
    Matrix& m = mi->second;
    Matrix& v = vi->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.value.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

std::string config_fingerprint(const ModelConfig& model, const TrainConfig& train) {
  Json j;
  j["model"] = to_json(model);
  j["train"] = to_json(train);
  return json_fingerprint(j);
}

std::string json_fingerprint(const Json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

namespace {

enum class Task { kSelfSupervised, kSupervised };

std::vector<const Record*> labelled(const std::vector<const Record*>& records) {
  std::vector<const Record*> out;
  for (const Record* r : records) {
    if (r->observations.label) out.push_back(r);
  }
  return out;
}

void check_frozen_groups(const ParameterStore& store,
                         const std::set<std::string>& frozen) {
  const std::set<std::string> groups = store.groups();
  for (const std::string& g : frozen) {
    if (!groups.count(g)) {
      throw ConfigError("train: cannot freeze unknown parameter group '" + g + "'");
    }
  }
}

Integration training_integration(const TrainConfig& cfg, int epoch,
                                 std::size_t record) {
  return {Quadrature::kMonteCarlo, cfg.mc_samples,
          derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1, record)};
}

double supervised_loss(const Model& model, const std::vector<const Record*>& records) {
  double total = 0.0;
  std::size_t n = 0;
  for (const Record* r : records) {
    if (!r->observations.label) continue;
    Graph g(model.params);
    const Forward fwd = encode_record(g, model, *r);
    const Var logit =
        outcome_logit(g, "classifier", record_embedding(fwd, model.config.pooling));
    total += bce_with_logit(logit, *r->observations.label).scalar();
    ++n;
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

// Shared optimisation loop. Batches are normalised per event for the
// self-supervised objective and per record for outcome losses.
void fit(Model& model, const Dataset& data, const TrainConfig& cfg, Task task,
         std::vector<EpochRecord>& history) {
  cfg.validate();
  check_frozen_groups(model.params, cfg.freeze);
  std::vector<const Record*> train_set = data.split(Split::kTrain);
  std::vector<const Record*> validation = data.split(Split::kValidation);
  if (task == Task::kSupervised) {
    train_set = labelled(train_set);
    validation = labelled(validation);
  }
  if (train_set.empty()) {
    throw ConfigError(task == Task::kSupervised
                          ? "train: no labelled training records"
                          : "train: training split is empty");
  }
  const bool probe = task == Task::kSelfSupervised && cfg.train_probe &&
                     !labelled(train_set).empty();
  const int period = cfg.period > 0 ? cfg.period : cfg.epochs;

  Adam adam;
  ParameterStore best = model.params;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_learning_rate(cfg.learning_rate,
                                           cfg.min_learning_rate, epoch, period);
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    double epoch_units = 0.0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      double units = 0.0;
      std::size_t probed = 0;
      for (std::size_t b = start; b < stop; ++b) {
        const Record& r = *train_set[order[b]];
        units += task == Task::kSelfSupervised ? static_cast<double>(r.events.size()) : 1.0;
        if (r.observations.label) ++probed;
      }

      Gradients acc;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t index = order[b];
        const Record& r = *train_set[index];
        Graph g(model.params, cfg.freeze);
        const Forward fwd = encode_record(g, model, r);
        Var loss;
        double value = 0.0;
        if (task == Task::kSelfSupervised) {
          const LossReport report = objective_loss(
              g, model, r, fwd, training_integration(cfg, epoch, index));
          value = report.total.scalar();
          loss = scale(report.total, 1.0 / units);
          if (probe && r.observations.label) {
            const Var emb = detach(record_embedding(fwd, model.config.pooling));
            const Var bce =
                bce_with_logit(outcome_logit(g, "probe", emb), *r.observations.label);
            loss = add(loss, scale(bce, 1.0 / static_cast<double>(probed)));
          }
        } else {
          const Var logit = outcome_logit(g, "classifier",
                                          record_embedding(fwd, model.config.pooling));
          const Var bce = bce_with_logit(logit, *r.observations.label);
          value = bce.scalar();
          loss = scale(bce, 1.0 / units);
        }
        if (!std::isfinite(value) || !std::isfinite(loss.scalar())) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch starting at position " +
                               std::to_string(start) + " (record '" + r.events.id +
                               "')");
        }
        epoch_loss += value;
        g.backward(loss);
        for (auto& [name, grad] : g.gradients()) {
          auto it = acc.find(name);
          if (it == acc.end()) {
            acc.emplace(name, std::move(grad));
          } else {
            it->second += grad;
          }
        }
      }
      epoch_units += units;
      for (const auto& [name, grad] : acc) {
        if (cfg.freeze.count(model.params.group(name)) && !grad.isZero(0.0)) {
          throw std::logic_error("frozen parameter '" + name + "' received a gradient");
        }
        if (!grad.allFinite()) {
          throw NumericalError("non-finite gradient for '" + name + "' at epoch " +
                               std::to_string(epoch));
        }
      }
      adam.step(model.params, acc, lr, cfg.freeze);
    }

    const double train_loss = epoch_loss / epoch_units;
    double validation_loss = train_loss;
    if (!validation.empty()) {
      validation_loss =
          task == Task::kSelfSupervised
              ? evaluate_objective(model, validation, cfg.mc_samples,
                                   derive_seed(cfg.seed, 0xe7a1))
                    .loss_per_event
              : supervised_loss(model, validation);
    }
    if (!std::isfinite(validation_loss)) {
      throw NumericalError("non-finite validation loss at epoch " +
                           std::to_string(epoch));
    }
    history.push_back({epoch, lr, train_loss, validation_loss});
    if (cfg.on_epoch) cfg.on_epoch(epoch, train_loss, validation_loss);

    if (validation_loss < best_loss) {
      best_loss = validation_loss;
      best = model.params;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }
  if (!history.empty()) model.params = std::move(best);
}

// Starts each mark's rate scale at its empirical rate on the training split
// (events after the first, per unit of observed time) divided by log 2, the
// unscaled intensity of an untrained decoder.
void initialise_rates(Model& model, const Dataset& data) {
  const Objective objective = model.config.objective;
  if (!has_intensity(objective)) return;
  const bool ground = objective == Objective::kPpMarked;
  const std::string name = ground ? "ground.log_rate" : "decoder.log_rate";
  Matrix& log_rate = model.params.value(name);
  Eigen::RowVectorXd counts = Eigen::RowVectorXd::Zero(log_rate.cols());
  double span = 0.0;
  for (const Record* r : data.split(Split::kTrain)) {
    const EventSequence& seq = r->events;
    if (seq.size() < 2) continue;
    span += seq.times.back() - seq.times.front();
    const Matrix marks = seq.mark_matrix();
    for (Eigen::Index j = 1; j < marks.rows(); ++j) {
      if (ground) {
        counts(0) += 1.0;
      } else {
        counts += marks.row(j);
      }
    }
  }
  if (!(span > 0.0)) return;
  for (Eigen::Index m = 0; m < log_rate.cols(); ++m) {
    log_rate(0, m) = std::log(std::max(counts(m), 0.5) / span / std::log(2.0));
  }
}

}  // namespace

Checkpoint train(const Dataset& data, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg) {
  validate(data);
  ModelConfig cfg = model_cfg;
  cfg.mode = data.mode;
  Checkpoint ckpt;
  ckpt.model = build_model(cfg, train_cfg.seed);
  initialise_rates(ckpt.model, data);
  ckpt.train = train_cfg;
  ckpt.fingerprint = config_fingerprint(cfg, train_cfg);
  fit(ckpt.model, data, train_cfg, Task::kSelfSupervised, ckpt.history);
  return ckpt;
}

std::pair<Checkpoint, ProbeReport> train_selfsupervised_with_probe(
    const Dataset& data, const ModelConfig& model_cfg,
    const TrainConfig& train_cfg) {
  Checkpoint ckpt = train(data, model_cfg, train_cfg);
  ProbeReport report;
  std::vector<const Record*> held_out = labelled(data.split(Split::kTest));
  if (held_out.empty()) held_out = labelled(data.split(Split::kValidation));
  if (train_cfg.train_probe && !held_out.empty()) {
    const OutcomePredictions pred = collect_outcomes(ckpt.model, "probe", held_out);
    const MetricSet m = binary_metrics(pred.scores, pred.labels);
    report.available = true;
    report.auroc = *m.auroc;
    report.auprc = *m.auprc;
    report.records = held_out.size();
    ckpt.metrics["probe"] = {{"auroc", report.auroc},
                             {"auprc", report.auprc},
                             {"records", report.records}};
  }
  return {std::move(ckpt), report};
}

Checkpoint finetune_supervised(const Dataset& data, const Checkpoint* pretrained,
                               const FinetuneOptions& options,
                               const TrainConfig& train_cfg) {
  validate(data);
  ModelConfig cfg = options.model;
  cfg.mode = data.mode;
  Model model = build_model(cfg, train_cfg.seed);

  if (!options.transfer.empty()) {
    if (pretrained == nullptr) {
      throw TransferError("transfer requested without a pretrained checkpoint");
    }
    const ParameterStore& source = pretrained->model.params;
    std::set<std::string> bad;
    std::ostringstream detail;
    for (const std::string& group : options.transfer) {
      const auto src_names = source.names_in(group);
      const auto dst_names = model.params.names_in(group);
      if (src_names.empty() || src_names != dst_names) {
        bad.insert(group);
        detail << " [" << group << ": parameter sets differ]";
        continue;
      }
      for (const std::string& name : src_names) {
        const Matrix& a = source.value(name);
        const Matrix& b = model.params.value(name);
        if (a.rows() != b.rows() || a.cols() != b.cols()) {
          bad.insert(group);
          detail << " [" << name << ": " << a.rows() << "x" << a.cols() << " vs "
                 << b.rows() << "x" << b.cols() << "]";
        }
      }
    }
    if (!bad.empty()) {
      std::string groups;
      for (const auto& g : bad) groups += (groups.empty() ? "" : ", ") + g;
      throw TransferError("incompatible parameter groups: " + groups + detail.str());
    }
    for (const std::string& group : options.transfer) {
      for (const std::string& name : source.names_in(group)) {
        model.params.value(name) = source.value(name);
      }
    }
  }

  Checkpoint ckpt;
  ckpt.model = std::move(model);
  ckpt.task = kSupervisedTask;
  ckpt.train = train_cfg;
  ckpt.fingerprint = config_fingerprint(cfg, train_cfg);
  if (pretrained != nullptr) ckpt.metrics["pretrained"] = pretrained->fingerprint;
  fit(ckpt.model, data, train_cfg, Task::kSupervised, ckpt.history);

  std::vector<const Record*> held_out = labelled(data.split(Split::kTest));
  if (!held_out.empty()) {
    const OutcomePredictions pred = collect_outcomes(ckpt.model, "classifier", held_out);
    const MetricSet m = binary_metrics(pred.scores, pred.labels);
    ckpt.metrics["supervised"] = {{"f1", *m.weighted_f1},
                                  {"auroc", *m.auroc},
                                  {"auprc", *m.auprc},
                                  {"records", held_out.size()}};
  }
  return ckpt;
}

ObjectiveSummary evaluate_objective(const Model& model,
                                    const std::vector<const Record*>& records,
                                    int samples, std::uint64_t seed) {
  ObjectiveSummary out;
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Graph g(model.params);
    const Forward fwd = encode_record(g, model, *records[i]);
    const Integration integration{Quadrature::kMonteCarlo, samples,
                                  derive_seed(seed, i)};
    const LossReport report = objective_loss(g, model, *records[i], fwd, integration);
    total += report.total.scalar();
    out.events += report.events;
  }
  if (out.events == 0) throw AnalysisError("evaluate: no events");
  out.loss_per_event = total / static_cast<double>(out.events);
  out.ll_per_event = has_intensity(model.config.objective)
                         ? -out.loss_per_event
                         : std::numeric_limits<double>::quiet_NaN();
  return out;
}

MarkPredictions collect_next_marks(const Model& model,
                                   const std::vector<const Record*>& records) {
  std::vector<Matrix> scores, targets;
  Eigen::Index rows = 0;
  for (const Record* r : records) {
    if (r->events.size() < 2) continue;
    Graph g(model.params);
    const Forward fwd = encode_record(g, model, *r);
    scores.push_back(next_mark_scores(g, model, *r, fwd));
    targets.push_back(r->events.mark_matrix().bottomRows(
        static_cast<Eigen::Index>(r->events.size()) - 1));
    rows += scores.back().rows();
  }
  MarkPredictions out;
  out.scores.resize(rows, model.config.num_marks);
  out.targets.resize(rows, model.config.num_marks);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.scores.middleRows(at, scores[i].rows()) = scores[i];
    out.targets.middleRows(at, scores[i].rows()) = targets[i];
    at += scores[i].rows();
  }
  return out;
}

OutcomePredictions collect_outcomes(const Model& model, const std::string& head,
                                    const std::vector<const Record*>& records) {
  OutcomePredictions out;
  for (const Record* r : records) {
    if (!r->observations.label) continue;
    Graph g(model.params);
    const Forward fwd = encode_record(g, model, *r);
    const Var logit =
        outcome_logit(g, head, record_embedding(fwd, model.config.pooling));
    out.scores.push_back(sigmoid_scalar(logit.scalar()));
    out.labels.push_back(*r->observations.label);
  }
  return out;
}

double mean_intensity(const Model& model,
                      const std::vector<const Record*>& records) {
  const Objective objective = model.config.objective;
  if (!has_intensity(objective)) {
    throw AnalysisError("mean intensity: objective has no intensity decoder");
  }
  const std::string prefix = objective == Objective::kPpMarked ? "ground" : "decoder";
  const Integration trapezoid{Quadrature::kTrapezoid, kEvaluationSamples, 0};
  double mass = 0.0, span = 0.0;
  for (const Record* r : records) {
    const EventSequence& seq = r->events;
    if (seq.size() < 2) continue;
    Graph g(model.params);
    const Forward fwd = encode_record(g, model, *r);
    const IntensityState state = decode_intensity(g, prefix, fwd.states);
    for (std::size_t j = 0; j + 1 < seq.size(); ++j) {
      const double width = seq.times[j + 1] - seq.times[j];
      for (int m = 0; m < state.num_marks(); ++m) {
        mass += integral_nonevent(state.at(static_cast<Eigen::Index>(j), m),
                                  width, trapezoid);
      }
      span += width;
    }
  }
  if (!(span > 0.0)) throw AnalysisError("mean intensity: no positive intervals");
  return mass / span;
}

Matrix collect_embeddings(const Model& model,
                          const std::vector<const Record*>& records) {
  Matrix out(static_cast<Eigen::Index>(records.size()), model.config.state_width());
  for (std::size_t i = 0; i < records.size(); ++i) {
    Graph g(model.params);
    const Forward fwd = encode_record(g, model, *records[i]);
    out.row(static_cast<Eigen::Index>(i)) =
        record_embedding(fwd, model.config.pooling).value();
  }
  return out;
}

Matrix last_layer_attention(const Model& model, const Record& record) {
  if (!model.config.use_tee) {
    throw AnalysisError("attention export needs a TEE model");
  }
  Graph g(model.params);
  return encode_events(g, record.events, model.config.tee).mean_attention();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Json j;
  j["format"] = "ntpp-checkpoint";
  j["version"] = 1;
  j["fingerprint"] = ckpt.fingerprint;
  j["task"] = ckpt.task;
  j["seed"] = ckpt.train.seed;
  j["model"] = to_json(ckpt.model.config);
  j["train"] = to_json(ckpt.train);
  Json params = Json::object();
  for (const auto& [name, p] : ckpt.model.params.items()) {
    Json data = Json::array();
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) data.push_back(p.value(r, c));
    }
    params[name] = {{"group", p.group},
                    {"rows", p.value.rows()},
                    {"cols", p.value.cols()},
                    {"data", std::move(data)}};
  }
  j["params"] = std::move(params);
  Json history = Json::array();
  for (const EpochRecord& e : ckpt.history) {
    history.push_back({{"epoch", e.epoch},
                       {"learning_rate", e.learning_rate},
                       {"train_loss", e.train_loss},
                       {"validation_loss", e.validation_loss}});
  }
  j["history"] = std::move(history);
  j["metrics"] = ckpt.metrics;

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << j.dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": not a checkpoint (" + e.what() + ")");
  }
  if (j.value("format", "") != "ntpp-checkpoint") {
    throw FormatError(path.string() + ": not a checkpoint");
  }
  Checkpoint ckpt;
  try {
    ckpt.model.config = model_config_from_json(j.at("model"));
    ckpt.train = train_config_from_json(j.at("train"));
    ckpt.fingerprint = j.at("fingerprint").get<std::string>();
    ckpt.task = j.value("task", std::string(kSelfSupervisedTask));
    for (const auto& [name, p] : j.at("params").items()) {
      const auto rows = p.at("rows").get<Eigen::Index>();
      const auto cols = p.at("cols").get<Eigen::Index>();
      const auto& data = p.at("data");
      if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw FormatError(path.string() + ": parameter '" + name +
                          "' has the wrong number of entries");
      }
      Matrix value(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          value(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
        }
      }
      ckpt.model.params.add(name, p.at("group").get<std::string>(), std::move(value));
    }
    for (const auto& e : j.at("history")) {
      ckpt.history.push_back({e.at("epoch").get<int>(),
                              e.at("learning_rate").get<double>(),
                              e.at("train_loss").get<double>(),
                              e.at("validation_loss").get<double>()});
    }
    if (j.contains("metrics")) ckpt.metrics = j.at("metrics");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed checkpoint (" + e.what() + ")");
  }
  return ckpt;
}

void save_history_csv(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  out << "# fingerprint " << ckpt.fingerprint << " seed " << ckpt.train.seed << "\n";
  out << "epoch,learning_rate,train_loss,validation_loss\n";
  for (const EpochRecord& e : ckpt.history) {
    out << e.epoch << ',' << e.learning_rate << ',' << e.train_loss << ','
        << e.validation_loss << '\n';
  }
}

}  // namespace ntpp
