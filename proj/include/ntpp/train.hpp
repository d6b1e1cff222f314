#pragma once

// Optimisation loop (Adam + cosine annealing + early stopping), the
// detached outcome probe, transfer-and-freeze fine-tuning, evaluation
// helpers and checkpoint files.

#include "ntpp/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ntpp {

struct TrainConfig {
  double learning_rate = 3e-3;
  double min_learning_rate = 0.0;
  int batch_size = 4;
  int epochs = 50;
  int period = 0;  // cosine period in epochs; 0 means `epochs`
  std::uint64_t seed = 0;
  std::set<std::string> freeze;
  int patience = 10;  // epochs without validation improvement; 0 disables
  int mc_samples = kTrainingSamples;
  bool train_probe = true;
  // Called after every epoch (progress reporting).
  std::function<void(int epoch, double train_loss, double validation_loss)>
      on_epoch;

  void validate() const;
};

Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);

// lr(epoch) = lr_min + (lr0 - lr_min) (1 + cos(pi * epoch / period)) / 2.
double cosine_learning_rate(double lr0, double lr_min, int epoch, int period);

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterStore& store, const Gradients& grads, double lr,
            const std::set<std::string>& frozen_groups);

 private:
  double beta1_, beta2_, eps_;
  long steps_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

inline constexpr const char* kSelfSupervisedTask = "self-supervised";
inline constexpr const char* kSupervisedTask = "supervised";

struct Checkpoint {
  Model model;
  std::string task = kSelfSupervisedTask;
  TrainConfig train;
  std::string fingerprint;
  std::vector<EpochRecord> history;
  Json metrics = Json::object();
};

// FNV-1a 64 over the canonical JSON of both configs, as 16 hex digits.
std::string config_fingerprint(const ModelConfig& model, const TrainConfig& train);
std::string json_fingerprint(const Json& j);

// Self-supervised training on the configured objective. When the dataset
// has labels and `train.train_probe` is set, the outcome probe is trained
// alongside on gradient-stopped record embeddings.
Checkpoint train(const Dataset& data, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg);

struct ProbeReport {
  bool available = false;
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t records = 0;
};

// `train` followed by probe evaluation on the test split (validation split
// when the test split is empty).
std::pair<Checkpoint, ProbeReport> train_selfsupervised_with_probe(
    const Dataset& data, const ModelConfig& model_cfg,
    const TrainConfig& train_cfg);

struct FinetuneOptions {
  std::set<std::string> transfer;  // groups copied from the pretrained model
  ModelConfig model;               // receiving architecture
};

// Trains DAM (and any non-frozen group) plus the classifier head with binary
// cross-entropy on the outcome labels. Transferred groups must match the
// receiving model shape for shape, otherwise TransferError.
Checkpoint finetune_supervised(const Dataset& data, const Checkpoint* pretrained,
                               const FinetuneOptions& options,
                               const TrainConfig& train_cfg);

// ---- evaluation ----

struct ObjectiveSummary {
  double loss_per_event = 0.0;
  double ll_per_event = 0.0;  // NaN for the auto-encoder
  std::size_t events = 0;
};

ObjectiveSummary evaluate_objective(const Model& model,
                                    const std::vector<const Record*>& records,
                                    int samples, std::uint64_t seed);

// Per-event next-mark scores and 0/1 targets for events 2..L of each record.
struct MarkPredictions {
  Matrix scores;
  Matrix targets;
};
MarkPredictions collect_next_marks(const Model& model,
                                   const std::vector<const Record*>& records);

// Outcome probabilities from a head for labelled records (labels returned
// alongside).
struct OutcomePredictions {
  std::vector<double> scores;
  std::vector<int> labels;
};
OutcomePredictions collect_outcomes(const Model& model, const std::string& head,
                                    const std::vector<const Record*>& records);

// Time-averaged intensity (summed over marks) across all inter-event
// intervals of the records, integrated with the trapezoid rule.
double mean_intensity(const Model& model,
                      const std::vector<const Record*>& records);

// Record embeddings [h_L, y_L] (or pooled), one row per record.
Matrix collect_embeddings(const Model& model,
                          const std::vector<const Record*>& records);

// Head-averaged attention of the last TEE layer for one record.
Matrix last_layer_attention(const Model& model, const Record& record);

// ---- files ----

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_history_csv(const Checkpoint& ckpt, const std::filesystem::path& path);

}  // namespace ntpp
