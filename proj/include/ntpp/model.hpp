#pragma once

// Full network: TEE and/or DAM encoders, the intensity decoder or mark head
// for the chosen objective, plus the outcome probe and classifier heads.
//
// Parameter groups: "tee", "dam", "decoder" (per-mark intensity),
// "ground" (one-mark intensity of the marked objective), "mark_head",
// "probe" (detached outcome probe), "classifier" (supervised head).

#include "ntpp/dam.hpp"
#include "ntpp/decoder.hpp"
#include "ntpp/tee.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace ntpp {

using Json = nlohmann::ordered_json;

enum class Pooling { kLast, kMean };

struct ModelConfig {
  MarkMode mode = MarkMode::kMultiClass;
  int num_marks = 1;
  Objective objective = Objective::kPpMultiClass;
  bool use_tee = true;
  bool use_dam = false;
  TeeConfig tee;
  DamConfig dam;
  int head_hidden = 16;  // hidden width of probe / classifier MLPs
  Pooling pooling = Pooling::kLast;

  // Width of [h_j, y_j].
  int state_width() const;
  void validate() const;
};

Json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const Json& j);

struct Model {
  ModelConfig config;
  ParameterStore params;
};

// Glorot-initialised parameters for every group the config needs.
Model build_model(const ModelConfig& cfg, std::uint64_t seed);

struct Forward {
  Var states;  // L x state_width: rows [h_j, y_j]
  EncodedHistory tee;
  StateTrack dam;
};

Forward encode_record(Graph& g, const Model& model, const Record& record);

// Self-supervised objective for one record.
LossReport objective_loss(Graph& g, const Model& model, const Record& record,
                          const Forward& fwd, const Integration& integration);

// Next-mark scores for events 2..L of the record.
Matrix next_mark_scores(Graph& g, const Model& model, const Record& record,
                        const Forward& fwd);

// Record embedding used by the probe and classifier (1 x state_width):
// the last row [h_L, y_L], or the mean over rows with Pooling::kMean.
Var record_embedding(const Forward& fwd, Pooling pooling);

// Logit of the outcome from a head ("probe" or "classifier").
Var outcome_logit(Graph& g, const std::string& head, const Var& embedding);

// Binary cross-entropy with logits for a single target.
Var bce_with_logit(const Var& logit, double target);

}  // namespace ntpp
