#include "ntpp/model.hpp"

#include "ntpp/error.hpp"
#include "ntpp/layers.hpp"

namespace ntpp {

int ModelConfig::state_width() const {
  return (use_tee ? tee.d_model() : 0) + (use_dam ? dam.d_state() : 0);
}

void ModelConfig::validate() const {
  if (!use_tee && !use_dam) {
    throw ConfigError("model: at least one of TEE and DAM must be enabled");
  }
  if (num_marks < 1) throw ConfigError("model: num_marks must be >= 1");
  if (use_tee) {
    if (tee.num_marks != num_marks) {
      throw ConfigError("model: TEE mark count differs from model mark count");
    }
    tee.validate();
  }
  if (use_dam) dam.validate();
  if (head_hidden < 1) throw ConfigError("model: head_hidden must be >= 1");
  if (objective == Objective::kPpMultiLabel && mode != MarkMode::kMultiLabel) {
    throw ConfigError("model: pp-ml needs multi-label data");
  }
  if (objective == Objective::kPpMultiClass && mode != MarkMode::kMultiClass) {
    throw ConfigError("model: pp-mc needs multi-class data");
  }
}

Json to_json(const ModelConfig& cfg) {
  Json j;
  j["mode"] = to_string(cfg.mode);
  j["num_marks"] = cfg.num_marks;
  j["objective"] = to_string(cfg.objective);
  j["use_tee"] = cfg.use_tee;
  j["use_dam"] = cfg.use_dam;
  j["tee"] = {{"d_emb", cfg.tee.d_emb},
              {"d_time", cfg.tee.d_time},
              {"time_scale", cfg.tee.time_scale},
              {"n_layers", cfg.tee.n_layers},
              {"n_heads", cfg.tee.n_heads},
              {"time_mode", cfg.tee.time_mode == TimeMode::kSum ? "sum" : "concat"},
              {"shift", cfg.tee.shift},
              {"d_ff", cfg.tee.d_ff}};
  j["dam"] = {{"num_variables", cfg.dam.num_variables},
              {"d_time", cfg.dam.d_time},
              {"time_scale", cfg.dam.time_scale},
              {"d_hidden", cfg.dam.d_hidden},
              {"d_hprime", cfg.dam.d_hprime},
              {"d_gprime", cfg.dam.d_gprime},
              {"d_prod", cfg.dam.d_prod},
              {"n_heads", cfg.dam.n_heads},
              {"d_h", cfg.dam.d_h},
              {"d_g", cfg.dam.d_g},
              {"num_statics", cfg.dam.num_statics},
              {"d_static", cfg.dam.d_static}};
  j["head_hidden"] = cfg.head_hidden;
  j["pooling"] = cfg.pooling == Pooling::kMean ? "mean" : "last";
  return j;
}

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig cfg;
  try {
    if (j.contains("mode")) cfg.mode = parse_mark_mode(j.at("mode").get<std::string>());
    read(j, "num_marks", cfg.num_marks);
    if (j.contains("objective")) {
      cfg.objective = parse_objective(j.at("objective").get<std::string>());
    }
    read(j, "use_tee", cfg.use_tee);
    read(j, "use_dam", cfg.use_dam);
    if (j.contains("tee")) {
      const Json& t = j.at("tee");
      read(t, "d_emb", cfg.tee.d_emb);
      read(t, "d_time", cfg.tee.d_time);
      read(t, "time_scale", cfg.tee.time_scale);
      read(t, "n_layers", cfg.tee.n_layers);
      read(t, "n_heads", cfg.tee.n_heads);
      read(t, "shift", cfg.tee.shift);
      read(t, "d_ff", cfg.tee.d_ff);
      if (t.contains("time_mode")) {
        const auto mode = t.at("time_mode").get<std::string>();
        if (mode != "sum" && mode != "concat") {
          throw ConfigError("tee.time_mode must be 'sum' or 'concat'");
        }
        cfg.tee.time_mode = mode == "sum" ? TimeMode::kSum : TimeMode::kConcatenate;
      }
    }
    if (j.contains("dam")) {
      const Json& d = j.at("dam");
      read(d, "num_variables", cfg.dam.num_variables);
      read(d, "d_time", cfg.dam.d_time);
      read(d, "time_scale", cfg.dam.time_scale);
      read(d, "d_hidden", cfg.dam.d_hidden);
      read(d, "d_hprime", cfg.dam.d_hprime);
      read(d, "d_gprime", cfg.dam.d_gprime);
      read(d, "d_prod", cfg.dam.d_prod);
      read(d, "n_heads", cfg.dam.n_heads);
      read(d, "d_h", cfg.dam.d_h);
      read(d, "d_g", cfg.dam.d_g);
      read(d, "num_statics", cfg.dam.num_statics);
      read(d, "d_static", cfg.dam.d_static);
    }
    read(j, "head_hidden", cfg.head_hidden);
    if (j.contains("pooling")) {
      const auto p = j.at("pooling").get<std::string>();
      if (p != "mean" && p != "last") {
        throw ConfigError("pooling must be 'last' or 'mean'");
      }
      cfg.pooling = p == "mean" ? Pooling::kMean : Pooling::kLast;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  cfg.tee.num_marks = cfg.num_marks;
  return cfg;
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model model{cfg, {}};
  std::mt19937_64 rng(seed);
  ParameterStore& store = model.params;
  if (cfg.use_tee) add_tee_parameters(store, cfg.tee, rng);
  if (cfg.use_dam) add_dam_parameters(store, cfg.dam, rng);
  const Eigen::Index width = cfg.state_width();
  switch (cfg.objective) {
    case Objective::kPpMultiClass:
    case Objective::kPpMultiLabel:
      add_decoder_parameters(store, "decoder", width, cfg.num_marks, rng);
      break;
    case Objective::kPpMarked:
      add_decoder_parameters(store, "ground", width, 1, rng);
      add_linear(store, "mark_head", "mark_head", width, cfg.num_marks, rng);
      break;
    case Objective::kAutoEncoder:
      add_linear(store, "mark_head", "mark_head", width, cfg.num_marks, rng);
      break;
  }
  for (const char* head : {"probe", "classifier"}) {
    add_mlp(store, head, head, {width, cfg.head_hidden, 1}, rng);
  }
  return model;
}

Forward encode_record(Graph& g, const Model& model, const Record& record) {
  const ModelConfig& cfg = model.config;
  Forward fwd;
  std::vector<Var> parts;
  if (cfg.use_tee) {
    fwd.tee = encode_events(g, record.events, cfg.tee);
    parts.push_back(fwd.tee.hidden);
  }
  if (cfg.use_dam) {
    fwd.dam = encode_observations(g, record.observations, record.events.times,
                                  cfg.dam);
    parts.push_back(fwd.dam.at_events);
  }
  fwd.states = parts.size() == 1 ? parts.front() : hcat(parts);
  return fwd;
}

LossReport objective_loss(Graph& g, const Model& model, const Record& record,
                          const Forward& fwd, const Integration& integration) {
  const EventSequence& seq = record.events;
  switch (model.config.objective) {
    case Objective::kPpMultiClass:
      return loss_pp_multiclass(g, seq, decode_intensity(g, "decoder", fwd.states),
                                integration);
    case Objective::kPpMultiLabel:
      return loss_pp_multilabel(g, seq, decode_intensity(g, "decoder", fwd.states),
                                integration);
    case Objective::kPpMarked:
      return loss_pp_marked(g, seq, linear(g, "mark_head", fwd.states),
                            decode_intensity(g, "ground", fwd.states),
                            integration);
    case Objective::kAutoEncoder:
      return loss_ae(g, seq, linear(g, "mark_head", fwd.states));
  }
  throw ConfigError("unknown objective");
}

Matrix next_mark_scores(Graph& g, const Model& model, const Record& record,
                        const Forward& fwd) {
  const Objective objective = model.config.objective;
  if (objective == Objective::kPpMultiClass ||
      objective == Objective::kPpMultiLabel) {
    const IntensityState state = decode_intensity(g, "decoder", fwd.states);
    return predict_next_marks(record.events, objective, &state, nullptr);
  }
  const Var logits = linear(g, "mark_head", fwd.states);
  return predict_next_marks(record.events, objective, nullptr, &logits);
}

Var record_embedding(const Forward& fwd, Pooling pooling) {
  const Eigen::Index length = fwd.states.rows();
  if (pooling == Pooling::kLast) return slice_rows(fwd.states, length - 1, 1);
  Tape& tape = *fwd.states.tape();
  const Var weights =
      tape.constant(Matrix::Constant(1, length, 1.0 / static_cast<double>(length)));
  return matmul(weights, fwd.states);
}

Var outcome_logit(Graph& g, const std::string& head, const Var& embedding) {
  return mlp(g, head, embedding, 2);
}

Var bce_with_logit(const Var& logit, double target) {
  // -[y log s(x) + (1-y) log(1-s(x))] = y softplus(-x) + (1-y) softplus(x)
  return add(scale(softplus(neg(logit)), target),
             scale(softplus(logit), 1.0 - target));
}

}  // namespace ntpp
