#include "ntpp/dam.hpp"

#include "ntpp/error.hpp"
#include "ntpp/layers.hpp"
#include "ntpp/tee.hpp"

#include <cmath>

namespace ntpp {

void DamConfig::validate() const {
  if (num_variables < 1) throw ConfigError("dam: num_variables must be >= 1");
  if (d_time < 2 || d_time % 2 != 0) {
    throw ConfigError("dam: d_time must be even and positive");
  }
  if (!(time_scale > 0.0)) throw ConfigError("dam: time scale must be positive");
  if (d_hidden < 1 || d_hprime < 1 || d_gprime < 1 || d_prod < 1 ||
      n_heads < 1 || d_h < 1 || d_g < 1) {
    throw ConfigError("dam: all widths must be positive");
  }
  if (num_statics < 0 || (num_statics > 0 && d_static < 1)) {
    throw ConfigError("dam: invalid static embedding configuration");
  }
}

Matrix observation_inputs(const ObservationSet& obs, const DamConfig& cfg) {
  const auto p = static_cast<Eigen::Index>(obs.size());
  Matrix u = Matrix::Zero(p, cfg.d_input());
  for (Eigen::Index i = 0; i < p; ++i) {
    const Observation& o = obs.observations[static_cast<std::size_t>(i)];
    if (o.variable < 0 || o.variable >= cfg.num_variables) {
      throw VocabularyError("dam: variable " + std::to_string(o.variable) +
                            " outside the configured vocabulary");
    }
    u.row(i).head(cfg.d_time) =
        time_encode(o.time, cfg.d_time, cfg.time_scale).transpose();
    u(i, cfg.d_time + o.variable) = 1.0;
    u(i, cfg.d_input() - 1) = o.value;
  }
  return u;
}

Matrix static_inputs(const ObservationSet& obs, const DamConfig& cfg) {
  Matrix s = Matrix::Zero(1, 2 * cfg.num_statics);
  for (int i = 0; i < cfg.num_statics; ++i) {
    if (i < static_cast<int>(obs.statics.size()) && !std::isnan(obs.statics[i])) {
      s(0, 2 * i) = obs.statics[i];
      s(0, 2 * i + 1) = 1.0;
    }
  }
  return s;
}

std::vector<int> align_to_events(const ObservationSet& obs,
                                 std::span<const double> event_times) {
  std::vector<int> index(event_times.size(), -1);
  int p = -1;
  for (std::size_t j = 0; j < event_times.size(); ++j) {
    while (p + 1 < static_cast<int>(obs.size()) &&
           obs.observations[static_cast<std::size_t>(p + 1)].time <= event_times[j]) {
      ++p;
    }
    index[j] = p;
  }
  return index;
}

void add_dam_parameters(ParameterStore& store, const DamConfig& cfg,
                        std::mt19937_64& rng) {
  cfg.validate();
  const std::string group = "dam";
  const Eigen::Index ds = cfg.d_input();
  add_mlp(store, "dam.hprime", group, {ds, cfg.d_hidden, cfg.d_hprime}, rng);
  add_mlp(store, "dam.gprime", group, {cfg.d_hprime, cfg.d_hidden, cfg.d_gprime}, rng);
  store.add("dam.key", group, glorot(cfg.d_gprime + ds, cfg.d_prod, rng));
  store.add("dam.query", group, glorot(cfg.d_prod, cfg.n_heads, rng));
  add_mlp(store, "dam.h", group, {ds, cfg.d_hidden, cfg.d_h}, rng);
  add_mlp(store, "dam.g", group,
          {static_cast<Eigen::Index>(cfg.n_heads) * cfg.d_h, cfg.d_hidden, cfg.d_g},
          rng);
  if (cfg.num_statics > 0) {
    add_mlp(store, "dam.static", group,
            {2 * cfg.num_statics, cfg.d_hidden, cfg.d_static}, rng);
  }
}

Var set_summary(Graph& g, const DamConfig& cfg, const Var& inputs) {
  if (inputs.cols() != cfg.d_input()) {
    throw ConfigError("dam: observation width does not match config");
  }
  const Eigen::Index p = inputs.rows();
  Matrix running_mean = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    running_mean.row(i).head(i + 1).setConstant(1.0 / static_cast<double>(i + 1));
  }
  const Var h = mlp(g, "dam.hprime", inputs, 2);
  return mlp(g, "dam.gprime", matmul(g.constant(std::move(running_mean)), h), 2);
}

std::vector<Var> dam_attention(Graph& g, const DamConfig& cfg,
                               const Var& inputs) {
  const Eigen::Index p = inputs.rows();
  const Var summary = set_summary(g, cfg, inputs);
  const Var key = g.param("dam.key");
  const Var key_summary = slice_rows(key, 0, cfg.d_gprime);
  const Var key_element = slice_rows(key, cfg.d_gprime, cfg.d_input());
  const Var query = g.param("dam.query");
  // Scores split into a per-prefix part and a per-element part:
  // ([f'(U_p), u_k] W^K) w_q = f'(U_p) W^K_f w_q + u_k W^K_u w_q.
  const Var prefix_part = matmul(summary, matmul(key_summary, query));
  const Var element_part = matmul(inputs, matmul(key_element, query));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.d_prod));
  const BoolMatrix visible = build_mask(p, 0);
  std::vector<Var> out;
  for (int h = 0; h < cfg.n_heads; ++h) {
    const Var scores = scale(outer_sum(slice_cols(prefix_part, h, 1),
                                       slice_cols(element_part, h, 1)),
                             inv_sqrt);
    out.push_back(masked_softmax_rows(scores, visible));
  }
  return out;
}

StateTrack encode_observations(Graph& g, const ObservationSet& obs,
                               std::span<const double> event_times,
                               const DamConfig& cfg) {
  cfg.validate();
  StateTrack track;
  const auto length = static_cast<Eigen::Index>(event_times.size());
  Var dynamic;
  if (obs.size() == 0) {
    dynamic = g.constant(Matrix::Zero(length, cfg.d_g));
  } else {
    const Var inputs = g.constant(observation_inputs(obs, cfg));
    const std::vector<Var> attn = dam_attention(g, cfg, inputs);
    const Var values = mlp(g, "dam.h", inputs, 2);
    std::vector<Var> heads;
    for (const Var& a : attn) {
      track.attention.push_back(a.value());
      heads.push_back(matmul(a, values));
    }
    track.per_observation = mlp(g, "dam.g", hcat(heads), 2);
    const std::vector<int> index = align_to_events(obs, event_times);
    dynamic = gather_rows(track.per_observation, index);
  }
  if (cfg.num_statics > 0) {
    const Var embedded =
        mlp(g, "dam.static", g.constant(static_inputs(obs, cfg)), 2);
    const Var broadcast = matmul(g.constant(Matrix::Ones(length, 1)), embedded);
    track.at_events = hcat({dynamic, broadcast});
  } else {
    track.at_events = dynamic;
  }
  return track;
}

}  // namespace ntpp
