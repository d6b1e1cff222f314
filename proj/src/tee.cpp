#include "ntpp/tee.hpp"

#include "ntpp/error.hpp"
#include "ntpp/layers.hpp"

#include <cmath>

namespace ntpp {

void TeeConfig::validate() const {
  if (num_marks < 1) throw ConfigError("tee: num_marks must be >= 1");
  if (d_emb < 1 || d_time < 1) throw ConfigError("tee: widths must be positive");
  if (d_time % 2 != 0) throw ConfigError("tee: d_time must be even");
  if (!(time_scale > 0.0)) throw ConfigError("tee: time scale must be positive");
  if (n_layers < 1 || n_heads < 1) {
    throw ConfigError("tee: n_layers and n_heads must be positive");
  }
  if (time_mode == TimeMode::kSum && d_emb != d_time) {
    throw ConfigError("tee: summed time encoding needs d_emb == d_time");
  }
  if (shift < 0) throw ConfigError("tee: masking shift must be >= 0");
  if (d_model() % n_heads != 0) {
    throw ConfigError("tee: d_model " + std::to_string(d_model()) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  }
}

Vector time_encode(double t, int d_time, double time_scale) {
  Vector out(d_time);
  const double dt = static_cast<double>(d_time);
  for (int d = 1; d <= d_time; ++d) {
    if (d % 2 == 1) {
      out(d - 1) = std::cos(t / std::pow(time_scale, (d - 1) / dt));
    } else {
      out(d - 1) = std::sin(t / std::pow(time_scale, d / dt));
    }
  }
  return out;
}

Matrix time_encode(std::span<const double> times, int d_time,
                   double time_scale) {
  Matrix out(static_cast<Eigen::Index>(times.size()), d_time);
  for (std::size_t j = 0; j < times.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) =
        time_encode(times[j], d_time, time_scale).transpose();
  }
  return out;
}

BoolMatrix build_mask(Eigen::Index length, int shift) {
  BoolMatrix visible(length, length);
  for (Eigen::Index j = 0; j < length; ++j) {
    for (Eigen::Index k = 0; k < length; ++k) {
      visible(j, k) = k + shift <= j;
    }
  }
  return visible;
}

Matrix EncodedHistory::mean_attention(int layer) const {
  if (attention.empty()) {
    return Matrix();
  }
  const auto& heads =
      attention.at(layer < 0 ? attention.size() - 1 : static_cast<std::size_t>(layer));
  Matrix out = Matrix::Zero(heads.front().rows(), heads.front().cols());
  for (const Matrix& a : heads) {
    out += a;
  }
  return out / static_cast<double>(heads.size());
}

void add_tee_parameters(ParameterStore& store, const TeeConfig& cfg,
                        std::mt19937_64& rng) {
  cfg.validate();
  const std::string group = "tee";
  const Eigen::Index d = cfg.d_model();
  store.add("tee.emb", group, glorot(cfg.num_marks, cfg.d_emb, rng));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "tee.l" + std::to_string(l);
    add_layer_norm(store, p + ".ln1", group, d);
    add_linear(store, p + ".q", group, d, d, rng);
    add_linear(store, p + ".k", group, d, d, rng);
    add_linear(store, p + ".v", group, d, d, rng);
    store.add(p + ".o.w", group, glorot(d, d, rng));
    add_layer_norm(store, p + ".ln2", group, d);
    add_mlp(store, p + ".ffn", group, {d, cfg.ffn_width(), d}, rng);
  }
  add_layer_norm(store, "tee.ln_f", group, d);
}

EncodedHistory encode_events(Graph& g, const EventSequence& seq,
                             const TeeConfig& cfg) {
  cfg.validate();
  if (seq.num_marks() != cfg.num_marks) {
    throw ConfigError("tee: sequence has " + std::to_string(seq.num_marks()) +
                      " marks, encoder expects " + std::to_string(cfg.num_marks));
  }
  const auto length = static_cast<Eigen::Index>(seq.size());
  const Var emb = g.param("tee.emb");
  if (emb.rows() != cfg.num_marks || emb.cols() != cfg.d_emb) {
    throw ConfigError("tee: embedding matrix shape does not match config");
  }

  const Var marks = g.constant(seq.mark_matrix());
  const Var mark_emb = matmul(marks, emb);
  const Var time_emb =
      g.constant(time_encode(seq.times, cfg.d_time, cfg.time_scale));

  Var full;
  Var query_stream;
  if (cfg.time_mode == TimeMode::kConcatenate) {
    full = hcat({mark_emb, time_emb});
    query_stream =
        cfg.shift == 0
            ? full
            : hcat({g.constant(Matrix::Zero(length, cfg.d_emb)), time_emb});
  } else {
    full = add(mark_emb, time_emb);
    query_stream = cfg.shift == 0 ? full : time_emb;
  }

  EncodedHistory out;
  out.visible = build_mask(length, cfg.shift);
  const int heads = cfg.n_heads;
  const Eigen::Index d_head = cfg.d_model() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));

  Var kv_stream = full;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "tee.l" + std::to_string(l);
    const Var qn = layer_norm(g, p + ".ln1", query_stream);
    const Var kvn = cfg.shift == 0 && l == 0 ? qn : layer_norm(g, p + ".ln1", kv_stream);
    const Var q = linear(g, p + ".q", qn);
    const Var k = linear(g, p + ".k", kvn);
    const Var v = linear(g, p + ".v", kvn);
    std::vector<Var> head_out;
    std::vector<Matrix> head_attn;
    for (int h = 0; h < heads; ++h) {
      const Var qh = slice_cols(q, h * d_head, d_head);
      const Var kh = slice_cols(k, h * d_head, d_head);
      const Var vh = slice_cols(v, h * d_head, d_head);
      const Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
      const Var attn = masked_softmax_rows(scores, out.visible);
      head_attn.push_back(attn.value());
      head_out.push_back(matmul(attn, vh));
    }
    out.attention.push_back(std::move(head_attn));
    // No bias: a query with no visible key contributes exactly zero.
    const Var mixed = matmul(hcat(head_out), g.param(p + ".o.w"));
    const Var z = add(query_stream, mixed);
    const Var ffn = mlp(g, p + ".ffn", layer_norm(g, p + ".ln2", z), 2);
    query_stream = add(z, ffn);
    kv_stream = query_stream;
  }
  out.hidden = layer_norm(g, "tee.ln_f", query_stream);
  return out;
}

}  // namespace ntpp
