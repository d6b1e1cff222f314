#include "ntpp/layers.hpp"

namespace ntpp {

void add_linear(ParameterStore& store, const std::string& prefix,
                const std::string& group, Eigen::Index in, Eigen::Index out,
                std::mt19937_64& rng) {
  store.add(prefix + ".w", group, glorot(in, out, rng));
  store.add(prefix + ".b", group, Matrix::Zero(1, out));
}

Var linear(Graph& g, const std::string& prefix, const Var& x) {
  return add_row(matmul(x, g.param(prefix + ".w")), g.param(prefix + ".b"));
}

void add_mlp(ParameterStore& store, const std::string& prefix,
             const std::string& group, const std::vector<Eigen::Index>& widths,
             std::mt19937_64& rng) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    add_linear(store, prefix + "." + std::to_string(i), group, widths[i],
               widths[i + 1], rng);
  }
}

Var mlp(Graph& g, const std::string& prefix, const Var& x, std::size_t layers) {
  Var h = x;
  for (std::size_t i = 0; i < layers; ++i) {
    h = linear(g, prefix + "." + std::to_string(i), h);
    if (i + 1 < layers) {
      h = gelu(h);
    }
  }
  return h;
}

void add_layer_norm(ParameterStore& store, const std::string& prefix,
                    const std::string& group, Eigen::Index width) {
  store.add(prefix + ".gain", group, Matrix::Ones(1, width));
  store.add(prefix + ".bias", group, Matrix::Zero(1, width));
}

Var layer_norm(Graph& g, const std::string& prefix, const Var& x) {
  return layer_norm_rows(x, g.param(prefix + ".gain"), g.param(prefix + ".bias"));
}

}  // namespace ntpp
