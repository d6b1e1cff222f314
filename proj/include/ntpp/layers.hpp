#pragma once

#include "ntpp/params.hpp"

#include <string>
#include <vector>

namespace ntpp {

// prefix.w (in x out), prefix.b (1 x out; zero-initialised).
void add_linear(ParameterStore& store, const std::string& prefix,
                const std::string& group, Eigen::Index in, Eigen::Index out,
                std::mt19937_64& rng);
Var linear(Graph& g, const std::string& prefix, const Var& x);

// widths = {in, hidden..., out}; layers prefix.0, prefix.1, ... with GELU
// between them (none after the last).
void add_mlp(ParameterStore& store, const std::string& prefix,
             const std::string& group, const std::vector<Eigen::Index>& widths,
             std::mt19937_64& rng);
Var mlp(Graph& g, const std::string& prefix, const Var& x, std::size_t layers);

// prefix.gain = 1, prefix.bias = 0.
void add_layer_norm(ParameterStore& store, const std::string& prefix,
                    const std::string& group, Eigen::Index width);
Var layer_norm(Graph& g, const std::string& prefix, const Var& x);

}  // namespace ntpp
