#pragma once

#include "ntpp/model.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>

namespace ntpp::testing {

inline EventSequence sequence(std::vector<double> times,
                              std::vector<std::vector<std::uint8_t>> marks,
                              MarkMode mode = MarkMode::kMultiClass) {
  EventSequence s;
  s.id = "s";
  s.times = std::move(times);
  s.marks = std::move(marks);
  s.mode = mode;
  return s;
}

// Three events, two marks, four observations, one static, label 1.
inline Record toy_record(MarkMode mode) {
  Record r;
  r.events = mode == MarkMode::kMultiClass
                 ? sequence({0.4, 1.3, 2.1}, {{1, 0}, {0, 1}, {1, 0}}, mode)
                 : sequence({0.4, 1.3, 2.1}, {{1, 1}, {0, 1}, {1, 0}}, mode);
  r.events.id = "toy";
  r.observations.id = "toy";
  r.observations.observations = {{0.1, 0, 0.7}, {0.4, 1, -1.2}, {1.0, 0, 0.3},
                                 {1.9, 1, 0.9}};
  r.observations.statics = {0.5};
  r.observations.label = 1;
  return r;
}

inline ModelConfig toy_config(Objective objective, MarkMode mode, bool use_dam = true) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.num_marks = 2;
  cfg.objective = objective;
  cfg.use_dam = use_dam;
  cfg.tee.num_marks = 2;
  cfg.tee.d_emb = 4;
  cfg.tee.d_time = 4;
  cfg.tee.n_layers = 2;
  cfg.tee.n_heads = 2;
  cfg.dam.num_variables = 2;
  cfg.dam.d_time = 4;
  cfg.dam.d_hidden = 5;
  cfg.dam.d_hprime = 4;
  cfg.dam.d_gprime = 3;
  cfg.dam.d_prod = 3;
  cfg.dam.n_heads = 2;
  cfg.dam.d_h = 4;
  cfg.dam.d_g = 4;
  cfg.dam.num_statics = 1;
  cfg.dam.d_static = 2;
  return cfg;
}

// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ntpp_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ntpp::testing
