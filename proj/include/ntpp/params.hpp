#pragma once

#include "ntpp/autodiff.hpp"

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace ntpp {

struct Parameter {
  std::string group;
  Matrix value;
};

using Gradients = std::map<std::string, Matrix>;

// Named tensors organised into groups ("tee", "dam", "decoder", ...).
// Iteration order is the lexicographic order of names.
class ParameterStore {
 public:
  void add(const std::string& name, const std::string& group, Matrix value);
  bool contains(const std::string& name) const;
  const Matrix& value(const std::string& name) const;
  Matrix& value(const std::string& name);
  const std::string& group(const std::string& name) const;

  std::set<std::string> groups() const;
  std::vector<std::string> names_in(const std::string& group) const;
  std::size_t scalar_count() const;

  std::map<std::string, Parameter>& items() { return params_; }
  const std::map<std::string, Parameter>& items() const { return params_; }

 private:
  std::map<std::string, Parameter> params_;
};

// Uniform Glorot initialisation: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng);

// One forward pass: a tape plus the parameter leaves bound on it. Parameters
// in a frozen group enter the tape as constants, so their gradients are
// identically zero.
class Graph {
 public:
  explicit Graph(const ParameterStore& store,
                 std::set<std::string> frozen_groups = {});
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tape& tape() { return tape_; }
  Var param(const std::string& name);
  Var constant(Matrix value) { return tape_.constant(std::move(value)); }

  void backward(const Var& loss) { tape_.backward(loss); }
  // Gradient for every parameter of the store (zero when unused or frozen).
  Gradients gradients() const;

 private:
  const ParameterStore* store_;
  std::set<std::string> frozen_;
  Tape tape_;
  std::map<std::string, Var> bound_;
};

}  // namespace ntpp
