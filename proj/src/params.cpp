#include "ntpp/params.hpp"

#include "ntpp/error.hpp"

#include <cmath>

namespace ntpp {

void ParameterStore::add(const std::string& name, const std::string& group,
                         Matrix value) {
  if (!params_.emplace(name, Parameter{group, std::move(value)}).second) {
    throw ConfigError("duplicate parameter '" + name + "'");
  }
}

bool ParameterStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

const Matrix& ParameterStore::value(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ConfigError("unknown parameter '" + name + "'");
  }
  return it->second.value;
}

Matrix& ParameterStore::value(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ConfigError("unknown parameter '" + name + "'");
  }
  return it->second.value;
}

const std::string& ParameterStore::group(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ConfigError("unknown parameter '" + name + "'");
  }
  return it->second.group;
}

std::set<std::string> ParameterStore::groups() const {
  std::set<std::string> out;
  for (const auto& [name, p] : params_) {
    out.insert(p.group);
  }
  return out;
}

std::vector<std::string> ParameterStore::names_in(const std::string& group) const {
  std::vector<std::string> out;
  for (const auto& [name, p] : params_) {
    if (p.group == group) {
      out.push_back(name);
    }
  }
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) {
    n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w(i) = u(rng);
  }
  return w;
}

Graph::Graph(const ParameterStore& store, std::set<std::string> frozen_groups)
    : store_(&store), frozen_(std::move(frozen_groups)) {}

Var Graph::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) {
    return it->second;
  }
  const Matrix& v = store_->value(name);
  Var leaf = frozen_.count(store_->group(name)) != 0 ? tape_.constant(v)
                                                     : tape_.variable(v);
  bound_.emplace(name, leaf);
  return leaf;
}

Gradients Graph::gradients() const {
  Gradients out;
  for (const auto& [name, p] : store_->items()) {
    auto it = bound_.find(name);
    if (it != bound_.end() && it->second.requires_grad() &&
        it->second.grad().size() != 0) {
      out[name] = it->second.grad();
    } else {
      out[name] = Matrix::Zero(p.value.rows(), p.value.cols());
    }
  }
  return out;
}

}  // namespace ntpp
