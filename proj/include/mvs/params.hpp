#pragma once

#include <cstdint>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mvs/autodiff.hpp"

namespace mvs {

// Ordered, named collection of trainable leaves. Copies share the
// underlying nodes; use snapshot()/restore() for value copies.
class ParamSet {
 public:
  void add(const std::string& name, Var param) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    index_.emplace(name, params_.size());
    params_.emplace_back(name, std::move(param));
  }

  void append(const ParamSet& other) {
    for (const auto& [name, p] : other.params_) add(name, p);
  }

  std::size_t count() const noexcept { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value().size();
    return n;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Var& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return params_[it->second].second;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  std::map<std::string, Tensor> snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, p] : params_) out.emplace(name, p.value());
    return out;
  }

  // Overwrites values by name; every parameter must be present with the
  // same shape.
  void restore(const std::map<std::string, Tensor>& values) {
    for (auto& [name, p] : params_) {
      auto it = values.find(name);
      if (it == values.end()) throw FormatError("missing parameter " + name);
      if (it->second.shape() != p.shape()) {
        throw DimensionError("parameter " + name + " has shape " + shape_string(p.shape()) +
                             ", stored value is " + shape_string(it->second.shape()));
      }
      p.mutable_value() = it->second;
    }
  }

 private:
  std::vector<std::pair<std::string, Var>> params_;
  std::map<std::string, std::size_t> index_;
};

// Weights ~ N(0, std), biases zero, layer-norm gains one.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed, double stddev = 0.02)
      : rng_(seed), stddev_(stddev) {}

  Var gaussian(ParamSet& set, const std::string& name, Shape shape) {
    return gaussian(set, name, std::move(shape), stddev_);
  }

  Var gaussian(ParamSet& set, const std::string& name, Shape shape, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data()) v = dist(rng_);
    return register_param(set, name, std::move(t));
  }

  Var constant(ParamSet& set, const std::string& name, Shape shape, double value) {
    return register_param(set, name, Tensor(std::move(shape), value));
  }

  Var zeros(ParamSet& set, const std::string& name, Shape shape) {
    return constant(set, name, std::move(shape), 0.0);
  }

  // N(0, 1/fan_in) for a [rows x fan_in] weight.
  Var fan_in(ParamSet& set, const std::string& name, Shape shape) {
    const double std = 1.0 / std::sqrt(static_cast<double>(shape.back()));
    return gaussian(set, name, std::move(shape), std);
  }

  double stddev() const noexcept { return stddev_; }

 private:
  static Var register_param(ParamSet& set, const std::string& name, Tensor t) {
    auto v = Var::parameter(std::move(t), name);
    set.add(name, v);
    return v;
  }

  std::mt19937_64 rng_;
  double stddev_;
};

}  // namespace mvs
