#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "termstory/tensor.hpp"

namespace termstory {

/// Trainable tensor with its gradient accumulator and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor init);
  void zero_grad();
};

/// Name-ordered parameter collection. Iteration order is lexicographic, which
/// keeps checkpoints and optimizer sweeps deterministic.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor init, bool trainable = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 0.0;
};

/// Adam with bias correction. Keeps the step counter; moment buffers live on
/// each Parameter.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// One update over every trainable parameter. Throws Error(kNonFinite)
  /// naming the parameter before touching any state if a gradient is NaN/Inf.
  void step(ParamStore& params);
  void step(Parameter& p);

  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  void update(Parameter& p, double grad_scale) const;

  AdamConfig cfg_;
  std::size_t t_ = 0;
};

}  // namespace termstory
