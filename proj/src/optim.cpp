#include "termstory/optim.hpp"

#include <cmath>

#include "termstory/error.hpp"

namespace termstory {

Parameter::Parameter(std::string n, Tensor init)
    : name(std::move(n)), value(std::move(init)), grad(value.shape()), m(value.shape()), v(value.shape()) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  grad.fill(0.0);
}

Parameter& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (params_.count(name)) throw Error(ErrorCode::kDuplicate, "parameter '" + name + "' already registered");
  auto& p = params_.emplace(name, Parameter(name, std::move(init))).first->second;
  p.trainable = trainable;
  return p;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::kNotFound, "no parameter named '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::kNotFound, "no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.zero_grad();
}

namespace {

void check_gradient(const Parameter& p) {
  if (p.grad.shape() != p.value.shape()) {
    throw Error(ErrorCode::kShape, "gradient of '" + p.name + "' has shape " + shape_string(p.grad.shape()) +
                                       ", parameter has " + shape_string(p.value.shape()));
  }
  if (!p.grad.all_finite()) throw Error(ErrorCode::kNonFinite, "non-finite gradient in parameter '" + p.name + "'");
}

}  // namespace

void Adam::step(ParamStore& params) {
  double sq = 0.0;
  for (auto& [_, p] : params) {
    if (!p.trainable) continue;
    if (p.grad.empty() && !p.value.empty()) p.grad = Tensor(p.value.shape());
    check_gradient(p);
    for (double g : p.grad.data()) sq += g * g;
  }
  double grad_scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) grad_scale = cfg_.clip_norm / norm;
  }
  ++t_;
  for (auto& [_, p] : params)
    if (p.trainable) update(p, grad_scale);
}

void Adam::step(Parameter& p) {
  check_gradient(p);
  ++t_;
  update(p, 1.0);
}

void Adam::update(Parameter& p, double grad_scale) const {
  if (p.m.shape() != p.value.shape()) p.m = Tensor(p.value.shape());
  if (p.v.shape() != p.value.shape()) p.v = Tensor(p.value.shape());
  const double t = static_cast<double>(t_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i] * grad_scale;
    p.m[i] = cfg_.beta1 * p.m[i] + (1.0 - cfg_.beta1) * g;
    p.v[i] = cfg_.beta2 * p.v[i] + (1.0 - cfg_.beta2) * g * g;
    const double mhat = p.m[i] / bc1;
    const double vhat = p.v[i] / bc2;
    p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

}  // namespace termstory
