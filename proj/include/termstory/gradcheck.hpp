#pragma once

#include <functional>
#include <string>

#include "termstory/autodiff.hpp"
#include "termstory/optim.hpp"

namespace termstory {

struct GradCheckResult {
  /// Largest per-tensor relative error ||analytic - numeric|| / max(||analytic||, ||numeric||).
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t elements_checked = 0;
};

/// Builds a scalar loss on the given graph, binding parameters through
/// `Graph::parameter`. Must be a deterministic function of the parameter values.
using LossBuilder = std::function<ad::Var(ad::Graph&)>;

/// Compares reverse-mode gradients against central finite differences
/// (f(p + h) - f(p - h)) / 2h for every element of every trainable parameter.
/// Parameter values are restored afterwards; gradients are left zeroed.
GradCheckResult check_gradients(ParamStore& params, const LossBuilder& loss, double h = 1e-5);

}  // namespace termstory
