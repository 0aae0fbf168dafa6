#include "termstory/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace termstory {

namespace {

double eval(const LossBuilder& loss) {
  ad::Graph g(false);
  return loss(g).value()[0];
}

}  // namespace

GradCheckResult check_gradients(ParamStore& params, const LossBuilder& loss, double h) {
  params.zero_grad();
  {
    ad::Graph g;
    g.backward(loss(g));
  }
  GradCheckResult result;
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    const Tensor analytic = p.grad;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = eval(loss);
      p.value[i] = saved - h;
      const double down = eval(loss);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++result.elements_checked;
    }
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    const double rel = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
    if (rel >= result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = name;
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace termstory
