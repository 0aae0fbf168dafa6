#pragma once

// Finite-difference checks for every autodiff primitive, the LSTM term
// decoder loss and the full story-model loss, on small random inputs.

#include <cstdint>
#include <string>
#include <vector>

#include "termstory/gradcheck.hpp"

namespace termstory {

struct GradSuiteCase {
  std::string name;
  GradCheckResult result;
};

std::vector<GradSuiteCase> run_gradient_suite(std::uint64_t seed);

}  // namespace termstory
