#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pedcast/tensor.hpp"

namespace pedcast::ad {

// Bias-corrected Adam. Moment buffers are keyed by parameter name and
// created on first use.
struct AdamState {
  std::int64_t step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::unordered_map<std::string, std::vector<double>> first_moment;
  std::unordered_map<std::string, std::vector<double>> second_moment;
};

// Applies one update from the gradients currently held by params, then
// zeroes those gradients.
void adam_step(ParameterSet& params, AdamState& state);

}  // namespace pedcast::ad
