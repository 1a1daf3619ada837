#pragma once

#include <cstdint>
#include <vector>

#include "mmsum/nn/tensor.hpp"

namespace mmsum::nn {

// Adam optimizer state: first/second moment per parameter plus the shared
// step counter. Moment arrays mirror their parameter shapes; step_count
// increases by exactly 1 per adam_step call.
struct AdamState {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState init(const std::vector<Tensor>& params, double learning_rate = 3e-4);
};

// One bias-corrected Adam update, in place over the parameter data.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace mmsum::nn
