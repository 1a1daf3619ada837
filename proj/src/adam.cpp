#include "mmsum/nn/adam.hpp"

#include <cmath>
#include <string>

namespace mmsum::nn {

AdamState AdamState::init(const std::vector<Tensor>& params, double learning_rate) {
  check(learning_rate > 0.0, "adam: learning rate must be positive");
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment.reserve(params.size());
  s.second_moment.reserve(params.size());
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
  check(params.size() == grads.size() && params.size() == state.first_moment.size(),
        "adam_step: parameter/gradient/state counts differ");
  state.step_count += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  for (std::size_t k = 0; k < params.size(); ++k) {
    check(params[k].shape() == grads[k].shape(),
          "adam_step: shape mismatch at parameter " + std::to_string(k) + " (" +
              params[k].tag() + "): " + shape_str(params[k].shape()) + " vs " +
              shape_str(grads[k].shape()));
    auto& w = params[k].mutable_data();
    const auto& g = grads[k].data();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace mmsum::nn
