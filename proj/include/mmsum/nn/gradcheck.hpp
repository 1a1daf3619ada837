#pragma once

#include <functional>

#include "mmsum/nn/tensor.hpp"

namespace mmsum::nn {

// Central-difference gradient oracle: (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps)
// per coordinate. Evaluates f with grad recording disabled and never touches
// the reverse-mode path, so it can serve as an independent check of grad().
// eps must lie in [1e-7, 1e-3]; f must be deterministic.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

// Max relative error between an autodiff gradient and the finite-difference
// oracle, with coordinates where both are below `floor` treated as exact.
double max_rel_error(const Tensor& autodiff, const Tensor& numeric, double floor = 1e-6);

}  // namespace mmsum::nn
