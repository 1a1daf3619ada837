#include "mmsum/nn/gradcheck.hpp"

#include <cmath>

namespace mmsum::nn {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  check(eps >= 1e-7 && eps <= 1e-3, "finite_diff_grad: eps must lie in [1e-7, 1e-3]");
  NoGradGuard ng;
  Tensor probe = Tensor::from(x.shape(), x.data());
  auto& d = probe.mutable_data();
  std::vector<double> g(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double orig = d[i];
    d[i] = orig + eps;
    const double hi = f(probe);
    d[i] = orig - eps;
    const double lo = f(probe);
    d[i] = orig;
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return Tensor::from(x.shape(), std::move(g));
}

double max_rel_error(const Tensor& autodiff, const Tensor& numeric, double floor) {
  check(autodiff.shape() == numeric.shape(), "max_rel_error: shape mismatch");
  double worst = 0.0;
  const auto& a = autodiff.data();
  const auto& n = numeric.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), floor});
    const double rel = std::abs(a[i] - n[i]) / denom;
    if (std::abs(a[i]) < floor && std::abs(n[i]) < floor) continue;
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace mmsum::nn
