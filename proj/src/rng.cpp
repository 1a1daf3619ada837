#include "mmsum/nn/rng.hpp"

#include <cmath>

namespace mmsum::nn {

double Rng::normal(double mean, double stddev) {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  return mean + stddev * z;
}

}  // namespace mmsum::nn
