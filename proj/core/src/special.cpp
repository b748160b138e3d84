#include "truthsr/special.hpp"

#include "truthsr/common.hpp"

#include <cmath>

namespace truthsr {

double digamma(double x) {
  if (!(x > 0.0)) throw DataError("digamma: argument must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli series: B2/2x^2, B4/4x^4, ...
  const double series =
      inv2 * (1.0 / 12.0 +
              inv2 * (-1.0 / 120.0 +
                      inv2 * (1.0 / 252.0 +
                              inv2 * (-1.0 / 240.0 +
                                      inv2 * (1.0 / 132.0 + inv2 * (-691.0 / 32760.0))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw DataError("trigamma: argument must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 6.0 +
              inv2 * (-1.0 / 30.0 +
                      inv2 * (1.0 / 42.0 +
                              inv2 * (-1.0 / 30.0 +
                                      inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0))))));
  return acc + inv + 0.5 * inv2 + inv * series;
}

}  // namespace truthsr
