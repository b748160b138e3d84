#pragma once

namespace truthsr {

/// Digamma ψ(x) for x > 0. Recurrence shift into the asymptotic regime,
/// then the Bernoulli-series expansion; absolute error below 1e-13 for x >= 1.
double digamma(double x);

/// Trigamma ψ'(x) for x > 0, same scheme. This is d/dx digamma(x).
double trigamma(double x);

}  // namespace truthsr
