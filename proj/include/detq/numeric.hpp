#pragma once

#include <functional>

namespace detq {

struct MinimizeResult {
  double x = 0.0;
  double value = 0.0;
};

// Golden-section search for the minimum of a unimodal f on [lo, hi].
// Runs until the bracket is narrower than x_tol; the endpoints are evaluated
// too, so boundary minima are returned exactly.
MinimizeResult golden_section_min(const std::function<double(double)>& f, double lo,
                                  double hi, double x_tol);

// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol);

}  // namespace detq
