#include "detq/numeric.hpp"

#include <cmath>

namespace detq {

MinimizeResult golden_section_min(const std::function<double(double)>& f, double lo,
                                  double hi, double x_tol) {
  const double inv_phi = 0.6180339887498948482;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > x_tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  MinimizeResult best;
  best.x = 0.5 * (a + b);
  best.value = f(best.x);
  // Boundary minima are legitimate (degenerate channels put alpha* at 0 or 1).
  double flo = f(lo), fhi = f(hi);
  if (flo < best.value) best = {lo, flo};
  if (fhi < best.value) best = {hi, fhi};
  return best;
}

namespace {

double simpson_rule(double fa, double fm, double fb, double h) {
  return (h / 6.0) * (fa + 4.0 * fm + fb);
}

double simpson_rec(const std::function<double(double)>& f, double a, double m, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson_rule(fa, flm, fm, m - a);
  double right = simpson_rule(fm, frm, fb, b - m);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol) {
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = simpson_rule(fa, fm, fb, b - a);
  return simpson_rec(f, a, m, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace detq
