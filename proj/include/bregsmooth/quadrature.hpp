#pragma once

#include <cmath>
#include <utility>

#include "bregsmooth/errors.hpp"

namespace bregsmooth {

namespace detail {

template <typename F>
double simpson(F&& f, double a, double fa, double b, double fb, double* fm_out) {
  double m = 0.5 * (a + b);
  double fm = f(m);
  *fm_out = fm;
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adapt(F&& f, double a, double fa, double m, double fm, double b, double fb,
             double whole, double tol, int depth) {
  if (!std::isfinite(whole))
    throw divergent_integral_error("adaptive_simpson: non-finite integrand");
  double lm, rm;
  double left = simpson(f, a, fa, m, fm, &lm);
  double right = simpson(f, m, fm, b, fb, &rm);
  double delta = left + right - whole;
  // the relative floor stops refinement once roundoff or finite-difference
  // noise in the integrand dominates; without it large-magnitude integrands
  // exhaust the depth chasing a tolerance that halves every level
  if (std::abs(delta) <= 15.0 * tol || std::abs(delta) <= 1e-9 * std::abs(left + right) ||
      (b - a) < 1e-14) {
    if (!std::isfinite(left + right))
      throw divergent_integral_error("adaptive_simpson: non-finite integrand");
    return left + right + delta / 15.0;
  }
  if (depth <= 0)
    throw divergent_integral_error("adaptive_simpson: max subdivision depth reached");
  double lmid = 0.5 * (a + m), rmid = 0.5 * (m + b);
  return adapt(f, a, fa, lmid, lm, m, fm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, fm, rmid, rm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction.  Throws
// divergent_integral_error when the integrand is non-finite or refinement
// fails to settle, which is how divergent bandwidth-constant integrals
// surface to callers.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol = 1e-10, int max_depth = 40) {
  if (!(a < b)) {
    if (a == b) return 0.0;
    throw std::invalid_argument("adaptive_simpson: requires a <= b");
  }
  double fa = f(a), fb = f(b);
  double m = 0.5 * (a + b);
  double fm0;
  double whole = detail::simpson(f, a, fa, b, fb, &fm0);
  return detail::adapt(f, a, fa, m, fm0, b, fb, whole, abs_tol, max_depth);
}

}  // namespace bregsmooth
