#pragma once

#include <cmath>
#include <optional>

namespace rdelab {

struct BisectionOptions {
  double tol = 1e-12;
  int max_iter = 200;
};

/// Root of a function with a sign change on [lo, hi].
///
/// Returns std::nullopt when f(lo) and f(hi) share a strict sign. An exact
/// zero at either end is returned as is. Iteration stops once the bracket is
/// narrower than `tol` and |f(mid)| <= tol, or when the bracket cannot be
/// split further in double precision.
template <class F>
std::optional<double> bisect(F&& f, double lo, double hi, BisectionOptions opt = {}) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  double fhi = f(hi);
  if (fhi == 0.0) return hi;
  if (std::signbit(flo) == std::signbit(fhi)) return std::nullopt;

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < opt.max_iter; ++it) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (hi - lo <= opt.tol && std::abs(fm) <= opt.tol) break;
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return mid;
}

}  // namespace rdelab
