#ifndef CAPCERT_SCALAR_OPT_HPP
#define CAPCERT_SCALAR_OPT_HPP

#include <cmath>
#include <functional>
#include <limits>

namespace capcert::numerics {

struct ScalarOptimum {
  double x = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  bool found = false;
};

// Maximizes f over the open interval (lo, hi): dense grid scan followed by
// golden-section refinement around the best grid point. f may return -inf
// on infeasible points; if every grid point is infeasible the result has
// found = false. The refinement bracket is clipped away from the endpoints
// by a relative 1e-12 guard, so objectives that diverge at an endpoint are
// handled. Assumes f is unimodal on its feasible subinterval, which holds
// for every objective in this project (single interior optimum).
inline ScalarOptimum maximize_scalar(const std::function<double(double)>& f,
                                     double lo, double hi,
                                     int grid_points = 512,
                                     double x_tol = 1e-12) {
  ScalarOptimum best;
  if (!(hi > lo)) return best;
  const double width = hi - lo;
  const double guard = width * 1e-12;

  int best_i = -1;
  for (int i = 1; i < grid_points; ++i) {
    const double x = lo + width * i / grid_points;
    const double v = f(x);
    if (std::isfinite(v) && v > best.value) {
      best = {x, v, true};
      best_i = i;
    }
  }
  if (!best.found) return best;

  double a = (best_i <= 1) ? lo + guard : lo + width * (best_i - 1) / grid_points;
  double b = (best_i >= grid_points - 1) ? hi - guard
                                         : lo + width * (best_i + 1) / grid_points;

  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > x_tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  const double xr = 0.5 * (a + b);
  const double vr = f(xr);
  if (std::isfinite(vr) && vr > best.value) best = {xr, vr, true};
  if (std::isfinite(fc) && fc > best.value) best = {c, fc, true};
  if (std::isfinite(fd) && fd > best.value) best = {d, fd, true};
  return best;
}

inline ScalarOptimum minimize_scalar(const std::function<double(double)>& f,
                                     double lo, double hi,
                                     int grid_points = 512,
                                     double x_tol = 1e-12) {
  ScalarOptimum r = maximize_scalar([&f](double x) { return -f(x); }, lo, hi,
                                    grid_points, x_tol);
  r.value = -r.value;
  return r;
}

// Finds the root of a strictly increasing function on [lo, hi] by bisection.
// Returns hi if f(hi) < 0 (no root inside; caller treats the endpoint as the
// conservative answer).
inline double bisect_increasing(const std::function<double(double)>& f,
                                double lo, double hi, double x_tol = 1e-12) {
  double flo = f(lo);
  if (flo >= 0.0) return lo;
  if (f(hi) < 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > x_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace capcert::numerics

#endif
