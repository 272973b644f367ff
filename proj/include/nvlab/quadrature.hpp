#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nvlab {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;      // estimated absolute error bound
  std::size_t evals = 0;
  bool converged = true;
};

struct QuadratureFailure : std::runtime_error {
  QuadResult partial;
  explicit QuadratureFailure(const std::string& what, QuadResult p)
      : std::runtime_error(what), partial(p) {}
};

// Adaptive Gauss-Kronrod 7/15 on [a,b]. Splits the interval with the largest
// error estimate until the total is below max(abs_tol, rel_tol*|value|) or the
// evaluation budget runs out (converged=false then).
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double abs_tol, double rel_tol,
                              std::size_t max_evals = 2'000'000,
                              std::span<const double> split_points = {});

// Integral over [a, +inf) via the substitution r = a + t/(1-t).
QuadResult integrate_half_line(const std::function<double(double)>& f, double a,
                               double abs_tol, double rel_tol,
                               std::size_t max_evals = 2'000'000);

// Globally adaptive cubature over an axis-aligned box: degree-7 Genz-Malik
// rule with the embedded degree-5 error estimate for dimension >= 2 (the
// worst sub-box is bisected along the axis picked by a fourth-difference
// criterion), plain adaptive Gauss-Kronrod in dimension 1. Cost still grows
// exponentially in the dimension; callers enforce their own dimension caps.
//
// `initial_cells` optionally splits each axis into that many equal cells
// before adaptation starts. Integrands whose mass hides in a small corner of
// the box (hard-core exclusion regions) can otherwise look identically zero
// at every sample point of the starting rule; seed the mesh at the structure
// scale. One entry per axis; empty means one cell per axis.
QuadResult integrate_box(const std::function<double(std::span<const double>)>& f,
                         std::span<const std::pair<double, double>> bounds,
                         double abs_tol, double rel_tol,
                         std::size_t max_evals = 50'000'000,
                         std::span<const int> initial_cells = {});

// Surface measure of the unit sphere in R^d (2, 2*pi, 4*pi, ...).
double sphere_surface(int d);

}  // namespace nvlab
