#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nvlab/geometry.hpp"

namespace nvlab {

// Radial C-infinity bump: amplitude * exp(1 - 1/(1 - s)) with s = |x-c|^2/R^2
// inside the ball of radius R around c, zero outside. Value, gradient, and
// laplacian are all closed-form; nothing here is finite-differenced.
class SmoothBump {
 public:
  SmoothBump(std::vector<double> center, double radius, double amplitude = 1.0);

  double value(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;
  double laplacian(std::span<const double> x) const;

  // Radial profile helpers (the bump is radial about its center).
  double profile(double r) const;
  double profile_derivative(double r) const;

  int dim() const { return static_cast<int>(center_.size()); }
  double radius() const { return radius_; }
  double amplitude() const { return amplitude_; }
  const std::vector<double>& center() const { return center_; }

 private:
  // Returns s and the common factor amplitude*exp(1-u), zero past the
  // underflow guard u > 700 where exp vanishes at double precision.
  bool core(std::span<const double> x, double& s, double& u, double& f) const;

  std::vector<double> center_;
  double radius_;
  double amplitude_;
};

// Radial plateau: 1 on the closed ball of radius `inner`, 0 outside radius
// `outer`, joined by the C-infinity switch S(t) = q(1-t)/(q(t)+q(1-t)) with
// q(t) = exp(-1/t).
class PlateauCutoff {
 public:
  PlateauCutoff(int dim, double inner, double outer);

  double value(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;

  double profile(double r) const;
  double profile_derivative(double r) const;

  int dim() const { return dim_; }
  double inner() const { return inner_; }
  double outer() const { return outer_; }

 private:
  int dim_;
  double inner_;
  double outer_;
};

// Cylinder function F(gamma) = g(<f_1,gamma>, ..., <f_n,gamma>). The outer g
// is a quadratic polynomial in squashed coordinates t_i = s_i tanh(u_i/s_i),
// so g stays bounded with bounded first and second derivatives while acting
// like the plain polynomial for |u_i| well below s_i.
class CylinderFunction {
 public:
  CylinderFunction(std::vector<SmoothBump> inner, double constant,
                   std::vector<double> linear, std::vector<std::vector<double>> quadratic,
                   std::vector<double> squash_scales);

  // F = <f, gamma> squashed at scale s (identity-like for |<f,gamma>| << s).
  static CylinderFunction linear_in(SmoothBump f, double squash_scale);
  static CylinderFunction constant(int dim, double c);

  std::size_t slots() const { return inner_.size(); }
  const SmoothBump& inner(std::size_t j) const { return inner_[j]; }

  std::vector<double> arguments(const Configuration& g) const;
  double value(const Configuration& g) const;

  double outer_value(std::span<const double> u) const;
  double outer_partial(std::span<const double> u, std::size_t i) const;
  double outer_partial2(std::span<const double> u, std::size_t i, std::size_t j) const;

 private:
  std::vector<SmoothBump> inner_;
  double c0_;
  std::vector<double> lin_;
  std::vector<std::vector<double>> quad_;
  std::vector<double> squash_;
};

// Compactly supported vector field with exact divergence: either a bump
// envelope times a constant direction, or a bump envelope times the rotation
// generator in a coordinate plane (divergence-free before the envelope).
class VectorField {
 public:
  static VectorField directional(SmoothBump envelope, std::vector<double> direction);
  static VectorField rotational(SmoothBump envelope, int axis_a, int axis_b);

  std::vector<double> value(std::span<const double> x) const;
  double divergence(std::span<const double> x) const;

  int dim() const { return envelope_.dim(); }
  double support_radius() const { return envelope_.radius(); }
  const std::vector<double>& center() const { return envelope_.center(); }

 private:
  VectorField(SmoothBump envelope, std::vector<double> direction, int axis_a, int axis_b,
              bool rotational);

  // The unmodulated field w(x); for the rotational kind this depends on x.
  std::vector<double> base(std::span<const double> x) const;

  SmoothBump envelope_;
  std::vector<double> direction_;
  int axis_a_ = -1;
  int axis_b_ = -1;
  bool rotational_ = false;
};

}  // namespace nvlab
