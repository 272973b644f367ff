#include "nvlab/functions.hpp"

#include <cmath>
#include <stdexcept>

namespace nvlab {

namespace {

double sq_dist(std::span<const double> x, const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = x[i] - c[i];
    s += d * d;
  }
  return s;
}

}  // namespace

SmoothBump::SmoothBump(std::vector<double> center, double radius, double amplitude)
    : center_(std::move(center)), radius_(radius), amplitude_(amplitude) {
  if (center_.empty()) throw std::invalid_argument("bump center must have a dimension");
  if (!(radius_ > 0.0)) throw std::invalid_argument("bump radius must be positive");
}

bool SmoothBump::core(std::span<const double> x, double& s, double& u, double& f) const {
  if (x.size() != center_.size()) throw std::invalid_argument("bump dimension mismatch");
  s = sq_dist(x, center_) / (radius_ * radius_);
  if (s >= 1.0) return false;
  u = 1.0 / (1.0 - s);
  if (u > 700.0) return false;
  f = amplitude_ * std::exp(1.0 - u);
  return true;
}

double SmoothBump::value(std::span<const double> x) const {
  double s, u, f;
  return core(x, s, u, f) ? f : 0.0;
}

std::vector<double> SmoothBump::gradient(std::span<const double> x) const {
  std::vector<double> g(center_.size(), 0.0);
  double s, u, f;
  if (!core(x, s, u, f)) return g;
  const double factor = -f * u * u * 2.0 / (radius_ * radius_);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = factor * (x[i] - center_[i]);
  return g;
}

double SmoothBump::laplacian(std::span<const double> x) const {
  double s, u, f;
  if (!core(x, s, u, f)) return 0.0;
  const double r2 = radius_ * radius_;
  const double d = static_cast<double>(center_.size());
  return -f * u * u * 2.0 * d / r2 + f * (u * u * u * u - 2.0 * u * u * u) * 4.0 * s / r2;
}

double SmoothBump::profile(double r) const {
  const double s = r * r / (radius_ * radius_);
  if (s >= 1.0) return 0.0;
  const double u = 1.0 / (1.0 - s);
  if (u > 700.0) return 0.0;
  return amplitude_ * std::exp(1.0 - u);
}

double SmoothBump::profile_derivative(double r) const {
  const double s = r * r / (radius_ * radius_);
  if (s >= 1.0) return 0.0;
  const double u = 1.0 / (1.0 - s);
  if (u > 700.0) return 0.0;
  return -amplitude_ * std::exp(1.0 - u) * u * u * 2.0 * r / (radius_ * radius_);
}

namespace {

double switch_q(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

double switch_q_prime(double t) {
  return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0;
}

double switch_s(double t) {
  const double a = switch_q(t), b = switch_q(1.0 - t);
  return b / (a + b);
}

double switch_s_prime(double t) {
  const double a = switch_q(t), b = switch_q(1.0 - t);
  const double ap = switch_q_prime(t), bp = -switch_q_prime(1.0 - t);
  const double den = (a + b) * (a + b);
  return (bp * a - b * ap) / den;
}

}  // namespace

PlateauCutoff::PlateauCutoff(int dim, double inner, double outer)
    : dim_(dim), inner_(inner), outer_(outer) {
  if (dim <= 0) throw std::invalid_argument("plateau dimension must be positive");
  if (inner < 0.0 || !(outer > inner))
    throw std::invalid_argument("plateau radii must satisfy 0 <= inner < outer");
}

double PlateauCutoff::profile(double r) const {
  if (r <= inner_) return 1.0;
  if (r >= outer_) return 0.0;
  return switch_s((r - inner_) / (outer_ - inner_));
}

double PlateauCutoff::profile_derivative(double r) const {
  if (r <= inner_ || r >= outer_) return 0.0;
  return switch_s_prime((r - inner_) / (outer_ - inner_)) / (outer_ - inner_);
}

double PlateauCutoff::value(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("plateau dimension mismatch");
  return profile(norm(x));
}

std::vector<double> PlateauCutoff::gradient(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("plateau dimension mismatch");
  std::vector<double> g(x.size(), 0.0);
  const double r = norm(x);
  if (r <= inner_ || r >= outer_ || r == 0.0) return g;
  const double dp = profile_derivative(r);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = dp * x[i] / r;
  return g;
}

CylinderFunction::CylinderFunction(std::vector<SmoothBump> inner, double constant,
                                   std::vector<double> linear,
                                   std::vector<std::vector<double>> quadratic,
                                   std::vector<double> squash_scales)
    : inner_(std::move(inner)),
      c0_(constant),
      lin_(std::move(linear)),
      quad_(std::move(quadratic)),
      squash_(std::move(squash_scales)) {
  const std::size_t n = inner_.size();
  if (n == 0) throw std::invalid_argument("cylinder function needs at least one inner slot");
  if (lin_.size() != n || squash_.size() != n || quad_.size() != n)
    throw std::invalid_argument("cylinder coefficient shapes must match the slot count");
  for (const auto& row : quad_)
    if (row.size() != n) throw std::invalid_argument("quadratic coefficient matrix must be square");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (quad_[i][j] != quad_[j][i])
        throw std::invalid_argument("quadratic coefficient matrix must be symmetric");
  for (double s : squash_)
    if (!(s > 0.0)) throw std::invalid_argument("squash scales must be positive");
  for (const auto& f : inner_)
    if (f.dim() != inner_[0].dim())
      throw std::invalid_argument("inner functions must share a dimension");
}

CylinderFunction CylinderFunction::linear_in(SmoothBump f, double squash_scale) {
  return CylinderFunction({std::move(f)}, 0.0, {1.0}, {{0.0}}, {squash_scale});
}

CylinderFunction CylinderFunction::constant(int dim, double c) {
  SmoothBump f(std::vector<double>(static_cast<std::size_t>(dim), 0.0), 1.0);
  return CylinderFunction({std::move(f)}, c, {0.0}, {{0.0}}, {1.0});
}

std::vector<double> CylinderFunction::arguments(const Configuration& g) const {
  std::vector<double> u(inner_.size(), 0.0);
  for (std::size_t j = 0; j < inner_.size(); ++j)
    for (int i = 0; i < g.size(); ++i) u[j] += inner_[j].value(g.point(i));
  return u;
}

double CylinderFunction::value(const Configuration& g) const {
  auto u = arguments(g);
  return outer_value(u);
}

namespace {

struct Squash {
  double t, t1, t2;  // value, first and second derivative w.r.t. u
};

Squash squash_eval(double u, double s) {
  const double tau = std::tanh(u / s);
  Squash out;
  out.t = s * tau;
  out.t1 = 1.0 - tau * tau;
  out.t2 = -2.0 * tau * (1.0 - tau * tau) / s;
  return out;
}

}  // namespace

double CylinderFunction::outer_value(std::span<const double> u) const {
  const std::size_t n = inner_.size();
  double v = c0_;
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = squash_eval(u[i], squash_[i]).t;
  for (std::size_t i = 0; i < n; ++i) {
    v += lin_[i] * t[i];
    for (std::size_t j = 0; j < n; ++j) v += quad_[i][j] * t[i] * t[j];
  }
  return v;
}

double CylinderFunction::outer_partial(std::span<const double> u, std::size_t i) const {
  const std::size_t n = inner_.size();
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = squash_eval(u[k], squash_[k]).t;
  double dt = lin_[i];
  for (std::size_t j = 0; j < n; ++j) dt += 2.0 * quad_[i][j] * t[j];
  return dt * squash_eval(u[i], squash_[i]).t1;
}

double CylinderFunction::outer_partial2(std::span<const double> u, std::size_t i,
                                        std::size_t j) const {
  const std::size_t n = inner_.size();
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = squash_eval(u[k], squash_[k]).t;
  const Squash si = squash_eval(u[i], squash_[i]);
  const Squash sj = squash_eval(u[j], squash_[j]);
  double v = 2.0 * quad_[i][j] * si.t1 * sj.t1;
  if (i == j) {
    double dt = lin_[i];
    for (std::size_t k = 0; k < n; ++k) dt += 2.0 * quad_[i][k] * t[k];
    v += dt * si.t2;
  }
  return v;
}

VectorField::VectorField(SmoothBump envelope, std::vector<double> direction, int axis_a,
                         int axis_b, bool rotational)
    : envelope_(std::move(envelope)),
      direction_(std::move(direction)),
      axis_a_(axis_a),
      axis_b_(axis_b),
      rotational_(rotational) {}

VectorField VectorField::directional(SmoothBump envelope, std::vector<double> direction) {
  if (direction.size() != static_cast<std::size_t>(envelope.dim()))
    throw std::invalid_argument("direction dimension mismatch");
  return VectorField(std::move(envelope), std::move(direction), -1, -1, false);
}

VectorField VectorField::rotational(SmoothBump envelope, int axis_a, int axis_b) {
  const int d = envelope.dim();
  if (d < 2) throw std::invalid_argument("rotational fields need dimension >= 2");
  if (axis_a < 0 || axis_b < 0 || axis_a >= d || axis_b >= d || axis_a == axis_b)
    throw std::invalid_argument("rotation plane axes must be distinct and in range");
  return VectorField(std::move(envelope), {}, axis_a, axis_b, true);
}

std::vector<double> VectorField::base(std::span<const double> x) const {
  if (!rotational_) return direction_;
  std::vector<double> w(x.size(), 0.0);
  const auto& c = envelope_.center();
  w[static_cast<std::size_t>(axis_a_)] = -(x[static_cast<std::size_t>(axis_b_)] -
                                           c[static_cast<std::size_t>(axis_b_)]);
  w[static_cast<std::size_t>(axis_b_)] = x[static_cast<std::size_t>(axis_a_)] -
                                         c[static_cast<std::size_t>(axis_a_)];
  return w;
}

std::vector<double> VectorField::value(std::span<const double> x) const {
  const double b = envelope_.value(x);
  auto w = base(x);
  for (auto& c : w) c *= b;
  return w;
}

double VectorField::divergence(std::span<const double> x) const {
  // div(b w) = (grad b, w) + b div w; both base fields are divergence-free
  // except the constant direction, whose div is 0 as well.
  const auto gb = envelope_.gradient(x);
  const auto w = base(x);
  double v = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) v += gb[i] * w[i];
  return v;
}

}  // namespace nvlab
