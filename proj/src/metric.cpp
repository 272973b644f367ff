#include "nvlab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nvlab/quadrature.hpp"
#include "nvlab/rng.hpp"

namespace nvlab {

double MetricFamily::phi(double t) const {
  if (phi_exponent <= 0.0) return 0.0;
  return std::pow(t, -phi_exponent);
}

double MetricFamily::phi_prime(double t) const {
  if (phi_exponent <= 0.0) return 0.0;
  return -phi_exponent * std::pow(t, -phi_exponent - 1.0);
}

double MetricFamily::weight_h(std::span<const double> x) const {
  return std::pow(1.0 + norm(x), -static_cast<double>(d + 1));
}

std::vector<double> MetricFamily::weight_h_gradient(std::span<const double> x) const {
  std::vector<double> g(x.size(), 0.0);
  const double r = norm(x);
  if (r == 0.0) return g;
  const double factor = -(d + 1) * std::pow(1.0 + r, -static_cast<double>(d + 2)) / r;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = factor * x[i];
  return g;
}

std::vector<double> lattice_center(int d, int k) {
  if (d <= 0 || k <= 0) throw std::invalid_argument("lattice_center needs d, k >= 1");
  // Enumerate Z^d shell by shell in the sup norm, lexicographic inside a
  // shell; the k-th point of that fixed order.
  int remaining = k - 1;
  for (int shell = 0;; ++shell) {
    std::vector<std::vector<double>> pts;
    std::vector<int> c(static_cast<std::size_t>(d), -shell);
    while (true) {
      int m = 0;
      for (int v : c) m = std::max(m, std::abs(v));
      if (m == shell) pts.emplace_back(c.begin(), c.end());
      int i = d - 1;
      while (i >= 0 && c[static_cast<std::size_t>(i)] == shell) {
        c[static_cast<std::size_t>(i)] = -shell;
        --i;
      }
      if (i < 0) break;
      ++c[static_cast<std::size_t>(i)];
    }
    if (remaining < static_cast<int>(pts.size())) return pts[static_cast<std::size_t>(remaining)];
    remaining -= static_cast<int>(pts.size());
  }
}

MetricFamily make_metric_family(int d, double beta, int k_max) {
  if (d <= 0) throw std::invalid_argument("dimension must be positive");
  if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
  if (k_max < 1) throw std::invalid_argument("k_max must be at least 1");
  MetricFamily fam;
  fam.d = d;
  fam.beta = beta;
  fam.phi_exponent = static_cast<double>(d + 1);
  fam.k_max = k_max;
  for (int k = 1; k <= k_max; ++k) {
    fam.fs.emplace_back(lattice_center(d, k), static_cast<double>(k));
    fam.cuts.emplace_back(d, static_cast<double>(k - 1), static_cast<double>(k));
    fam.p.push_back(std::min(1.0, 1.0 / weight_i(fam.fs.back())));
    fam.q.push_back(1.0);
  }
  return fam;
}

namespace {

constexpr double kExpCap = 700.0;

double saturated_exp(double arg) { return std::exp(std::min(arg, kExpCap)); }

}  // namespace

double pair_statistic(const Configuration& g, const MetricFamily& fam,
                      const std::function<double(std::span<const double>)>& f) {
  // Canonical iteration order makes the value independent of the stored
  // point order, so S(gamma) - S(gamma) cancels exactly in the metric.
  const auto order = g.canonical_order();
  const std::size_t n = order.size();
  std::vector<double> fv(n);
  for (std::size_t i = 0; i < n; ++i) fv[i] = f(g.point(order[i]));
  const double s = fam.scale();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = dist(g.point(order[i]), g.point(order[j]));
      total += saturated_exp(s * fam.phi(r)) * fv[i] * fv[j];
    }
  return total;
}

double metric_vague(const Configuration& g, const Configuration& e, const MetricFamily& fam) {
  // Each configuration is summed separately in canonical order so that equal
  // configurations (in any stored order) cancel to exactly zero.
  const auto og = g.canonical_order();
  const auto oe = e.canonical_order();
  double total = 0.0;
  double w = 1.0;
  for (int k = 0; k < fam.k_max; ++k) {
    w *= 0.5;
    const auto& f = fam.fs[static_cast<std::size_t>(k)];
    double sg = 0.0, se = 0.0;
    for (std::size_t i : og) sg += f.value(g.point(i));
    for (std::size_t i : oe) se += f.value(e.point(i));
    total += w * fam.p[static_cast<std::size_t>(k)] * (1.0 - std::exp(-std::fabs(sg - se)));
  }
  return total;
}

double metric_config(const Configuration& g, const Configuration& e, const MetricFamily& fam) {
  double total = metric_vague(g, e, fam);
  double w = 1.0;
  for (int k = 0; k < fam.k_max; ++k) {
    w *= 0.5;
    const auto& cut = fam.cuts[static_cast<std::size_t>(k)];
    auto hk = [&](std::span<const double> x) { return fam.weight_h(x) * cut.value(x); };
    const double ds = std::fabs(pair_statistic(g, fam, hk) - pair_statistic(e, fam, hk));
    total += w * fam.q[static_cast<std::size_t>(k)] * ds / (1.0 + ds);
  }
  return total;
}

double weight_i(const std::function<double(double)>& profile_derivative, double radius, int d,
                double quad_tol) {
  const double surf = sphere_surface(d);
  auto moment = [&](int power) {
    auto f = [&](double r) {
      const double dp = profile_derivative(r);
      return std::pow(std::fabs(dp), power) * std::pow(r, d - 1);
    };
    QuadResult q = integrate_adaptive(f, 0.0, radius, quad_tol, 1e-10);
    if (!q.converged) throw QuadratureFailure("gradient moment quadrature failed", q);
    return surf * q.value;
  };
  const double a2 = moment(2);
  const double a4 = moment(4);
  return std::pow(a2 * a2 + a4, 0.25);
}

double weight_i(const SmoothBump& f) {
  return weight_i([&](double r) { return f.profile_derivative(r); }, f.radius(), f.dim());
}

namespace {

struct RTerms {
  double two = 0.0;
  double three = 0.0;
};

// The polynomial factor of the three-body integrand with x as the center.
double three_body_core(const MetricFamily& fam, std::span<const double> x,
                       std::span<const double> y, std::span<const double> z, double fx,
                       const std::vector<double>& gfx, double fy, double fz) {
  const double beta = fam.beta;
  const std::size_t d = x.size();
  double rxy2 = 0.0, rxz2 = 0.0, dot_yz = 0.0, dot_gy = 0.0, dot_gz = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double ay = x[i] - y[i];
    const double az = x[i] - z[i];
    rxy2 += ay * ay;
    rxz2 += az * az;
    dot_yz += ay * az;
    dot_gy += ay * gfx[i];
    dot_gz += az * gfx[i];
  }
  const double rxy = std::sqrt(rxy2), rxz = std::sqrt(rxz2);
  const double cy = beta * fam.phi_prime(rxy) / (3.0 * rxy);
  const double cz = beta * fam.phi_prime(rxz) / (3.0 * rxz);
  double g2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) g2 += gfx[i] * gfx[i];
  return fy * fz * (cy * cz * dot_yz * fx * fx + g2 + cy * dot_gy * fx + cz * dot_gz * fx);
}

}  // namespace

PairWeightResult weight_r(const std::function<double(std::span<const double>)>& f,
                          const std::function<std::vector<double>(std::span<const double>)>& grad_f,
                          double support_radius, const std::vector<double>& center,
                          const MetricFamily& fam, const PairPotentialModel& pot, double zeta,
                          std::size_t samples, std::uint64_t seed) {
  const int d = fam.d;
  const double beta = fam.beta;
  const double vol = std::pow(2.0 * support_radius, d);
  Rng rng(seed);
  auto draw = [&]() {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
      x[static_cast<std::size_t>(i)] =
          center[static_cast<std::size_t>(i)] + rng.uniform(-support_radius, support_radius);
    return x;
  };
  auto pair_phi = [&](std::span<const double> a, std::span<const double> b) {
    return pot.evaluate_radial(dist(a, b));
  };
  auto guarded_exp = [&](double arg) {
    if (!(arg <= kExpCap))
      throw std::runtime_error(
          "pair-weight integrand is not integrable: the singular metric weight dominates the "
          "potential near the diagonal");
    return std::exp(arg);
  };

  std::vector<double> w2(samples), w3(samples);
  for (std::size_t it = 0; it < samples; ++it) {
    const auto x = draw();
    const auto y = draw();
    const auto z = draw();
    const double rxy = dist(x, y), rxz = dist(x, z), ryz = dist(y, z);
    if (rxy == 0.0 || rxz == 0.0 || ryz == 0.0) {
      w2[it] = w3[it] = 0.0;  // diagonal has measure zero
      continue;
    }
    const double fx = f(x), fy = f(y), fz = f(z);
    const auto gx = grad_f(x);
    const auto gy = grad_f(y);
    const auto gz = grad_f(z);

    // Two-body term |g2(x,y)| exp(-beta phi).
    {
      const double pp = fam.phi_prime(rxy);
      double g2x = 0.0, g2y = 0.0, cross = 0.0;
      for (int i = 0; i < d; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        g2x += gx[ii] * gx[ii];
        g2y += gy[ii] * gy[ii];
        cross += (x[ii] - y[ii]) * (fy * fy * fx * gx[ii] - fx * fx * fy * gy[ii]);
      }
      const double poly = (2.0 * beta * beta / 9.0) * pp * pp * fx * fx * fy * fy +
                          g2x * fy * fy + g2y * fx * fx +
                          (2.0 * beta * pp / (3.0 * rxy)) * cross;
      const double expo = (2.0 / 3.0) * beta * fam.phi(rxy) - beta * pair_phi(x, y);
      w2[it] = poly == 0.0 ? 0.0 : guarded_exp(expo) * std::fabs(poly);
    }

    // Three-body term |g3| exp(-(2/3) beta sum of pair energies); g3 is twice
    // the sum over the three choices of center (the off-center pair is
    // symmetric already).
    {
      const double psum = pair_phi(x, y) + pair_phi(x, z) + pair_phi(y, z);
      auto term = [&](std::span<const double> c, std::span<const double> a,
                      std::span<const double> b, double fc, const std::vector<double>& gc,
                      double fa, double fb, double rca, double rcb) {
        const double core = three_body_core(fam, c, a, b, fc, gc, fa, fb);
        if (core == 0.0) return 0.0;
        const double expo =
            (beta / 3.0) * (fam.phi(rca) + fam.phi(rcb)) - (2.0 / 3.0) * beta * psum;
        return guarded_exp(expo) * core;
      };
      const double sum = term(x, y, z, fx, gx, fy, fz, rxy, rxz) +
                         term(y, x, z, fy, gy, fx, fz, rxy, ryz) +
                         term(z, x, y, fz, gz, fx, fy, rxz, ryz);
      w3[it] = 2.0 * std::fabs(sum);
    }
  }

  const double c2 = (zeta * zeta / 2.0) * vol * vol;
  const double c3 = (zeta * zeta * zeta / 6.0) * vol * vol * vol;
  std::vector<double> combined(samples);
  for (std::size_t it = 0; it < samples; ++it) combined[it] = c2 * w2[it] + c3 * w3[it];
  MeanSe m = mean_se_iid(combined);
  PairWeightResult out;
  if (m.mean <= 0.0) return out;
  out.value = std::pow(m.mean, 0.25);
  out.se = 0.25 * std::pow(m.mean, -0.75) * m.se;
  return out;
}

std::vector<PairWeightResult> calibrate_pair_weights(MetricFamily& fam,
                                                     const PairPotentialModel& pot, double zeta,
                                                     std::size_t samples, std::uint64_t seed) {
  std::vector<PairWeightResult> rs;
  for (int k = 0; k < fam.k_max; ++k) {
    const auto& cut = fam.cuts[static_cast<std::size_t>(k)];
    auto hk = [&](std::span<const double> x) { return fam.weight_h(x) * cut.value(x); };
    auto ghk = [&](std::span<const double> x) {
      auto g = fam.weight_h_gradient(x);
      const auto gc = cut.gradient(x);
      const double h = fam.weight_h(x);
      const double c = cut.value(x);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * c + h * gc[i];
      return g;
    };
    PairWeightResult r =
        weight_r(hk, ghk, cut.outer(), std::vector<double>(static_cast<std::size_t>(fam.d), 0.0),
                 fam, pot, zeta, samples, seed + static_cast<std::uint64_t>(k));
    fam.q[static_cast<std::size_t>(k)] = r.value > 0.0 ? std::min(1.0, 1.0 / r.value) : 1.0;
    rs.push_back(r);
  }
  return rs;
}

}  // namespace nvlab
