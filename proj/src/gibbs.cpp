#include "nvlab/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

#include "nvlab/rng.hpp"
#include "nvlab/stats.hpp"

namespace nvlab {

namespace {

double boltzmann(double beta, double e) {
  if (!std::isfinite(e)) return 0.0;
  return std::exp(-beta * e);
}

double falling_factorial(int n, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= static_cast<double>(n - i);
  return r;
}

std::vector<std::pair<double, double>> tuple_bounds(const BoxDomain& box, int copies) {
  std::vector<std::pair<double, double>> b;
  b.reserve(static_cast<std::size_t>(copies) * box.lengths.size());
  for (int c = 0; c < copies; ++c)
    for (double len : box.lengths) b.emplace_back(0.0, len);
  return b;
}

// Characteristic length below which the pair factor varies; the cubature seeds
// its initial mesh at this scale so hard-core exclusion regions cannot hide an
// integrand's support from the starting rule.
double interaction_scale(const PairPotentialModel& pot) {
  switch (pot.kind()) {
    case PotentialKind::soft_sphere:
    case PotentialKind::lennard_jones:
      return pot.sigma();
    case PotentialKind::bounded_step:
      return pot.step_radius();
    case PotentialKind::user_table: {
      const double r = pot.range();
      return std::isfinite(r) && r > 0.0 ? r : std::numeric_limits<double>::infinity();
    }
    case PotentialKind::ideal_gas:
    default:
      return std::numeric_limits<double>::infinity();
  }
}

std::vector<int> tuple_mesh(const BoxDomain& box, int copies, const PairPotentialModel& pot) {
  return quadrature_mesh(box, copies, pot);
}

double min_side(const BoxDomain& box) {
  double m = std::numeric_limits<double>::infinity();
  for (double len : box.lengths) m = std::min(m, len);
  return m;
}

double box_diagonal(const BoxDomain& box) {
  double s = 0.0;
  for (double len : box.lengths) s += len * len;
  return std::sqrt(s);
}

// kappa(X) = k^{(n,N)}(X) exp(+beta E_phi(X)) with a partition value computed
// once by the caller; the integrand only carries the y-y and x-y energies, so
// near-collision eval tuples cost nothing in accuracy.
double kappa_at(const CanonicalEnsemble& ens, double z_value, std::span<const double> xf,
                double quad_tol) {
  const int d = ens.domain.dim();
  const int nn = static_cast<int>(xf.size()) / d;
  if (nn > ens.n) return 0.0;
  const double pref = falling_factorial(ens.n, nn) / z_value;
  const int m = ens.n - nn;
  if (m == 0) return pref;
  auto f = [&](std::span<const double> y) {
    const double e = energy(ens.potential, y, d) + interaction_energy_flat(ens.potential, xf, y, d);
    return boltzmann(ens.beta, e);
  };
  const auto bounds = tuple_bounds(ens.domain, m);
  const auto mesh = tuple_mesh(ens.domain, m, ens.potential);
  QuadResult res = integrate_box(f, bounds, quad_tol, quad_tol, 50'000'000, mesh);
  if (!res.converged)
    throw QuadratureFailure("correlation quadrature did not converge", res);
  return pref * res.value;
}

}  // namespace

CanonicalEnsemble::CanonicalEnsemble(int n_in, BoxDomain domain_in, double beta_in,
                                     PairPotentialModel potential_in)
    : n(n_in), domain(std::move(domain_in)), beta(beta_in), potential(std::move(potential_in)) {
  if (n < 0) throw std::invalid_argument("CanonicalEnsemble: negative particle count");
  if (beta < 0.0 || !std::isfinite(beta))
    throw std::invalid_argument("CanonicalEnsemble: beta must be finite and >= 0");
  if (domain.dim() < 1) throw std::invalid_argument("CanonicalEnsemble: empty domain");
  if (potential.dim() != domain.dim())
    throw std::invalid_argument("CanonicalEnsemble: potential dimension does not match the box");
}

CanonicalEnsemble CanonicalEnsemble::with_particles(int m) const {
  return CanonicalEnsemble(m, domain, beta, potential);
}

double gibbs_density_unnormalized(const CanonicalEnsemble& ens, std::span<const double> flat) {
  const int d = ens.domain.dim();
  if (flat.size() != static_cast<std::size_t>(ens.n) * static_cast<std::size_t>(d))
    throw std::invalid_argument("gibbs_density_unnormalized: tuple size mismatch");
  return boltzmann(ens.beta, energy(ens.potential, flat, d));
}

QuadResult partition_oracle(const CanonicalEnsemble& ens, double quad_tol) {
  if (quad_tol <= 0.0) throw std::invalid_argument("partition_oracle: quad_tol must be > 0");
  if (ens.n == 0) return QuadResult{1.0, 0.0, 0, true};
  const int d = ens.domain.dim();
  if (ens.n * d > 6)
    throw std::domain_error("partition_oracle: quadrature dimension cap N*d <= 6 exceeded");
  auto f = [&](std::span<const double> x) { return gibbs_density_unnormalized(ens, x); };
  const auto bounds = tuple_bounds(ens.domain, ens.n);
  const auto mesh = tuple_mesh(ens.domain, ens.n, ens.potential);
  QuadResult res = integrate_box(f, bounds, quad_tol, quad_tol, 50'000'000, mesh);
  if (!res.converged)
    throw QuadratureFailure("partition quadrature did not converge", res);
  return res;
}

std::vector<double> correlation_oracle_compensated(const CanonicalEnsemble& ens, int order,
                                                   const std::vector<std::vector<double>>& points,
                                                   double quad_tol) {
  if (order < 0) throw std::invalid_argument("correlation order must be >= 0");
  if (order == 0) return std::vector<double>(points.size(), 1.0);
  if (order > ens.n) return std::vector<double>(points.size(), 0.0);
  const int d = ens.domain.dim();
  if ((ens.n - order) * d > 4)
    throw std::domain_error("correlation_oracle: dimension cap (N-n)*d <= 4 exceeded");
  const double z = partition_oracle(ens, quad_tol).value;
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != order * d)
      throw std::invalid_argument("correlation_oracle: eval point has the wrong length");
    out.push_back(kappa_at(ens, z, p, quad_tol));
  }
  return out;
}

std::vector<double> correlation_oracle(const CanonicalEnsemble& ens, int order,
                                       const std::vector<std::vector<double>>& points,
                                       double quad_tol) {
  std::vector<double> out = correlation_oracle_compensated(ens, order, points, quad_tol);
  if (order == 0 || order > ens.n) return out;
  const int d = ens.domain.dim();
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] *= boltzmann(ens.beta, energy(ens.potential, points[i], d));
  return out;
}

namespace {

// Metropolis chain state over the flat coordinate vector. Exact coincidences
// are rejected outright so emitted configurations stay valid point sets.
class CanonicalChain {
 public:
  CanonicalChain(const CanonicalEnsemble& ens, const McmcParams& params)
      : ens_(ens), rng_(params.seed, params.stream, 0), d_(ens.domain.dim()) {
    step_ = params.step > 0.0 ? params.step : 0.25 * min_side(ens.domain);
    clamp_step();
    init_state();
  }

  void sweep(bool tuning) {
    const int n = ens_.n;
    for (int a = 0; a < n; ++a) try_move(rng_.index(static_cast<std::size_t>(n)));
    ++window_sweeps_;
    if (tuning && window_sweeps_ >= 25) {
      const double rate =
          window_prop_ > 0 ? static_cast<double>(window_acc_) / static_cast<double>(window_prop_) : 0.0;
      if (rate < 0.30) step_ *= 0.85;
      else if (rate > 0.50) step_ *= 1.2;
      clamp_step();
      reset_window();
    }
    if (!tuning && window_sweeps_ >= 50) {
      if (window_acc_ == 0)
        throw std::runtime_error(
            "sample_gibbs: zero accepted moves across a 50-sweep window (mixing failure)");
      reset_window();
    }
  }

  Configuration emit() const { return Configuration(ens_.domain, x_); }

  double step() const { return step_; }
  std::size_t proposed() const { return proposed_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t proposed_in_box() const { return proposed_in_box_; }
  std::size_t accepted_in_box() const { return accepted_in_box_; }
  void reset_counters() {
    proposed_ = accepted_ = proposed_in_box_ = accepted_in_box_ = 0;
    reset_window();
  }

 private:
  void clamp_step() {
    const double m = min_side(ens_.domain);
    step_ = std::min(std::max(step_, 1e-8 * m), 0.49 * m);
  }

  void reset_window() {
    window_prop_ = window_acc_ = 0;
    window_sweeps_ = 0;
  }

  void init_state() {
    const int n = ens_.n;
    x_.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(d_));
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < d_; ++k)
          x_[static_cast<std::size_t>(i) * d_ + k] = rng_.uniform(0.0, ens_.domain.lengths[k]);
      bool distinct = true;
      for (int i = 0; i < n && distinct; ++i)
        for (int j = i + 1; j < n && distinct; ++j)
          if (dist(point(i), point(j)) == 0.0) distinct = false;
      if (!distinct) continue;
      if (std::isfinite(energy(ens_.potential, x_, d_))) return;
    }
    throw std::runtime_error("sample_gibbs: could not draw a finite-energy initial state");
  }

  std::span<const double> point(int i) const {
    return std::span<const double>(x_).subspan(static_cast<std::size_t>(i) * d_,
                                               static_cast<std::size_t>(d_));
  }

  void try_move(std::size_t i) {
    ++proposed_;
    ++window_prop_;
    y_.resize(static_cast<std::size_t>(d_));
    for (int k = 0; k < d_; ++k)
      y_[static_cast<std::size_t>(k)] = x_[i * d_ + k] + step_ * (2.0 * rng_.uniform() - 1.0);
    if (!ens_.domain.contains(y_)) return;
    ++proposed_in_box_;
    double de = 0.0;
    const std::size_t n = static_cast<std::size_t>(ens_.n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double rn = dist(y_, point(static_cast<int>(j)));
      if (rn == 0.0) return;
      de += ens_.potential.evaluate_radial(rn) -
            ens_.potential.evaluate_radial(dist(point(static_cast<int>(i)), point(static_cast<int>(j))));
    }
    if (de > 0.0 && !(rng_.uniform() < std::exp(-ens_.beta * de))) return;
    std::copy(y_.begin(), y_.end(), x_.begin() + static_cast<std::ptrdiff_t>(i * d_));
    ++accepted_;
    ++accepted_in_box_;
    ++window_acc_;
  }

  const CanonicalEnsemble& ens_;
  Rng rng_;
  int d_;
  double step_ = 0.0;
  std::vector<double> x_, y_;
  std::size_t proposed_ = 0, accepted_ = 0;
  std::size_t proposed_in_box_ = 0, accepted_in_box_ = 0;
  std::size_t window_prop_ = 0, window_acc_ = 0, window_sweeps_ = 0;
};

}  // namespace

std::vector<Configuration> sample_gibbs(const CanonicalEnsemble& ens, const McmcParams& params,
                                        McmcStats* stats) {
  if (ens.n < 1) throw std::invalid_argument("sample_gibbs: need at least one particle");
  if (params.samples < 1) throw std::invalid_argument("sample_gibbs: need samples >= 1");
  const std::size_t thin = std::max<std::size_t>(1, params.thin);
  CanonicalChain chain(ens, params);
  for (std::size_t s = 0; s < params.burnin; ++s) chain.sweep(true);
  if (params.burnin >= 50 && chain.accepted() == 0)
    throw std::runtime_error("sample_gibbs: zero accepted moves during burn-in (mixing failure)");
  chain.reset_counters();
  std::vector<Configuration> out;
  out.reserve(params.samples);
  for (std::size_t s = 0; s < params.samples; ++s) {
    for (std::size_t t = 0; t < thin; ++t) chain.sweep(false);
    out.push_back(chain.emit());
  }
  if (stats) {
    stats->acceptance = chain.proposed() > 0
                            ? static_cast<double>(chain.accepted()) / static_cast<double>(chain.proposed())
                            : 0.0;
    stats->in_box_acceptance =
        chain.proposed_in_box() > 0
            ? static_cast<double>(chain.accepted_in_box()) / static_cast<double>(chain.proposed_in_box())
            : 0.0;
    stats->step = chain.step();
    stats->proposals = chain.proposed();
  }
  return out;
}

BalanceAudit metropolis_balance_audit(const CanonicalEnsemble& ens, const Configuration& from,
                                      std::size_t index, std::span<const double> proposal) {
  if (index >= from.size()) throw std::out_of_range("metropolis_balance_audit: bad index");
  if (static_cast<int>(proposal.size()) != from.dim())
    throw std::invalid_argument("metropolis_balance_audit: proposal dimension mismatch");
  const double px = gibbs_density_unnormalized(ens, from.flat());
  double py = 0.0;
  if (ens.domain.contains(proposal)) {
    std::vector<double> moved = from.flat();
    std::copy(proposal.begin(), proposal.end(),
              moved.begin() + static_cast<std::ptrdiff_t>(index * static_cast<std::size_t>(from.dim())));
    py = gibbs_density_unnormalized(ens, moved);
  }
  BalanceAudit audit;
  audit.forward = px * (px <= py ? 1.0 : (px > 0.0 ? py / px : 0.0));
  audit.backward = py * (py <= px ? 1.0 : (py > 0.0 ? px / py : 0.0));
  return audit;
}

double pair_bin_volume(const BoxDomain& box, double r_lo, double r_hi) {
  const int d = box.dim();
  if (d < 1 || d > 3) throw std::invalid_argument("pair_bin_volume: dimension must be 1, 2, or 3");
  const double diag = box_diagonal(box);
  const double hi = std::min(r_hi, diag);
  const double lo = std::max(0.0, r_lo);
  if (hi <= lo) return 0.0;
  if (d == 1) {
    const double len = box.lengths[0];
    return 2.0 * (len * (hi - lo) - 0.5 * (hi * hi - lo * lo));
  }
  const double half_pi = 2.0 * std::atan(1.0);
  auto angular = [&](double r) {
    if (d == 2) {
      const double l0 = box.lengths[0], l1 = box.lengths[1];
      auto f = [&](double th) {
        return std::max(0.0, l0 - r * std::cos(th)) * std::max(0.0, l1 - r * std::sin(th));
      };
      std::vector<double> knots;
      if (r > l0) knots.push_back(std::acos(l0 / r));
      if (r > l1) knots.push_back(std::asin(l1 / r));
      std::sort(knots.begin(), knots.end());
      return 4.0 * integrate_adaptive(f, 0.0, half_pi, 1e-13, 1e-11, 400000, knots).value;
    }
    const double l0 = box.lengths[0], l1 = box.lengths[1], l2 = box.lengths[2];
    auto outer = [&](double th) {
      const double st = std::sin(th), ct = std::cos(th);
      auto inner = [&](double ph) {
        return std::max(0.0, l0 - r * st * std::cos(ph)) * std::max(0.0, l1 - r * st * std::sin(ph)) *
               std::max(0.0, l2 - r * ct);
      };
      return st * integrate_adaptive(inner, 0.0, half_pi, 1e-13, 1e-10, 400000).value;
    };
    return 8.0 * integrate_adaptive(outer, 0.0, half_pi, 1e-12, 1e-9, 400000).value;
  };
  auto shell = [&](double r) { return std::pow(r, d - 1) * angular(r); };
  std::vector<double> knots;
  for (double len : box.lengths)
    if (len > lo && len < hi) knots.push_back(len);
  std::sort(knots.begin(), knots.end());
  return integrate_adaptive(shell, lo, hi, 1e-11, 1e-8, 2000000, knots).value;
}

CorrelationEstimate correlation_estimate(const std::vector<Configuration>& samples, int order,
                                         const CorrelationGrid& grid) {
  if (samples.empty()) throw std::invalid_argument("correlation_estimate: no samples");
  if (order == 3)
    throw std::invalid_argument(
        "correlation_estimate: three-point histograms are not provided; use the quadrature oracle");
  if (order != 1 && order != 2)
    throw std::invalid_argument("correlation_estimate: order must be 1 or 2");
  if (grid.bins < 1) throw std::invalid_argument("correlation_estimate: need at least one bin");
  const BoxDomain& box = samples.front().box();
  for (const auto& s : samples)
    if (!(s.box() == box)) throw std::invalid_argument("correlation_estimate: mixed boxes");

  double lo = grid.lo, hi = grid.hi;
  if (hi <= 0.0) hi = order == 1 ? box.lengths[0] : box_diagonal(box);
  if (grid.log_spaced && lo <= 0.0)
    throw std::invalid_argument("correlation_estimate: log spacing needs lo > 0");
  if (!(hi > lo)) throw std::invalid_argument("correlation_estimate: empty bin range");

  const int nb = grid.bins;
  std::vector<double> edges(static_cast<std::size_t>(nb) + 1);
  for (int i = 0; i <= nb; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(nb);
    edges[static_cast<std::size_t>(i)] =
        grid.log_spaced ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
  }
  auto locate = [&](double v) -> int {
    if (v < lo || v >= hi) return -1;
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    return static_cast<int>(it - edges.begin()) - 1;
  };

  const std::size_t ns = samples.size();
  std::vector<std::vector<double>> series(static_cast<std::size_t>(nb),
                                          std::vector<double>(ns, 0.0));
  for (std::size_t s = 0; s < ns; ++s) {
    const Configuration& g = samples[s];
    if (order == 1) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const int b = locate(g.point(i)[0]);
        if (b >= 0) series[static_cast<std::size_t>(b)][s] += 1.0;
      }
    } else {
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j) {
          const int b = locate(dist(g.point(i), g.point(j)));
          if (b >= 0) series[static_cast<std::size_t>(b)][s] += 1.0;
        }
    }
  }

  double cross_section = 1.0;
  for (int k = 1; k < box.dim(); ++k) cross_section *= box.lengths[static_cast<std::size_t>(k)];

  CorrelationEstimate est;
  est.order = order;
  est.samples = ns;
  est.bin_lo.resize(static_cast<std::size_t>(nb));
  est.bin_hi.resize(static_cast<std::size_t>(nb));
  est.value.assign(static_cast<std::size_t>(nb), 0.0);
  est.se.assign(static_cast<std::size_t>(nb), 0.0);
  est.count.assign(static_cast<std::size_t>(nb), 0);
  est.empty.assign(static_cast<std::size_t>(nb), 0);
  for (int b = 0; b < nb; ++b) {
    const std::size_t ub = static_cast<std::size_t>(b);
    est.bin_lo[ub] = edges[ub];
    est.bin_hi[ub] = edges[ub + 1];
    double total = 0.0;
    for (double c : series[ub]) total += c;
    est.count[ub] = static_cast<std::size_t>(std::llround(total));
    if (est.count[ub] == 0) {
      est.empty[ub] = 1;
      continue;
    }
    const MeanSe bm = batch_means(series[ub]);
    double vol = 0.0;
    double scale = 1.0;
    if (order == 1) {
      vol = (est.bin_hi[ub] - est.bin_lo[ub]) * cross_section;
    } else {
      vol = pair_bin_volume(box, est.bin_lo[ub], est.bin_hi[ub]);
      scale = 2.0;
    }
    if (vol <= 0.0) {
      est.empty[ub] = 1;
      est.count[ub] = 0;
      continue;
    }
    est.value[ub] = scale * bm.mean / vol;
    est.se[ub] = scale * bm.se / vol;
  }
  return est;
}

namespace {

// Mean insertion weight <exp(-beta dE)> with per-sample averaging over the
// trial draws; the batch-means SE accounts for chain autocorrelation.
MeanSe widom_mean(const std::vector<Configuration>& samples, const PairPotentialModel& pot,
                  double beta, const BoxDomain& box, std::size_t insertions, Rng& rng) {
  const int d = box.dim();
  std::vector<double> per_sample(samples.size(), 0.0);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    double acc = 0.0;
    for (std::size_t t = 0; t < insertions; ++t) {
      for (int k = 0; k < d; ++k) x[static_cast<std::size_t>(k)] = rng.uniform(0.0, box.lengths[static_cast<std::size_t>(k)]);
      acc += boltzmann(beta, interaction_energy_flat(pot, x, samples[s].flat(), d));
    }
    per_sample[s] = acc / static_cast<double>(insertions);
  }
  return batch_means(per_sample);
}

std::vector<Configuration> reduced_samples(const CanonicalEnsemble& ens, int m,
                                           const McmcParams& params) {
  if (m == 0) return {Configuration::empty(ens.domain)};
  return sample_gibbs(ens.with_particles(m), params);
}

}  // namespace

RatioResult partition_ratio(const CanonicalEnsemble& ens, RatioMethod method,
                            const RatioParams& params) {
  if (ens.n < 1) throw std::invalid_argument("partition_ratio: need N >= 1");
  RatioResult r;
  if (method == RatioMethod::oracle) {
    const QuadResult zn = partition_oracle(ens, params.quad_tol);
    const QuadResult zm = ens.n == 1 ? QuadResult{1.0, 0.0, 0, true}
                                     : partition_oracle(ens.with_particles(ens.n - 1), params.quad_tol);
    r.value = zm.value / zn.value;
    r.se = r.value * std::sqrt((zm.error / zm.value) * (zm.error / zm.value) +
                               (zn.error / zn.value) * (zn.error / zn.value));
    return r;
  }
  const double vol = ens.domain.volume();
  if (ens.n == 1) {
    r.value = 1.0 / vol;
    return r;
  }
  const std::vector<Configuration> samples = sample_gibbs(ens.with_particles(ens.n - 1), params.mcmc);
  Rng ins(params.mcmc.seed, params.mcmc.stream, 1);
  const MeanSe m = widom_mean(samples, ens.potential, ens.beta, ens.domain,
                              std::max<std::size_t>(1, params.insertions), ins);
  if (m.mean <= 0.0) {
    r.degenerate = true;
    return r;
  }
  r.value = 1.0 / (vol * m.mean);
  r.se = r.value * m.se / m.mean;
  return r;
}

NVSchedule::NVSchedule(double rho_in, std::vector<std::pair<int, BoxDomain>> entries_in,
                       double tol_in)
    : rho(rho_in), tol(tol_in), entries(std::move(entries_in)) {
  if (!(rho > 0.0)) throw std::invalid_argument("NVSchedule: target density must be > 0");
  if (entries.empty()) throw std::invalid_argument("NVSchedule: no entries");
  if (!(tol > 0.0)) throw std::invalid_argument("NVSchedule: tolerance must be > 0");
  const int d = entries.front().second.dim();
  double prev_vol = 0.0;
  double prev_gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < entries.size(); ++j) {
    const auto& [n, box] = entries[j];
    if (n < 1) throw std::invalid_argument("NVSchedule: entries need N >= 1");
    if (box.dim() != d) throw std::invalid_argument("NVSchedule: mixed dimensions");
    const double vol = box.volume();
    if (!(vol > prev_vol))
      throw std::invalid_argument("NVSchedule: volumes must be strictly increasing");
    prev_vol = vol;
    const double gap = std::abs(density(j) - rho);
    if (gap > prev_gap + 1e-12)
      throw std::invalid_argument("NVSchedule: densities drift away from the target");
    prev_gap = gap;
  }
  if (prev_gap > tol + 1e-15)
    throw std::invalid_argument("NVSchedule: final density misses the target tolerance");
}

NVSchedule NVSchedule::at_density(double rho, int d, const std::vector<int>& ns, double tol) {
  if (!(rho > 0.0)) throw std::invalid_argument("NVSchedule: target density must be > 0");
  if (d < 1) throw std::invalid_argument("NVSchedule: dimension must be >= 1");
  std::vector<std::pair<int, BoxDomain>> entries;
  entries.reserve(ns.size());
  int prev = 0;
  for (int n : ns) {
    if (n <= prev) throw std::invalid_argument("NVSchedule: particle counts must increase");
    prev = n;
    const double side = std::pow(static_cast<double>(n) / rho, 1.0 / static_cast<double>(d));
    entries.emplace_back(n, BoxDomain::cube(d, side));
  }
  return NVSchedule(rho, std::move(entries), tol);
}

double NVSchedule::density(std::size_t j) const {
  return static_cast<double>(entries.at(j).first) / entries.at(j).second.volume();
}

ActivityEstimate estimate_activity(const NVSchedule& schedule, double beta,
                                   const PairPotentialModel& pot, RatioMethod method,
                                   const RatioParams& params) {
  ActivityEstimate est;
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < schedule.entries.size(); ++j) {
    const auto& [n, box] = schedule.entries[j];
    CanonicalEnsemble ens(n, box, beta, pot);
    RatioParams pj = params;
    pj.mcmc.stream = params.mcmc.stream + j;
    const RatioResult r = partition_ratio(ens, method, pj);
    est.ratio.push_back(r.value);
    est.degenerate.push_back(r.degenerate ? 1 : 0);
    if (r.degenerate) {
      est.z.push_back(std::numeric_limits<double>::quiet_NaN());
      est.se.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    est.z.push_back(static_cast<double>(n) * r.value);
    est.se.push_back(static_cast<double>(n) * r.se);
    est.c1_fit = std::max(est.c1_fit, r.value * box.volume());
    xs.push_back(1.0 / static_cast<double>(n));
    ys.push_back(est.z.back());
  }
  if (xs.size() >= 2) {
    const LineFit fit = fit_line(xs, ys);
    est.extrapolated = fit.intercept;
    est.extrapolated_se = fit.se_intercept;
  } else if (xs.size() == 1) {
    est.extrapolated = ys.front();
    for (std::size_t j = 0; j < est.z.size(); ++j)
      if (!est.degenerate[j]) est.extrapolated_se = est.se[j];
  } else {
    est.extrapolated = std::numeric_limits<double>::quiet_NaN();
    est.extrapolated_se = std::numeric_limits<double>::quiet_NaN();
  }
  return est;
}

namespace {

std::vector<std::vector<double>> diag_grid(const BoxDomain& box, int m) {
  std::vector<std::vector<double>> pts;
  pts.reserve(static_cast<std::size_t>(m));
  for (int t = 0; t < m; ++t) {
    const double frac = (static_cast<double>(t) + 0.5) / static_cast<double>(m);
    std::vector<double> p(box.lengths.size());
    for (std::size_t k = 0; k < box.lengths.size(); ++k) p[k] = frac * box.lengths[k];
    pts.push_back(std::move(p));
  }
  return pts;
}

std::vector<double> geometric_separations(double r_min, double r_max, int m) {
  std::vector<double> rs;
  rs.reserve(static_cast<std::size_t>(m));
  if (m == 1) return {r_min};
  for (int i = 0; i < m; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(m - 1);
    rs.push_back(r_min * std::pow(r_max / r_min, t));
  }
  return rs;
}

std::vector<double> box_center(const BoxDomain& box) {
  std::vector<double> c(box.lengths.size());
  for (std::size_t k = 0; k < box.lengths.size(); ++k) c[k] = 0.5 * box.lengths[k];
  return c;
}

// n-tuples around the box center spread along axis 0, separations geometric
// from r_min up to a fraction of the shortest side (near-collision included).
std::vector<std::vector<double>> tuple_grid(const BoxDomain& box, int order, int m, double r_min) {
  const double r_max = 0.45 * min_side(box) / (order > 2 ? 2.0 : 1.0);
  const auto rs = geometric_separations(std::min(r_min, 0.5 * r_max), r_max, m);
  const auto c = box_center(box);
  const std::size_t d = box.lengths.size();
  std::vector<std::vector<double>> pts;
  pts.reserve(rs.size());
  for (double r : rs) {
    std::vector<double> p;
    p.reserve(static_cast<std::size_t>(order) * d);
    for (int q = 0; q < order; ++q) {
      const double off = (static_cast<double>(q) - 0.5 * static_cast<double>(order - 1)) * r;
      for (std::size_t k = 0; k < d; ++k) p.push_back(c[k] + (k == 0 ? off : 0.0));
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

struct ScanPoint {
  double xi_stat = 0.0;    // k^{1/n}
  double zeta_stat = 0.0;  // (k e^{(2/n) beta sum phi})^{1/n}
  double rel_se = 0.0;
};

ScanPoint stats_from_kappa(double kappa, double rel_se, double e_pair, double beta, int order) {
  ScanPoint p;
  const double inv = 1.0 / static_cast<double>(order);
  const double k = kappa * boltzmann(beta, e_pair);
  const double zstat = kappa * std::exp((2.0 * inv - 1.0) * beta * e_pair);
  p.xi_stat = k > 0.0 ? std::pow(k, inv) : 0.0;
  p.zeta_stat = zstat > 0.0 ? std::pow(zstat, inv) : 0.0;
  p.rel_se = rel_se;
  return p;
}

}  // namespace

RuelleReport verify_ruelle_bound(const NVSchedule& schedule, double beta,
                                 const PairPotentialModel& pot, const std::vector<int>& orders,
                                 const RuelleParams& params) {
  RuelleReport report;
  const std::size_t ne = schedule.entries.size();
  for (const auto& [n, box] : schedule.entries) {
    report.ns.push_back(n);
    report.volumes.push_back(box.volume());
  }
  report.all_bounded = true;
  const int d = schedule.entries.front().second.dim();
  const int m = std::max(2, params.grid_points);

  for (std::size_t oi = 0; oi < orders.size(); ++oi) {
    const int order = orders[oi];
    if (order < 1 || order > 3)
      throw std::invalid_argument("verify_ruelle_bound: orders must lie in {1,2,3}");
    RuelleOrderReport rep;
    rep.order = order;
    for (std::size_t j = 0; j < ne; ++j) {
      const auto& [n, box] = schedule.entries[j];
      CanonicalEnsemble ens(n, box, beta, pot);
      if (order > n) {
        rep.xi_hat.push_back(0.0);
        rep.zeta_hat.push_back(0.0);
        rep.xi_se.push_back(0.0);
        rep.zeta_se.push_back(0.0);
        rep.method.push_back("trivial");
        continue;
      }
      const bool oracle_ok = n * d <= 4 && (n - order) * d <= 4;
      double xi = 0.0, zeta = 0.0, xi_se = 0.0, zeta_se = 0.0;
      std::string method;
      if (oracle_ok) {
        method = "oracle";
        const auto grid = order == 1 ? diag_grid(box, m) : tuple_grid(box, order, m, params.r_min);
        const auto kappa = correlation_oracle_compensated(ens, order, grid, params.quad_tol);
        for (std::size_t g = 0; g < grid.size(); ++g) {
          const double ep = energy(pot, grid[g], d);
          const ScanPoint p = stats_from_kappa(kappa[g], 0.0, ep, beta, order);
          xi = std::max(xi, p.xi_stat);
          zeta = std::max(zeta, p.zeta_stat);
        }
      } else if (order == 1) {
        method = "histogram";
        McmcParams mp = params.mcmc;
        mp.stream = params.mcmc.stream + j * 8 + static_cast<std::size_t>(order);
        const auto samples = sample_gibbs(ens, mp);
        CorrelationGrid grid;
        grid.bins = m;
        const auto est = correlation_estimate(samples, 1, grid);
        for (std::size_t b = 0; b < est.value.size(); ++b) {
          if (est.empty[b]) continue;
          if (est.value[b] > xi) {
            xi = est.value[b];
            xi_se = est.se[b];
          }
        }
        zeta = xi;
        zeta_se = xi_se;
      } else {
        // Tuple-insertion estimator: kappa(X) = N...(N-n+1) Z^{(N-n)}/Z^{(N)}
        // <exp(-beta W(X, .))>_{N-n}, with the ratio from a chain of widom
        // steps. Distance histograms cannot resolve the mandatory
        // near-collision separations, this estimator can.
        method = "insertion";
        const int m0 = n - order;
        double ratio_prod = 1.0;
        double rel_var = 0.0;
        bool degenerate = false;
        std::vector<Configuration> base_samples;
        for (int level = m0; level < n; ++level) {
          McmcParams mp = params.mcmc;
          mp.stream = params.mcmc.stream + j * 8 + static_cast<std::size_t>(level) + 101;
          const auto samples = reduced_samples(ens, level, mp);
          Rng ins(mp.seed, mp.stream, 1);
          const MeanSe wm = widom_mean(samples, pot, beta, box, 8, ins);
          if (wm.mean <= 0.0) {
            degenerate = true;
            break;
          }
          ratio_prod /= box.volume() * wm.mean;
          const double rel = wm.se / wm.mean;
          rel_var += rel * rel;
          if (level == m0) base_samples = samples;
        }
        if (degenerate) {
          rep.xi_hat.push_back(std::numeric_limits<double>::quiet_NaN());
          rep.zeta_hat.push_back(std::numeric_limits<double>::quiet_NaN());
          rep.xi_se.push_back(0.0);
          rep.zeta_se.push_back(0.0);
          rep.method.push_back("insertion-degenerate");
          continue;
        }
        const auto grid = tuple_grid(box, order, m, params.r_min);
        const double pref = falling_factorial(n, order);
        std::vector<double> weights(base_samples.size());
        for (const auto& X : grid) {
          for (std::size_t s = 0; s < base_samples.size(); ++s)
            weights[s] =
                boltzmann(beta, interaction_energy_flat(pot, X, base_samples[s].flat(), d));
          const MeanSe wm = batch_means(weights);
          if (wm.mean <= 0.0) continue;
          const double kappa = pref * ratio_prod * wm.mean;
          const double rel = std::sqrt(rel_var + (wm.se / wm.mean) * (wm.se / wm.mean));
          const double ep = energy(pot, X, d);
          const ScanPoint p = stats_from_kappa(kappa, rel, ep, beta, order);
          if (p.xi_stat > xi) {
            xi = p.xi_stat;
            xi_se = p.xi_stat * p.rel_se / static_cast<double>(order);
          }
          if (p.zeta_stat > zeta) {
            zeta = p.zeta_stat;
            zeta_se = p.zeta_stat * p.rel_se / static_cast<double>(order);
          }
        }
      }
      rep.xi_hat.push_back(xi);
      rep.zeta_hat.push_back(zeta);
      rep.xi_se.push_back(xi_se);
      rep.zeta_se.push_back(zeta_se);
      rep.method.push_back(method);
    }

    double xi_min = std::numeric_limits<double>::infinity(), xi_max = 0.0;
    double zeta_min = std::numeric_limits<double>::infinity(), zeta_max = 0.0;
    bool usable = false;
    bool healthy = true;
    for (std::size_t j = 0; j < rep.method.size(); ++j) {
      if (rep.method[j] == "trivial") continue;
      if (!(rep.zeta_hat[j] > 0.0) || !std::isfinite(rep.zeta_hat[j])) {
        healthy = false;
        continue;
      }
      usable = true;
      xi_min = std::min(xi_min, rep.xi_hat[j]);
      xi_max = std::max(xi_max, rep.xi_hat[j]);
      zeta_min = std::min(zeta_min, rep.zeta_hat[j]);
      zeta_max = std::max(zeta_max, rep.zeta_hat[j]);
    }
    if (usable) {
      rep.xi_growth = xi_min > 0.0 ? xi_max / xi_min : std::numeric_limits<double>::infinity();
      rep.zeta_growth = zeta_max / zeta_min;
      rep.bounded = healthy && rep.zeta_growth <= params.stability_factor;
    } else {
      rep.bounded = healthy;
    }
    report.all_bounded = report.all_bounded && rep.bounded;
    report.orders.push_back(std::move(rep));
  }
  return report;
}

std::vector<double> kirkwood_salsburg_residual(const CanonicalEnsemble& ens, int order,
                                               const std::vector<std::vector<double>>& points,
                                               double quad_tol) {
  const int d = ens.domain.dim();
  const int n = order;
  if (n < 1 || n > ens.n)
    throw std::invalid_argument("kirkwood_salsburg_residual: order must satisfy 1 <= n <= N");
  if (ens.n * d > 6)
    throw std::domain_error("kirkwood_salsburg_residual: dimension cap N*d <= 6 exceeded");
  const double big_n = static_cast<double>(ens.n);
  const double z = partition_oracle(ens, quad_tol).value;
  const CanonicalEnsemble ens1 = ens.with_particles(ens.n - 1);
  const double z1 = ens1.n == 0 ? 1.0 : partition_oracle(ens1, quad_tol).value;

  auto corr1 = [&](std::span<const double> pts) {
    if (pts.empty()) return 1.0;
    const double e = energy(ens.potential, pts, d);
    const double w = boltzmann(ens.beta, e);
    if (w == 0.0) return 0.0;
    return kappa_at(ens1, z1, pts, quad_tol * 0.1) * w;
  };

  std::vector<double> residuals;
  residuals.reserve(points.size());
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != n * d)
      throw std::invalid_argument("kirkwood_salsburg_residual: eval point has the wrong length");
    const std::span<const double> x1(p.data(), static_cast<std::size_t>(d));
    const std::span<const double> tail(p.data() + d, static_cast<std::size_t>((n - 1) * d));

    const double e_full = energy(ens.potential, p, d);
    const double lhs = boltzmann(ens.beta, e_full) == 0.0
                           ? 0.0
                           : kappa_at(ens, z, p, quad_tol) * boltzmann(ens.beta, e_full);

    double link = 0.0;
    for (int i = 1; i < n; ++i)
      link += ens.potential.evaluate_radial(
          dist(x1, std::span<const double>(p.data() + i * d, static_cast<std::size_t>(d))));

    double acc = corr1(tail);
    double kfact = 1.0;
    std::vector<double> pts2;
    for (int kk = 1; kk <= ens.n - n; ++kk) {
      kfact *= static_cast<double>(kk);
      auto f = [&, kk](std::span<const double> y) {
        pts2.assign(tail.begin(), tail.end());
        pts2.insert(pts2.end(), y.begin(), y.end());
        const double v = corr1(pts2);
        if (v == 0.0) return 0.0;
        double mayer = 1.0;
        for (int i = 0; i < kk; ++i) {
          const double r =
              dist(x1, std::span<const double>(y.data() + i * d, static_cast<std::size_t>(d)));
          mayer *= std::expm1(-ens.beta * ens.potential.evaluate_radial(r));
        }
        return v * mayer;
      };
      const auto bounds = tuple_bounds(ens.domain, kk);
      const auto mesh = tuple_mesh(ens.domain, kk, ens.potential);
      const QuadResult term = integrate_box(f, bounds, quad_tol, quad_tol, 50'000'000, mesh);
      if (!term.converged)
        throw QuadratureFailure("expansion term quadrature did not converge", term);
      acc += term.value / kfact;
    }
    const double rhs = big_n * (z1 / z) * boltzmann(ens.beta, link) * acc;
    if (lhs == 0.0 && rhs == 0.0) {
      residuals.push_back(0.0);
      continue;
    }
    residuals.push_back(std::abs(lhs - rhs) /
                        std::max(std::abs(lhs), std::numeric_limits<double>::min()));
  }
  return residuals;
}

std::vector<Configuration> grand_canonical_sample(const BoxDomain& domain, double beta,
                                                  const PairPotentialModel& pot, double activity,
                                                  const GcmcParams& params, GcmcStats* stats) {
  if (domain.dim() < 1) throw std::invalid_argument("grand_canonical_sample: empty domain");
  if (pot.dim() != domain.dim())
    throw std::invalid_argument("grand_canonical_sample: potential dimension mismatch");
  if (!(activity > 0.0)) throw std::invalid_argument("grand_canonical_sample: activity must be > 0");
  if (params.cap < 1) throw std::invalid_argument("grand_canonical_sample: cap must be >= 1");
  if (params.samples < 1) throw std::invalid_argument("grand_canonical_sample: need samples >= 1");

  const int d = domain.dim();
  const double vol = domain.volume();
  const double log_zv = std::log(activity * vol);
  Rng rng(params.seed, params.stream, 0);
  std::vector<double> x;
  std::vector<double> p(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
  double step = params.step > 0.0 ? params.step : 0.3 * min_side(domain);
  std::size_t proposed = 0, accepted = 0;
  std::size_t disp_prop = 0, disp_acc = 0;

  auto npart = [&]() { return x.size() / static_cast<std::size_t>(d); };
  auto point = [&](std::size_t i) {
    return std::span<const double>(x).subspan(i * static_cast<std::size_t>(d),
                                              static_cast<std::size_t>(d));
  };
  auto accept = [&](double log_a) {
    if (log_a >= 0.0) return true;
    return std::log(rng.uniform()) < log_a;
  };

  // A fixed number of attempts per sweep: a sweep length that tracked the
  // instantaneous particle count would make the composed kernel
  // state-dependent and bias the stationary law.
  const std::size_t attempts =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(activity * vol)));
  auto sweep = [&](bool tuning) {
    for (std::size_t a = 0; a < attempts; ++a) {
      const double u = rng.uniform();
      ++proposed;
      if (u < 1.0 / 3.0) {
        for (int k = 0; k < d; ++k)
          p[static_cast<std::size_t>(k)] = rng.uniform(0.0, domain.lengths[static_cast<std::size_t>(k)]);
        double de = 0.0;
        bool bad = false;
        for (std::size_t j = 0; j < npart() && !bad; ++j) {
          const double r = dist(p, point(j));
          if (r == 0.0) bad = true;
          else de += pot.evaluate_radial(r);
        }
        if (bad || !std::isfinite(de)) continue;
        const double log_a = log_zv - std::log(static_cast<double>(npart() + 1)) - beta * de;
        if (accept(log_a)) {
          if (npart() + 1 > params.cap)
            throw std::runtime_error(
                "grand_canonical_sample: particle cap exceeded (explosion guard), activity " +
                std::to_string(activity));
          x.insert(x.end(), p.begin(), p.end());
          ++accepted;
        }
      } else if (u < 2.0 / 3.0) {
        const std::size_t nn = npart();
        if (nn == 0) continue;
        const std::size_t j = rng.index(nn);
        double de = 0.0;
        for (std::size_t i = 0; i < nn; ++i)
          if (i != j) de += pot.evaluate_radial(dist(point(j), point(i)));
        const double log_a = std::log(static_cast<double>(nn)) - log_zv + beta * de;
        if (accept(log_a)) {
          for (int k = 0; k < d; ++k)
            x[j * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] =
                x[(nn - 1) * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
          x.resize(x.size() - static_cast<std::size_t>(d));
          ++accepted;
        }
      } else {
        const std::size_t nn = npart();
        ++disp_prop;
        if (nn == 0) continue;
        const std::size_t j = rng.index(nn);
        for (int k = 0; k < d; ++k)
          y[static_cast<std::size_t>(k)] =
              x[j * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] +
              step * (2.0 * rng.uniform() - 1.0);
        if (!domain.contains(y)) continue;
        double de = 0.0;
        bool bad = false;
        for (std::size_t i = 0; i < nn && !bad; ++i) {
          if (i == j) continue;
          const double r = dist(y, point(i));
          if (r == 0.0) bad = true;
          else de += pot.evaluate_radial(r) - pot.evaluate_radial(dist(point(j), point(i)));
        }
        if (bad || std::isnan(de)) continue;
        if (accept(-beta * de)) {
          std::copy(y.begin(), y.end(),
                    x.begin() + static_cast<std::ptrdiff_t>(j * static_cast<std::size_t>(d)));
          ++accepted;
          ++disp_acc;
        }
      }
    }
    if (tuning && disp_prop >= 100) {
      const double rate = static_cast<double>(disp_acc) / static_cast<double>(disp_prop);
      if (rate < 0.30) step *= 0.85;
      else if (rate > 0.50) step *= 1.2;
      const double ms = min_side(domain);
      step = std::min(std::max(step, 1e-8 * ms), 0.49 * ms);
      disp_prop = disp_acc = 0;
    }
  };

  for (std::size_t s = 0; s < params.burnin; ++s) sweep(true);
  proposed = accepted = 0;
  const std::size_t thin = std::max<std::size_t>(1, params.thin);
  std::vector<Configuration> out;
  out.reserve(params.samples);
  std::vector<double> counts;
  counts.reserve(params.samples);
  std::size_t max_n = 0;
  for (std::size_t s = 0; s < params.samples; ++s) {
    for (std::size_t t = 0; t < thin; ++t) sweep(false);
    out.emplace_back(domain, x);
    counts.push_back(static_cast<double>(npart()));
    max_n = std::max(max_n, npart());
  }
  if (stats) {
    stats->acceptance =
        proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
    const MeanSe m = batch_means(counts);
    stats->mean_n = m.mean;
    stats->se_n = m.se;
    stats->max_n = max_n;
  }
  return out;
}

EnsembleComparisonReport ensembles_compare(const NVSchedule& schedule, double beta,
                                           const PairPotentialModel& pot,
                                           const EnsembleCompareParams& params) {
  EnsembleComparisonReport rep;
  rep.rho = schedule.rho;
  rep.k_declared = pot.ss().K;
  rep.mayer_j = mayer_integral(pot, beta, 1e-8).value;
  rep.density_bound = rep.mayer_j > 0.0
                          ? 1.0 / (2.0 * std::exp(2.0 * beta * rep.k_declared + 1.0) * rep.mayer_j)
                          : std::numeric_limits<double>::infinity();
  rep.in_regime = rep.rho < rep.density_bound;

  const auto& [n, box] = schedule.entries.back();
  rep.n = n;
  rep.volume = box.volume();
  rep.canonical_density = static_cast<double>(n) / rep.volume;

  const ActivityEstimate act =
      estimate_activity(schedule, beta, pot, params.ratio_method, params.ratio);
  rep.activity = act.extrapolated;
  rep.activity_se = act.extrapolated_se;

  CanonicalEnsemble ens(n, box, beta, pot);
  const auto canonical = sample_gibbs(ens, params.mcmc);
  GcmcStats gstats;
  const auto gc = grand_canonical_sample(box, beta, pot, rep.activity, params.gc, &gstats);
  rep.gc_density = gstats.mean_n / rep.volume;
  rep.gc_density_se = gstats.se_n / rep.volume;
  rep.density_rel_gap = std::abs(rep.canonical_density - rep.gc_density) / rep.canonical_density;

  CorrelationGrid grid;
  grid.bins = params.k2_bins;
  grid.hi = params.k2_hi > 0.0 ? params.k2_hi : 0.5 * min_side(box);
  rep.canonical_k2 = correlation_estimate(canonical, 2, grid);
  rep.gc_k2 = correlation_estimate(gc, 2, grid);

  for (std::size_t b = 0; b < rep.canonical_k2.value.size(); ++b) {
    if (rep.canonical_k2.empty[b] || rep.gc_k2.empty[b]) continue;
    const double gap = std::abs(rep.canonical_k2.value[b] - rep.gc_k2.value[b]);
    const double se = std::sqrt(rep.canonical_k2.se[b] * rep.canonical_k2.se[b] +
                                rep.gc_k2.se[b] * rep.gc_k2.se[b]);
    const double sigma = se > 0.0 ? gap / se : (gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.max_k2_sigma = std::max(rep.max_k2_sigma, sigma);
  }
  return rep;
}

std::vector<int> quadrature_mesh(const BoxDomain& box, int copies, const PairPotentialModel& pot) {
  const double scale = interaction_scale(pot);
  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(copies) * box.lengths.size());
  for (int c = 0; c < copies; ++c) {
    for (double len : box.lengths) {
      int k = 1;
      if (std::isfinite(scale) && scale > 0.0)
        k = static_cast<int>(std::min(4.0, std::max(1.0, std::ceil(len / scale))));
      cells.push_back(k);
    }
  }
  return cells;
}

}  // namespace nvlab
