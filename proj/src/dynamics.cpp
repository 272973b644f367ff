#include "nvlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace nvlab {

namespace {

// Pair distance below which a proposal counts as a coincidence and is
// re-drawn: 1e-12 times the interaction length (unit length for potentials
// without one).
double coincidence_threshold(const PairPotentialModel& pot) {
  const double s = pot.sigma();
  return 1e-12 * (s > 0.0 ? s : 1.0);
}

// Magnitude of a d-vector, scaled to survive components near the overflow
// threshold (steep repulsion at near-coincident pairs).
double safe_norm(std::span<const double> v) {
  double mx = 0.0;
  for (double c : v) mx = std::max(mx, std::fabs(c));
  if (mx == 0.0) return 0.0;
  double s2 = 0.0;
  for (double c : v) {
    const double t = c / mx;
    s2 += t * t;
  }
  return mx * std::sqrt(s2);
}

// Clips each per-particle vector to magnitude cap; returns whether any
// particle was clipped.
bool cap_in_place(std::vector<std::vector<double>>& dr, double cap) {
  bool clipped = false;
  for (auto& di : dr) {
    const double m = safe_norm(di);
    if (!std::isfinite(m)) throw std::runtime_error("drift: non-finite drift magnitude");
    if (m > cap) {
      const double scale = cap / m;
      for (double& c : di) c *= scale;
      clipped = true;
    }
  }
  return clipped;
}

std::vector<std::vector<double>> pairwise_drift(const PairPotentialModel& pot, double beta,
                                                const Configuration& g) {
  const int d = g.dim();
  const std::size_t n = g.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(static_cast<std::size_t>(d), 0.0));
  std::vector<double> v(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = g.point(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto xj = g.point(j);
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) {
        v[static_cast<std::size_t>(c)] = xi[c] - xj[c];
        r2 += v[static_cast<std::size_t>(c)] * v[static_cast<std::size_t>(c)];
      }
      const double r = std::sqrt(r2);
      if (r == 0.0) throw std::invalid_argument("drift: coincident points");
      const double fp = pot.radial_derivative(r);
      if (fp == 0.0) continue;
      for (int c = 0; c < d; ++c) {
        // Force on i from j; the exact negation keeps the pair sum identically
        // zero so the total drift is momentum-neutral to rounding.
        const double f = -beta * fp * v[static_cast<std::size_t>(c)] / r;
        out[i][static_cast<std::size_t>(c)] += f;
        out[j][static_cast<std::size_t>(c)] -= f;
      }
    }
  }
  return out;
}

// Gradient of the pair interaction at x - y: phi'(r) * (x-y)/r.
std::vector<double> pair_gradient(const PairPotentialModel& pot, std::span<const double> x,
                                  std::span<const double> y) {
  const std::size_t d = x.size();
  std::vector<double> v(d);
  double r2 = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    v[c] = x[c] - y[c];
    r2 += v[c] * v[c];
  }
  const double r = std::sqrt(r2);
  if (r == 0.0) throw std::invalid_argument("apply_generator: coincident points");
  const double fp = pot.radial_derivative(r);
  for (double& c : v) c *= fp / r;
  return v;
}

}  // namespace

void SdeParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("SdeParams: dt must be positive");
  if (!(horizon >= dt)) throw std::invalid_argument("SdeParams: horizon must be at least dt");
  if (m_cap && !(*m_cap > 0.0)) throw std::invalid_argument("SdeParams: m_cap must be positive");
  if (stride < 1) throw std::invalid_argument("SdeParams: stride must be at least 1");
  if (replicas < 1) throw std::invalid_argument("SdeParams: replicas must be at least 1");
}

std::vector<std::vector<double>> drift(const PairPotentialModel& pot, double beta,
                                       const Configuration& g, std::optional<double> m_cap) {
  if (pot.dim() != g.dim()) throw std::invalid_argument("drift: dimension mismatch");
  if (m_cap && !(*m_cap > 0.0)) throw std::invalid_argument("drift: m_cap must be positive");
  auto out = pairwise_drift(pot, beta, g);
  if (m_cap) cap_in_place(out, *m_cap);
  return out;
}

double mirror_fold(double x, double len, std::size_t* events) {
  if (!(len > 0.0)) throw std::invalid_argument("mirror_fold: length must be positive");
  if (x >= 0.0 && x <= len) return x;
  if (events) ++*events;
  const double period = 2.0 * len;
  double t = std::fmod(x, period);
  if (t < 0.0) t += period;
  return t <= len ? t : period - t;
}

Configuration step_euler_maruyama(const Configuration& g, const PairPotentialModel& pot,
                                  double beta, const SdeParams& params, Rng& rng,
                                  StepBookkeeping* book, std::span<const double> noise_override) {
  params.validate();
  if (pot.dim() != g.dim()) throw std::invalid_argument("step_euler_maruyama: dimension mismatch");
  const std::size_t d = static_cast<std::size_t>(g.dim());
  const std::size_t n = g.size();
  const std::size_t nd = n * d;
  if (!noise_override.empty() && noise_override.size() != nd)
    throw std::invalid_argument("step_euler_maruyama: noise_override needs one value per coordinate");

  auto dr = pairwise_drift(pot, beta, g);
  const bool clipped = params.m_cap ? cap_in_place(dr, *params.m_cap) : false;

  const double noise_scale = std::sqrt(2.0 * params.dt);
  const double thresh = coincidence_threshold(pot);
  constexpr std::size_t kRedrawCap = 100;

  std::vector<double> prop(nd), xi(nd);
  std::size_t redraws = 0;
  for (;;) {
    if (noise_override.empty()) {
      for (double& z : xi) z = rng.normal();
    } else {
      std::copy(noise_override.begin(), noise_override.end(), xi.begin());
    }
    std::size_t refl = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t k = i * d + c;
        const double raw = g.flat()[k] + dr[i][c] * params.dt + noise_scale * xi[k];
        if (!std::isfinite(raw))
          throw std::runtime_error("step_euler_maruyama: non-finite coordinate proposed");
        prop[k] = mirror_fold(raw, g.box().lengths[c], &refl);
      }
    }
    bool coincident = false;
    for (std::size_t i = 0; i < n && !coincident; ++i)
      for (std::size_t j = i + 1; j < n && !coincident; ++j) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double v = prop[i * d + c] - prop[j * d + c];
          r2 += v * v;
        }
        coincident = std::sqrt(r2) < thresh;
      }
    if (coincident) {
      if (!noise_override.empty())
        throw std::runtime_error(
            "step_euler_maruyama: coincident proposal under a fixed noise override");
      if (++redraws > kRedrawCap)
        throw std::runtime_error(
            "step_euler_maruyama: proposal re-draw cap (100) exceeded near a coincidence");
      continue;
    }
    if (book) {
      book->drift_dt.assign(nd, 0.0);
      book->noise.assign(nd, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) {
          book->drift_dt[i * d + c] = dr[i][c] * params.dt;
          book->noise[i * d + c] = noise_scale * xi[i * d + c];
        }
      book->reflections = refl;
      book->redraws = redraws;
      book->capped = clipped;
    }
    return Configuration(g.box(), std::move(prop));
  }
}

TrajectoryRecord simulate(const Configuration& initial, const PairPotentialModel& pot, double beta,
                          const SdeParams& params, int replica) {
  params.validate();
  if (pot.dim() != initial.dim()) throw std::invalid_argument("simulate: dimension mismatch");
  const auto total = static_cast<std::size_t>(std::llround(params.horizon / params.dt));
  const std::size_t n_rec = total / static_cast<std::size_t>(params.stride);
  if (n_rec == 0)
    throw std::invalid_argument("simulate: horizon shorter than one recorded interval");
  const std::size_t steps = n_rec * static_cast<std::size_t>(params.stride);

  Rng rng(params.seed, params.stream, static_cast<std::uint64_t>(replica));
  const std::size_t nd = initial.size() * static_cast<std::size_t>(initial.dim());

  TrajectoryRecord rec;
  rec.dt = params.dt;
  rec.stride = params.stride;
  rec.replica = replica;
  rec.times.push_back(0.0);
  rec.states.push_back(initial);
  rec.drift_sum.emplace_back(nd, 0.0);
  rec.noise_sum.emplace_back(nd, 0.0);
  rec.reflections.push_back(0);
  rec.capped.push_back(0);
  rec.redraws.push_back(0);

  Configuration cur = initial;
  std::vector<double> acc_drift(nd, 0.0), acc_noise(nd, 0.0);
  std::size_t acc_refl = 0, acc_capped = 0, acc_redraw = 0;
  StepBookkeeping book;
  for (std::size_t s = 1; s <= steps; ++s) {
    try {
      cur = step_euler_maruyama(cur, pot, beta, params, rng, &book);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("simulate: step " + std::to_string(s) + ": " + e.what());
    }
    for (std::size_t k = 0; k < nd; ++k) {
      acc_drift[k] += book.drift_dt[k];
      acc_noise[k] += book.noise[k];
    }
    acc_refl += book.reflections;
    acc_capped += book.capped ? 1 : 0;
    acc_redraw += book.redraws;
    if (s % static_cast<std::size_t>(params.stride) == 0) {
      rec.times.push_back(static_cast<double>(s) * params.dt);
      rec.states.push_back(cur);
      rec.drift_sum.push_back(acc_drift);
      rec.noise_sum.push_back(acc_noise);
      rec.reflections.push_back(acc_refl);
      rec.capped.push_back(acc_capped);
      rec.redraws.push_back(acc_redraw);
      std::fill(acc_drift.begin(), acc_drift.end(), 0.0);
      std::fill(acc_noise.begin(), acc_noise.end(), 0.0);
      acc_refl = acc_capped = acc_redraw = 0;
      rec.total_redraws += rec.redraws.back();
    }
  }
  rec.total_steps = steps;
  return rec;
}

std::vector<TrajectoryRecord> simulate_replicas(const Configuration& initial,
                                                const PairPotentialModel& pot, double beta,
                                                const SdeParams& params) {
  params.validate();
  std::vector<TrajectoryRecord> out;
  out.reserve(static_cast<std::size_t>(params.replicas));
  for (int r = 0; r < params.replicas; ++r) out.push_back(simulate(initial, pot, beta, params, r));
  return out;
}

std::vector<TrajectoryRecord> simulate_equilibrium(const CanonicalEnsemble& ens,
                                                   const SdeParams& params,
                                                   const McmcParams& init_params) {
  params.validate();
  McmcParams mp = init_params;
  mp.samples = static_cast<std::size_t>(params.replicas);
  const auto initials = sample_gibbs(ens, mp);
  std::vector<TrajectoryRecord> out;
  out.reserve(initials.size());
  for (int r = 0; r < params.replicas; ++r)
    out.push_back(simulate(initials[static_cast<std::size_t>(r)], ens.potential, ens.beta, params, r));
  return out;
}

double apply_generator(const CylinderFunction& f_cyl, const PairPotentialModel& pot, double beta,
                       const Configuration& g) {
  const std::size_t m = f_cyl.slots();
  if (m == 0) return 0.0;  // constants are harmonic
  const std::size_t d = static_cast<std::size_t>(g.dim());
  const std::size_t n = g.size();
  for (std::size_t j = 0; j < m; ++j)
    if (f_cyl.inner(j).dim() != g.dim())
      throw std::invalid_argument("apply_generator: slot dimension mismatch");

  const std::vector<double> u = f_cyl.arguments(g);

  // Per-slot gradients and Laplacians at every particle.
  std::vector<std::vector<double>> grads(m, std::vector<double>(n * d, 0.0));
  std::vector<std::vector<double>> laps(m, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t a = 0; a < n; ++a) {
      const auto ga = f_cyl.inner(j).gradient(g.point(a));
      std::copy(ga.begin(), ga.end(), grads[j].begin() + static_cast<std::ptrdiff_t>(a * d));
      laps[j][a] = f_cyl.inner(j).laplacian(g.point(a));
    }
  }

  // Second-order term: sum_{i,j} d2g_{ij}(u) <grad f_i . grad f_j, gamma>.
  double second = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n * d; ++k) dot += grads[i][k] * grads[j][k];
      if (dot != 0.0) second += f_cyl.outer_partial2(u, i, j) * dot;
    }

  // Interaction pairing: for each unordered pair {x,y}, grad phi(x-y) dotted
  // with grad f_j(x) - grad f_j(y).
  std::vector<double> pair_term(m, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto gphi = pair_gradient(pot, g.point(a), g.point(b));
      bool nonzero = false;
      for (double c : gphi) nonzero = nonzero || c != 0.0;
      if (!nonzero) continue;
      for (std::size_t j = 0; j < m; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          dot += gphi[c] * (grads[j][a * d + c] - grads[j][b * d + c]);
        pair_term[j] += dot;
      }
    }

  // First-order term: sum_j dg_j(u) (<lap f_j, gamma> - beta * pairing_j).
  double first = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double lap = 0.0;
    for (std::size_t a = 0; a < n; ++a) lap += laps[j][a];
    first += f_cyl.outer_partial(u, j) * (lap - beta * pair_term[j]);
  }

  return -second - first;
}

MeanSe dirichlet_energy(const CylinderFunction& f_cyl, const CylinderFunction& g_cyl,
                        const std::vector<Configuration>& samples) {
  if (samples.empty()) throw std::invalid_argument("dirichlet_energy: no samples");
  const std::size_t mf = f_cyl.slots();
  const std::size_t mg = g_cyl.slots();
  std::vector<double> vals;
  vals.reserve(samples.size());
  std::vector<double> df, dg;
  for (const auto& g : samples) {
    const std::size_t d = static_cast<std::size_t>(g.dim());
    const std::size_t n = g.size();
    const auto uf = f_cyl.arguments(g);
    const auto ug = g_cyl.arguments(g);
    double acc = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      df.assign(d, 0.0);
      dg.assign(d, 0.0);
      for (std::size_t j = 0; j < mf; ++j) {
        const double w = f_cyl.outer_partial(uf, j);
        if (w == 0.0) continue;
        const auto gr = f_cyl.inner(j).gradient(g.point(a));
        for (std::size_t c = 0; c < d; ++c) df[c] += w * gr[c];
      }
      for (std::size_t j = 0; j < mg; ++j) {
        const double w = g_cyl.outer_partial(ug, j);
        if (w == 0.0) continue;
        const auto gr = g_cyl.inner(j).gradient(g.point(a));
        for (std::size_t c = 0; c < d; ++c) dg[c] += w * gr[c];
      }
      for (std::size_t c = 0; c < d; ++c) acc += df[c] * dg[c];
    }
    vals.push_back(acc);
  }
  return batch_means(vals);
}

}  // namespace nvlab
