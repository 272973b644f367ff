#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nvlab/functions.hpp"
#include "nvlab/geometry.hpp"
#include "nvlab/gibbs.hpp"
#include "nvlab/potential.hpp"
#include "nvlab/rng.hpp"
#include "nvlab/stats.hpp"

namespace nvlab {

// Parameters of the explicit Euler-Maruyama discretization of the interacting
// gradient diffusion with mirror-reflecting boundary.
struct SdeParams {
  double dt = 1e-4;        // time step (in units of sigma^2)
  double horizon = 1.0;    // total simulated time T
  std::optional<double> m_cap = 1e4;  // drift magnitude cap per particle; nullopt = uncapped
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  int stride = 1;    // record every stride-th step
  int replicas = 1;  // number of independent trajectories in replica runs

  void validate() const;
};

// One recorded trajectory. Entry k of every per-interval array covers the
// stride steps leading from times[k-1] to times[k]; entry 0 belongs to the
// initial state and is empty/zero. drift_sum accumulates drift*dt and
// noise_sum the applied Gaussian increments sqrt(2 dt) xi (both flattened
// N*d), so on reflection-free intervals
//   flat(states[k]) == flat(states[k-1]) + drift_sum[k] + noise_sum[k]
// holds to rounding.
struct TrajectoryRecord {
  double dt = 0.0;
  int stride = 1;
  int replica = 0;
  std::vector<double> times;
  std::vector<Configuration> states;
  std::vector<std::vector<double>> drift_sum;
  std::vector<std::vector<double>> noise_sum;
  std::vector<std::size_t> reflections;  // coordinates that left the box and were folded back
  std::vector<std::size_t> capped;       // steps on which some particle's drift was clipped
  std::vector<std::size_t> redraws;      // proposals re-drawn due to near-coincidence
  std::size_t total_steps = 0;
  std::size_t total_redraws = 0;
};

// Interaction drift, one d-vector per particle: -beta * sum_{y != x}
// grad phi(x - y), optionally magnitude-clipped at m_cap. The uncapped drift
// sums to the zero vector (pairwise antisymmetry). Throws on coincident
// points.
std::vector<std::vector<double>> drift(const PairPotentialModel& pot, double beta,
                                       const Configuration& g,
                                       std::optional<double> m_cap = std::nullopt);

// Mirror-fold a scalar coordinate into [0, len] (period-2L folding, the
// repeated-reflection limit). `events` is incremented when x was outside.
double mirror_fold(double x, double len, std::size_t* events = nullptr);

struct StepBookkeeping {
  std::vector<double> drift_dt;   // applied drift * dt, flattened
  std::vector<double> noise;      // applied sqrt(2 dt) * xi, flattened
  std::size_t reflections = 0;
  std::size_t redraws = 0;
  bool capped = false;
};

// One explicit step from `g`: x <- fold(x + drift*dt + sqrt(2 dt) xi). A
// proposal bringing some pair distance below 1e-12*sigma is re-drawn with
// fresh noise, at most 100 times, then the step aborts. `noise_override`
// (flattened N*d standard Gaussians) replaces the RNG draw — a test hook; a
// coincident proposal under an override aborts immediately since the noise
// cannot be re-drawn.
Configuration step_euler_maruyama(const Configuration& g, const PairPotentialModel& pot,
                                  double beta, const SdeParams& params, Rng& rng,
                                  StepBookkeeping* book = nullptr,
                                  std::span<const double> noise_override = {});

// Full trajectory from a fixed initial state. Runs
// floor(round(horizon/dt)/stride)*stride steps so every recorded time sits on
// the uniform grid k*stride*dt. Aborts (std::runtime_error) on the re-draw
// cap or a non-finite coordinate, reporting the step. `replica` selects the
// RNG substream: (seed, stream, replica).
TrajectoryRecord simulate(const Configuration& initial, const PairPotentialModel& pot,
                          double beta, const SdeParams& params, int replica = 0);

// params.replicas independent trajectories from the same initial state,
// replica r driven by substream r.
std::vector<TrajectoryRecord> simulate_replicas(const Configuration& initial,
                                                const PairPotentialModel& pot, double beta,
                                                const SdeParams& params);

// Equilibrium mode: initial states drawn by sample_gibbs from `ens` (one
// configuration per replica, decorrelated by the MCMC thinning), then evolved
// independently.
std::vector<TrajectoryRecord> simulate_equilibrium(const CanonicalEnsemble& ens,
                                                   const SdeParams& params,
                                                   const McmcParams& init_params);

// The cylinder-function generator
//   H F(g) = - sum_{i,j} d2g_{ij}(u) <grad f_i . grad f_j, g>
//            - sum_j dg_j(u) (<lap f_j, g>
//                             - beta sum_{{x,y} in g} grad phi(x-y).(grad f_j(x) - grad f_j(y)))
// with u the slot arguments of F at g. Sign convention: H is the positive
// generator of the energy form; the process generator is -H. Throws on
// coincident points.
double apply_generator(const CylinderFunction& f_cyl, const PairPotentialModel& pot, double beta,
                       const Configuration& g);

// Monte Carlo estimate over `samples` of the carre-du-champ pairing
//   sum_{x in g} (grad^G F)(g, x) . (grad^G G)(g, x),
// where (grad^G F)(g, x) = sum_j dg_j(u) grad f_j(x). Symmetric in F and G.
MeanSe dirichlet_energy(const CylinderFunction& f_cyl, const CylinderFunction& g_cyl,
                        const std::vector<Configuration>& samples);

}  // namespace nvlab
