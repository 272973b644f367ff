#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "nvlab/dynamics.hpp"
#include "nvlab/functions.hpp"
#include "nvlab/gibbs.hpp"
#include "nvlab/rng.hpp"
#include "nvlab/stats.hpp"
#include "oracles.hpp"

using namespace nvlab;

namespace {

PairPotentialModel ss6(int d) { return PairPotentialModel::soft_sphere(d, 1.0, 1.0, 6.0); }

}  // namespace

TEST_CASE("drift: ideal gas gives zero vectors, coincident points rejected") {
  const BoxDomain box = BoxDomain::cube(2, 4.0);
  const Configuration g(box, {0.5, 0.5, 1.5, 2.5, 3.1, 0.2});
  const auto dr = drift(PairPotentialModel::ideal_gas(2), 1.7, g);
  REQUIRE(dr.size() == 3);
  for (const auto& v : dr) {
    REQUIRE(v.size() == 2);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
  }

  Configuration h(box, {1.0, 1.0, 1.25, 1.25, 2.0, 2.0});
  h.move_point(1, std::vector<double>{1.0, 1.0});  // in-place move can create a coincidence
  CHECK_THROWS_AS((void)drift(PairPotentialModel::ideal_gas(2), 1.0, h), std::invalid_argument);
  CHECK_THROWS_AS((void)drift(ss6(2), 1.0, g, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)drift(ss6(1), 1.0, g), std::invalid_argument);
}

TEST_CASE("drift: two particles feel exactly opposite forces of known magnitude") {
  const BoxDomain box = BoxDomain::cube(1, 5.0);
  const Configuration g(box, {1.0, 2.5});
  const double beta = 0.7;
  const auto dr = drift(ss6(1), beta, g);
  // phi(r) = r^-6, phi'(1.5) = -6 * 1.5^-7; the left particle is pushed left.
  const double expected = -beta * (-6.0 * std::pow(1.5, -7.0)) * (-1.0);
  CHECK(dr[0][0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(dr[1][0] == -dr[0][0]);  // exact negation, not just approximate
}

TEST_CASE("drift: four-particle pair sum matches a brute-force oracle, momentum neutral") {
  const BoxDomain box = BoxDomain::cube(2, 6.0);
  const Configuration g(box, {1.0, 1.2, 2.1, 0.9, 1.4, 2.6, 3.3, 3.0});
  const auto pot = ss6(2);
  const double beta = 1.3;
  const auto dr = drift(pot, beta, g);

  // Independent oracle through the vector gradient of the potential.
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> want(2, 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      if (j == i) continue;
      std::vector<double> v = {g.point(i)[0] - g.point(j)[0], g.point(i)[1] - g.point(j)[1]};
      const auto gp = pot.gradient(v);
      want[0] -= beta * gp[0];
      want[1] -= beta * gp[1];
    }
    CHECK(dr[i][0] == doctest::Approx(want[0]).epsilon(1e-12));
    CHECK(dr[i][1] == doctest::Approx(want[1]).epsilon(1e-12));
  }

  double sum0 = 0.0, sum1 = 0.0, scale = 0.0;
  for (const auto& v : dr) {
    sum0 += v[0];
    sum1 += v[1];
    scale += std::fabs(v[0]) + std::fabs(v[1]);
  }
  CHECK(std::fabs(sum0) <= 1e-10 * scale);
  CHECK(std::fabs(sum1) <= 1e-10 * scale);
}

TEST_CASE("drift: magnitude cap clips steep repulsion to the requested length") {
  const BoxDomain box = BoxDomain::cube(1, 5.0);
  const Configuration g(box, {1.0, 1.001, 4.0});
  const auto uncapped = drift(ss6(1), 1.0, g);
  CHECK(std::fabs(uncapped[0][0]) > 1e10);
  const auto capped = drift(ss6(1), 1.0, g, 5.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(capped[i][0]) <= 5.0 * (1.0 + 1e-15));
  // The clipped vector keeps its direction.
  CHECK(capped[0][0] * uncapped[0][0] > 0.0);
  CHECK(capped[0][0] == doctest::Approx(-5.0));
  // The far particle's small drift is untouched.
  CHECK(capped[2][0] == doctest::Approx(uncapped[2][0]).epsilon(1e-14));
}

TEST_CASE("mirror fold: identity inside, single reflections, deep folds") {
  std::size_t events = 0;
  CHECK(mirror_fold(0.37, 1.0, &events) == 0.37);
  CHECK(events == 0);
  CHECK(mirror_fold(0.0, 1.0) == 0.0);
  CHECK(mirror_fold(1.0, 1.0) == 1.0);

  CHECK(mirror_fold(-0.1, 1.0, &events) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(events == 1);
  CHECK(mirror_fold(1.3, 1.0) == doctest::Approx(0.7).epsilon(1e-15));

  // Single overshoot by delta <= L is an involution around each wall.
  for (double delta : {0.05, 0.4, 0.93}) {
    CHECK(mirror_fold(-delta, 1.0) == doctest::Approx(delta).epsilon(1e-15));
    CHECK(mirror_fold(1.0 + delta, 1.0) == doctest::Approx(1.0 - delta).epsilon(1e-15));
  }

  // Deep overshoots keep folding: 2.3 -> -0.3 -> 0.3; -3.7 on [0,1] -> 0.3.
  CHECK(mirror_fold(2.3, 1.0) == doctest::Approx(0.3).epsilon(1e-13));
  CHECK(mirror_fold(-3.7, 1.0) == doctest::Approx(0.3).epsilon(1e-13));
  CHECK_THROWS_AS((void)mirror_fold(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("step: zero-noise override leaves an ideal configuration unchanged") {
  const BoxDomain box = BoxDomain::cube(2, 3.0);
  const Configuration g(box, {0.4, 0.6, 1.9, 2.2});
  SdeParams p;
  p.dt = 1e-3;
  Rng rng(9);
  StepBookkeeping book;
  const std::vector<double> zeros(4, 0.0);
  const auto next =
      step_euler_maruyama(g, PairPotentialModel::ideal_gas(2), 1.0, p, rng, &book, zeros);
  CHECK(next == g);
  CHECK(book.reflections == 0);
  CHECK(book.redraws == 0);
  CHECK_FALSE(book.capped);
  for (double v : book.drift_dt) CHECK(v == 0.0);
  for (double v : book.noise) CHECK(v == 0.0);
}

TEST_CASE("step: tiny dt moves every coordinate by (much) less than 1e-4") {
  const BoxDomain box = BoxDomain::cube(2, 3.0);
  Configuration g(box, {0.5, 0.5, 1.5, 1.5, 2.5, 2.5});
  SdeParams p;
  p.dt = 1e-10;
  Rng rng(11);
  for (int s = 0; s < 50; ++s) {
    const auto next = step_euler_maruyama(g, ss6(2), 1.0, p, rng);
    for (std::size_t k = 0; k < 6; ++k)
      CHECK(std::fabs(next.flat()[k] - g.flat()[k]) < 1e-4);
    g = next;
  }
}

TEST_CASE("step: deterministic given the RNG state, noise size validated") {
  const BoxDomain box = BoxDomain::cube(1, 4.0);
  const Configuration g(box, {0.9, 2.2, 3.3});
  SdeParams p;
  p.dt = 1e-3;
  Rng a(21, 0, 5), b(21, 0, 5);
  const auto x = step_euler_maruyama(g, ss6(1), 1.0, p, a);
  const auto y = step_euler_maruyama(g, ss6(1), 1.0, p, b);
  CHECK(x == y);
  Rng c(22);
  CHECK_THROWS_AS(
      (void)step_euler_maruyama(g, ss6(1), 1.0, p, c, nullptr, std::vector<double>(2, 0.0)),
      std::invalid_argument);
}

TEST_CASE("step: coincident proposal under a fixed override aborts with a diagnostic") {
  const BoxDomain box = BoxDomain::cube(1, 20.0);
  const Configuration g(box, {10.0, 10.0 + 5e-13});
  SdeParams p;
  p.dt = 1e-3;
  Rng rng(4);
  const std::vector<double> zeros(2, 0.0);
  CHECK_THROWS_WITH_AS(
      (void)step_euler_maruyama(g, PairPotentialModel::ideal_gas(1), 1.0, p, rng, nullptr, zeros),
      "step_euler_maruyama: coincident proposal under a fixed noise override",
      std::runtime_error);
}

TEST_CASE("step: near-coincident pairs are re-drawn and counted, steep drift is capped") {
  const BoxDomain box = BoxDomain::cube(1, 20.0);
  const Configuration g(box, {10.0, 10.0 + 5e-13});
  SdeParams p;
  p.dt = 4e-25;  // noise scale ~9e-13: comparable to the 1e-12 coincidence window
  p.horizon = 30 * p.dt;
  p.seed = 5;
  const auto rec = simulate(g, ss6(1), 1.0, p);
  CHECK(rec.total_steps == 30);
  CHECK(rec.total_redraws >= 1);
  std::size_t capped_steps = 0;
  for (std::size_t k = 1; k < rec.capped.size(); ++k) capped_steps += rec.capped[k];
  CHECK(capped_steps == 30);  // the pair sits deep in the clipped-force regime
  // Every state the stepper produced (the seeded one sits inside the window).
  for (std::size_t k = 1; k < rec.states.size(); ++k)
    CHECK(std::fabs(rec.states[k].flat()[0] - rec.states[k].flat()[1]) >=
          1e-12 * (1.0 - 1e-9));
}

TEST_CASE("step: the re-draw cap aborts, and simulate reports the offending step") {
  const BoxDomain box = BoxDomain::cube(1, 20.0);
  const Configuration g(box, {10.0, 10.0 + 5e-13});
  SdeParams p;
  p.dt = 1e-40;  // noise far too small to clear the coincidence window
  p.horizon = 1e-39;
  Rng rng(6);
  CHECK_THROWS_WITH_AS((void)step_euler_maruyama(g, ss6(1), 1.0, p, rng),
                       "step_euler_maruyama: proposal re-draw cap (100) exceeded near a "
                       "coincidence",
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(
      (void)simulate(g, ss6(1), 1.0, p),
      "simulate: step 1: step_euler_maruyama: proposal re-draw cap (100) exceeded near a "
      "coincidence",
      std::runtime_error);
}

TEST_CASE("parameter validation rejects bad step sizes, caps, strides and replica counts") {
  SdeParams p;
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.dt = 1e-3;
  p.horizon = 1e-4;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.horizon = 1.0;
  p.m_cap = -2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.m_cap = 1e4;
  p.stride = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.stride = 1;
  p.replicas = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.replicas = 1;
  CHECK_NOTHROW(p.validate());

  // Horizon shorter than one recorded interval cannot produce a record.
  const BoxDomain box = BoxDomain::cube(1, 3.0);
  const Configuration g(box, {1.5});
  SdeParams q;
  q.dt = 1e-3;
  q.horizon = 2e-3;
  q.stride = 10;
  CHECK_THROWS_AS((void)simulate(g, PairPotentialModel::ideal_gas(1), 1.0, q),
                  std::invalid_argument);
}

TEST_CASE("simulate: record bookkeeping reproduces the states on reflection-free intervals") {
  const BoxDomain box = BoxDomain::cube(2, 20.0);
  const Configuration g(box, {9.0, 10.0, 10.6, 9.4, 10.2, 11.0});
  SdeParams p;
  p.dt = 1e-4;
  p.horizon = 1e-2;
  p.stride = 10;
  p.seed = 31;
  const auto rec = simulate(g, ss6(2), 0.9, p);

  REQUIRE(rec.times.size() == 11);
  REQUIRE(rec.states.size() == 11);
  REQUIRE(rec.drift_sum.size() == 11);
  REQUIRE(rec.noise_sum.size() == 11);
  REQUIRE(rec.reflections.size() == 11);
  REQUIRE(rec.capped.size() == 11);
  REQUIRE(rec.redraws.size() == 11);
  CHECK(rec.total_steps == 100);
  CHECK(rec.times.front() == 0.0);
  CHECK(rec.states.front() == g);

  for (std::size_t k = 1; k < rec.times.size(); ++k) {
    CHECK(rec.times[k] > rec.times[k - 1]);
    CHECK(rec.times[k] - rec.times[k - 1] ==
          doctest::Approx(p.dt * p.stride).epsilon(1e-12));
    CHECK(rec.reflections[k] == 0);  // particles sit ~9 length units from the walls
    CHECK(rec.states[k].size() == 3);
    for (std::size_t c = 0; c < 6; ++c) {
      const double rebuilt =
          rec.states[k - 1].flat()[c] + rec.drift_sum[k][c] + rec.noise_sum[k][c];
      CHECK(rec.states[k].flat()[c] == doctest::Approx(rebuilt).epsilon(1e-12));
    }
  }
}

TEST_CASE("simulate: deterministic per replica, distinct across replicas") {
  const BoxDomain box = BoxDomain::cube(1, 5.0);
  const Configuration g(box, {1.0, 2.0, 3.5});
  SdeParams p;
  p.dt = 1e-3;
  p.horizon = 0.05;
  p.seed = 77;
  p.replicas = 3;
  const auto a = simulate(g, ss6(1), 1.0, p, 1);
  const auto b = simulate(g, ss6(1), 1.0, p, 1);
  CHECK(a.states.back() == b.states.back());
  const auto reps = simulate_replicas(g, ss6(1), 1.0, p);
  REQUIRE(reps.size() == 3);
  CHECK(reps[1].states.back() == a.states.back());
  CHECK(reps[0].states.back() != reps[1].states.back());
  CHECK(reps[1].states.back() != reps[2].states.back());
  for (const auto& r : reps)
    for (const auto& st : r.states) CHECK(st.size() == 3);
}

TEST_CASE("simulate: free-particle coordinate increments have variance 2t") {
  const BoxDomain box = BoxDomain::cube(1, 50.0);
  const Configuration g(box, {25.0});
  SdeParams p;
  p.dt = 1e-3;
  p.horizon = 0.25;
  p.stride = 250;
  p.seed = 101;
  p.replicas = 1500;
  const auto reps = simulate_replicas(g, PairPotentialModel::ideal_gas(1), 1.0, p);

  std::vector<double> incr;
  incr.reserve(reps.size());
  for (const auto& r : reps) {
    REQUIRE(r.states.size() == 2);
    CHECK(r.reflections[1] == 0);
    for (double v : r.drift_sum[1]) CHECK(v == 0.0);
    incr.push_back(r.states[1].flat()[0] - r.states[0].flat()[0]);
  }
  const auto ms = mean_se_iid(incr);
  CHECK(std::fabs(ms.mean) <= 4.0 * ms.se);

  double var = 0.0;
  for (double v : incr) var += (v - ms.mean) * (v - ms.mean);
  var /= static_cast<double>(incr.size() - 1);
  const double want = 2.0 * p.horizon;
  const double se_var = want * std::sqrt(2.0 / static_cast<double>(incr.size() - 1));
  CHECK(std::fabs(var - want) <= 4.0 * se_var);
}

TEST_CASE("generator: constants are harmonic and ideal linear slots reduce to the Laplacian") {
  const BoxDomain box = BoxDomain::cube(1, 3.0);
  const Configuration g(box, {0.7, 1.2, 1.9});
  const auto cf = CylinderFunction::constant(1, 4.2);
  CHECK(apply_generator(cf, ss6(1), 1.0, g) == 0.0);

  const SmoothBump f({1.2}, 0.9, 1.3);
  const auto lin = CylinderFunction::linear_in(f, 1e6);
  const double hf = apply_generator(lin, PairPotentialModel::ideal_gas(1), 2.0, g);
  double lap = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a) lap += f.laplacian(g.point(a));
  CHECK(hf == doctest::Approx(-lap).epsilon(1e-8));
  CHECK(std::fabs(lap) > 0.1);  // non-vacuous: two points sit inside the bump
}

TEST_CASE("generator: short-time expectation slope matches -HF (Feynman-Kac oracle)") {
  const BoxDomain box = BoxDomain::cube(1, 3.0);
  const Configuration g(box, {0.8, 1.5, 2.1});
  const auto pot = ss6(1);
  const double beta = 0.8;

  const std::vector<SmoothBump> bumps = {SmoothBump({1.0}, 0.8, 1.0), SmoothBump({2.0}, 0.8, 1.0)};
  const CylinderFunction f_cyl(bumps, 0.1, {0.3, -0.2}, {{0.15, 0.05}, {0.05, 0.0}}, {50.0, 50.0});

  const double hf = apply_generator(f_cyl, pot, beta, g);
  CHECK(std::fabs(hf) > 0.05);

  // One antithetic Euler step of size dt from g: the paired average kills the
  // O(sqrt(dt)) noise term, so (F(X_dt) - F(g))/dt concentrates on -HF.
  const double dt = 1e-6;
  const auto dr = drift(pot, beta, g);
  const auto base = g.flat();
  std::vector<double> mean_drifted(base.size());
  for (std::size_t k = 0; k < base.size(); ++k) mean_drifted[k] = base[k] + dr[k][0] * dt;
  const double f0 = f_cyl.value(g);
  const double scale = std::sqrt(2.0 * dt);

  Rng rng(404);
  std::vector<double> slopes;
  slopes.reserve(60000);
  std::vector<double> plus(base.size()), minus(base.size());
  for (int s = 0; s < 60000; ++s) {
    for (std::size_t k = 0; k < base.size(); ++k) {
      const double n = scale * rng.normal();
      plus[k] = mean_drifted[k] + n;
      minus[k] = mean_drifted[k] - n;
    }
    const double fp = f_cyl.value(Configuration(box, plus));
    const double fm = f_cyl.value(Configuration(box, minus));
    slopes.push_back((fp + fm - 2.0 * f0) / (2.0 * dt));
  }
  const auto ms = mean_se_iid(slopes);
  CHECK(std::fabs(ms.mean - (-hf)) <= 4.0 * ms.se + 1e-3 * std::fabs(hf));
}

TEST_CASE("generator: coincident points are rejected") {
  const BoxDomain box = BoxDomain::cube(1, 3.0);
  Configuration g(box, {1.0, 2.0});
  g.move_point(1, std::vector<double>{1.0});
  const auto lin = CylinderFunction::linear_in(SmoothBump({1.2}, 0.9, 1.0), 1e6);
  CHECK_THROWS_AS((void)apply_generator(lin, ss6(1), 1.0, g), std::invalid_argument);
}

TEST_CASE("dirichlet energy: zero for constants, free-gas closed form, exact symmetry") {
  const BoxDomain box = BoxDomain::cube(1, 3.0);
  CanonicalEnsemble ens(4, box, 1.0, PairPotentialModel::ideal_gas(1));
  McmcParams mp;
  mp.samples = 3000;
  mp.seed = 12;
  const auto samples = sample_gibbs(ens, mp);

  const auto cf = CylinderFunction::constant(1, 2.0);
  const auto zero = dirichlet_energy(cf, cf, samples);
  CHECK(zero.mean == 0.0);
  CHECK(zero.se == 0.0);

  const SmoothBump f({1.5}, 1.0, 1.0);
  const auto lin = CylinderFunction::linear_in(f, 1e6);
  const auto ef = dirichlet_energy(lin, lin, samples);
  // E(F,F) = N * int |f'|^2 / |box| for the free gas (slot derivative ~ 1).
  const double grad2 = 2.0 * oracle::romberg(
                                 [&](double r) {
                                   const double d = f.profile_derivative(r);
                                   return d * d;
                                 },
                                 0.0, 1.0, 1e-10);
  const double want = 4.0 * grad2 / box.volume();
  CHECK(std::fabs(ef.mean - want) <= 4.0 * ef.se);
  CHECK(ef.se < 0.1 * want);

  const auto lin2 = CylinderFunction::linear_in(SmoothBump({2.1}, 0.7, 0.8), 1e6);
  const auto fg = dirichlet_energy(lin, lin2, samples);
  const auto gf = dirichlet_energy(lin2, lin, samples);
  CHECK(fg.mean == gf.mean);
  CHECK(fg.se == gf.se);
}

TEST_CASE("dirichlet energy: matches both generator pairings in equilibrium") {
  const BoxDomain box = BoxDomain::cube(1, 3.0);
  const auto pot = ss6(1);
  CanonicalEnsemble ens(3, box, 0.8, pot);
  McmcParams mp;
  mp.samples = 4000;
  mp.thin = 3;
  mp.seed = 55;
  const auto samples = sample_gibbs(ens, mp);

  // Interior-supported slots: no boundary terms in the integration by parts.
  const std::vector<SmoothBump> bf = {SmoothBump({1.0}, 0.8, 1.0)};
  const std::vector<SmoothBump> bg = {SmoothBump({2.0}, 0.8, 1.0)};
  // Positive slot derivatives keep the carre-du-champ integrand single-signed,
  // so its mean stays well resolved against the Monte Carlo error.
  const CylinderFunction f_cyl(bf, 0.0, {1.0}, {{0.4}}, {50.0});
  const CylinderFunction g_cyl(bg, 0.0, {0.7}, {{0.2}}, {50.0});

  const auto e_fg = dirichlet_energy(f_cyl, g_cyl, samples);

  std::vector<double> hf_g, f_hg;
  hf_g.reserve(samples.size());
  f_hg.reserve(samples.size());
  for (const auto& s : samples) {
    hf_g.push_back(apply_generator(f_cyl, pot, ens.beta, s) * g_cyl.value(s));
    f_hg.push_back(f_cyl.value(s) * apply_generator(g_cyl, pot, ens.beta, s));
  }
  const auto m1 = batch_means(hf_g);
  const auto m2 = batch_means(f_hg);

  CHECK(std::fabs(e_fg.mean - m1.mean) <= 3.0 * (e_fg.se + m1.se) + 1e-4);
  CHECK(std::fabs(e_fg.mean - m2.mean) <= 3.0 * (e_fg.se + m2.se) + 1e-4);
  CHECK(std::fabs(e_fg.mean) > 3.0 * e_fg.se);  // the pairing itself is resolved away from zero
}

TEST_CASE("equilibrium trajectories keep the Gibbs pair-distance histogram") {
  const BoxDomain box = BoxDomain::cube(1, 3.0);
  const auto pot = PairPotentialModel::soft_sphere(1, 1.0, 1.0, 12.0);
  CanonicalEnsemble ens(3, box, 1.0, pot);

  SdeParams p;
  p.dt = 2e-4;
  p.horizon = 1.0;
  p.stride = 100;
  p.seed = 202;
  p.replicas = 48;
  McmcParams init;
  init.thin = 5;
  init.seed = 203;
  const auto reps = simulate_equilibrium(ens, p, init);
  REQUIRE(reps.size() == 48);

  std::vector<Configuration> pooled;
  for (const auto& r : reps) {
    REQUIRE(r.states.size() == 51);
    for (std::size_t k = 1; k < r.states.size(); ++k) pooled.push_back(r.states[k]);
  }

  McmcParams mp;
  mp.samples = 4000;
  mp.thin = 3;
  mp.seed = 204;
  const auto direct = sample_gibbs(ens, mp);

  CorrelationGrid grid;
  grid.bins = 10;
  grid.lo = 0.85;
  grid.hi = 2.6;
  const auto a = correlation_estimate(pooled, 2, grid);
  const auto b = correlation_estimate(direct, 2, grid);

  int usable = 0, close3 = 0;
  for (int k = 0; k < grid.bins; ++k) {
    if (a.empty[static_cast<std::size_t>(k)] || b.empty[static_cast<std::size_t>(k)]) continue;
    ++usable;
    const double gap = std::fabs(a.value[static_cast<std::size_t>(k)] -
                                 b.value[static_cast<std::size_t>(k)]);
    const double se = a.se[static_cast<std::size_t>(k)] + b.se[static_cast<std::size_t>(k)];
    if (gap <= 3.0 * se) ++close3;
    CHECK(gap <= 6.0 * se + 1e-9);
  }
  CHECK(usable >= 9);
  CHECK(close3 * 10 >= usable * 9);
}
