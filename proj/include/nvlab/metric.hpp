#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nvlab/functions.hpp"
#include "nvlab/geometry.hpp"
#include "nvlab/potential.hpp"
#include "nvlab/stats.hpp"

namespace nvlab {

// The configuration-space metric and its ingredient families. Phi is the
// singular pair weight t^{-phi_exponent} (identically zero when the exponent
// is <= 0, the infinite-temperature degenerate case), h the integrable
// positive weight, f_k the vague-topology test bumps, I_k the plateau
// cutoffs. Weights p_k scale the vague part, q_k the pair-statistic part.
struct MetricFamily {
  int d = 1;
  double beta = 1.0;
  double phi_exponent = 2.0;
  int k_max = 16;
  std::vector<SmoothBump> fs;
  std::vector<PlateauCutoff> cuts;
  std::vector<double> p;
  std::vector<double> q;

  double scale() const { return beta / 3.0; }
  double phi(double t) const;
  double phi_prime(double t) const;
  double weight_h(std::span<const double> x) const;
  std::vector<double> weight_h_gradient(std::span<const double> x) const;
};

// Builds the default family in dimension d: f_k are unit-amplitude bumps of
// radius k centered on a fixed enumeration of the integer lattice, I_k
// plateaus equal to 1 on the ball of radius k-1 and supported in the ball of
// radius k, p_k = min(1, 1/I(f_k)) with I the gradient-moment weight below,
// q_k = 1 until calibrate_pair_weights replaces them.
MetricFamily make_metric_family(int d, double beta, int k_max = 16);

// k-th lattice center used for f_k (deterministic spiral enumeration).
std::vector<double> lattice_center(int d, int k);

// S^{s Phi, f}(gamma) = sum over unordered pairs of exp(s Phi(|x-y|)) f(x)f(y).
// Exponents are saturated at 700 so the result stays a finite double; values
// beyond exp(700) only occur within distance ~Phi^{-1}(2100/beta) of the
// diagonal where the true statistic exceeds 1e304 anyway.
double pair_statistic(const Configuration& g, const MetricFamily& fam,
                      const std::function<double(std::span<const double>)>& f);

// Vague-topology part: sum_k 2^{-k} p_k (1 - exp(-|<f_k, gamma - eta>|)),
// truncated at k_max (geometric tail below 2^{-k_max}).
double metric_vague(const Configuration& g, const Configuration& e, const MetricFamily& fam);

// Full Polish metric: metric_vague plus the bounded pair-statistic terms
// sum_k 2^{-k} q_k |dS_k| / (1 + |dS_k|) with S_k built from h * I_k.
double metric_config(const Configuration& g, const Configuration& e, const MetricFamily& fam);

// I(f) = ((int |grad f|^2 dx)^2 + int |grad f|^4 dx)^{1/4} for a radial
// profile with |grad f|(r) = |dprofile|, supported in [0, radius].
double weight_i(const std::function<double(double)>& profile_derivative, double radius, int d,
                double quad_tol = 1e-10);
double weight_i(const SmoothBump& f);

struct PairWeightResult {
  double value = 0.0;
  double se = 0.0;
};

// R(f) of the increment-moment machinery: the 1/4 power of
//   zeta^3/3! int |g3| exp(-(2/3) beta sum phi) + zeta^2/2! int |g2| exp(-beta phi)
// estimated by Monte Carlo over the support cube of f. Throws when the
// integrand is detected non-finite (Phi singular against a bounded phi).
PairWeightResult weight_r(const std::function<double(std::span<const double>)>& f,
                          const std::function<std::vector<double>(std::span<const double>)>& grad_f,
                          double support_radius, const std::vector<double>& center,
                          const MetricFamily& fam, const PairPotentialModel& pot, double zeta,
                          std::size_t samples, std::uint64_t seed);

// Replaces q_k by min(1, 1/R(h I_k)) for every k; returns the R values.
std::vector<PairWeightResult> calibrate_pair_weights(MetricFamily& fam,
                                                     const PairPotentialModel& pot, double zeta,
                                                     std::size_t samples, std::uint64_t seed);

}  // namespace nvlab
