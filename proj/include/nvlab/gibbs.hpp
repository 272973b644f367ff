#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvlab/geometry.hpp"
#include "nvlab/potential.hpp"
#include "nvlab/quadrature.hpp"

namespace nvlab {

// Canonical ensemble: exactly n particles in a box at inverse temperature
// beta, interacting through a pair potential.
struct CanonicalEnsemble {
  CanonicalEnsemble(int n_in, BoxDomain domain_in, double beta_in,
                    PairPotentialModel potential_in);

  // Same box, temperature and potential with a different particle count.
  CanonicalEnsemble with_particles(int m) const;

  int n = 0;
  BoxDomain domain;
  double beta = 1.0;
  PairPotentialModel potential;
};

// exp(-beta E_phi(x1..xN)) for the ordered tuple stored flat; 0 when the
// energy is +inf (overlapping hard cores), including at beta = 0.
double gibbs_density_unnormalized(const CanonicalEnsemble& ens, std::span<const double> flat);

// Z = int_{Lambda^N} exp(-beta E_phi) dx^N by adaptive tensor quadrature.
// The normalizer is the integral over ordered tuples (no 1/N!): with this
// convention the ideal-gas one-particle density is N/|Lambda|. Requires
// N*d <= 6; throws QuadratureFailure when the budget runs out.
QuadResult partition_oracle(const CanonicalEnsemble& ens, double quad_tol = 1e-8);

// k^{(n,N)} at each eval point (a point is an ordered n-tuple of positions):
//   N(N-1)...(N-n+1)/Z * int_{Lambda^{N-n}} exp(-beta E_phi(X u Y)) dy.
// k^{(0,N)} = 1 and k^{(n,N)} = 0 for n > N. Requires (N-n)*d <= 4.
std::vector<double> correlation_oracle(const CanonicalEnsemble& ens, int order,
                                       const std::vector<std::vector<double>>& points,
                                       double quad_tol = 1e-8);

// k^{(n,N)}(X) * exp(+beta E_phi(X)). The pair energy of the eval tuple
// cancels exactly inside the defining integral, so values stay finite at
// near-collisions where k itself underflows; this is the statistic bounded
// by the exp-corrected Ruelle estimate.
std::vector<double> correlation_oracle_compensated(const CanonicalEnsemble& ens, int order,
                                                   const std::vector<std::vector<double>>& points,
                                                   double quad_tol = 1e-8);

struct McmcParams {
  std::size_t samples = 2000;  // recorded configurations
  std::size_t burnin = 500;    // tuning sweeps, discarded
  std::size_t thin = 2;        // sweeps between recorded configurations
  double step = 0.0;           // proposal half-width; 0 = auto-tune during burn-in
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;    // chain index; parallel chains use distinct streams
};

struct McmcStats {
  double acceptance = 0.0;         // post burn-in, all proposals
  double in_box_acceptance = 0.0;  // post burn-in, proposals that stayed in the box
  double step = 0.0;               // frozen proposal half-width
  std::size_t proposals = 0;
};

// Metropolis chain with random single-particle displacements, targeting
// gibbs_density_unnormalized. The step is tuned to 30-50% acceptance during
// burn-in and frozen afterwards. Deterministic given (seed, stream). Throws
// on a full 50-sweep window with zero accepted moves (mixing failure).
std::vector<Configuration> sample_gibbs(const CanonicalEnsemble& ens, const McmcParams& params,
                                        McmcStats* stats = nullptr);

// Both sides of the detailed-balance identity
//   pi(x) alpha(x -> y) = pi(y) alpha(y -> x)
// for one single-particle move, computed from the unnormalized densities the
// way the sampler computes its acceptance probability.
struct BalanceAudit {
  double forward = 0.0;
  double backward = 0.0;
};
BalanceAudit metropolis_balance_audit(const CanonicalEnsemble& ens, const Configuration& from,
                                      std::size_t index, std::span<const double> proposal);

// Bin layout for correlation histograms. Order 1 bins slabs along axis 0,
// order 2 bins pair distances; lo/hi of 0 pick the natural full range (the
// box side, resp. the box diagonal). Log spacing requires lo > 0.
struct CorrelationGrid {
  int bins = 20;
  double lo = 0.0;
  double hi = 0.0;
  bool log_spaced = false;
};

struct CorrelationEstimate {
  int order = 0;
  std::size_t samples = 0;
  std::vector<double> bin_lo, bin_hi;
  std::vector<double> value, se;
  std::vector<std::size_t> count;  // raw tuple counts per bin
  std::vector<char> empty;         // 1 when a bin saw no tuples at all
};

// Histogram estimator of k^{(n)} for n in {1,2}, calibrated so that the
// empirical mean of sum_{tuples in gamma} 1_bin equals (1/n!) int k-hat over
// the bin's tuple set: order 1 divides slab counts by the slab volume, order
// 2 divides pair counts by half the exact two-point volume of the distance
// bin. Standard errors by batch means over the sample series. Empty bins are
// flagged, not silently zero. Order 3 is rejected: three-point functions are
// served by the quadrature oracle only.
CorrelationEstimate correlation_estimate(const std::vector<Configuration>& samples, int order,
                                         const CorrelationGrid& grid = {});

// int_{Lambda^2} 1_{r_lo <= |x-y| < r_hi} dx dy: the exact calibration volume
// of a pair-distance bin, via the set-covariance of the box.
double pair_bin_volume(const BoxDomain& box, double r_lo, double r_hi);

enum class RatioMethod { oracle, widom };

struct RatioParams {
  McmcParams mcmc;            // widom path: chain over the (N-1)-ensemble
  std::size_t insertions = 8; // widom trial insertions per recorded sample
  double quad_tol = 1e-8;     // oracle path
};

struct RatioResult {
  double value = 0.0;  // Z^{(N-1)}/Z^{(N)}
  double se = 0.0;
  bool degenerate = false;  // every insertion weight vanished
};

// Z^{(N-1)}/Z^{(N)}. The oracle method divides two partition integrals; the
// widom method estimates Z^{(N)}/(Z^{(N-1)} |Lambda|) as the (N-1)-ensemble
// average of exp(-beta dE) over uniform trial insertions, then inverts.
RatioResult partition_ratio(const CanonicalEnsemble& ens, RatioMethod method,
                            const RatioParams& params = {});

// Growing sequence (N_j, Lambda_j) with densities v_j = N_j/|Lambda_j|
// approaching the target monotonically; the constructor rejects schedules
// whose volumes fail to increase, whose densities drift away from the
// target, or whose final density misses it by more than tol.
// Per-axis initial cubature cells for integrals over `copies` stacked box
// coordinates: each axis is pre-split at the pair interaction length (capped
// at four cells) so a hard-core exclusion region cannot hide the integrand's
// support from the starting rule. Feed to integrate_box as initial_cells.
std::vector<int> quadrature_mesh(const BoxDomain& box, int copies, const PairPotentialModel& pot);

struct NVSchedule {
  double rho = 0.0;
  double tol = 1e-9;
  std::vector<std::pair<int, BoxDomain>> entries;

  NVSchedule(double rho_in, std::vector<std::pair<int, BoxDomain>> entries_in,
             double tol_in = 1e-9);

  // Cubes of side (N/rho)^(1/d): every entry at exactly the target density.
  static NVSchedule at_density(double rho, int d, const std::vector<int>& ns, double tol = 1e-9);

  double density(std::size_t j) const;
};

struct ActivityEstimate {
  std::vector<double> z, se;   // per entry: N_j * Z^{(N_j-1)}/Z^{(N_j)}
  std::vector<double> ratio;   // the partition ratios themselves
  std::vector<char> degenerate;
  double extrapolated = 0.0;   // intercept of z against 1/N
  double extrapolated_se = 0.0;
  double c1_fit = 0.0;         // max_j ratio_j * |Lambda_j|
};

// Finite-volume activities z_j = N_j Z^{(N_j-1)}/Z^{(N_j)} along a schedule
// with a Richardson-style extrapolation in 1/N. Ideal gas gives z_j = v_j
// exactly. c1_fit is the empirical constant in ratio <= C1/|Lambda|.
ActivityEstimate estimate_activity(const NVSchedule& schedule, double beta,
                                   const PairPotentialModel& pot, RatioMethod method,
                                   const RatioParams& params = {});

struct RuelleParams {
  int grid_points = 12;
  double r_min = 1e-3;            // nearest pair separation probed
  double stability_factor = 3.0;  // growth ratio flagged beyond this
  double quad_tol = 1e-6;
  McmcParams mcmc;                // sampling fallback past the oracle caps
};

struct RuelleOrderReport {
  int order = 0;
  std::vector<double> xi_hat, zeta_hat;  // per schedule entry
  std::vector<double> xi_se, zeta_se;    // 0 for oracle entries
  std::vector<std::string> method;       // oracle | insertion | histogram | trivial | skipped
  double xi_growth = 0.0, zeta_growth = 0.0;  // max/min across usable entries
  bool bounded = false;
};

struct RuelleReport {
  std::vector<int> ns;
  std::vector<double> volumes;
  std::vector<RuelleOrderReport> orders;
  bool all_bounded = false;
};

// Scans k^{(n,N_j)} along the schedule and reports
//   xi_j   = max over the grid of (k)^{1/n},
//   zeta_j = max over the grid of (k * exp((2/n) beta sum phi))^{1/n},
// the exp-corrected statistic evaluated down to near-collision separations.
// Small entries use the quadrature oracle; larger ones use slab histograms
// (n = 1) or a tuple-insertion estimator normalized by a chain of widom
// ratios (n = 2, 3), which keeps near-collision values resolvable where
// distance histograms would be empty. An order is flagged bounded when the
// zeta growth ratio stays below stability_factor.
RuelleReport verify_ruelle_bound(const NVSchedule& schedule, double beta,
                                 const PairPotentialModel& pot, const std::vector<int>& orders,
                                 const RuelleParams& params = {});

// Relative gap |LHS - RHS| / |LHS| of the one-point expansion identity
//   k^{(n,N)}(x1..xn) = N (Z^{(N-1)}/Z^{(N)}) exp(-sum_{i>=2} beta phi(x1-xi))
//     * [ k^{(n-1,N-1)}(x2..xn)
//         + sum_{k=1}^{N-n} (1/k!) int k^{(n+k-1,N-1)}(x2..xn, y1..yk)
//                                   prod_i (e^{-beta phi(x1-yi)} - 1) dy ],
// with every ingredient from the quadrature oracles. Requires N*d <= 6.
std::vector<double> kirkwood_salsburg_residual(const CanonicalEnsemble& ens, int order,
                                               const std::vector<std::vector<double>>& points,
                                               double quad_tol = 1e-8);

struct GcmcParams {
  std::size_t samples = 2000;
  std::size_t burnin = 500;
  std::size_t thin = 2;
  double step = 0.0;        // displacement half-width; 0 = auto-tune
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::size_t cap = 100000; // explosion guard on the particle count
};

struct GcmcStats {
  double acceptance = 0.0;
  double mean_n = 0.0;   // over recorded samples
  double se_n = 0.0;
  std::size_t max_n = 0;
};

// Metropolis insert/delete/displace chain targeting the grand-canonical
// weights z^{|gamma|} exp(-beta E_phi(gamma)) on finite configurations in the
// box. Acceptance ratios are evaluated in log space; exceeding the particle
// cap aborts with a diagnostic.
std::vector<Configuration> grand_canonical_sample(const BoxDomain& domain, double beta,
                                                  const PairPotentialModel& pot, double activity,
                                                  const GcmcParams& params,
                                                  GcmcStats* stats = nullptr);

struct EnsembleCompareParams {
  McmcParams mcmc;
  GcmcParams gc;
  RatioParams ratio;
  RatioMethod ratio_method = RatioMethod::widom;
  int k2_bins = 12;
  double k2_hi = 0.0;  // 0 -> half the shortest box side
};

struct EnsembleComparisonReport {
  bool in_regime = false;     // rho < 1/(2 exp(2 beta K + 1) J(beta))
  double density_bound = 0.0;
  double rho = 0.0;
  double mayer_j = 0.0;
  double k_declared = 0.0;    // superstability constant supplied by the model
  double activity = 0.0, activity_se = 0.0;
  int n = 0;                  // largest schedule entry used for the runs
  double volume = 0.0;
  double canonical_density = 0.0;           // N/|Lambda|, exact
  double gc_density = 0.0, gc_density_se = 0.0;
  double density_rel_gap = 0.0;
  CorrelationEstimate canonical_k2, gc_k2;  // same distance grid
  double max_k2_sigma = 0.0;  // worst bin-wise |gap| / combined SE
};

// Canonical run at the largest schedule entry against a grand-canonical run
// at the extrapolated activity. The low-density gate only labels the report;
// out-of-regime comparisons still run.
EnsembleComparisonReport ensembles_compare(const NVSchedule& schedule, double beta,
                                           const PairPotentialModel& pot,
                                           const EnsembleCompareParams& params = {});

}  // namespace nvlab
