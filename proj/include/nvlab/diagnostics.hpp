#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvlab/dynamics.hpp"
#include "nvlab/functions.hpp"
#include "nvlab/geometry.hpp"
#include "nvlab/gibbs.hpp"
#include "nvlab/metric.hpp"
#include "nvlab/potential.hpp"
#include "nvlab/stats.hpp"

namespace nvlab {

// Symmetric pair function handle: f(x, y) with f(x, y) == f(y, x).
using PairFunction =
    std::function<double(std::span<const double>, std::span<const double>)>;

// The expansion kernel for powers of pair sums: given an ordered tuple of n
// distinct points (flat, n*d), sums the product f(P_1)...f(P_power) over
// every assignment of index pairs P_i whose union covers all n points. The
// kernel is symmetric under point permutations, and
//   (sum_{{x,y} in gamma} f)^power
//     = sum_{n=2}^{2 power} (1/n!) sum_{ordered distinct n-tuples} kernel_n
// holds as an algebraic identity. Requires 2 <= n <= 2*power, power in {2,3}.
double pair_power_kernel(const PairFunction& f, std::span<const double> flat, int d, int n,
                         int power);

// Evaluates the right-hand side of the identity above (the tuple expansion)
// for power in {2, 3}; equals the direct power of the pair sum to rounding.
double pair_moment_expansion(const PairFunction& f, const Configuration& g, int power);

struct LvPhiResult {
  double value = 0.0;
  bool absolutely_summable = true;  // sum of |pair terms| stayed finite
};

// L^phi_{v,k}(gamma) = -beta sum_{{x,y}} (grad phi(x-y), I_k(y)v(x) - I_k(x)v(y))
// with I_k the radial plateau equal to 1 inside |x| <= k-1 and supported in
// |x| <= k. cutoff = nullopt uses I == 1 (the full form). Throws on
// coincident points.
LvPhiResult l_v_phi(const Configuration& g, const VectorField& v, const PairPotentialModel& pot,
                    double beta, std::optional<int> cutoff = std::nullopt);

// B^phi_v(gamma) = <div v, gamma> + L^phi_v(gamma).
double b_v_phi(const Configuration& g, const VectorField& v, const PairPotentialModel& pot,
               double beta);

// Directional derivative of a cylinder function along the particle flow
// generated by v: sum_j dg_j(u) sum_{x in gamma} grad f_j(x) . v(x).
double directional_derivative(const CylinderFunction& f_cyl, const VectorField& v,
                              const Configuration& g);

struct IbpResult {
  double grad_f_g = 0.0, grad_f_g_se = 0.0;  // E[(grad_v F) G]
  double f_grad_g = 0.0, f_grad_g_se = 0.0;  // E[F (grad_v G)]
  double fg_b = 0.0, fg_b_se = 0.0;          // E[F G B_v^phi]
  double residual = 0.0;                     // sum of the three means
  double combined_se = 0.0;  // batch-means SE of the per-sample sum (keeps correlations)
};

// Monte Carlo audit of the integration-by-parts identity
//   E[(grad_v F) G] + E[F (grad_v G)] + E[F G B_v^phi] = 0
// over Gibbs samples; exact when supp v lies inside the open box.
IbpResult ibp_residual(const CanonicalEnsemble& ens, const CylinderFunction& f_cyl,
                       const CylinderFunction& g_cyl, const VectorField& v,
                       const std::vector<Configuration>& samples);

enum class MomentMethod { mcmc, quadrature };

struct SMomentParams {
  MomentMethod method = MomentMethod::mcmc;
  McmcParams mcmc;         // sampling path
  double quad_tol = 1e-6;  // quadrature path
};

// Second moment E[S^2] of the weighted pair statistic
//   S(gamma) = sum_{{x,y}} exp(scale*Phi(|x-y|)) h(x) h(y)
// (the same saturation as pair_statistic). The mcmc method averages S^2 over
// Gibbs samples; the quadrature method integrates the n = 2..4 tuple kernels
// against the correlation functions, reduced to a single Lambda^N integral
//   E[S^2] = (1/Z) int (sum_n C(N,n) kernel_n(x_1..x_n)) e^{-beta E} dx.
// Quadrature requires N*d <= 6.
MeanSe s_statistic_moment(const CanonicalEnsemble& ens, const MetricFamily& fam,
                          const std::function<double(std::span<const double>)>& h,
                          const SMomentParams& params = {});

struct MartingaleReport {
  double lag = 0.0;                  // time gap s between M(t+s) and M(t)
  std::vector<std::string> z_names;  // adapted test functionals
  std::vector<double> residual;      // E[(M(t+s) - M(t)) Z(t)] per functional
  std::vector<double> se;
  bool enough_replicas = true;  // flagged below 8 replicas
  bool all_within_3se = false;
};

// Builds M(t) = F(X_t) - F(X_0) + int_0^t H F(X_u) du along each recorded
// trajectory (trapezoid rule on the stored grid) and tests the martingale
// property against Z in {1, F(X_t), <f_1, X_t>}, averaging over all valid
// start times per replica and taking the replica spread as the error.
MartingaleReport martingale_residual(const std::vector<TrajectoryRecord>& replicas,
                                     const CylinderFunction& f_cyl,
                                     const PairPotentialModel& pot, double beta, double lag);

struct QvReport {
  double realized = 0.0, realized_se = 0.0;  // quadratic variation of the M part
  double integral = 0.0, integral_se = 0.0;  // int <|grad f|^2, X_u> du
  double c_hat = 0.0, c_se = 0.0;            // realized / integral across replicas
  int best_c = 0;                            // closer of {1, 2}; 0 when degenerate
  bool degenerate = false;                   // integral vanished on some replica
};

// Realized quadratic variation of the martingale part of <f, X_t> against
// c * int <|grad f|^2, X_u> du; the reflected dynamics with sqrt(2) noise
// should select c = 2. Use stride-1 records (native resolution).
QvReport quadratic_variation_check(const std::vector<TrajectoryRecord>& replicas,
                                   const SmoothBump& f);

struct IncrementMomentReport {
  std::vector<double> gaps;  // time gaps probed (dyadic multiples of the grid)
  std::vector<double> m4, m4_se;  // E[d(X_t, X_{t+gap})^4]^{1/4} with SE
  double alpha = 0.0, alpha_se = 0.0;  // fitted exponent of m4 ~ C gap^alpha
  double c_hat = 0.0;                  // fitted constant C
  bool exponent_ok = false;  // 95% band [alpha +- 2 se] inside [0.4, 0.6]
  bool enough_replicas = true;
};

// Fourth-moment increments of the configuration metric over dyadic time gaps,
// fitted to C * gap^alpha in log-log (diffusive scaling has alpha = 1/2).
IncrementMomentReport increment_moment_diagnostic(const std::vector<TrajectoryRecord>& replicas,
                                                  const MetricFamily& fam,
                                                  int max_gap_doublings = 6);

struct DiagnosticStat {
  std::string name;
  double value = 0.0;
  double se = 0.0;
  bool flagged = false;
  std::string note;
};

struct DiagnosticReport {
  std::string experiment;
  std::string inputs_digest;  // FNV-1a hash of the input description
  int n = 0;
  double volume = 0.0;
  std::vector<DiagnosticStat> stats;
  bool hard_pass = true;  // algebraic invariants; statistical flags never clear it
  std::vector<std::string> notes;
};

// FNV-1a 64-bit digest of a canonical input description, as fixed-width hex.
std::string inputs_digest(const std::string& text);

struct SweepConfig {
  std::vector<std::string> experiments = {"ruelle",     "smoment",    "ibp",      "martingale",
                                          "increments", "activity",   "ensembles"};
  double beta = 1.0;
  PairPotentialModel pot = PairPotentialModel::ideal_gas(1);
  std::uint64_t seed = 1;
  McmcParams mcmc;    // sampling budget for the static experiments
  SdeParams sde;      // trajectory budget for the dynamic experiments
  double quad_tol = 1e-5;
  std::vector<int> ruelle_orders = {1, 2};
  RuelleParams ruelle;
  RatioParams ratio;
  RatioMethod ratio_method = RatioMethod::widom;
  int growth_window = 3;       // consecutive increases before flagging
  double growth_factor = 5.0;  // total growth flagged beyond this
  int workers = 1;             // schedule entries processed in parallel
};

// Runs the selected experiments at every schedule entry (schedule-wide
// experiments once), appends a trend report over N per statistic, and flags
// any statistic that keeps growing beyond growth_factor. Per-entry failures
// are recorded as notes and do not stop the sweep.
std::vector<DiagnosticReport> nv_sweep(const NVSchedule& schedule, const SweepConfig& cfg);

}  // namespace nvlab
