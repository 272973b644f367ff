#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvlab/geometry.hpp"
#include "nvlab/quadrature.hpp"

namespace nvlab {

enum class PotentialKind { ideal_gas, soft_sphere, lennard_jones, bounded_step, user_table };

std::string to_string(PotentialKind k);

// Constants the model declares for the regularity certificates:
//   phi >= -B everywhere                         (lower bound)
//   |phi(x)| <= A |x|^-lambda for |x| >= R2      (tempered tail)
//   phi(x) >= |x|^-rp_exponent for |x| <= R1     (repulsion envelope)
// rp_exponent <= 0 declares the zero envelope (only the zero potential
// satisfies the divergence requirement vacuously).
struct DeclaredConstants {
  double B = 0.0;
  double A = 0.0;
  double lambda = 0.0;
  double R2 = 1.0;
  double R1 = 0.0;
  double rp_exponent = 0.0;
};

// Superstability constants; opaque user inputs consumed only by the
// low-density regime gate of the ensemble-equivalence diagnostic.
struct SsConstants {
  double D = 0.0;
  double K = 0.0;
};

// Radially symmetric pair potential. Models with a cutoff are truncated and
// shifted to be continuous there: phi_cut(r) = phi(r) - phi(r_cut) for
// r < r_cut and exactly 0 beyond.
class PairPotentialModel {
 public:
  static PairPotentialModel ideal_gas(int d);
  static PairPotentialModel soft_sphere(int d, double epsilon, double sigma, double exponent,
                                        std::optional<double> r_cut = std::nullopt);
  static PairPotentialModel lennard_jones(int d, double epsilon, double sigma,
                                          std::optional<double> r_cut = std::nullopt);
  static PairPotentialModel bounded_step(int d, double height, double radius);
  static PairPotentialModel user_table(int d, std::vector<double> r, std::vector<double> phi);

  PotentialKind kind() const { return kind_; }
  int dim() const { return d_; }
  double epsilon() const { return epsilon_; }
  double sigma() const { return sigma_; }
  double exponent() const { return exponent_; }
  double step_height() const { return height_; }
  double step_radius() const { return radius_; }
  std::optional<double> cutoff() const { return r_cut_; }
  double range() const;  // r_cut when present, +inf otherwise (0 for ideal gas)

  const DeclaredConstants& declared() const { return declared_; }
  DeclaredConstants& declared() { return declared_; }
  const SsConstants& ss() const { return ss_; }
  SsConstants& ss() { return ss_; }

  bool singular_at_zero() const;

  // phi as a function of the pair distance; +inf at r = 0 for singular kinds.
  double evaluate_radial(double r) const;
  // dphi/dr; exact formulas per kind (0 almost everywhere for the step model).
  double radial_derivative(double r) const;

  double evaluate(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;

 private:
  PairPotentialModel() = default;
  double raw_radial(double r) const;       // before truncation shift
  double raw_derivative(double r) const;

  PotentialKind kind_ = PotentialKind::ideal_gas;
  int d_ = 1;
  double epsilon_ = 0.0, sigma_ = 1.0, exponent_ = 0.0;
  double height_ = 0.0, radius_ = 0.0;
  std::optional<double> r_cut_;
  double shift_ = 0.0;
  std::vector<double> table_r_, table_phi_, table_slope_;
  DeclaredConstants declared_;
  SsConstants ss_;
};

// E_phi: sum of phi over unordered pairs; empty and singleton give 0. The flat
// overload serves the samplers, which work on raw coordinate tuples; +inf is
// returned when a singular pair coincides.
double energy(const PairPotentialModel& pot, std::span<const double> flat, int d);
double energy(const PairPotentialModel& pot, const Configuration& g);

// W_phi: sum of phi over all cross pairs of the two configurations.
double interaction_energy(const PairPotentialModel& pot, const Configuration& a,
                          const Configuration& b);
double interaction_energy_flat(const PairPotentialModel& pot, std::span<const double> a,
                               std::span<const double> b, int d);

// J(beta) = int |exp(-beta*phi(x)) - 1| dx over R^d, by radial reduction.
// Throws QuadratureFailure (with the partial value) on non-convergence.
QuadResult mayer_integral(const PairPotentialModel& pot, double beta, double quad_tol);

struct ConditionEntry {
  std::string name;                 // RP | T | BB | D | I
  std::string status;               // verified-on-grid | declared-only | violated
  std::string detail;
  double witness_r = 0.0;           // where a violation was found
  double witness_value = 0.0;
  bool ok() const { return status != "violated"; }
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  double mayer_value = 0.0;
  double mayer_error = 0.0;
  bool all_ok() const;
  const ConditionEntry& entry(const std::string& name) const;
};

struct GridSpec {
  double t_min = 1e-4;
  double t_max = 10.0;
  int n = 512;  // log-spaced radii
};

ConditionReport check_conditions(const PairPotentialModel& pot, double beta,
                                 const GridSpec& grid = {});

}  // namespace nvlab
