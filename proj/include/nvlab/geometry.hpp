#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace nvlab {

// Axis-aligned box [0,L1] x ... x [0,Ld].
struct BoxDomain {
  std::vector<double> lengths;

  BoxDomain() = default;
  explicit BoxDomain(std::vector<double> ls);
  static BoxDomain cube(int d, double side);

  int dim() const { return static_cast<int>(lengths.size()); }
  double volume() const;
  bool contains(std::span<const double> x) const;
};

bool operator==(const BoxDomain& a, const BoxDomain& b);

// Finite point configuration in a box. Points are pairwise distinct and lie in
// the closed box. The stored order is arbitrary (samplers move points in
// place); equality and serialization use the lexicographic order, so any
// permutation of the same points is the same value.
class Configuration {
 public:
  Configuration(BoxDomain box, std::vector<double> flat);
  static Configuration empty(BoxDomain box);

  int dim() const { return box_.dim(); }
  std::size_t size() const { return box_.dim() == 0 ? 0 : flat_.size() / box_.dim(); }
  std::span<const double> point(std::size_t i) const;
  const std::vector<double>& flat() const { return flat_; }
  const BoxDomain& box() const { return box_; }

  // Bounds-checked in-place move used by the samplers and the SDE stepper.
  void move_point(std::size_t i, std::span<const double> x);

  // Index permutation sorting the points lexicographically.
  std::vector<std::size_t> canonical_order() const;

 private:
  BoxDomain box_;
  std::vector<double> flat_;
};

bool operator==(const Configuration& a, const Configuration& b);
inline bool operator!=(const Configuration& a, const Configuration& b) { return !(a == b); }

// Order-forgetting map from an ordered point tuple to a Configuration.
Configuration sym(const BoxDomain& box, const std::vector<std::vector<double>>& points);

// Counts per half-open unit cube [r - 1/2, r + 1/2)^d indexed by the integer
// lattice vector r.
std::map<std::vector<long>, std::size_t> cube_counts(const Configuration& g);

// Flat text record: "d L1..Ld N x11..x1d ... xN1..xNd" (points in canonical
// order, doubles printed with round-trip precision).
std::string to_record(const Configuration& g);
Configuration from_record(const std::string& line);

double dist(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace nvlab
