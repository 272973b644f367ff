#include "nvlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nvlab {

BoxDomain::BoxDomain(std::vector<double> ls) : lengths(std::move(ls)) {
  if (lengths.empty()) throw std::invalid_argument("BoxDomain: dimension must be >= 1");
  for (double L : lengths)
    if (!(L > 0.0)) throw std::invalid_argument("BoxDomain: all side lengths must be > 0");
}

BoxDomain BoxDomain::cube(int d, double side) {
  return BoxDomain(std::vector<double>(static_cast<std::size_t>(d), side));
}

double BoxDomain::volume() const {
  double v = 1.0;
  for (double L : lengths) v *= L;
  return v;
}

bool BoxDomain::contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (x[i] < 0.0 || x[i] > lengths[static_cast<std::size_t>(i)]) return false;
  return true;
}

bool operator==(const BoxDomain& a, const BoxDomain& b) { return a.lengths == b.lengths; }

Configuration::Configuration(BoxDomain box, std::vector<double> flat)
    : box_(std::move(box)), flat_(std::move(flat)) {
  const int d = box_.dim();
  if (d == 0) throw std::invalid_argument("Configuration: box has dimension 0");
  if (flat_.size() % static_cast<std::size_t>(d) != 0)
    throw std::invalid_argument("Configuration: flat coordinate count not a multiple of d");
  const std::size_t n = flat_.size() / static_cast<std::size_t>(d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!box_.contains(point(i)))
      throw std::invalid_argument("Configuration: point outside the box");
    for (std::size_t j = i + 1; j < n; ++j) {
      bool same = true;
      for (int c = 0; c < d; ++c)
        if (flat_[i * d + c] != flat_[j * d + c]) { same = false; break; }
      if (same) throw std::invalid_argument("Configuration: duplicate points rejected");
    }
  }
}

Configuration Configuration::empty(BoxDomain box) { return Configuration(std::move(box), {}); }

std::span<const double> Configuration::point(std::size_t i) const {
  const std::size_t d = static_cast<std::size_t>(box_.dim());
  return std::span<const double>(flat_.data() + i * d, d);
}

void Configuration::move_point(std::size_t i, std::span<const double> x) {
  if (!box_.contains(x)) throw std::invalid_argument("move_point: target outside the box");
  const std::size_t d = static_cast<std::size_t>(box_.dim());
  std::copy(x.begin(), x.end(), flat_.begin() + static_cast<std::ptrdiff_t>(i * d));
}

std::vector<std::size_t> Configuration::canonical_order() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t d = static_cast<std::size_t>(dim());
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t c = 0; c < d; ++c) {
      const double xa = flat_[a * d + c], xb = flat_[b * d + c];
      if (xa != xb) return xa < xb;
    }
    return false;
  });
  return idx;
}

bool operator==(const Configuration& a, const Configuration& b) {
  if (!(a.box() == b.box()) || a.size() != b.size()) return false;
  const auto ia = a.canonical_order();
  const auto ib = b.canonical_order();
  const std::size_t d = static_cast<std::size_t>(a.dim());
  for (std::size_t k = 0; k < ia.size(); ++k)
    for (std::size_t c = 0; c < d; ++c)
      if (a.flat()[ia[k] * d + c] != b.flat()[ib[k] * d + c]) return false;
  return true;
}

Configuration sym(const BoxDomain& box, const std::vector<std::vector<double>>& points) {
  std::vector<double> flat;
  flat.reserve(points.size() * static_cast<std::size_t>(box.dim()));
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != box.dim())
      throw std::invalid_argument("sym: point dimension mismatch");
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return Configuration(box, std::move(flat));
}

std::map<std::vector<long>, std::size_t> cube_counts(const Configuration& g) {
  std::map<std::vector<long>, std::size_t> counts;
  const int d = g.dim();
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.point(i);
    std::vector<long> r(static_cast<std::size_t>(d));
    for (int c = 0; c < d; ++c)
      r[static_cast<std::size_t>(c)] = static_cast<long>(std::floor(x[c] + 0.5));
    counts[r] += 1;
  }
  return counts;
}

namespace {
void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}
}  // namespace

std::string to_record(const Configuration& g) {
  std::string out = std::to_string(g.dim());
  for (double L : g.box().lengths) { out += ' '; append_double(out, L); }
  out += ' ';
  out += std::to_string(g.size());
  const auto order = g.canonical_order();
  const std::size_t d = static_cast<std::size_t>(g.dim());
  for (std::size_t k : order)
    for (std::size_t c = 0; c < d; ++c) { out += ' '; append_double(out, g.flat()[k * d + c]); }
  return out;
}

Configuration from_record(const std::string& line) {
  std::istringstream in(line);
  int d = 0;
  if (!(in >> d) || d < 1) throw std::invalid_argument("from_record: bad dimension field");
  std::vector<double> lengths(static_cast<std::size_t>(d));
  for (auto& L : lengths)
    if (!(in >> L)) throw std::invalid_argument("from_record: missing box length");
  std::size_t n = 0;
  if (!(in >> n)) throw std::invalid_argument("from_record: missing point count");
  std::vector<double> flat(n * static_cast<std::size_t>(d));
  for (auto& x : flat)
    if (!(in >> x)) throw std::invalid_argument("from_record: missing coordinate");
  double extra;
  if (in >> extra) throw std::invalid_argument("from_record: trailing fields");
  return Configuration(BoxDomain(std::move(lengths)), std::move(flat));
}

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { const double t = a[i] - b[i]; s += t * t; }
  return std::sqrt(s);
}

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

}  // namespace nvlab
