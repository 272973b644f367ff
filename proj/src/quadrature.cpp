#include "nvlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace nvlab {

namespace {

// 15-point Kronrod extension of 7-point Gauss, nodes on [0,1] (symmetric).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Segment {
  double a, b;
  double value;
  double error;
};

struct SegmentCmp {
  bool operator()(const Segment& x, const Segment& y) const { return x.error < y.error; }
};

// One Gauss-Kronrod 7/15 panel; returns the Kronrod value and a QUADPACK-style
// error estimate.
Segment gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(c - h * kXgk[i]);
    fv[14 - i] = f(c + h * kXgk[i]);
  }
  fv[7] = f(c);
  double resk = 0.0, resg = 0.0, resabs = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double sum = (i == 7) ? fv[7] : fv[i] + fv[14 - i];
    resk += kWgk[i] * sum;
    resabs += kWgk[i] * ((i == 7) ? std::fabs(fv[7]) : std::fabs(fv[i]) + std::fabs(fv[14 - i]));
  }
  for (int i = 0; i < 4; ++i) {
    const int j = 2 * i + 1;
    const double sum = (i == 3) ? fv[7] : fv[j] + fv[14 - j];
    resg += kWg[i] * sum;
  }
  const double mean = resk * 0.5;
  double resasc = kWgk[7] * std::fabs(fv[7] - mean);
  for (int i = 0; i < 7; ++i)
    resasc += kWgk[i] * (std::fabs(fv[i] - mean) + std::fabs(fv[14 - i] - mean));
  resasc *= h;
  double err = std::fabs(resk - resg) * h;
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps = 50.0 * std::numeric_limits<double>::epsilon() * resabs * h;
  err = std::max(err, eps);
  return Segment{a, b, resk * h, err};
}

}  // namespace

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double abs_tol, double rel_tol, std::size_t max_evals,
                              std::span<const double> split_points) {
  QuadResult out;
  if (a == b) return out;

  std::vector<double> knots{a, b};
  for (double s : split_points)
    if (s > std::min(a, b) && s < std::max(a, b)) knots.push_back(s);
  std::sort(knots.begin(), knots.end());
  if (a > b) std::reverse(knots.begin(), knots.end());

  std::priority_queue<Segment, std::vector<Segment>, SegmentCmp> heap;
  double total = 0.0, toterr = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    Segment s = gk15(f, knots[i], knots[i + 1]);
    out.evals += 15;
    total += s.value;
    toterr += s.error;
    heap.push(s);
  }

  auto good = [&]() { return toterr <= std::max(abs_tol, rel_tol * std::fabs(total)); };
  while (!good() && out.evals + 30 <= max_evals && !heap.empty()) {
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid == worst.a || mid == worst.b) continue;  // interval at floating-point resolution
    Segment l = gk15(f, worst.a, mid);
    Segment r = gk15(f, mid, worst.b);
    out.evals += 30;
    total += l.value + r.value - worst.value;
    toterr += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
  }
  out.value = total;
  out.error = toterr;
  out.converged = good();
  return out;
}

QuadResult integrate_half_line(const std::function<double(double)>& f, double a,
                               double abs_tol, double rel_tol, std::size_t max_evals) {
  auto g = [&](double t) {
    const double om = 1.0 - t;
    const double r = a + t / om;
    return f(r) / (om * om);
  };
  // The endpoint t=1 maps to r=inf; gk15 never evaluates interval endpoints.
  return integrate_adaptive(g, 0.0, 1.0, abs_tol, rel_tol, max_evals);
}

namespace {

// Degree-7 Genz-Malik cubature with the embedded degree-5 rule as the error
// estimate, applied over a globally adaptive heap of sub-boxes.  Points per
// box: 1 + 4n + 2n(n-1) + 2^n.
struct GmRule {
  int n;
  double w1, w2, w3, w4, w5;
  double e1, e2, e3, e4;
  explicit GmRule(int dim) : n(dim) {
    const double dn = static_cast<double>(dim);
    w1 = (12824.0 - 9120.0 * dn + 400.0 * dn * dn) / 19683.0;
    w2 = 980.0 / 6561.0;
    w3 = (1820.0 - 400.0 * dn) / 19683.0;
    w4 = 200.0 / 19683.0;
    w5 = 6859.0 / 19683.0 / std::ldexp(1.0, dim);
    e1 = (729.0 - 950.0 * dn + 50.0 * dn * dn) / 729.0;
    e2 = 245.0 / 486.0;
    e3 = (265.0 - 100.0 * dn) / 1458.0;
    e4 = 25.0 / 729.0;
  }
};

struct GmBox {
  std::vector<double> center;
  std::vector<double> half;
  double value;
  double error;
  int split_axis;
};

struct GmCmp {
  bool operator()(const GmBox& x, const GmBox& y) const { return x.error < y.error; }
};

constexpr double kGmLambda2 = 0.35856858280031809199064515390793;  // sqrt(9/70)
constexpr double kGmLambda4 = 0.94868329805051379959966806332982;  // sqrt(9/10)
constexpr double kGmLambda5 = 0.68824720161168529772162873429362;  // sqrt(9/19)

void gm_evaluate(const std::function<double(std::span<const double>)>& f, const GmRule& rule,
                 GmBox& box, std::size_t& evals) {
  const int n = rule.n;
  double vol = 1.0;
  for (int i = 0; i < n; ++i) vol *= 2.0 * box.half[i];

  std::vector<double> p = box.center;
  const double fc = f(p);
  ++evals;

  double sum2 = 0.0, sum3 = 0.0;
  double max_fourth = -1.0;
  int axis = 0;
  const double ratio = (kGmLambda2 * kGmLambda2) / (kGmLambda4 * kGmLambda4);
  for (int i = 0; i < n; ++i) {
    const double c = box.center[i];
    const double h = box.half[i];
    p[i] = c - kGmLambda2 * h;
    const double f2l = f(p);
    p[i] = c + kGmLambda2 * h;
    const double f2r = f(p);
    p[i] = c - kGmLambda4 * h;
    const double f4l = f(p);
    p[i] = c + kGmLambda4 * h;
    const double f4r = f(p);
    p[i] = c;
    evals += 4;
    sum2 += f2l + f2r;
    sum3 += f4l + f4r;
    // CUHRE fourth-difference criterion for the split axis; ties go to the
    // geometrically widest side.
    const double fourth = std::fabs(f2l + f2r - 2.0 * fc - ratio * (f4l + f4r - 2.0 * fc));
    if (fourth > max_fourth + 1e-30 ||
        (fourth > max_fourth - 1e-30 && box.half[i] > box.half[axis])) {
      max_fourth = fourth;
      axis = i;
    }
  }

  double sum4 = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double ci = box.center[i], hi = kGmLambda4 * box.half[i];
      const double cj = box.center[j], hj = kGmLambda4 * box.half[j];
      for (int si = -1; si <= 1; si += 2) {
        for (int sj = -1; sj <= 1; sj += 2) {
          p[i] = ci + si * hi;
          p[j] = cj + sj * hj;
          sum4 += f(p);
          ++evals;
        }
      }
      p[i] = ci;
      p[j] = cj;
    }
  }

  double sum5 = 0.0;
  const std::size_t corners = static_cast<std::size_t>(1) << n;
  for (std::size_t mask = 0; mask < corners; ++mask) {
    for (int i = 0; i < n; ++i) {
      const double s = (mask >> i) & 1 ? 1.0 : -1.0;
      p[i] = box.center[i] + s * kGmLambda5 * box.half[i];
    }
    sum5 += f(p);
    ++evals;
  }

  const double res7 = vol * (rule.w1 * fc + rule.w2 * sum2 + rule.w3 * sum3 + rule.w4 * sum4 +
                             rule.w5 * sum5);
  const double res5 = vol * (rule.e1 * fc + rule.e2 * sum2 + rule.e3 * sum3 + rule.e4 * sum4);
  box.value = res7;
  box.error = std::fabs(res7 - res5);
  box.split_axis = axis;
}

}  // namespace

QuadResult integrate_box(const std::function<double(std::span<const double>)>& f,
                         std::span<const std::pair<double, double>> bounds, double abs_tol,
                         double rel_tol, std::size_t max_evals,
                         std::span<const int> initial_cells) {
  if (bounds.empty()) {
    QuadResult r;
    r.value = f(std::span<const double>{});
    r.evals = 1;
    r.converged = true;
    return r;
  }
  if (!initial_cells.empty() && initial_cells.size() != bounds.size())
    throw std::invalid_argument("integrate_box: initial_cells must match the axis count");
  const int n = static_cast<int>(bounds.size());
  if (n == 1) {
    std::vector<double> point(1, 0.0);
    auto g = [&](double x) {
      point[0] = x;
      return f(point);
    };
    std::vector<double> knots;
    if (!initial_cells.empty() && initial_cells[0] > 1) {
      const double width = bounds[0].second - bounds[0].first;
      for (int c = 1; c < initial_cells[0]; ++c)
        knots.push_back(bounds[0].first + width * c / initial_cells[0]);
    }
    return integrate_adaptive(g, bounds[0].first, bounds[0].second, abs_tol, rel_tol, max_evals,
                              knots);
  }

  const GmRule rule(n);
  QuadResult out;

  std::vector<int> cells(bounds.size(), 1);
  std::size_t n_cells = 1;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (bounds[i].second < bounds[i].first)
      throw std::invalid_argument("integrate_box: inverted bounds");
    if (!initial_cells.empty()) {
      if (initial_cells[i] < 1)
        throw std::invalid_argument("integrate_box: initial_cells entries must be >= 1");
      cells[i] = initial_cells[i];
    }
    n_cells *= static_cast<std::size_t>(cells[i]);
  }

  std::priority_queue<GmBox, std::vector<GmBox>, GmCmp> heap;
  double total = 0.0, toterr = 0.0;
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    GmBox box;
    box.center.resize(bounds.size());
    box.half.resize(bounds.size());
    std::size_t rem = cell;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const std::size_t idx = rem % static_cast<std::size_t>(cells[i]);
      rem /= static_cast<std::size_t>(cells[i]);
      const double width = (bounds[i].second - bounds[i].first) / cells[i];
      box.half[i] = 0.5 * width;
      box.center[i] = bounds[i].first + width * (static_cast<double>(idx) + 0.5);
    }
    gm_evaluate(f, rule, box, out.evals);
    total += box.value;
    toterr += box.error;
    heap.push(std::move(box));
  }

  auto good = [&]() { return toterr <= std::max(abs_tol, rel_tol * std::fabs(total)); };
  const std::size_t per_split = 2 * (static_cast<std::size_t>(1 + 4 * n + 2 * n * (n - 1)) +
                                     (static_cast<std::size_t>(1) << n));
  while (!good() && out.evals + per_split <= max_evals && !heap.empty()) {
    GmBox worst = heap.top();
    heap.pop();
    const int ax = worst.split_axis;
    if (worst.half[ax] <= std::fabs(worst.center[ax]) * 1e-15) continue;  // resolution floor
    total -= worst.value;
    toterr -= worst.error;

    GmBox left = worst;
    left.half[ax] *= 0.5;
    left.center[ax] -= left.half[ax];
    GmBox right = std::move(worst);
    right.half[ax] *= 0.5;
    right.center[ax] += right.half[ax];
    gm_evaluate(f, rule, left, out.evals);
    gm_evaluate(f, rule, right, out.evals);
    total += left.value + right.value;
    toterr += left.error + right.error;
    heap.push(std::move(left));
    heap.push(std::move(right));
  }
  out.value = total;
  out.error = toterr;
  out.converged = good();
  return out;
}

double sphere_surface(int d) {
  return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace nvlab
