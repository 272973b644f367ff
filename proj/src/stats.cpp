#include "nvlab/stats.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace nvlab {

MeanSe mean_se_iid(std::span<const double> xs) {
  MeanSe r;
  r.n = xs.size();
  if (r.n == 0) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(r.n);
  if (r.n < 2) return r;
  double ss = 0.0;
  for (double x : xs) { const double t = x - r.mean; ss += t * t; }
  r.se = std::sqrt(ss / (static_cast<double>(r.n) * static_cast<double>(r.n - 1)));
  return r;
}

MeanSe batch_means(std::span<const double> xs, int nbatches) {
  if (nbatches < 2) throw std::invalid_argument("batch_means: need at least 2 batches");
  const std::size_t n = xs.size();
  if (n < static_cast<std::size_t>(2 * nbatches)) return mean_se_iid(xs);
  const std::size_t b = n / static_cast<std::size_t>(nbatches);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(nbatches));
  double total = 0.0;
  std::size_t used = 0;
  for (int k = 0; k < nbatches; ++k) {
    double s = 0.0;
    for (std::size_t i = static_cast<std::size_t>(k) * b; i < static_cast<std::size_t>(k + 1) * b; ++i) s += xs[i];
    means.push_back(s / static_cast<double>(b));
    total += s;
    used += b;
  }
  MeanSe r;
  r.n = used;
  r.mean = total / static_cast<double>(used);
  double ss = 0.0;
  for (double m : means) { const double t = m - r.mean; ss += t * t; }
  const double nb = static_cast<double>(nbatches);
  r.se = std::sqrt(ss / (nb * (nb - 1.0)));
  return r;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: need matching arrays, n >= 2");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) { sx += x[i]; sy += y[i]; }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (f.intercept + f.slope * x[i]);
      ss += r * r;
    }
    const double var = ss / static_cast<double>(n - 2);
    f.se_slope = std::sqrt(var / sxx);
    f.se_intercept = std::sqrt(var * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  }
  return f;
}

}  // namespace nvlab
