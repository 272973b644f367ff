#pragma once

#include <cstddef>
#include <span>

namespace nvlab {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Sample mean with the iid standard error s/sqrt(n).
MeanSe mean_se_iid(std::span<const double> xs);

// Batch-means standard error for correlated series (MCMC output): the series
// is cut into `nbatches` contiguous batches and the SE is computed from the
// spread of the batch means.
MeanSe batch_means(std::span<const double> xs, int nbatches = 16);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double se_slope = 0.0;
  double se_intercept = 0.0;
};

// Ordinary least squares y = intercept + slope*x with standard errors from the
// residual variance.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace nvlab
