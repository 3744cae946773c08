#pragma once

#include <cstddef>
#include <span>

namespace mcsgm::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;       // standard error of the mean
  std::size_t count = 0;
};

// Deterministic left fold in index order; se = sample std / sqrt(count).
MeanSe mean_se(std::span<const double> values);

// Inverse standard normal CDF (Acklam's rational approximation).
double normal_quantile(double p);

// Chi-square quantile via the Wilson-Hilferty cube approximation; good to a
// few tenths for the dof used in the uniformity tests.
double chi_square_quantile(double p, double dof);

// Pearson statistic for observed counts against equal expected counts.
double chi_square_uniform_stat(std::span<const std::size_t> counts);

}  // namespace mcsgm::stats
