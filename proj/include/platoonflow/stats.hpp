#pragma once

#include <cstddef>
#include <vector>

namespace pf {

// One-sided Student-t quantile: the t with CDF(t; nu) = p. Inverted
// numerically through the regularized incomplete beta function.
double t_inverse_cdf(double p, int nu);

// CDF helper, exposed for testing.
double t_cdf(double t, int nu);

enum class BandMode {
  Paper,     // C = tin(level, nu), N = nu/2 - 1
  Standard,  // C = tin(level, nu - 1), N = nu
};

struct ConfidenceBand {
  double mean = 0.0;
  double half_width = 0.0;
  double lo() const { return mean - half_width; }
  double hi() const { return mean + half_width; }
  bool contains(double x) const { return x >= lo() && x <= hi(); }
};

// Band around the sample mean with half width C * sigma / sqrt(N), sigma the
// sample standard deviation (n-1 denominator). Paper mode requires nu >= 3
// samples, standard mode nu >= 2; throws std::invalid_argument otherwise.
ConfidenceBand confidence_band(const std::vector<double>& samples,
                               double level = 0.95,
                               BandMode mode = BandMode::Paper);

double mean_of(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

}  // namespace pf
