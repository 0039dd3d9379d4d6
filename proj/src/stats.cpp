#include "platoonflow/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace pf {

namespace {

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0))
    return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double t_cdf(double t, int nu) {
  if (nu < 1) throw std::invalid_argument("t_cdf: nu must be >= 1");
  const double x = nu / (nu + t * t);
  const double half_tail = 0.5 * betai(0.5 * nu, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double t_inverse_cdf(double p, int nu) {
  if (nu < 1) throw std::invalid_argument("t_inverse_cdf: nu must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("t_inverse_cdf: p must be in (0, 1)");
  if (p == 0.5) return 0.0;
  const bool flip = p < 0.5;
  const double q = flip ? 1.0 - p : p;

  double lo = 0.0, hi = 1.0;
  while (t_cdf(hi, nu) < q) {
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, nu) < q)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  const double t = 0.5 * (lo + hi);
  return flip ? -t : t;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / (double)xs.size();
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s2 = 0.0;
  for (double x : xs) s2 += (x - m) * (x - m);
  return std::sqrt(s2 / (double)(xs.size() - 1));
}

ConfidenceBand confidence_band(const std::vector<double>& samples,
                               double level, BandMode mode) {
  const int nu = (int)samples.size();
  if (mode == BandMode::Paper && nu < 3)
    throw std::invalid_argument("confidence_band: paper mode needs >= 3 samples");
  if (mode == BandMode::Standard && nu < 2)
    throw std::invalid_argument("confidence_band: standard mode needs >= 2 samples");

  ConfidenceBand band;
  band.mean = mean_of(samples);
  const double sigma = sample_stddev(samples);
  if (mode == BandMode::Paper) {
    const double c = t_inverse_cdf(level, nu);
    const double n_eff = 0.5 * nu - 1.0;
    band.half_width = c * sigma / std::sqrt(n_eff);
  } else {
    const double c = t_inverse_cdf(level, nu - 1);
    band.half_width = c * sigma / std::sqrt((double)nu);
  }
  return band;
}

}  // namespace pf
