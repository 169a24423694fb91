#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace mfpa {

/// Monte Carlo point estimate with its standard error.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

inline double sample_mean(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

/// Unbiased sample variance (0 for fewer than two samples).
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = sample_mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

inline Estimate estimate_mean(std::span<const double> xs) {
  Estimate out;
  out.count = xs.size();
  out.mean = sample_mean(xs);
  out.se = xs.size() > 1 ? std::sqrt(sample_variance(xs) / static_cast<double>(xs.size())) : 0.0;
  return out;
}

}  // namespace mfpa
