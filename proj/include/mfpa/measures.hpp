#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mfpa/time_grid.hpp"

namespace mfpa {

/// Clamp convention of the interaction term: -b_bar v (b_bar ^ x).
/// An infinite `b_bar` leaves x unchanged.
inline double clamp_interaction(double x, double b_bar) {
  if (x > b_bar) return b_bar;
  if (x < -b_bar) return -b_bar;
  return x;
}

/// Equal-weight atomic probability measure on the real line.
///
/// The sorted copy is built eagerly so concurrent readers never mutate the
/// object.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(std::vector<double> samples);

  std::size_t size() const { return samples_.size(); }
  std::span<const double> samples() const { return samples_; }
  std::span<const double> sorted() const { return sorted_; }

  double mean() const;
  double moment(double p) const;
  double clamped_mean(double b_bar) const;

  /// Left-continuous inverse CDF evaluated at u in (0, 1].
  double quantile(double u) const;

 private:
  std::vector<double> samples_;
  std::vector<double> sorted_;
};

// Span versions, used on raw particle states without building a measure.
double sample_moment(std::span<const double> samples, double p);
double clamped_mean(std::span<const double> samples, double b_bar);

/// Time-indexed family of empirical measures, one per grid node.
class MeasureFlow {
 public:
  MeasureFlow(TimeGrid grid, std::vector<EmpiricalMeasure> measures);

  const TimeGrid& grid() const { return grid_; }
  std::size_t size() const { return measures_.size(); }
  const EmpiricalMeasure& at(std::size_t k) const { return measures_.at(k); }
  const EmpiricalMeasure& terminal() const { return measures_.back(); }

 private:
  TimeGrid grid_;
  std::vector<EmpiricalMeasure> measures_;
};

/// Wasserstein-p distance between two empirical measures on R.
///
/// The 1-D optimal coupling is monotone, so the distance is the L^p norm of
/// the difference of quantile functions. Unequal sample counts are handled
/// exactly by merging the breakpoints of both step quantile functions.
/// Throws NumericDomainError for p < 1.
double wasserstein_p(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p = 1.0);

/// One column per measure, one sample per row; shorter columns are left blank.
void write_measures_csv(const std::string& path, std::span<const std::string> names,
                        std::span<const EmpiricalMeasure* const> measures);

}  // namespace mfpa
