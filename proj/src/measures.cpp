#include "mfpa/measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "mfpa/errors.hpp"

namespace mfpa {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw Error(ErrorCode::kInvalidArgument, "empirical measure needs at least one sample");
  sorted_ = samples_;
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalMeasure::mean() const {
  return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
}

double EmpiricalMeasure::moment(double p) const { return sample_moment(samples_, p); }

double EmpiricalMeasure::clamped_mean(double b_bar) const { return mfpa::clamped_mean(samples_, b_bar); }

double EmpiricalMeasure::quantile(double u) const {
  const auto n = static_cast<double>(sorted_.size());
  auto idx = static_cast<std::size_t>(std::ceil(u * n));
  idx = std::clamp<std::size_t>(idx, 1, sorted_.size());
  return sorted_[idx - 1];
}

double sample_moment(std::span<const double> samples, double p) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double x : samples) acc += std::pow(std::abs(x), p);
  return acc / static_cast<double>(samples.size());
}

double clamped_mean(std::span<const double> samples, double b_bar) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double x : samples) acc += clamp_interaction(x, b_bar);
  return acc / static_cast<double>(samples.size());
}

MeasureFlow::MeasureFlow(TimeGrid grid, std::vector<EmpiricalMeasure> measures)
    : grid_(grid), measures_(std::move(measures)) {
  if (measures_.size() != grid_.nodes())
    throw Error(ErrorCode::kInvalidArgument, "measure flow needs one measure per grid node");
  for (const auto& m : measures_) {
    if (m.size() != measures_.front().size())
      throw Error(ErrorCode::kInvalidArgument, "measure flow sample counts differ across nodes");
  }
}

double wasserstein_p(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  if (!(p >= 1.0)) throw NumericDomainError("wasserstein_p requires p >= 1");
  const auto xa = a.sorted();
  const auto xb = b.sorted();
  const std::size_t na = xa.size();
  const std::size_t nb = xb.size();

  double acc = 0.0;
  if (na == nb) {
    for (std::size_t i = 0; i < na; ++i) acc += std::pow(std::abs(xa[i] - xb[i]), p);
    return std::pow(acc / static_cast<double>(na), 1.0 / p);
  }

  // Walk the merged breakpoints i/na and j/nb of the two quantile functions
  // in integer arithmetic (common denominator na * nb).
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t pos = 0;
  const std::size_t total = na * nb;
  while (pos < total) {
    const std::size_t next_a = (i + 1) * nb;
    const std::size_t next_b = (j + 1) * na;
    const std::size_t next = std::min(next_a, next_b);
    acc += static_cast<double>(next - pos) * std::pow(std::abs(xa[i] - xb[j]), p);
    pos = next;
    if (next == next_a) ++i;
    if (next == next_b) ++j;
  }
  return std::pow(acc / static_cast<double>(total), 1.0 / p);
}

void write_measures_csv(const std::string& path, std::span<const std::string> names,
                        std::span<const EmpiricalMeasure* const> measures) {
  if (names.size() != measures.size())
    throw Error(ErrorCode::kInvalidArgument, "one column name per measure required");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path);
  out << std::setprecision(17);
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << "\n";
  std::size_t rows = 0;
  for (const auto* m : measures) rows = std::max(rows, m->size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < measures.size(); ++c) {
      if (c) out << ",";
      if (r < measures[c]->size()) out << measures[c]->samples()[r];
    }
    out << "\n";
  }
}

}  // namespace mfpa
