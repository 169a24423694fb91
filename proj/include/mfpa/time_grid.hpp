#pragma once

#include <cstddef>

#include "mfpa/errors.hpp"

namespace mfpa {

/// Uniform time discretization of [0, horizon] with nodes t_k = k * dt.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time grid horizon must be > 0");
    if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "time grid needs at least one step");
  }

  double horizon() const { return horizon_; }
  std::size_t steps() const { return steps_; }
  std::size_t nodes() const { return steps_ + 1; }
  double dt() const { return horizon_ / static_cast<double>(steps_); }
  double time(std::size_t k) const {
    return k == steps_ ? horizon_ : horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
  }

 private:
  double horizon_;
  std::size_t steps_;
};

}  // namespace mfpa
