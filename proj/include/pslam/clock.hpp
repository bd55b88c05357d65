#pragma once

#include <chrono>
#include <cstdint>

namespace pslam {

/// Time source for compression budgets. The wall clock is the production
/// source; the workload clock advances by a fixed cost per pixel touched,
/// which makes budgeted runs reproducible for benchmarking.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  /// Reported by compress for every pixel it walks; wall clocks ignore it.
  virtual void charge_pixels(std::int64_t) {}
};

class WallClock final : public Clock {
 public:
  WallClock() : epoch_(std::chrono::steady_clock::now()) {}
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         epoch_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point epoch_;
};

/// Deterministic clock: one pixel costs a fixed number of seconds
/// (default 100 ns, roughly one 640x480 frame pass per 30 ms).
class WorkloadClock final : public Clock {
 public:
  explicit WorkloadClock(double seconds_per_pixel = 100e-9)
      : cost_(seconds_per_pixel) {}
  double now() const override { return t_; }
  void charge_pixels(std::int64_t n) override { t_ += cost_ * double(n); }

 private:
  double cost_;
  double t_ = 0.0;
};

}  // namespace pslam
