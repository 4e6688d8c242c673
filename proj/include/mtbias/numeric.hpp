#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace mtbias {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double compensated_mean(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return xs.empty() ? 0.0 : s.value() / static_cast<double>(xs.size());
}

/// Percentile by linear interpolation between order statistics of a sorted
/// sample: position (n - 1) * pct / 100.
double percentile_sorted(std::span<const double> sorted, double pct);

}  // namespace mtbias
