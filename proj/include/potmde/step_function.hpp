#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace potmde {

/// Right-continuous, nonincreasing step function on [0, inf) that vanishes
/// beyond its last breakpoint:
///
///   T(x) = head            for 0 <= x < breaks[0]
///   T(x) = levels[i]       for breaks[i] <= x < breaks[i+1]
///   T(x) = levels.back()   == 0 beyond the last break
///
/// Empirical survival functions of exceedances and count ratios of event
/// curves are both represented this way.
class StepFunction {
 public:
  StepFunction(double head, std::vector<double> breaks, std::vector<double> levels);

  /// Empirical survival (1/k) sum 1(y_j > x) of strictly positive observations.
  static StepFunction from_excesses(std::span<const double> excesses);

  double operator()(double x) const;

  double head() const { return head_; }
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& levels() const { return levels_; }
  std::size_t size() const { return breaks_.size(); }

  /// Level on the segment starting at breaks[i-1] (i = 0 is the head segment).
  double level_before(std::size_t i) const { return i == 0 ? head_ : levels_[i - 1]; }

  /// Drop at breaks[i]: level_before(i) - levels[i].
  double jump(std::size_t i) const { return level_before(i) - levels_[i]; }

  /// Integral of T over [0, inf) (the mean when T is a survival function).
  double integral() const;
  /// Integral of T^2 over [0, inf).
  double integral_squared() const;
  /// Integral of 2 x T(x) over [0, inf) (the second moment when head == 1).
  double second_moment() const;
  /// Smallest x with T(x) <= level.
  double first_at_or_below(double level) const;
  /// First breakpoint where the level falls below the head level.
  double first_drop() const;

 private:
  double head_;
  std::vector<double> breaks_;
  std::vector<double> levels_;
};

}  // namespace potmde
