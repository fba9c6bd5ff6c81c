#include "potmde/step_function.hpp"

#include <algorithm>
#include <cmath>

#include "potmde/error.hpp"

namespace potmde {

StepFunction::StepFunction(double head, std::vector<double> breaks, std::vector<double> levels)
    : head_(head), breaks_(std::move(breaks)), levels_(std::move(levels)) {
  if (breaks_.empty()) throw DataError("step function needs at least one breakpoint");
  if (breaks_.size() != levels_.size()) throw DataError("step function: breaks and levels differ in length");
  if (!(head_ >= 0.0 && head_ <= 1.0)) throw DataError("step function: head level must lie in [0, 1]");
  if (levels_.back() != 0.0) throw DataError("step function must vanish beyond its last breakpoint");
  double prev_b = 0.0;
  double prev_v = head_;
  for (std::size_t i = 0; i < breaks_.size(); ++i) {
    if (!(breaks_[i] > prev_b) || !std::isfinite(breaks_[i]))
      throw DataError("step function breakpoints must be finite, positive and strictly increasing");
    if (!(levels_[i] <= prev_v) || levels_[i] < 0.0) throw DataError("step function must be nonincreasing");
    prev_b = breaks_[i];
    prev_v = levels_[i];
  }
}

StepFunction StepFunction::from_excesses(std::span<const double> excesses) {
  if (excesses.empty()) throw DataError("empirical survival of an empty sample");
  std::vector<double> y(excesses.begin(), excesses.end());
  std::sort(y.begin(), y.end());
  if (!(y.front() > 0.0)) throw DataError("excesses must be strictly positive");
  const double k = static_cast<double>(y.size());
  std::vector<double> breaks;
  std::vector<double> levels;
  std::size_t i = 0;
  while (i < y.size()) {
    std::size_t j = i;
    while (j < y.size() && y[j] == y[i]) ++j;
    breaks.push_back(y[i]);
    // count of observations strictly above the break, divided by k
    levels.push_back(static_cast<double>(y.size() - j) / k);
    i = j;
  }
  return StepFunction(1.0, std::move(breaks), std::move(levels));
}

double StepFunction::operator()(double x) const {
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
  if (it == breaks_.begin()) return head_;
  return levels_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
}

double StepFunction::integral() const {
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < breaks_.size(); ++i) {
    acc += level_before(i) * (breaks_[i] - prev);
    prev = breaks_[i];
  }
  return acc;
}

double StepFunction::integral_squared() const {
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < breaks_.size(); ++i) {
    const double v = level_before(i);
    acc += v * v * (breaks_[i] - prev);
    prev = breaks_[i];
  }
  return acc;
}

double StepFunction::second_moment() const {
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < breaks_.size(); ++i) {
    acc += level_before(i) * (breaks_[i] * breaks_[i] - prev * prev);
    prev = breaks_[i];
  }
  return acc;
}

double StepFunction::first_at_or_below(double level) const {
  if (head_ <= level) return 0.0;
  for (std::size_t i = 0; i < breaks_.size(); ++i)
    if (levels_[i] <= level) return breaks_[i];
  return breaks_.back();
}

double StepFunction::first_drop() const {
  for (std::size_t i = 0; i < breaks_.size(); ++i)
    if (levels_[i] < head_) return breaks_[i];
  return breaks_.back();
}

}  // namespace potmde
