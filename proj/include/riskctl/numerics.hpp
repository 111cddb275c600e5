#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace riskctl {

// log sum_i exp(a_i), shifted by max(a). Returns -inf for an empty input.
inline double log_sum_exp(std::span<const double> a) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

// log sum_i w_i exp(a_i) over entries with w_i > 0; zero-weight entries are
// dropped before any log is taken.
inline double weighted_log_sum_exp(std::span<const double> w, std::span<const double> a) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (w[i] > 0.0) m = std::max(m, a[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (w[i] > 0.0) s += w[i] * std::exp(a[i] - m);
  return m + std::log(s);
}

// Streaming log-sum-exp: add log-terms one at a time.
class LogSumExpAccumulator {
 public:
  void add(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term > max_) {
      sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    } else {
      sum_ += std::exp(log_term - max_);
    }
  }
  double value() const { return sum_ > 0.0 ? max_ + std::log(sum_) : -std::numeric_limits<double>::infinity(); }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

}  // namespace riskctl
