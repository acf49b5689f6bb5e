#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace nh {

// Compensated (Kahan) accumulator for long sums of similar-magnitude terms.
class KahanSum {
  public:
    void add(double v) {
        const double y = v - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }
    void reset() { sum_ = 0.0; comp_ = 0.0; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow; tolerates -inf operands.
inline double logaddexp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Streaming log-sum-exp: tracks the running maximum and rescales the
// compensated partial sum when a larger term arrives.
class LogSumExp {
  public:
    void add(double log_term) {
        if (log_term == kNegInf) return;
        if (log_term > max_) {
            if (max_ != kNegInf) {
                const double scaled = sum_.value() * std::exp(max_ - log_term);
                sum_.reset();
                sum_.add(scaled);
            }
            max_ = log_term;
            sum_.add(1.0);
        } else {
            sum_.add(std::exp(log_term - max_));
        }
    }
    bool empty() const { return max_ == kNegInf; }
    double log_value() const {
        if (max_ == kNegInf) return kNegInf;
        return max_ + std::log(sum_.value());
    }

  private:
    double max_ = kNegInf;
    KahanSum sum_;
};

}  // namespace nh
