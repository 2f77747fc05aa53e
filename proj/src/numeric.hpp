#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace propkit::detail {

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline constexpr std::size_t kBlock = 512;

/// Sum of a[i] * b[i]: plain vectorised sums per block, compensated across blocks.
inline double dot(const double* a, const double* b, std::size_t n) {
  CompensatedSum total;
  for (std::size_t start = 0; start < n; start += kBlock) {
    const std::size_t end = start + kBlock < n ? start + kBlock : n;
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t i = start; i < end; ++i) s += a[i] * b[i];
    total.add(s);
  }
  return total.value();
}

/// Sum of a[i] * a[i].
inline double sum_squares(const double* a, std::size_t n) { return dot(a, a, n); }

inline std::int64_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  std::int64_t total = 0;
  constexpr std::size_t kChunk = std::size_t{1} << 24;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t end = start + kChunk < n ? start + kChunk : n;
    std::int32_t acc = 0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = start; i < end; ++i) acc += static_cast<std::int32_t>(a[i]) * b[i];
    total += acc;
  }
  return total;
}

}  // namespace propkit::detail
