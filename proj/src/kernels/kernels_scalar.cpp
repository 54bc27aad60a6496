#include <cmath>

#include "kernels_impl.hpp"

namespace bagscan::kernels::detail {

void scale_by_bit_scalar(double* t, std::size_t n, unsigned bit, double w0, double w1) {
  for (std::size_t i = 0; i < n; ++i) t[i] *= ((i >> bit) & 1U) ? w1 : w0;
}

void sum_out_bit_scalar(const double* in, std::size_t n, unsigned bit, double* out) {
  const std::size_t block = std::size_t{1} << bit;
  for (std::size_t base = 0; base < n; base += 2 * block) {
    double* dst = out + base / 2;
    const double* lo = in + base;
    const double* hi = lo + block;
    for (std::size_t j = 0; j < block; ++j) dst[j] = lo[j] + hi[j];
  }
}

void bit_marginal_scalar(const double* t, std::size_t n, unsigned bit, double* out) {
  double acc[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) acc[(i >> bit) & 1U] += t[i];
  out[0] = acc[0];
  out[1] = acc[1];
}

void multiply_projected_scalar(double* t, std::size_t n, const double* msg,
                               const std::uint32_t* low, const std::uint32_t* high,
                               unsigned low_bits) {
  const std::size_t mask = (std::size_t{1} << low_bits) - 1;
  for (std::size_t i = 0; i < n; ++i) t[i] *= msg[low[i & mask] + high[i >> low_bits]];
}

namespace {

void multiply(double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
}

void scale(double* t, std::size_t n, double factor) {
  for (std::size_t i = 0; i < n; ++i) t[i] *= factor;
}

double sum(const double* t, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += t[i];
  return acc;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) best = std::fmax(best, std::fabs(a[i] - b[i]));
  return best;
}

double sum_abs_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void blend(double* dst, const double* old, std::size_t n, double alpha) {
  const double keep = 1.0 - alpha;
  for (std::size_t i = 0; i < n; ++i) dst[i] = keep * dst[i] + alpha * old[i];
}

}  // namespace

}  // namespace bagscan::kernels::detail

namespace bagscan::kernels {

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{
      Isa::Scalar,
      detail::scale_by_bit_scalar,
      detail::sum_out_bit_scalar,
      detail::bit_marginal_scalar,
      detail::multiply_projected_scalar,
      detail::multiply,
      detail::scale,
      detail::sum,
      detail::max_abs_diff,
      detail::sum_abs_diff,
      detail::sum_sq_diff,
      detail::blend,
  };
  return table;
}

}  // namespace bagscan::kernels
