#include "kernels_impl.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace bagscan::kernels::detail {

namespace {

void scale_by_bit(double* t, std::size_t n, unsigned bit, double w0, double w1) {
  if (bit == 0 || n < 2) {
    scale_by_bit_scalar(t, n, bit, w0, w1);
    return;
  }
  const std::size_t block = std::size_t{1} << bit;
  const float64x2_t v0 = vdupq_n_f64(w0);
  const float64x2_t v1 = vdupq_n_f64(w1);
  for (std::size_t base = 0; base < n; base += 2 * block) {
    double* lo = t + base;
    double* hi = lo + block;
    for (std::size_t j = 0; j < block; j += 2) {
      vst1q_f64(lo + j, vmulq_f64(vld1q_f64(lo + j), v0));
      vst1q_f64(hi + j, vmulq_f64(vld1q_f64(hi + j), v1));
    }
  }
}

void sum_out_bit(const double* in, std::size_t n, unsigned bit, double* out) {
  if (n < 4) {
    sum_out_bit_scalar(in, n, bit, out);
    return;
  }
  if (bit == 0) {
    for (std::size_t i = 0; i < n; i += 4) {
      vst1q_f64(out + i / 2, vpaddq_f64(vld1q_f64(in + i), vld1q_f64(in + i + 2)));
    }
    return;
  }
  const std::size_t block = std::size_t{1} << bit;
  for (std::size_t base = 0; base < n; base += 2 * block) {
    double* dst = out + base / 2;
    const double* lo = in + base;
    const double* hi = lo + block;
    for (std::size_t j = 0; j < block; j += 2) {
      vst1q_f64(dst + j, vaddq_f64(vld1q_f64(lo + j), vld1q_f64(hi + j)));
    }
  }
}

void multiply(double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(a + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) a[i] *= b[i];
}

void scale(double* t, std::size_t n, double factor) {
  const float64x2_t f = vdupq_n_f64(factor);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(t + i, vmulq_f64(vld1q_f64(t + i), f));
  for (; i < n; ++i) t[i] *= factor;
}

double sum(const double* t, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(t + i));
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) total += t[i];
  return total;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
  float64x2_t best = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    best = vmaxq_f64(best, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  double result = vmaxvq_f64(best);
  for (; i < n; ++i) {
    const double d = a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
    if (d > result) result = d;
  }
  return result;
}

double sum_abs_diff(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) total += a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
  return total;
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vaddq_f64(acc, vmulq_f64(d, d));
  }
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

void blend(double* dst, const double* old, std::size_t n, double alpha) {
  const double keep_scalar = 1.0 - alpha;
  const float64x2_t keep = vdupq_n_f64(keep_scalar);
  const float64x2_t mix = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // Separate multiply and add keep results identical to the scalar path.
    const float64x2_t a = vmulq_f64(keep, vld1q_f64(dst + i));
    const float64x2_t b = vmulq_f64(mix, vld1q_f64(old + i));
    vst1q_f64(dst + i, vaddq_f64(a, b));
  }
  for (; i < n; ++i) dst[i] = keep_scalar * dst[i] + alpha * old[i];
}

}  // namespace

const KernelTable* neon_table() noexcept {
  static const KernelTable table{
      Isa::Neon,
      scale_by_bit,
      sum_out_bit,
      bit_marginal_scalar,
      multiply_projected_scalar,
      multiply,
      scale,
      sum,
      max_abs_diff,
      sum_abs_diff,
      sum_sq_diff,
      blend,
  };
  return &table;
}

}  // namespace bagscan::kernels::detail

#else

namespace bagscan::kernels::detail {
const KernelTable* neon_table() noexcept { return nullptr; }
}  // namespace bagscan::kernels::detail

#endif
