#include "kernels_impl.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#define BAGSCAN_AVX2 __attribute__((target("avx2")))

namespace bagscan::kernels::detail {

namespace {

BAGSCAN_AVX2 double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

BAGSCAN_AVX2 double horizontal_max(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

BAGSCAN_AVX2 __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

BAGSCAN_AVX2 void scale_by_bit(double* t, std::size_t n, unsigned bit, double w0, double w1) {
  if (n < 4) {
    scale_by_bit_scalar(t, n, bit, w0, w1);
    return;
  }
  if (bit >= 2) {
    const std::size_t block = std::size_t{1} << bit;
    const __m256d v0 = _mm256_set1_pd(w0);
    const __m256d v1 = _mm256_set1_pd(w1);
    for (std::size_t base = 0; base < n; base += 2 * block) {
      double* lo = t + base;
      double* hi = lo + block;
      for (std::size_t j = 0; j < block; j += 4) {
        _mm256_storeu_pd(lo + j, _mm256_mul_pd(_mm256_loadu_pd(lo + j), v0));
        _mm256_storeu_pd(hi + j, _mm256_mul_pd(_mm256_loadu_pd(hi + j), v1));
      }
    }
    return;
  }
  // _mm256_set_pd lists lanes high to low.
  const __m256d pattern = bit == 0 ? _mm256_set_pd(w1, w0, w1, w0) : _mm256_set_pd(w1, w1, w0, w0);
  for (std::size_t i = 0; i < n; i += 4) {
    _mm256_storeu_pd(t + i, _mm256_mul_pd(_mm256_loadu_pd(t + i), pattern));
  }
}

BAGSCAN_AVX2 void sum_out_bit(const double* in, std::size_t n, unsigned bit, double* out) {
  if (n < 8) {
    sum_out_bit_scalar(in, n, bit, out);
    return;
  }
  if (bit >= 2) {
    const std::size_t block = std::size_t{1} << bit;
    for (std::size_t base = 0; base < n; base += 2 * block) {
      double* dst = out + base / 2;
      const double* lo = in + base;
      const double* hi = lo + block;
      for (std::size_t j = 0; j < block; j += 4) {
        _mm256_storeu_pd(dst + j, _mm256_add_pd(_mm256_loadu_pd(lo + j), _mm256_loadu_pd(hi + j)));
      }
    }
    return;
  }
  for (std::size_t i = 0; i < n; i += 8) {
    const __m256d a = _mm256_loadu_pd(in + i);
    const __m256d b = _mm256_loadu_pd(in + i + 4);
    __m256d r;
    if (bit == 0) {
      // hadd yields (a0+a1, b0+b1, a2+a3, b2+b3); reorder lanes to 0,2,1,3.
      r = _mm256_permute4x64_pd(_mm256_hadd_pd(a, b), 0xD8);
    } else {
      const __m256d lo = _mm256_permute2f128_pd(a, b, 0x20);
      const __m256d hi = _mm256_permute2f128_pd(a, b, 0x31);
      r = _mm256_add_pd(lo, hi);
    }
    _mm256_storeu_pd(out + i / 2, r);
  }
}

BAGSCAN_AVX2 void bit_marginal(const double* t, std::size_t n, unsigned bit, double* out) {
  if (n < 8) {
    bit_marginal_scalar(t, n, bit, out);
    return;
  }
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  if (bit >= 2) {
    const std::size_t block = std::size_t{1} << bit;
    for (std::size_t base = 0; base < n; base += 2 * block) {
      const double* lo = t + base;
      const double* hi = lo + block;
      for (std::size_t j = 0; j < block; j += 4) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(lo + j));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(hi + j));
      }
    }
    out[0] = horizontal_sum(acc0);
    out[1] = horizontal_sum(acc1);
    return;
  }
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(t + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  if (bit == 0) {
    out[0] = lanes[0] + lanes[2];
    out[1] = lanes[1] + lanes[3];
  } else {
    out[0] = lanes[0] + lanes[1];
    out[1] = lanes[2] + lanes[3];
  }
}

BAGSCAN_AVX2 void multiply_projected(double* t, std::size_t n, const double* msg,
                                     const std::uint32_t* low, const std::uint32_t* high,
                                     unsigned low_bits) {
  if (low_bits < 2 || n < 4) {
    multiply_projected_scalar(t, n, msg, low, high, low_bits);
    return;
  }
  const std::size_t mask = (std::size_t{1} << low_bits) - 1;
  for (std::size_t i = 0; i < n; i += 4) {
    const __m128i offsets = _mm_loadu_si128(reinterpret_cast<const __m128i*>(low + (i & mask)));
    const __m128i index =
        _mm_add_epi32(offsets, _mm_set1_epi32(static_cast<int>(high[i >> low_bits])));
    const __m256d gathered = _mm256_i32gather_pd(msg, index, 8);
    _mm256_storeu_pd(t + i, _mm256_mul_pd(_mm256_loadu_pd(t + i), gathered));
  }
}

BAGSCAN_AVX2 void multiply(double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(a + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) a[i] *= b[i];
}

BAGSCAN_AVX2 void scale(double* t, std::size_t n, double factor) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(t + i, _mm256_mul_pd(_mm256_loadu_pd(t + i), f));
  for (; i < n; ++i) t[i] *= factor;
}

BAGSCAN_AVX2 double sum(const double* t, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(t + i));
  double total = horizontal_sum(acc);
  for (; i < n; ++i) total += t[i];
  return total;
}

BAGSCAN_AVX2 double max_abs_diff(const double* a, const double* b, std::size_t n) {
  __m256d best = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    best = _mm256_max_pd(best, abs_pd(d));
  }
  double result = horizontal_max(best);
  for (; i < n; ++i) {
    const double d = a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
    if (d > result) result = d;
  }
  return result;
}

BAGSCAN_AVX2 double sum_abs_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, abs_pd(d));
  }
  double total = horizontal_sum(acc);
  for (; i < n; ++i) total += a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
  return total;
}

BAGSCAN_AVX2 double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double total = horizontal_sum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

BAGSCAN_AVX2 void blend(double* dst, const double* old, std::size_t n, double alpha) {
  const double keep_scalar = 1.0 - alpha;
  const __m256d keep = _mm256_set1_pd(keep_scalar);
  const __m256d mix = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_mul_pd(keep, _mm256_loadu_pd(dst + i));
    const __m256d b = _mm256_mul_pd(mix, _mm256_loadu_pd(old + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(a, b));
  }
  for (; i < n; ++i) dst[i] = keep_scalar * dst[i] + alpha * old[i];
}

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const KernelTable table{
      Isa::Avx2,   scale_by_bit, sum_out_bit,  bit_marginal, multiply_projected, multiply,
      scale,       sum,          max_abs_diff, sum_abs_diff, sum_sq_diff,        blend,
  };
  return &table;
}

}  // namespace bagscan::kernels::detail

#else

namespace bagscan::kernels::detail {
const KernelTable* avx2_table() noexcept { return nullptr; }
}  // namespace bagscan::kernels::detail

#endif
