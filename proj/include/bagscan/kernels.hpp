#pragma once

// Dense-table arithmetic shared by the factor-graph, LBP and junction-tree
// code. Tables hold one double per assignment of a list of binary variables;
// bit k of the index is the state of the k-th variable. Bit-indexed kernels
// expect power-of-two lengths.
//
// Every kernel has a scalar reference implementation. SIMD variants (AVX2 on
// x86-64, NEON on AArch64) are selected once at startup from CPU features;
// BAGSCAN_ISA=scalar|avx2|neon overrides the choice. Element-wise kernels
// produce bit-identical results across variants; reductions agree to
// rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace bagscan::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  // t[i] *= (bit of i clear ? w0 : w1)
  void (*scale_by_bit)(double* t, std::size_t n, unsigned bit, double w0, double w1);
  // out has n/2 entries; out[j] = in[j with 0 inserted at bit] + in[j with 1 inserted]
  void (*sum_out_bit)(const double* in, std::size_t n, unsigned bit, double* out);
  // out[s] = sum of t[i] over i whose bit equals s
  void (*bit_marginal)(const double* t, std::size_t n, unsigned bit, double* out);
  // t[i] *= msg[low[i & (2^low_bits - 1)] + high[i >> low_bits]]
  void (*multiply_projected)(double* t, std::size_t n, const double* msg,
                             const std::uint32_t* low, const std::uint32_t* high,
                             unsigned low_bits);
  void (*multiply)(double* a, const double* b, std::size_t n);
  void (*scale)(double* t, std::size_t n, double factor);
  double (*sum)(const double* t, std::size_t n);
  double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
  double (*sum_abs_diff)(const double* a, const double* b, std::size_t n);
  double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
  // dst[i] = (1 - alpha) * dst[i] + alpha * old[i]
  void (*blend)(double* dst, const double* old, std::size_t n, double alpha);
};

const KernelTable& scalar_kernels() noexcept;
// nullptr when the variant is not compiled in or the CPU lacks support.
const KernelTable* simd_kernels(Isa isa) noexcept;
bool cpu_supports(Isa isa) noexcept;

const KernelTable& active() noexcept;
// Throws invalid-argument when the variant is unavailable on this host.
void select(Isa isa);

// Maps an index over `source` variables to an index over a subset or
// re-ordering of them. Split into two lookup tables so that the cost stays
// 2^10 + 2^(s-10) entries for wide tables.
class IndexProjection {
 public:
  IndexProjection() = default;
  // target_bit[b] is the destination bit of source bit b, or -1 to drop it.
  explicit IndexProjection(std::span<const int> target_bit);

  std::uint32_t operator()(std::size_t index) const noexcept {
    return low_[index & low_mask_] + high_[index >> low_bits_];
  }
  unsigned source_bits() const noexcept { return source_bits_; }
  const std::uint32_t* low() const noexcept { return low_.data(); }
  const std::uint32_t* high() const noexcept { return high_.data(); }
  unsigned low_bits() const noexcept { return low_bits_; }

 private:
  std::vector<std::uint32_t> low_;
  std::vector<std::uint32_t> high_;
  unsigned source_bits_ = 0;
  unsigned low_bits_ = 0;
  std::size_t low_mask_ = 0;
};

// Span front-ends over the active table.
void scale_by_bit(std::span<double> t, unsigned bit, double w0, double w1);
void sum_out_bit(std::span<const double> in, unsigned bit, std::span<double> out);
std::pair<double, double> bit_marginal(std::span<const double> t, unsigned bit);
void multiply_projected(std::span<double> t, std::span<const double> msg,
                        const IndexProjection& projection);
void multiply(std::span<double> a, std::span<const double> b);
void scale(std::span<double> t, double factor);
double sum(std::span<const double> t);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double sum_abs_diff(std::span<const double> a, std::span<const double> b);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
void blend(std::span<double> dst, std::span<const double> old, double alpha);

}  // namespace bagscan::kernels
