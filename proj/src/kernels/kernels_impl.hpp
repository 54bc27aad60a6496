#pragma once

#include "bagscan/kernels.hpp"

namespace bagscan::kernels::detail {

// Scalar reference routines, also used by SIMD variants for short tails.
void scale_by_bit_scalar(double* t, std::size_t n, unsigned bit, double w0, double w1);
void sum_out_bit_scalar(const double* in, std::size_t n, unsigned bit, double* out);
void bit_marginal_scalar(const double* t, std::size_t n, unsigned bit, double* out);
void multiply_projected_scalar(double* t, std::size_t n, const double* msg,
                               const std::uint32_t* low, const std::uint32_t* high,
                               unsigned low_bits);

// Each returns nullptr when the variant is not built for this target.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

}  // namespace bagscan::kernels::detail
