#include <cstdlib>
#include <string>

#include "bagscan/error.hpp"
#include "kernels_impl.hpp"

namespace bagscan::kernels {

namespace {

const KernelTable* detect() {
  if (const char* forced = std::getenv("BAGSCAN_ISA")) {
    const std::string name(forced);
    if (name == "scalar") return &scalar_kernels();
    if (name == "avx2" && simd_kernels(Isa::Avx2)) return simd_kernels(Isa::Avx2);
    if (name == "neon" && simd_kernels(Isa::Neon)) return simd_kernels(Isa::Neon);
  }
  if (const KernelTable* table = simd_kernels(Isa::Avx2)) return table;
  if (const KernelTable* table = simd_kernels(Isa::Neon)) return table;
  return &scalar_kernels();
}

const KernelTable*& current() {
  static const KernelTable* table = detect();
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* simd_kernels(Isa isa) noexcept {
  if (!cpu_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::Scalar: return &scalar_kernels();
    case Isa::Avx2: return detail::avx2_table();
    case Isa::Neon: return detail::neon_table();
  }
  return nullptr;
}

const KernelTable& active() noexcept { return *current(); }

void select(Isa isa) {
  const KernelTable* table = simd_kernels(isa);
  if (!table) {
    throw Error(ErrorKind::InvalidArgument,
                "kernel variant " + std::string(to_string(isa)) + " unavailable on this host");
  }
  current() = table;
}

IndexProjection::IndexProjection(std::span<const int> target_bit)
    : source_bits_(static_cast<unsigned>(target_bit.size())) {
  low_bits_ = source_bits_ < 10 ? source_bits_ : 10;
  low_mask_ = (std::size_t{1} << low_bits_) - 1;
  const auto weight = [&](unsigned b) -> std::uint32_t {
    return target_bit[b] < 0 ? 0U : (std::uint32_t{1} << target_bit[b]);
  };
  low_.assign(std::size_t{1} << low_bits_, 0);
  for (std::size_t j = 1; j < low_.size(); ++j) {
    const unsigned b = static_cast<unsigned>(__builtin_ctzll(j));
    low_[j] = low_[j & (j - 1)] + weight(b);
  }
  high_.assign(std::size_t{1} << (source_bits_ - low_bits_), 0);
  for (std::size_t j = 1; j < high_.size(); ++j) {
    const unsigned b = static_cast<unsigned>(__builtin_ctzll(j));
    high_[j] = high_[j & (j - 1)] + weight(low_bits_ + b);
  }
}

void scale_by_bit(std::span<double> t, unsigned bit, double w0, double w1) {
  active().scale_by_bit(t.data(), t.size(), bit, w0, w1);
}

void sum_out_bit(std::span<const double> in, unsigned bit, std::span<double> out) {
  active().sum_out_bit(in.data(), in.size(), bit, out.data());
}

std::pair<double, double> bit_marginal(std::span<const double> t, unsigned bit) {
  double out[2];
  active().bit_marginal(t.data(), t.size(), bit, out);
  return {out[0], out[1]};
}

void multiply_projected(std::span<double> t, std::span<const double> msg,
                        const IndexProjection& projection) {
  active().multiply_projected(t.data(), t.size(), msg.data(), projection.low(),
                              projection.high(), projection.low_bits());
}

void multiply(std::span<double> a, std::span<const double> b) {
  active().multiply(a.data(), b.data(), a.size());
}

void scale(std::span<double> t, double factor) { active().scale(t.data(), t.size(), factor); }

double sum(std::span<const double> t) { return active().sum(t.data(), t.size()); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  return active().max_abs_diff(a.data(), b.data(), a.size());
}

double sum_abs_diff(std::span<const double> a, std::span<const double> b) {
  return active().sum_abs_diff(a.data(), b.data(), a.size());
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  return active().sum_sq_diff(a.data(), b.data(), a.size());
}

void blend(std::span<double> dst, std::span<const double> old, double alpha) {
  active().blend(dst.data(), old.data(), dst.size(), alpha);
}

}  // namespace bagscan::kernels
