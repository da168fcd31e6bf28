#pragma once

// Dense double-precision vector kernels used by the learner and clusterer.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, a SIMD variant (AVX2 on x86-64, NEON on AArch64). The active
// variant is picked once at startup from CPU features and can be forced with
// the CFLSIM_KERNELS environment variable ("scalar", "avx2", "neon", "auto").
//
// Elementwise kernels (axpy, scale, sub) are bit-identical across variants.
// dot() uses a fixed lane-blocked summation order per variant, so results are
// reproducible for a given variant but may differ from the scalar reference
// in the last few ulps.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace cflsim::kernels {

enum class Variant { scalar, avx2, neon };

struct KernelTable {
  Variant variant;
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // out = a - b
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant is not compiled in or not supported by this CPU.
const KernelTable* table_for(Variant v);
std::vector<Variant> available_variants();

const KernelTable& active();
// Throws std::invalid_argument if the variant is unavailable.
void set_active(Variant v);
Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> x);
double norm(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
void sub(std::span<const double> a, std::span<const double> b, std::span<double> out);

namespace detail {
extern const KernelTable kScalar;
#if defined(CFLSIM_HAVE_AVX2)
extern const KernelTable kAvx2;
#endif
#if defined(CFLSIM_HAVE_NEON)
extern const KernelTable kNeon;
#endif
}  // namespace detail

}  // namespace cflsim::kernels
