#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "cflsim/kernels.hpp"

namespace cflsim::kernels {
namespace {

bool cpu_supports(Variant v) {
  switch (v) {
    case Variant::scalar:
      return true;
    case Variant::avx2:
#if defined(CFLSIM_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Variant::neon:
#if defined(CFLSIM_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* best_available() {
  if (const auto* t = table_for(Variant::avx2)) return t;
  if (const auto* t = table_for(Variant::neon)) return t;
  return &detail::kScalar;
}

const KernelTable* initial_table() {
  const char* env = std::getenv("CFLSIM_KERNELS");
  if (env == nullptr || std::string_view(env).empty() || std::string_view(env) == "auto") {
    return best_available();
  }
  const auto* t = table_for(parse_variant(env));
  if (t == nullptr) {
    throw std::invalid_argument(std::string("CFLSIM_KERNELS: variant not available: ") + env);
  }
  return t;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& scalar_table() { return detail::kScalar; }

const KernelTable* table_for(Variant v) {
  if (!cpu_supports(v)) return nullptr;
  switch (v) {
    case Variant::scalar:
      return &detail::kScalar;
    case Variant::avx2:
#if defined(CFLSIM_HAVE_AVX2)
      return &detail::kAvx2;
#else
      return nullptr;
#endif
    case Variant::neon:
#if defined(CFLSIM_HAVE_NEON)
      return &detail::kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

std::vector<Variant> available_variants() {
  std::vector<Variant> out;
  for (Variant v : {Variant::scalar, Variant::avx2, Variant::neon}) {
    if (table_for(v) != nullptr) out.push_back(v);
  }
  return out;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(Variant v) {
  const auto* t = table_for(v);
  if (t == nullptr) {
    throw std::invalid_argument("kernel variant not available: " + std::string(variant_name(v)));
  }
  active_slot().store(t, std::memory_order_release);
}

Variant parse_variant(std::string_view name) {
  if (name == "scalar") return Variant::scalar;
  if (name == "avx2") return Variant::avx2;
  if (name == "neon") return Variant::neon;
  throw std::invalid_argument("unknown kernel variant: " + std::string(name));
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::scalar:
      return "scalar";
    case Variant::avx2:
      return "avx2";
    case Variant::neon:
      return "neon";
  }
  return "unknown";
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> x) { return dot(x, x); }

double norm(std::span<const double> x) { return std::sqrt(squared_norm(x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

void sub(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && a.size() == out.size());
  active().sub(a.data(), b.data(), out.data(), a.size());
}

}  // namespace cflsim::kernels
