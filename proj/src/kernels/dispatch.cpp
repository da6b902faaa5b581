#include <atomic>
#include <cstdlib>
#include <string>

#include "lovm/error.hpp"
#include "lovm/kernels.hpp"

namespace lovm::kernels {

namespace {

struct FnTable {
  double (*dot)(const float*, const float*, std::size_t) noexcept;
  double (*squared_norm)(const float*, std::size_t) noexcept;
  double (*squared_distance)(const float*, const float*, std::size_t) noexcept;
};

constexpr FnTable kScalar{&scalar::dot, &scalar::squared_norm, &scalar::squared_distance};
#if defined(__x86_64__) || defined(_M_X64)
constexpr FnTable kAvx2{&avx2::dot, &avx2::squared_norm, &avx2::squared_distance};
#endif
#if defined(__aarch64__)
constexpr FnTable kNeon{&neon::dot, &neon::squared_norm, &neon::squared_distance};
#endif

const FnTable& table_for(Backend b) noexcept {
  switch (b) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::Avx2:
      return kAvx2;
#endif
#if defined(__aarch64__)
    case Backend::Neon:
      return kNeon;
#endif
    default:
      return kScalar;
  }
}

Backend detect() noexcept {
  if (const char* env = std::getenv("LOVM_KERNEL")) {
    const std::string want(env);
    if (want == "scalar") return Backend::Scalar;
    if (want == "avx2" && backend_available(Backend::Avx2)) return Backend::Avx2;
    if (want == "neon" && backend_available(Backend::Neon)) return Backend::Neon;
  }
  if (backend_available(Backend::Avx2)) return Backend::Avx2;
  if (backend_available(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) {
    fail(ErrorKind::DimensionMismatch,
         "vector length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    fail(ErrorKind::InvalidArgument,
         "kernel backend not available on this CPU: " + std::string(backend_name(b)));
  }
  current().store(b, std::memory_order_relaxed);
}

double dot(std::span<const float> a, std::span<const float> b) {
  check_sizes(a.size(), b.size());
  return table_for(active_backend()).dot(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const float> a) {
  return table_for(active_backend()).squared_norm(a.data(), a.size());
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  check_sizes(a.size(), b.size());
  return table_for(active_backend()).squared_distance(a.data(), b.data(), a.size());
}

}  // namespace lovm::kernels
