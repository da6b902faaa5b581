#pragma once
// Vector kernels used by every similarity computation.
//
// Each kernel has a portable scalar reference implementation and, where the
// CPU supports it, a SIMD variant (AVX2+FMA on x86-64, NEON on aarch64). The
// active backend is picked once at startup from the CPU feature bits and can
// be pinned with LOVM_KERNEL=scalar|avx2|neon or set_backend().
//
// Inputs are float32 (the storage precision); accumulation is always double.

#include <cstddef>
#include <span>
#include <string_view>

namespace lovm::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b) noexcept;

bool backend_available(Backend b) noexcept;

Backend active_backend() noexcept;

// Throws LovmError(InvalidArgument) when the backend is unavailable here.
void set_backend(Backend b);

double dot(std::span<const float> a, std::span<const float> b);
double squared_norm(std::span<const float> a);
double squared_distance(std::span<const float> a, std::span<const float> b);

namespace scalar {
double dot(const float* a, const float* b, std::size_t n) noexcept;
double squared_norm(const float* a, std::size_t n) noexcept;
double squared_distance(const float* a, const float* b, std::size_t n) noexcept;
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const float* a, const float* b, std::size_t n) noexcept;
double squared_norm(const float* a, std::size_t n) noexcept;
double squared_distance(const float* a, const float* b, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const float* a, const float* b, std::size_t n) noexcept;
double squared_norm(const float* a, std::size_t n) noexcept;
double squared_distance(const float* a, const float* b, std::size_t n) noexcept;
}  // namespace neon
#endif

}  // namespace lovm::kernels
