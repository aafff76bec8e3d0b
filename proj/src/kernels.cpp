// SPDX-License-Identifier: Apache-2.0
#include "datactl/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace datactl::kernels {

namespace {

struct Dispatch {
  Backend backend;
  QuantizeFn quantize;
  MinMaxFn minmax;
  MomentsFn moments;
  KlTermsFn kl_terms;
  ScaledSqDiffFn scaled_sq_diff;
  AllFiniteFn all_finite;
};

constexpr Dispatch kScalar{Backend::Scalar,   scalar::quantize,
                           scalar::minmax,    scalar::moments,
                           scalar::kl_terms,  scalar::scaled_sq_diff,
                           scalar::all_finite};

#if defined(DATACTL_HAVE_AVX2)
constexpr Dispatch kAvx2{Backend::Avx2,     avx2::quantize,
                         avx2::minmax,      avx2::moments,
                         avx2::kl_terms,    avx2::scaled_sq_diff,
                         avx2::all_finite};

bool host_has_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

Dispatch pick_default() {
#if defined(DATACTL_HAVE_AVX2)
  const char* env = std::getenv("DATACTL_KERNELS");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return kScalar;
  if (host_has_avx2()) return kAvx2;
#endif
  return kScalar;
}

Dispatch g_dispatch = pick_default();

}  // namespace

Backend active_backend() { return g_dispatch.backend; }

const char* backend_name() {
  return g_dispatch.backend == Backend::Avx2 ? "avx2" : "scalar";
}

bool force_backend(Backend b) {
  if (b == Backend::Scalar) {
    g_dispatch = kScalar;
    return true;
  }
#if defined(DATACTL_HAVE_AVX2)
  if (host_has_avx2()) {
    g_dispatch = kAvx2;
    return true;
  }
#endif
  return false;
}

void quantize(const double* v, std::size_t n, double lo, double inv_width,
              std::int32_t n_bins, std::int32_t* idx, std::uint8_t* clamped) {
  g_dispatch.quantize(v, n, lo, inv_width, n_bins, idx, clamped);
}

MinMax minmax(const double* v, std::size_t n) { return g_dispatch.minmax(v, n); }

Moments moments(const double* v, std::size_t n) {
  return g_dispatch.moments(v, n);
}

KlSum kl_terms(const double* p, const double* q, std::size_t n) {
  return g_dispatch.kl_terms(p, q, n);
}

double scaled_sq_diff(const double* a, const double* b, const double* inv_scale,
                      std::size_t n) {
  return g_dispatch.scaled_sq_diff(a, b, inv_scale, n);
}

bool all_finite(const double* v, std::size_t n) {
  return g_dispatch.all_finite(v, n);
}

}  // namespace datactl::kernels
