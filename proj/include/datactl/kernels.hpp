// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops shared by the estimators. The scalar namespace is
// the reference semantics; vector variants must produce bit-identical integer
// outputs and floating-point sums within reassociation tolerance. The active
// variant is picked once at startup from CPU features and can be overridden
// with DATACTL_KERNELS=scalar|avx2 (or force_backend in tests).
namespace datactl::kernels {

struct MinMax {
  double min;
  double max;
};

struct Moments {
  double sum;
  double sum_sq;
};

struct KlSum {
  double nats;
  bool disjoint;  // some p[i] > 0 has q[i] == 0
};

// Bin-index quantization for equal-width edges. idx[i] = clamp(floor((v[i] -
// lo) * inv_width), 0, n_bins-1); clamped[i] = 1 when the raw index fell
// outside [0, n_bins) or v[i] was not finite (then idx[i] = 0).
using QuantizeFn = void (*)(const double* v, std::size_t n, double lo,
                            double inv_width, std::int32_t n_bins,
                            std::int32_t* idx, std::uint8_t* clamped);
// Finite inputs only.
using MinMaxFn = MinMax (*)(const double* v, std::size_t n);
using MomentsFn = Moments (*)(const double* v, std::size_t n);
// Sum of p[i]*ln(p[i]/q[i]) with 0*ln(0/q) = 0. Entries must be >= 0.
using KlTermsFn = KlSum (*)(const double* p, const double* q, std::size_t n);
// Sum of ((a[i]-b[i]) * inv_scale[i])^2.
using ScaledSqDiffFn = double (*)(const double* a, const double* b,
                                  const double* inv_scale, std::size_t n);
using AllFiniteFn = bool (*)(const double* v, std::size_t n);

namespace scalar {
void quantize(const double* v, std::size_t n, double lo, double inv_width,
              std::int32_t n_bins, std::int32_t* idx, std::uint8_t* clamped);
MinMax minmax(const double* v, std::size_t n);
Moments moments(const double* v, std::size_t n);
KlSum kl_terms(const double* p, const double* q, std::size_t n);
double scaled_sq_diff(const double* a, const double* b,
                      const double* inv_scale, std::size_t n);
bool all_finite(const double* v, std::size_t n);
}  // namespace scalar

#if defined(DATACTL_HAVE_AVX2)
namespace avx2 {
void quantize(const double* v, std::size_t n, double lo, double inv_width,
              std::int32_t n_bins, std::int32_t* idx, std::uint8_t* clamped);
MinMax minmax(const double* v, std::size_t n);
Moments moments(const double* v, std::size_t n);
KlSum kl_terms(const double* p, const double* q, std::size_t n);
double scaled_sq_diff(const double* a, const double* b,
                      const double* inv_scale, std::size_t n);
bool all_finite(const double* v, std::size_t n);
}  // namespace avx2
#endif

enum class Backend { Scalar, Avx2 };

Backend active_backend();
const char* backend_name();
// Returns false if the requested backend is unavailable on this host.
bool force_backend(Backend b);

// Dispatched entry points.
void quantize(const double* v, std::size_t n, double lo, double inv_width,
              std::int32_t n_bins, std::int32_t* idx, std::uint8_t* clamped);
MinMax minmax(const double* v, std::size_t n);
Moments moments(const double* v, std::size_t n);
KlSum kl_terms(const double* p, const double* q, std::size_t n);
double scaled_sq_diff(const double* a, const double* b,
                      const double* inv_scale, std::size_t n);
bool all_finite(const double* v, std::size_t n);

}  // namespace datactl::kernels
