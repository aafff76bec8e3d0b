// SPDX-License-Identifier: Apache-2.0
#include "datactl/kernels.hpp"

#if defined(DATACTL_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace datactl::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

void quantize(const double* v, std::size_t n, double lo, double inv_width,
              std::int32_t n_bins, std::int32_t* idx, std::uint8_t* clamped) {
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vinv = _mm256_set1_pd(inv_width);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d bins_d = _mm256_set1_pd(static_cast<double>(n_bins));
  const __m256d bins_m1 = _mm256_set1_pd(static_cast<double>(n_bins - 1));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    const __m256d f = _mm256_floor_pd(_mm256_mul_pd(_mm256_sub_pd(x, vlo), vinv));
    const __m256d m_lo = _mm256_cmp_pd(f, zero, _CMP_LT_OQ);
    const __m256d m_hi = _mm256_cmp_pd(f, bins_d, _CMP_GE_OQ);
    const __m256d m_nan = _mm256_cmp_pd(f, f, _CMP_UNORD_Q);
    const int cm = _mm256_movemask_pd(
        _mm256_or_pd(_mm256_or_pd(m_lo, m_hi), m_nan));
    // max/min both return the second operand on NaN, so NaN lanes land on 0.
    const __m256d fc = _mm256_min_pd(_mm256_max_pd(f, zero), bins_m1);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(idx + i),
                     _mm256_cvttpd_epi32(fc));
    clamped[i] = static_cast<std::uint8_t>(cm & 1);
    clamped[i + 1] = static_cast<std::uint8_t>((cm >> 1) & 1);
    clamped[i + 2] = static_cast<std::uint8_t>((cm >> 2) & 1);
    clamped[i + 3] = static_cast<std::uint8_t>((cm >> 3) & 1);
  }
  if (i < n) scalar::quantize(v + i, n - i, lo, inv_width, n_bins, idx + i, clamped + i);
}

MinMax minmax(const double* v, std::size_t n) {
  __m256d vmin = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d vmax = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    vmin = _mm256_min_pd(vmin, x);
    vmax = _mm256_max_pd(vmax, x);
  }
  alignas(32) double mn[4], mx[4];
  _mm256_store_pd(mn, vmin);
  _mm256_store_pd(mx, vmax);
  MinMax r{mn[0], mx[0]};
  for (int k = 1; k < 4; ++k) {
    if (mn[k] < r.min) r.min = mn[k];
    if (mx[k] > r.max) r.max = mx[k];
  }
  for (; i < n; ++i) {
    if (v[i] < r.min) r.min = v[i];
    if (v[i] > r.max) r.max = v[i];
  }
  return r;
}

Moments moments(const double* v, std::size_t n) {
  __m256d s = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    s = _mm256_add_pd(s, x);
    s2 = _mm256_add_pd(s2, _mm256_mul_pd(x, x));
  }
  Moments r{hsum(s), hsum(s2)};
  for (; i < n; ++i) {
    r.sum += v[i];
    r.sum_sq += v[i] * v[i];
  }
  return r;
}

KlSum kl_terms(const double* p, const double* q, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  bool disjoint = false;
  std::size_t i = 0;
  alignas(32) double r[4];
  for (; i + 4 <= n; i += 4) {
    const __m256d vp = _mm256_loadu_pd(p + i);
    const __m256d vq = _mm256_loadu_pd(q + i);
    const __m256d pos = _mm256_cmp_pd(vp, zero, _CMP_GT_OQ);
    const __m256d qz = _mm256_cmp_pd(vq, zero, _CMP_LE_OQ);
    if (_mm256_movemask_pd(_mm256_and_pd(pos, qz))) disjoint = true;
    // p == 0 lanes get ratio 1 so the log term is exactly 0.
    const __m256d ratio =
        _mm256_blendv_pd(one, _mm256_div_pd(vp, vq), pos);
    _mm256_store_pd(r, ratio);
    const __m256d lg =
        _mm256_set_pd(std::log(r[3]), std::log(r[2]), std::log(r[1]), std::log(r[0]));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(vp, lg));
  }
  KlSum out{hsum(acc), disjoint};
  if (i < n) {
    const KlSum tail = scalar::kl_terms(p + i, q + i, n - i);
    out.nats += tail.nats;
    out.disjoint = out.disjoint || tail.disjoint;
  }
  return out;
}

double scaled_sq_diff(const double* a, const double* b, const double* inv_scale,
                      std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_mul_pd(
        _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)),
        _mm256_loadu_pd(inv_scale + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double r = hsum(acc);
  for (; i < n; ++i) {
    const double d = (a[i] - b[i]) * inv_scale[i];
    r += d * d;
  }
  return r;
}

bool all_finite(const double* v, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    const __m256d nan_m = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
    const __m256d abs_x = _mm256_andnot_pd(sign_mask, x);
    const __m256d inf_m = _mm256_cmp_pd(abs_x, inf, _CMP_EQ_OQ);
    if (_mm256_movemask_pd(_mm256_or_pd(nan_m, inf_m))) return false;
  }
  for (; i < n; ++i) {
    if (!std::isfinite(v[i])) return false;
  }
  return true;
}

}  // namespace datactl::kernels::avx2

#endif  // DATACTL_HAVE_AVX2
