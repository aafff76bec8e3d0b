// SPDX-License-Identifier: Apache-2.0
#include "datactl/kernels.hpp"

#include <cmath>
#include <limits>

namespace datactl::kernels::scalar {

void quantize(const double* v, std::size_t n, double lo, double inv_width,
              std::int32_t n_bins, std::int32_t* idx, std::uint8_t* clamped) {
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (v[i] - lo) * inv_width;
    if (!(t == t)) {  // NaN input
      idx[i] = 0;
      clamped[i] = 1;
      continue;
    }
    const double f = std::floor(t);
    if (f < 0.0) {
      idx[i] = 0;
      clamped[i] = 1;
    } else if (f >= static_cast<double>(n_bins)) {
      idx[i] = n_bins - 1;
      clamped[i] = 1;
    } else {
      idx[i] = static_cast<std::int32_t>(f);
      clamped[i] = 0;
    }
  }
}

MinMax minmax(const double* v, std::size_t n) {
  MinMax r{std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] < r.min) r.min = v[i];
    if (v[i] > r.max) r.max = v[i];
  }
  return r;
}

Moments moments(const double* v, std::size_t n) {
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += v[i];
    s2 += v[i] * v[i];
  }
  return {s, s2};
}

KlSum kl_terms(const double* p, const double* q, std::size_t n) {
  double acc = 0.0;
  bool disjoint = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] > 0.0) {
      if (q[i] <= 0.0) {
        disjoint = true;
      } else {
        acc += p[i] * std::log(p[i] / q[i]);
      }
    }
  }
  return {acc, disjoint};
}

double scaled_sq_diff(const double* a, const double* b, const double* inv_scale,
                      std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) * inv_scale[i];
    acc += d * d;
  }
  return acc;
}

bool all_finite(const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(v[i])) return false;
  }
  return true;
}

}  // namespace datactl::kernels::scalar
