// SPDX-License-Identifier: Apache-2.0
#include "datactl/retrospect.hpp"

#include <algorithm>
#include <cmath>

#include "datactl/error.hpp"
#include "datactl/kernels.hpp"

namespace datactl {

TrustState::TrustState(const TrustOptions& opts) : opts_(opts) {
  if (opts_.window < 1) throw Error("window must be >= 1");
  if (opts_.beta <= 0) throw Error("beta must be > 0");
}

void TrustState::update(const PredictionPair& pair, std::span<const double> scale) {
  if (pair.horizon < 1) throw Error("prediction horizon must be >= 1");
  if (pair.predicted.size() != pair.realized.size() ||
      pair.predicted.size() != scale.size()) {
    throw Error("dimension mismatch");
  }
  std::vector<double> inv(scale.size());
  for (std::size_t d = 0; d < scale.size(); ++d) {
    if (!(scale[d] > 0.0)) throw Error("scale entries must be > 0");
    inv[d] = 1.0 / scale[d];
  }
  if (!kernels::all_finite(pair.predicted.data(), pair.predicted.size()) ||
      !kernels::all_finite(pair.realized.data(), pair.realized.size())) {
    ++rejected_;
    return;
  }
  const double sq = kernels::scaled_sq_diff(pair.predicted.data(),
                                            pair.realized.data(), inv.data(),
                                            inv.size());
  const double d = std::sqrt(sq / static_cast<double>(inv.size()));

  const double rho = 2.0 / (static_cast<double>(opts_.window) + 1.0);
  ewma_ = (1.0 - rho) * ewma_ + rho * d;
  trust_ = std::exp(-opts_.beta * ewma_);
  window_.push_back(d);
  if (window_.size() > opts_.window) window_.pop_front();
  ++accepted_;
}

TrustReport trust_report(const TrustState& state) {
  TrustReport report;
  report.accepted = state.accepted();
  report.rejected = state.rejected();
  if (state.accepted() == 0) {
    report.indeterminate = true;
    return report;
  }
  report.trust = state.trust();
  report.conservatism = state.conservatism();
  const auto& w = state.window();
  report.discrepancy_min = *std::min_element(w.begin(), w.end());
  report.discrepancy_max = *std::max_element(w.begin(), w.end());
  double sum = 0.0;
  for (double d : w) sum += d;
  report.discrepancy_mean = sum / static_cast<double>(w.size());
  return report;
}

}  // namespace datactl
