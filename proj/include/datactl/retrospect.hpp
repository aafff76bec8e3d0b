// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace datactl {

// A prediction issued `horizon` ticks before `t` paired with what actually
// happened at `t`.
struct PredictionPair {
  std::int64_t t = 0;
  std::vector<double> predicted;
  std::vector<double> realized;
  int horizon = 1;
};

struct TrustOptions {
  std::size_t window = 50;  // H: discrepancies kept for window statistics
  double beta = 1.0;        // trust decay rate
};

// Windowed discrepancy tracker: normalized RMS error feeds an EWMA whose
// exponential squashing yields a trust score in (0, 1]; conservatism is its
// exact complement, broadcast for downstream consumers. Point discrepancies
// are the common denominator across predictive representations; a
// likelihood-based discrepancy would slot in at update() without touching
// the trust mapping.
class TrustState {
 public:
  explicit TrustState(const TrustOptions& opts = {});

  // Rejects (counts, leaves state unchanged) pairs with non-finite entries.
  // Throws on dimension mismatch or a non-positive scale entry.
  void update(const PredictionPair& pair, std::span<const double> scale);

  double trust() const { return trust_; }
  double conservatism() const { return 1.0 - trust_; }
  double ewma() const { return ewma_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t rejected() const { return rejected_; }
  const std::deque<double>& window() const { return window_; }
  const TrustOptions& options() const { return opts_; }

 private:
  TrustOptions opts_;
  std::deque<double> window_;
  double ewma_ = 0.0;
  double trust_ = 1.0;
  std::size_t accepted_ = 0;
  std::size_t rejected_ = 0;
};

struct TrustReport {
  bool indeterminate = false;  // no accepted pairs yet
  double trust = 1.0;
  double conservatism = 0.0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double discrepancy_min = 0.0;
  double discrepancy_max = 0.0;
  double discrepancy_mean = 0.0;
};

TrustReport trust_report(const TrustState& state);

}  // namespace datactl
