// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "datactl/trace.hpp"

namespace datactl {

// Fixed smoothing mass added per output cell at query time (never stored in
// raw counts), keeping divergences finite under finite samples.
inline constexpr double kSmoothingMass = 0.5;

struct DimensionBinning {
  double lo = 0.0;
  double width = 1.0;
  std::int32_t bins = 1;
  std::vector<double> edges;  // bins + 1 strictly increasing values

  double inv_width() const { return 1.0 / width; }
  bool operator==(const DimensionBinning&) const = default;
};

struct BinningSpec {
  std::vector<DimensionBinning> x_dims;
  std::vector<DimensionBinning> y_dims;
  std::size_t cell_cap = 1'000'000;
  std::vector<std::string> warnings;  // e.g. zero-variance dimensions

  std::size_t x_cells() const;
  std::size_t y_cells() const;
  bool same_shape(const BinningSpec& other) const;  // identical edges

  // Flat row-major cell index with edge clamping; clamped set when any
  // coordinate fell outside its range (or was non-finite).
  std::int64_t x_cell(std::span<const double> x, bool* clamped) const;
  std::int64_t y_cell(std::span<const double> y, bool* clamped) const;
};

struct FitOptions {
  std::size_t cell_cap = 1'000'000;
  double padding = 0.01;  // fraction of the data range added on each side
};

// Equal-width edges spanning [min - padding*range, max + padding*range] per
// dimension; a zero-variance dimension collapses to one cell (with warning).
// Deterministic for a given trace. Throws when the cell product exceeds the
// cap or a bin count is < 2.
BinningSpec fit_binning(const Trace& trace, std::span<const int> x_bins,
                        std::span<const int> y_bins, const FitOptions& opts = {});
BinningSpec fit_binning(const Trace& trace, int x_bins, int y_bins,
                        const FitOptions& opts = {});

enum class Space { Input, Output };

struct MarginalDistribution {
  std::vector<DimensionBinning> dims;
  std::vector<double> counts;  // raw, dense over cells
  double n_total = 0.0;
  double smoothing = kSmoothingMass;

  std::size_t cells() const { return counts.size(); }
  double smoothed_probability(std::int64_t cell) const;
  std::vector<double> smoothed() const;
  std::int64_t cell_of(std::span<const double> v, bool* clamped) const;
};

struct ConditionalCell {
  std::vector<double> y_counts;
  double n = 0.0;
  double clamped = 0.0;  // records whose x or y needed edge clamping
};

// Binned, smoothed estimate of the input-conditional output distribution.
struct ConditionalDistribution {
  BinningSpec binning;
  std::unordered_map<std::int64_t, ConditionalCell> cells;
  double n_total = 0.0;
  double out_of_support = 0.0;     // clamped records (still counted in cells)
  double skipped_nonfinite = 0.0;  // records that could not be binned at all
  double smoothing = kSmoothingMass;

  // Proper distribution over y-cells for any x-cell, including empty ones.
  std::vector<double> smoothed_row(std::int64_t x_cell) const;
  double cell_count(std::int64_t x_cell) const;
};

MarginalDistribution estimate_marginal(std::span<const TraceRecord> records,
                                       const BinningSpec& binning, Space space);
// Throws on an empty slice. Every binnable record is counted exactly once;
// out-of-range values clamp to edge cells and are tallied.
ConditionalDistribution estimate_conditional(std::span<const TraceRecord> records,
                                             const BinningSpec& binning);

// Sum p_i ln(p_i/q_i) in nats with 0*ln(0/q) = 0; returns +infinity when some
// p_i > 0 has q_i = 0. Throws on length mismatch, negative entries, or either
// vector not summing to 1 within 1e-9.
double kl_discrete(std::span<const double> p, std::span<const double> q);

struct CondKlOptions {
  double min_cell_count = 5.0;       // cells below this in either operand drop out
  double max_clamped_fraction = 0.2; // clamp-dominated cells drop out too
  bool bias_correct = true;          // per-cell plug-in bias subtraction
};

struct CondKlResult {
  double nats = 0.0;
  double excluded_mass = 0.0;  // weight fraction of dropped cells
  std::size_t cells_used = 0;
};

// Weight-averaged per-input-cell divergence between two conditionals sharing
// a binning; weights renormalize over the included cells. Smoothed rows keep
// the value finite. Throws on binning mismatch or when every cell drops out
// ("insufficient overlap").
CondKlResult conditional_kl(const ConditionalDistribution& p,
                            const ConditionalDistribution& q,
                            const MarginalDistribution& weights,
                            const CondKlOptions& opts = {});

CondKlResult symmetrized_kl(const ConditionalDistribution& p,
                            const ConditionalDistribution& q,
                            const MarginalDistribution& weights,
                            const CondKlOptions& opts = {});

// Debug emission (--dump-dist): line-delimited JSON.
void dump_distribution(const MarginalDistribution& m, std::ostream& out);
void dump_distribution(const ConditionalDistribution& c, std::ostream& out);

// Pooled input marginal of the records backing two conditional estimates --
// the default weighting for divergence comparisons.
MarginalDistribution pooled_input_marginal(std::span<const TraceRecord> a,
                                           std::span<const TraceRecord> b,
                                           const BinningSpec& binning);

}  // namespace datactl
