// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "datactl/stats.hpp"
#include "datactl/trace.hpp"

namespace datactl {

enum class OodTag { DataCharacteristics, Outlier, UnknownClass };

const char* to_string(OodTag tag);

struct MonitorOptions {
  // Finer input bins than the generic estimator default: shift comparisons
  // against a large reference suffer within-cell leakage under covariate
  // movement, which narrower cells suppress.
  int x_bins = 12;
  int y_bins = 8;
  // Window-vs-reference conditional comparison: small window cells carry too
  // little within-cell placement information, so the cutoff sits well above
  // the generic estimator default.
  double min_cell_count = 50.0;
  double max_clamped_fraction = 0.2;
  double floor_percentile = 0.01;
};

// Development-time snapshot the runtime stream is compared against.
struct ReferenceProfile {
  BinningSpec binning;
  MarginalDistribution input_marginal;
  MarginalDistribution output_marginal;
  ConditionalDistribution conditional;
  double density_floor = 0.0;
  std::string provenance;
  MonitorOptions options;
  // Optional declared feature ranges (per input dimension); values outside
  // count as a data-characteristics mismatch.
  std::vector<std::pair<double, double>> declared_input_ranges;
};

ReferenceProfile build_reference(const Trace& dev_trace,
                                 const MonitorOptions& opts = {},
                                 const std::string& provenance = "dev");

std::set<OodTag> classify_ood_record(const TraceRecord& record,
                                     const ReferenceProfile& profile);

enum class ShiftLabel { None, Covariate, Target, Concept, Mixed };

const char* to_string(ShiftLabel label);

struct ShiftThresholds {
  double input = 0.1;        // nats
  double output = 0.1;
  double conditional = 0.1;
};

struct ShiftReport {
  std::size_t window_index = 0;
  std::int64_t start_t = 0;
  std::int64_t end_t = 0;
  double input_kl = 0.0;
  double output_kl = 0.0;
  std::optional<double> conditional_kl;  // empty: no comparable support
  double conditional_excluded = 0.0;
  ShiftLabel label = ShiftLabel::None;
  std::vector<std::size_t> flagged_records;  // stream indices with OOD tags
};

struct MonitorResult {
  std::vector<ShiftReport> reports;
  std::vector<std::string> warnings;
};

// Consecutive non-overlapping windows of `width` records; a trailing partial
// window is dropped. Exactly one label per window: a conditional change is
// the safety-critical signal and dominates marginal-only explanations.
MonitorResult monitor_stream(std::span<const TraceRecord> records,
                             const ReferenceProfile& profile, std::size_t width,
                             const ShiftThresholds& thresholds = {});

// Static SVG of the three divergence series with threshold rules.
std::string render_kl_series_svg(const std::vector<ShiftReport>& reports,
                                 const ShiftThresholds& thresholds);

}  // namespace datactl
