// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "datactl/stats.hpp"
#include "datactl/trace.hpp"
#include "json.hpp"

namespace datactl {

// Declared invariance requirement: the input-output relationship must not
// move (beyond kappa) across instantiations of each factor inside its bounds.
struct RobustnessSpec {
  struct Factor {
    std::string name;
    double low = 0.0;
    double high = 1.0;
  };
  std::vector<Factor> factors;
  double kappa = 0.05;  // equality tolerance, nats
  int groups = 4;       // quantile groups for continuous factors
};

// Declared responsiveness requirement: divergence between factor
// instantiations further apart than `threshold` must land inside
// (ratio -/+ tolerance) * delta / threshold.
struct SensitivitySpec {
  struct Factor {
    std::string name;
    double threshold = 0.5;  // minimum instantiation distance that qualifies
    double ratio = 1.0;      // expected divergence per threshold of distance
    double tolerance = 0.5;  // band half-width; must stay below ratio
  };
  std::vector<Factor> factors;
  int groups = 4;
};

struct StabilityParams {
  std::size_t width = 500;
  std::size_t stride = 250;
  double slack = 0.02;  // permitted window-to-window divergence increase, nats
  int grace = 2;        // windows ignored after each marked change
};

struct EvidenceEntry {
  std::string id;
  double statistic = 0.0;
  double bound_lo = -std::numeric_limits<double>::infinity();
  double bound_hi = std::numeric_limits<double>::infinity();
  bool violated = false;
  bool skipped = false;
  std::string note;
};

enum class Outcome { Pass, Fail, Indeterminate };

struct Verdict {
  Outcome outcome = Outcome::Indeterminate;
  std::vector<EvidenceEntry> evidence;
  std::string summary;
  std::vector<std::string> warnings;
  nlohmann::ordered_json details;  // e.g. the divergence sequence for plotting

  bool pass() const { return outcome == Outcome::Pass; }
};

nlohmann::ordered_json to_json(const Verdict& v);
int exit_code(Outcome outcome);

struct CheckOptions {
  int x_bins = 8;
  int y_bins = 8;
  CondKlOptions kl;
};

Verdict check_robustness(const Trace& trace, const RobustnessSpec& spec,
                         const CheckOptions& opts = {});
Verdict check_sensitivity(const Trace& trace, const SensitivitySpec& spec,
                          const CheckOptions& opts = {});
Verdict check_stability(const Trace& trace, const StabilityParams& params,
                        const CheckOptions& opts = {});

// Spec files mirror the struct fields (see README for the JSON schema).
RobustnessSpec load_robustness_spec(const std::string& path);
SensitivitySpec load_sensitivity_spec(const std::string& path);

}  // namespace datactl
