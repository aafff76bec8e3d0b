// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datactl/refsys.hpp"
#include "datactl/trace.hpp"

namespace datactl {

enum class SystemClassKind { Static, NonStationary, Dynamic };

const char* to_string(SystemClassKind kind);

struct ClassStat {
  std::string id;
  double value = 0.0;
};

struct ClassEvidence {
  double segment_stat = 0.0;
  double memory_stat = 0.0;
  bool memory_conclusive = false;
  std::vector<ClassStat> segment_pairs;
  std::vector<ClassStat> memory_cells;
  std::vector<std::string> warnings;
};

struct SystemClass {
  SystemClassKind kind = SystemClassKind::Static;
  double confidence = 0.0;  // margin of the decisive statistic, in [0,1]
  ClassEvidence evidence;
};

struct ClassifyOptions {
  int segments = 4;
  double kappa = 0.05;  // nats
  int x_bins = 8;
  int y_bins = 8;
  int history_lags = 3;
  double min_partition = 150.0;  // history partitions below this drop out
};

// Trace-only classification. Temporal segments expose relationship changes
// over time; history partitions within an input cell expose memory. Memory
// evidence wins over segment evidence: a stationary recurrent system shows
// identical segments but history-dependent outputs.
SystemClass classify_passive(const Trace& trace, const ClassifyOptions& opts = {});

struct ProbeProtocol {
  int prefix_pairs = 3;
  int prefix_length = 10;
  std::vector<double> terminal_input{0.0};
  int repetitions = 200;
};

// Probes a resettable system: distinct prefixes followed by a shared terminal
// input expose memory; repeated inputs at different context values / time
// offsets expose input-conditioned change. Falls back to passive
// classification (with a warning) when the system refuses to reset.
SystemClass classify_active(System& system, const ProbeProtocol& protocol,
                            const ClassifyOptions& opts = {},
                            std::uint64_t seed = 1);

}  // namespace datactl
