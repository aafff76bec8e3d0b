// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace datactl {

// One timestamped observation of a monitored system. `t` is a unitless tick;
// wall-clock time, if needed, travels as a circumstance. Missing circumstance
// keys mean "unspecified" and are skipped by factor grouping.
struct TraceRecord {
  std::int64_t t = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::map<std::string, double> circ;
  std::set<std::string> events;

  bool operator==(const TraceRecord&) const = default;
};

struct TraceMeta {
  std::size_t x_dim = 0;
  std::size_t y_dim = 0;
  std::set<std::string> circ_vocabulary;
  std::string source;

  bool operator==(const TraceMeta&) const = default;
};

struct Trace {
  std::vector<TraceRecord> records;
  TraceMeta meta;

  std::size_t size() const { return records.size(); }
  std::span<const TraceRecord> span() const { return {records.data(), records.size()}; }

  bool operator==(const Trace&) const = default;
};

// Report-annotation handle for the system under analysis.
struct ModelDescriptor {
  std::string name;
  std::string environment_id;
  std::string parameter_tag;
  std::string loss_name;  // annotation only, never part of a verdict
};

// JSON file with "name" (required, non-empty) and optional "environment",
// "parameter_tag", "loss".
ModelDescriptor load_model_descriptor(const std::string& path);

// Throws Error on: empty trace, inconsistent dimensions, non-increasing or
// duplicate t, circ keys outside the declared vocabulary (when non-empty).
void validate(const Trace& trace);

struct ParseOptions {
  // Lenient mode ignores unknown top-level keys; strict mode rejects them.
  bool lenient = false;
};

// One JSON object per line, keys: "t" (integer), "x", "y" (number arrays,
// null entries load as NaN), "circ" (object, optional), "events" (string
// array, optional).
Trace parse_trace(const std::string& path, const ParseOptions& opts = {});
Trace parse_trace_stream(std::istream& in, const std::string& source_label,
                         const ParseOptions& opts = {});

void serialize_trace(const Trace& trace, std::ostream& out);
void write_trace(const Trace& trace, const std::string& path);

// Consecutive slices [k*stride, k*stride + width); a trailing partial slice
// is dropped. Throws when width or stride < 1 or width exceeds the trace.
std::vector<std::span<const TraceRecord>> window(const Trace& trace,
                                                 std::size_t width,
                                                 std::size_t stride);

}  // namespace datactl
