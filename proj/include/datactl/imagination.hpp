// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "datactl/monitor.hpp"
#include "datactl/trace.hpp"

namespace datactl {

// Declarative hazard knowledge: a predicate over runtime-buffer statistics
// plus a synthetic-input recipe anchored at the last valid input. Templates
// are data (JSON), not code, so the knowledge base stays auditable.
struct HazardCondition {
  enum class Stat { Mean, Last, Min, Max, Trend };
  enum class Op { Gt, Lt };
  Stat stat = Stat::Last;
  std::size_t feature = 0;
  Op op = Op::Gt;
  double value = 0.0;
};

struct HazardTemplate {
  std::string id;
  std::vector<HazardCondition> conditions;  // conjunction; empty = always applies
  std::vector<double> offset;               // added to the last valid input
  std::vector<double> jitter_sd;            // optional per-dim noise
  double prior = 1.0;                       // in [0, 1]
  double severity = 1.0;                    // in [0, 1]
};

std::vector<HazardTemplate> load_knowledge_base(const std::string& path);

struct ImaginedCase {
  std::string template_id;
  std::vector<double> input;
  double prior = 1.0;  // copied from the template
  double probability = 0.0;
  double severity = 0.0;
  double risk = 0.0;  // probability * severity, exactly
  bool clamped_into_support = false;
};

// Ring of the most recent records plus the last one that passed OOD checks.
class RuntimeBuffer {
 public:
  explicit RuntimeBuffer(std::size_t capacity = 64);

  void push(const TraceRecord& record, bool valid);
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::optional<TraceRecord>& last_valid() const { return last_valid_; }

  double stat(HazardCondition::Stat stat, std::size_t feature) const;
  // Deterministic digest of the buffered content; seeds the case generators.
  std::uint64_t content_hash() const;

 private:
  std::size_t capacity_;
  std::deque<TraceRecord> ring_;
  std::optional<TraceRecord> last_valid_;
};

struct MisuseResult {
  bool misused = false;
  std::set<OodTag> tags;
};

MisuseResult detect_misuse(const TraceRecord& record, const ReferenceProfile& profile);

// One unscored case per applicable template; throws when the buffer has no
// last valid record.
std::vector<ImaginedCase> imagine_hazards(const RuntimeBuffer& buffer,
                                          const std::vector<HazardTemplate>& kb);

// prior * plausibility, plausibility = reference input density of the case's
// cell normalized by the modal cell density. Out-of-support inputs clamp (and
// are flagged).
double evaluate_probability(ImaginedCase& imagined, const ReferenceProfile& profile);

// Top-k by risk, ties broken by template id.
std::vector<ImaginedCase> select_high_risk(std::vector<ImaginedCase> cases,
                                           std::size_t k);

struct PipelineOutput {
  std::size_t record_index = 0;
  bool misuse = false;
  std::set<OodTag> tags;
  std::vector<double> passthrough_input;    // untouched when not misused
  std::vector<ImaginedCase> substitutes;    // top-k when misused
  bool degraded = false;                    // misuse before any valid record
};

// Sequential per-stream state machine: valid records pass through, misused
// records are replaced by ranked synthetic hazard inputs for the downstream
// consumer. Misused records can be persisted for later harvesting.
class ImaginationPipeline {
 public:
  ImaginationPipeline(const ReferenceProfile& profile,
                      std::vector<HazardTemplate> kb, std::size_t top_k,
                      std::size_t buffer_capacity = 64,
                      std::string critical_case_path = "");

  PipelineOutput process(const TraceRecord& record);
  const RuntimeBuffer& buffer() const { return buffer_; }
  std::size_t misuse_count() const { return misuse_count_; }

 private:
  const ReferenceProfile& profile_;
  std::vector<HazardTemplate> kb_;
  std::size_t top_k_;
  RuntimeBuffer buffer_;
  std::string critical_case_path_;
  std::size_t index_ = 0;
  std::size_t misuse_count_ = 0;
};

}  // namespace datactl
