// SPDX-License-Identifier: Apache-2.0
#include "datactl/imagination.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "datactl/error.hpp"
#include "json.hpp"

namespace datactl {

namespace {

HazardCondition::Stat parse_stat(const std::string& s) {
  if (s == "mean") return HazardCondition::Stat::Mean;
  if (s == "last") return HazardCondition::Stat::Last;
  if (s == "min") return HazardCondition::Stat::Min;
  if (s == "max") return HazardCondition::Stat::Max;
  if (s == "trend") return HazardCondition::Stat::Trend;
  throw Error("unknown condition stat \"" + s + "\"");
}

HazardCondition::Op parse_op(const std::string& s) {
  if (s == "gt") return HazardCondition::Op::Gt;
  if (s == "lt") return HazardCondition::Op::Lt;
  throw Error("unknown condition op \"" + s + "\"");
}

bool applicable(const HazardTemplate& tpl, const RuntimeBuffer& buffer) {
  for (const auto& c : tpl.conditions) {
    const double v = buffer.stat(c.stat, c.feature);
    const bool ok = c.op == HazardCondition::Op::Gt ? v > c.value : v < c.value;
    if (!ok) return false;
  }
  return true;
}

void hash_mix(std::uint64_t& h, const void* data, std::size_t len) {
  // FNV-1a
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::vector<HazardTemplate> load_knowledge_base(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open knowledge base: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("malformed knowledge base: ") + e.what());
  }
  if (!j.is_array()) throw Error("knowledge base must be a JSON array");
  std::vector<HazardTemplate> kb;
  for (const auto& t : j) {
    HazardTemplate tpl;
    tpl.id = t.at("id").get<std::string>();
    tpl.prior = t.at("prior").get<double>();
    tpl.severity = t.at("severity").get<double>();
    if (tpl.prior < 0 || tpl.prior > 1 || tpl.severity < 0 || tpl.severity > 1) {
      throw Error("prior and severity must lie in [0,1] (template \"" + tpl.id + "\")");
    }
    if (t.contains("offset")) tpl.offset = t["offset"].get<std::vector<double>>();
    if (t.contains("jitter_sd")) {
      tpl.jitter_sd = t["jitter_sd"].get<std::vector<double>>();
    }
    if (t.contains("conditions")) {
      for (const auto& c : t["conditions"]) {
        HazardCondition cond;
        cond.stat = parse_stat(c.at("stat").get<std::string>());
        cond.feature = c.at("feature").get<std::size_t>();
        cond.op = parse_op(c.at("op").get<std::string>());
        cond.value = c.at("value").get<double>();
        tpl.conditions.push_back(cond);
      }
    }
    kb.push_back(std::move(tpl));
  }
  return kb;
}

RuntimeBuffer::RuntimeBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw Error("buffer capacity must be >= 1");
}

void RuntimeBuffer::push(const TraceRecord& record, bool valid) {
  ring_.push_back(record);
  if (ring_.size() > capacity_) ring_.pop_front();
  if (valid) last_valid_ = record;
}

double RuntimeBuffer::stat(HazardCondition::Stat stat, std::size_t feature) const {
  double mean = 0.0, mn = 0.0, mx = 0.0, trend = 0.0;
  std::size_t n = 0;
  double prev = 0.0;
  for (const auto& r : ring_) {
    if (feature >= r.x.size() || !std::isfinite(r.x[feature])) continue;
    const double v = r.x[feature];
    if (n == 0) {
      mn = mx = v;
    } else {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      trend += v - prev;
    }
    mean += v;
    prev = v;
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  switch (stat) {
    case HazardCondition::Stat::Mean:
      return mean / static_cast<double>(n);
    case HazardCondition::Stat::Last:
      return prev;
    case HazardCondition::Stat::Min:
      return mn;
    case HazardCondition::Stat::Max:
      return mx;
    case HazardCondition::Stat::Trend:
      return n > 1 ? trend / static_cast<double>(n - 1) : 0.0;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::uint64_t RuntimeBuffer::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& r : ring_) {
    hash_mix(h, &r.t, sizeof(r.t));
    for (double v : r.x) hash_mix(h, &v, sizeof(v));
  }
  return h;
}

MisuseResult detect_misuse(const TraceRecord& record, const ReferenceProfile& profile) {
  MisuseResult result;
  result.tags = classify_ood_record(record, profile);
  result.misused = !result.tags.empty();
  return result;
}

std::vector<ImaginedCase> imagine_hazards(const RuntimeBuffer& buffer,
                                          const std::vector<HazardTemplate>& kb) {
  if (!buffer.last_valid().has_value()) throw Error("no last-valid state");
  const auto& base = buffer.last_valid()->x;
  std::mt19937_64 rng(buffer.content_hash());
  std::normal_distribution<double> gauss;

  std::vector<ImaginedCase> cases;
  for (const auto& tpl : kb) {
    if (!applicable(tpl, buffer)) continue;
    ImaginedCase c;
    c.template_id = tpl.id;
    c.prior = tpl.prior;
    c.severity = tpl.severity;
    c.input = base;
    for (std::size_t d = 0; d < c.input.size(); ++d) {
      if (d < tpl.offset.size()) c.input[d] += tpl.offset[d];
      if (d < tpl.jitter_sd.size() && tpl.jitter_sd[d] > 0.0) {
        c.input[d] += tpl.jitter_sd[d] * gauss(rng);
      }
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

double evaluate_probability(ImaginedCase& imagined, const ReferenceProfile& profile) {
  const auto& marginal = profile.input_marginal;
  bool clamped = false;
  const auto cell = marginal.cell_of(imagined.input, &clamped);
  imagined.clamped_into_support = clamped;

  double modal = 0.0;
  for (std::size_t i = 0; i < marginal.counts.size(); ++i) {
    modal = std::max(modal,
                     marginal.smoothed_probability(static_cast<std::int64_t>(i)));
  }
  const double plausibility =
      modal > 0.0 ? marginal.smoothed_probability(cell) / modal : 0.0;
  imagined.probability = imagined.prior * plausibility;
  imagined.risk = imagined.probability * imagined.severity;
  return imagined.probability;
}

std::vector<ImaginedCase> select_high_risk(std::vector<ImaginedCase> cases,
                                           std::size_t k) {
  if (k < 1) throw Error("k must be >= 1");
  std::sort(cases.begin(), cases.end(), [](const ImaginedCase& a, const ImaginedCase& b) {
    if (a.risk != b.risk) return a.risk > b.risk;
    return a.template_id < b.template_id;
  });
  if (cases.size() > k) cases.resize(k);
  return cases;
}

ImaginationPipeline::ImaginationPipeline(const ReferenceProfile& profile,
                                         std::vector<HazardTemplate> kb,
                                         std::size_t top_k,
                                         std::size_t buffer_capacity,
                                         std::string critical_case_path)
    : profile_(profile),
      kb_(std::move(kb)),
      top_k_(top_k),
      buffer_(buffer_capacity),
      critical_case_path_(std::move(critical_case_path)) {
  if (top_k_ < 1) throw Error("top_k must be >= 1");
}

PipelineOutput ImaginationPipeline::process(const TraceRecord& record) {
  PipelineOutput out;
  out.record_index = index_++;
  const MisuseResult misuse = detect_misuse(record, profile_);
  out.misuse = misuse.misused;
  out.tags = misuse.tags;

  if (!misuse.misused) {
    buffer_.push(record, true);
    out.passthrough_input = record.x;
    return out;
  }

  ++misuse_count_;
  if (!critical_case_path_.empty()) {
    std::ofstream sink(critical_case_path_, std::ios::app);
    if (sink) {
      Trace one;
      one.records.push_back(record);
      serialize_trace(one, sink);
    }
  }

  if (!buffer_.last_valid().has_value()) {
    buffer_.push(record, false);
    out.degraded = true;
    return out;
  }

  auto cases = imagine_hazards(buffer_, kb_);
  for (auto& c : cases) evaluate_probability(c, profile_);
  out.substitutes = select_high_risk(std::move(cases), top_k_);
  buffer_.push(record, false);
  return out;
}

}  // namespace datactl
