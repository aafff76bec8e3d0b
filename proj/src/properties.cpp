// SPDX-License-Identifier: Apache-2.0
#include "datactl/properties.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "datactl/error.hpp"

namespace datactl {

namespace {

struct FactorGroup {
  double label = 0.0;  // representative instantiation value
  std::vector<TraceRecord> records;
};

// Groups records by factor instantiation: exact values when there are few,
// quantile bins (balanced sizes) otherwise. Records missing the factor or
// outside [low, high] are excluded and tallied.
struct Grouping {
  std::vector<FactorGroup> groups;
  std::size_t missing = 0;
  std::size_t out_of_bounds = 0;
};

Grouping group_by_factor(const Trace& trace, const std::string& name, double low,
                         double high, int max_groups) {
  Grouping out;
  std::vector<std::pair<double, const TraceRecord*>> carriers;
  bool factor_seen = false;
  for (const auto& r : trace.records) {
    const auto it = r.circ.find(name);
    if (it == r.circ.end()) {
      ++out.missing;
      continue;
    }
    factor_seen = true;
    if (!(it->second >= low && it->second <= high)) {
      ++out.out_of_bounds;
      continue;
    }
    carriers.emplace_back(it->second, &r);
  }
  if (!factor_seen) throw Error("factor \"" + name + "\" absent from trace");

  std::set<double> distinct;
  for (const auto& [v, r] : carriers) distinct.insert(v);
  if (distinct.size() < 2) {
    throw Error("insufficient circumstance coverage for \"" + name + "\"");
  }

  if (distinct.size() <= static_cast<std::size_t>(max_groups)) {
    std::map<double, FactorGroup> by_value;
    for (const auto& [v, r] : carriers) {
      auto& g = by_value[v];
      g.label = v;
      g.records.push_back(*r);
    }
    for (auto& [v, g] : by_value) out.groups.push_back(std::move(g));
    return out;
  }

  // Quantile bins over the carrier values.
  std::vector<double> values;
  values.reserve(carriers.size());
  for (const auto& [v, r] : carriers) values.push_back(v);
  std::sort(values.begin(), values.end());
  std::vector<double> cuts;  // upper bound per group, last implicit
  for (int g = 1; g < max_groups; ++g) {
    cuts.push_back(values[values.size() * static_cast<std::size_t>(g) /
                          static_cast<std::size_t>(max_groups)]);
  }
  out.groups.resize(static_cast<std::size_t>(max_groups));
  for (const auto& [v, r] : carriers) {
    std::size_t g = 0;
    while (g < cuts.size() && v >= cuts[g]) ++g;
    out.groups[g].records.push_back(*r);
  }
  out.groups.erase(std::remove_if(out.groups.begin(), out.groups.end(),
                                  [](const FactorGroup& g) {
                                    return g.records.empty();
                                  }),
                   out.groups.end());
  for (auto& g : out.groups) {
    double sum = 0.0;
    for (const auto& r : g.records) sum += r.circ.at(name);
    g.label = sum / static_cast<double>(g.records.size());
  }
  if (out.groups.size() < 2) {
    throw Error("insufficient circumstance coverage for \"" + name + "\"");
  }
  return out;
}

Outcome conclude(std::vector<EvidenceEntry>& evidence) {
  bool any_checked = false;
  bool any_violated = false;
  for (const auto& e : evidence) {
    if (e.skipped) continue;
    any_checked = true;
    any_violated = any_violated || e.violated;
  }
  if (!any_checked) return Outcome::Indeterminate;
  return any_violated ? Outcome::Fail : Outcome::Pass;
}

std::string outcome_word(Outcome o) {
  switch (o) {
    case Outcome::Pass:
      return "PASS";
    case Outcome::Fail:
      return "FAIL";
    case Outcome::Indeterminate:
      return "INDETERMINATE";
  }
  return "?";
}

std::string format_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json to_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["pass"] = v.outcome == Outcome::Pass;
  j["outcome"] = v.outcome == Outcome::Pass          ? "pass"
                 : v.outcome == Outcome::Fail        ? "fail"
                                                     : "indeterminate";
  j["summary"] = v.summary;
  auto& ev = j["evidence"] = nlohmann::ordered_json::array();
  for (const auto& e : v.evidence) {
    nlohmann::ordered_json je;
    je["id"] = e.id;
    je["statistic"] = e.statistic;
    if (std::isfinite(e.bound_lo)) je["bound_lo"] = e.bound_lo;
    if (std::isfinite(e.bound_hi)) je["bound_hi"] = e.bound_hi;
    je["violated"] = e.violated;
    if (e.skipped) je["skipped"] = true;
    if (!e.note.empty()) je["note"] = e.note;
    ev.push_back(std::move(je));
  }
  if (!v.warnings.empty()) j["warnings"] = v.warnings;
  if (!v.details.is_null()) j["details"] = v.details;
  return j;
}

int exit_code(Outcome outcome) {
  switch (outcome) {
    case Outcome::Pass:
      return 0;
    case Outcome::Fail:
      return 1;
    case Outcome::Indeterminate:
      return 2;
  }
  return 3;
}

Verdict check_robustness(const Trace& trace, const RobustnessSpec& spec,
                         const CheckOptions& opts) {
  if (spec.factors.empty()) throw Error("robustness spec declares no factors");
  if (spec.kappa <= 0) throw Error("kappa must be > 0");
  for (const auto& f : spec.factors) {
    if (!(f.low < f.high)) throw Error("factor bounds must satisfy low < high");
  }
  validate(trace);
  const BinningSpec binning = fit_binning(trace, opts.x_bins, opts.y_bins);

  Verdict verdict;
  for (const auto& factor : spec.factors) {
    const Grouping grouping =
        group_by_factor(trace, factor.name, factor.low, factor.high, spec.groups);
    if (grouping.out_of_bounds > 0) {
      verdict.warnings.push_back(factor.name + ": " +
                                 std::to_string(grouping.out_of_bounds) +
                                 " records outside bounds excluded");
    }
    std::vector<ConditionalDistribution> estimates;
    estimates.reserve(grouping.groups.size());
    for (const auto& g : grouping.groups) {
      estimates.push_back(estimate_conditional(g.records, binning));
    }
    for (std::size_t i = 0; i < grouping.groups.size(); ++i) {
      for (std::size_t j = i + 1; j < grouping.groups.size(); ++j) {
        const auto weights = pooled_input_marginal(grouping.groups[i].records,
                                                   grouping.groups[j].records,
                                                   binning);
        EvidenceEntry e;
        e.id = factor.name + ":" + format_label(grouping.groups[i].label) + "|" +
               format_label(grouping.groups[j].label);
        e.bound_lo = 0.0;
        e.bound_hi = spec.kappa;
        try {
          e.statistic =
              symmetrized_kl(estimates[i], estimates[j], weights, opts.kl).nats;
          e.violated = e.statistic > spec.kappa;
        } catch (const Error& err) {
          e.skipped = true;
          e.note = err.what();
        }
        verdict.evidence.push_back(std::move(e));
      }
    }
  }
  verdict.outcome = conclude(verdict.evidence);
  verdict.summary = "robustness " + outcome_word(verdict.outcome) + " (" +
                    std::to_string(verdict.evidence.size()) + " pairs, kappa=" +
                    format_label(spec.kappa) + ")";
  return verdict;
}

Verdict check_sensitivity(const Trace& trace, const SensitivitySpec& spec,
                          const CheckOptions& opts) {
  if (spec.factors.empty()) throw Error("sensitivity spec declares no factors");
  for (const auto& f : spec.factors) {
    if (f.threshold <= 0 || f.ratio <= 0) throw Error("threshold and ratio must be > 0");
    if (f.tolerance < 0 || f.tolerance >= f.ratio) {
      throw Error("tolerance must satisfy 0 <= tolerance < ratio");
    }
  }
  validate(trace);
  const BinningSpec binning = fit_binning(trace, opts.x_bins, opts.y_bins);

  Verdict verdict;
  for (const auto& factor : spec.factors) {
    const Grouping grouping = group_by_factor(
        trace, factor.name, -std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity(), spec.groups);
    std::vector<ConditionalDistribution> estimates;
    estimates.reserve(grouping.groups.size());
    for (const auto& g : grouping.groups) {
      estimates.push_back(estimate_conditional(g.records, binning));
    }
    for (std::size_t m = 0; m < grouping.groups.size(); ++m) {
      for (std::size_t n = 0; n < grouping.groups.size(); ++n) {
        if (m == n) continue;
        const double delta =
            std::abs(grouping.groups[m].label - grouping.groups[n].label);
        EvidenceEntry e;
        e.id = factor.name + ":" + format_label(grouping.groups[m].label) + "->" +
               format_label(grouping.groups[n].label);
        if (delta <= factor.threshold) {
          e.skipped = true;
          e.note = "sub-threshold";
          verdict.evidence.push_back(std::move(e));
          continue;
        }
        const double scale = delta / factor.threshold;
        e.bound_lo = (factor.ratio - factor.tolerance) * scale;
        e.bound_hi = (factor.ratio + factor.tolerance) * scale;
        const auto weights = pooled_input_marginal(grouping.groups[m].records,
                                                   grouping.groups[n].records,
                                                   binning);
        try {
          e.statistic =
              conditional_kl(estimates[m], estimates[n], weights, opts.kl).nats;
          e.violated = !(e.statistic > e.bound_lo && e.statistic < e.bound_hi);
        } catch (const Error& err) {
          e.skipped = true;
          e.note = err.what();
        }
        verdict.evidence.push_back(std::move(e));
      }
    }
  }
  verdict.outcome = conclude(verdict.evidence);
  if (verdict.outcome == Outcome::Indeterminate) {
    verdict.warnings.push_back("no qualifying pair (all deltas sub-threshold)");
  }
  verdict.summary = "sensitivity " + outcome_word(verdict.outcome) + " (" +
                    std::to_string(verdict.evidence.size()) + " ordered pairs)";
  return verdict;
}

Verdict check_stability(const Trace& trace, const StabilityParams& params,
                        const CheckOptions& opts) {
  if (params.width < 50) throw Error("window width must be >= 50");
  if (params.stride < 1) throw Error("stride must be >= 1");
  if (params.slack < 0) throw Error("slack must be >= 0");
  if (params.grace < 0) throw Error("grace must be >= 0");
  validate(trace);

  Verdict verdict;
  const std::size_t n = trace.records.size();
  if (n < 3 * params.width) {
    verdict.outcome = Outcome::Indeterminate;
    verdict.summary = "stability INDETERMINATE (trace shorter than 3 windows)";
    return verdict;
  }
  const BinningSpec binning = fit_binning(trace, opts.x_bins, opts.y_bins);
  const auto windows = window(trace, params.width, params.stride);
  const std::size_t m = windows.size();
  if (m < 3) {
    verdict.outcome = Outcome::Indeterminate;
    verdict.summary = "stability INDETERMINATE (fewer than 3 windows)";
    return verdict;
  }

  std::vector<ConditionalDistribution> estimates;
  estimates.reserve(m);
  for (const auto& w : windows) estimates.push_back(estimate_conditional(w, binning));

  // Windows landing in the grace region of a marked change.
  std::set<std::size_t> graced;
  for (std::size_t e = 0; e < n; ++e) {
    if (!trace.records[e].events.count("circumstance_change")) continue;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t off = k * params.stride;
      if (off <= e && e < off + params.width) {
        for (std::size_t g = 0; g <= static_cast<std::size_t>(params.grace); ++g) {
          graced.insert(k + g);
        }
      }
    }
  }

  std::vector<double> dkl(m, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 1; k < m; ++k) {
    const auto weights =
        pooled_input_marginal(windows[k], windows[k - 1], binning);
    try {
      dkl[k] = conditional_kl(estimates[k], estimates[k - 1], weights, opts.kl).nats;
    } catch (const Error& err) {
      verdict.warnings.push_back("window " + std::to_string(k) + ": " + err.what());
    }
  }

  for (std::size_t k = 1; k + 1 < m; ++k) {
    EvidenceEntry e;
    e.id = "window " + std::to_string(k + 1) + " (t=" +
           std::to_string(windows[k + 1].front().t) + ")";
    e.bound_hi = params.slack;
    const bool in_grace = graced.count(k - 1) || graced.count(k) || graced.count(k + 1);
    if (in_grace) {
      e.skipped = true;
      e.note = "grace";
    } else if (std::isnan(dkl[k]) || std::isnan(dkl[k + 1])) {
      e.skipped = true;
      e.note = "insufficient overlap";
    } else {
      e.statistic = dkl[k + 1] - dkl[k];
      e.violated = e.statistic > params.slack;
    }
    verdict.evidence.push_back(std::move(e));
  }

  verdict.outcome = conclude(verdict.evidence);
  if (verdict.outcome == Outcome::Indeterminate) {
    verdict.warnings.push_back("all windows inside grace regions");
  }
  auto& seq = verdict.details["divergence_sequence"] = nlohmann::ordered_json::array();
  for (std::size_t k = 1; k < m; ++k) {
    seq.push_back(std::isnan(dkl[k]) ? nlohmann::ordered_json()
                                     : nlohmann::ordered_json(dkl[k]));
  }
  verdict.details["window_width"] = params.width;
  verdict.details["window_stride"] = params.stride;
  verdict.summary = "stability " + outcome_word(verdict.outcome) + " (" +
                    std::to_string(m) + " windows, slack=" + format_label(params.slack) +
                    ")";
  return verdict;
}

RobustnessSpec load_robustness_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("malformed spec file: ") + e.what());
  }
  RobustnessSpec spec;
  spec.kappa = j.value("kappa", spec.kappa);
  spec.groups = j.value("groups", spec.groups);
  if (!j.contains("factors") || !j["factors"].is_array()) {
    throw Error("robustness spec needs a \"factors\" array");
  }
  for (const auto& f : j["factors"]) {
    spec.factors.push_back({f.at("name").get<std::string>(),
                            f.at("low").get<double>(), f.at("high").get<double>()});
  }
  return spec;
}

SensitivitySpec load_sensitivity_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("malformed spec file: ") + e.what());
  }
  SensitivitySpec spec;
  spec.groups = j.value("groups", spec.groups);
  if (!j.contains("factors") || !j["factors"].is_array()) {
    throw Error("sensitivity spec needs a \"factors\" array");
  }
  for (const auto& f : j["factors"]) {
    spec.factors.push_back({f.at("name").get<std::string>(),
                            f.at("threshold").get<double>(),
                            f.at("ratio").get<double>(),
                            f.at("tolerance").get<double>()});
  }
  return spec;
}

}  // namespace datactl
