// SPDX-License-Identifier: Apache-2.0
#include "datactl/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "datactl/error.hpp"
#include "datactl/kernels.hpp"

namespace datactl {

namespace {

double marginal_kl(const MarginalDistribution& window,
                   const MarginalDistribution& reference) {
  const auto p = window.smoothed();
  const auto q = reference.smoothed();
  return kernels::kl_terms(p.data(), q.data(), p.size()).nats;
}

}  // namespace

const char* to_string(OodTag tag) {
  switch (tag) {
    case OodTag::DataCharacteristics:
      return "data_characteristics";
    case OodTag::Outlier:
      return "outlier";
    case OodTag::UnknownClass:
      return "unknown_class";
  }
  return "?";
}

const char* to_string(ShiftLabel label) {
  switch (label) {
    case ShiftLabel::None:
      return "none";
    case ShiftLabel::Covariate:
      return "covariate";
    case ShiftLabel::Target:
      return "target";
    case ShiftLabel::Concept:
      return "concept";
    case ShiftLabel::Mixed:
      return "mixed";
  }
  return "?";
}

ReferenceProfile build_reference(const Trace& dev_trace, const MonitorOptions& opts,
                                 const std::string& provenance) {
  if (dev_trace.records.size() < 1000) {
    throw Error("reference trace too short: need >= 1000 records");
  }
  ReferenceProfile profile;
  profile.options = opts;
  profile.provenance = provenance;
  profile.binning = fit_binning(dev_trace, opts.x_bins, opts.y_bins);
  profile.input_marginal =
      estimate_marginal(dev_trace.span(), profile.binning, Space::Input);
  profile.output_marginal =
      estimate_marginal(dev_trace.span(), profile.binning, Space::Output);
  profile.conditional = estimate_conditional(dev_trace.span(), profile.binning);

  // Floor: percentile of the dev records' own input-cell densities.
  std::vector<double> densities;
  densities.reserve(dev_trace.records.size());
  for (const auto& r : dev_trace.records) {
    if (!kernels::all_finite(r.x.data(), r.x.size())) continue;
    bool clamped = false;
    const auto cell = profile.input_marginal.cell_of(r.x, &clamped);
    densities.push_back(profile.input_marginal.smoothed_probability(cell));
  }
  if (densities.empty()) throw Error("reference trace has no binnable inputs");
  std::sort(densities.begin(), densities.end());
  const std::size_t idx = static_cast<std::size_t>(
      opts.floor_percentile * static_cast<double>(densities.size()));
  profile.density_floor = densities[std::min(idx, densities.size() - 1)];
  return profile;
}

std::set<OodTag> classify_ood_record(const TraceRecord& record,
                                     const ReferenceProfile& profile) {
  std::set<OodTag> tags;
  if (!kernels::all_finite(record.x.data(), record.x.size())) {
    tags.insert(OodTag::DataCharacteristics);
    return tags;  // cannot be binned
  }
  if (!profile.declared_input_ranges.empty()) {
    for (std::size_t d = 0; d < record.x.size(); ++d) {
      const auto& [lo, hi] = profile.declared_input_ranges[d];
      if (record.x[d] < lo || record.x[d] > hi) {
        tags.insert(OodTag::DataCharacteristics);
        break;
      }
    }
  }
  bool clamped = false;
  const auto cell = profile.input_marginal.cell_of(record.x, &clamped);
  if (profile.input_marginal.counts[static_cast<std::size_t>(cell)] <= 0.0) {
    tags.insert(OodTag::UnknownClass);
  }
  if (profile.input_marginal.smoothed_probability(cell) < profile.density_floor) {
    tags.insert(OodTag::Outlier);
  }
  return tags;
}

MonitorResult monitor_stream(std::span<const TraceRecord> records,
                             const ReferenceProfile& profile, std::size_t width,
                             const ShiftThresholds& thresholds) {
  if (width < 1) throw Error("window width must be >= 1");
  for (const auto& r : records) {
    if (r.x.size() != profile.binning.x_dims.size() ||
        r.y.size() != profile.binning.y_dims.size()) {
      throw Error("record dimensions do not match the reference profile");
    }
  }

  MonitorResult result;
  if (records.size() < width) {
    result.warnings.push_back("no complete window (stream shorter than width)");
    return result;
  }

  CondKlOptions kl_opts;
  kl_opts.min_cell_count = profile.options.min_cell_count;
  kl_opts.max_clamped_fraction = profile.options.max_clamped_fraction;

  const std::size_t n_windows = records.size() / width;
  for (std::size_t w = 0; w < n_windows; ++w) {
    const std::span<const TraceRecord> win = records.subspan(w * width, width);
    ShiftReport report;
    report.window_index = w;
    report.start_t = win.front().t;
    report.end_t = win.back().t;

    const auto win_input = estimate_marginal(win, profile.binning, Space::Input);
    const auto win_output = estimate_marginal(win, profile.binning, Space::Output);
    report.input_kl = marginal_kl(win_input, profile.input_marginal);
    report.output_kl = marginal_kl(win_output, profile.output_marginal);

    const auto win_cond = estimate_conditional(win, profile.binning);
    try {
      const auto ck =
          conditional_kl(win_cond, profile.conditional, win_input, kl_opts);
      report.conditional_kl = ck.nats;
      report.conditional_excluded = ck.excluded_mass;
    } catch (const Error&) {
      report.conditional_excluded = 1.0;
      result.warnings.push_back("window " + std::to_string(w) +
                                ": no comparable conditional support");
    }

    const bool concept_shift =
        report.conditional_kl.has_value() &&
        *report.conditional_kl > thresholds.conditional;
    if (concept_shift) {
      report.label = report.input_kl > thresholds.input ? ShiftLabel::Mixed
                                                        : ShiftLabel::Concept;
    } else if (report.input_kl > thresholds.input) {
      report.label = ShiftLabel::Covariate;
    } else if (report.output_kl > thresholds.output) {
      report.label = ShiftLabel::Target;
    } else {
      report.label = ShiftLabel::None;
    }

    for (std::size_t i = 0; i < win.size(); ++i) {
      if (!classify_ood_record(win[i], profile).empty()) {
        report.flagged_records.push_back(w * width + i);
      }
    }
    result.reports.push_back(std::move(report));
  }
  return result;
}

std::string render_kl_series_svg(const std::vector<ShiftReport>& reports,
                                 const ShiftThresholds& thresholds) {
  const int width = 720, height = 360, margin = 48;
  double y_max = std::max({thresholds.input, thresholds.output,
                           thresholds.conditional, 1e-6});
  for (const auto& r : reports) {
    y_max = std::max({y_max, r.input_kl, r.output_kl,
                      r.conditional_kl.value_or(0.0)});
  }
  y_max *= 1.1;
  const double n = std::max<std::size_t>(reports.size(), 2) - 1.0;
  auto sx = [&](std::size_t i) {
    return margin + (width - 2 * margin) * static_cast<double>(i) / n;
  };
  auto sy = [&](double v) { return height - margin - (height - 2 * margin) * v / y_max; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";

  struct Series {
    const char* name;
    const char* color;
    double threshold;
  };
  const Series series[3] = {{"input", "#1f77b4", thresholds.input},
                            {"output", "#2ca02c", thresholds.output},
                            {"conditional", "#d62728", thresholds.conditional}};
  for (int s = 0; s < 3; ++s) {
    svg << "<polyline fill=\"none\" stroke=\"" << series[s].color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      double v = s == 0   ? reports[i].input_kl
                 : s == 1 ? reports[i].output_kl
                          : reports[i].conditional_kl.value_or(0.0);
      svg << sx(i) << "," << sy(v) << " ";
    }
    svg << "\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << sy(series[s].threshold)
        << "\" x2=\"" << width - margin << "\" y2=\"" << sy(series[s].threshold)
        << "\" stroke=\"" << series[s].color
        << "\" stroke-dasharray=\"4 3\" stroke-width=\"0.8\"/>\n";
    svg << "<text x=\"" << width - margin + 4 << "\" y=\"" << margin + 14 * (s + 1)
        << "\" fill=\"" << series[s].color << "\" font-size=\"11\">" << series[s].name
        << "</text>\n";
  }
  svg << "<text x=\"" << margin << "\" y=\"" << margin - 8
      << "\" font-size=\"12\">window divergence (nats)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace datactl
