// SPDX-License-Identifier: Apache-2.0
#include "datactl/monitor.hpp"

#include <cmath>
#include <random>

#include "datactl/error.hpp"
#include "datactl/refsys.hpp"
#include "doctest.h"

using namespace datactl;

namespace {

Trace static_trace(std::uint64_t seed, std::size_t n = 10000) {
  GeneratorConfig config;
  config.model = StaticModelParams{{1.0}, 0.1};
  return generate_trace(config, n, seed);
}

Trace shifted_input_trace(std::uint64_t seed, std::size_t n, double mean_shift) {
  GeneratorConfig config;
  config.model = StaticModelParams{{1.0}, 0.1};
  config.input.mean = mean_shift;
  return generate_trace(config, n, seed);
}

Trace doubled_weight_trace(std::uint64_t seed, std::size_t n) {
  GeneratorConfig config;
  config.model = StaticModelParams{{2.0}, 0.1};
  return generate_trace(config, n, seed);
}

TraceRecord record_at(double x) {
  TraceRecord r;
  r.x = {x};
  r.y = {x};
  return r;
}

}  // namespace

TEST_CASE("reference profiles need a thousand records") {
  CHECK_THROWS_AS(build_reference(static_trace(1, 999)), Error);
  CHECK_NOTHROW(build_reference(static_trace(1, 1000)));
}

TEST_CASE("profile re-scores its own trace as unshifted") {
  const auto dev = static_trace(2);
  const auto profile = build_reference(dev);
  const auto result = monitor_stream(dev.span(), profile, 500);
  REQUIRE(result.reports.size() == 20);
  std::size_t none = 0;
  for (const auto& r : result.reports) {
    if (r.label == ShiftLabel::None) ++none;
    REQUIRE(r.conditional_kl.has_value());
    CHECK(*r.conditional_kl < 0.1);
  }
  CHECK(none >= 19);  // >= 95% of windows
}

TEST_CASE("density floor separates the mode from the far tail") {
  MonitorOptions opts;
  opts.x_bins = 12;  // fine enough that the 1% floor sits above the edge cells
  const auto profile = build_reference(static_trace(3), opts);

  bool clamped = false;
  const auto mode_cell = profile.input_marginal.cell_of(std::vector<double>{0.0},
                                                        &clamped);
  CHECK(profile.input_marginal.smoothed_probability(mode_cell) >
        profile.density_floor);
  const auto tail_cell = profile.input_marginal.cell_of(std::vector<double>{6.0},
                                                        &clamped);
  CHECK(profile.input_marginal.smoothed_probability(tail_cell) <
        profile.density_floor);
}

TEST_CASE("record-level tags") {
  MonitorOptions opts;
  opts.x_bins = 12;
  const auto profile = build_reference(static_trace(4), opts);

  CHECK(classify_ood_record(record_at(0.0), profile).empty());

  TraceRecord nan_rec = record_at(0.0);
  nan_rec.x[0] = std::nan("");
  const auto nan_tags = classify_ood_record(nan_rec, profile);
  CHECK(nan_tags == std::set<OodTag>{OodTag::DataCharacteristics});

  const auto tail_tags = classify_ood_record(record_at(6.0), profile);
  CHECK(tail_tags == std::set<OodTag>{OodTag::Outlier});
}

TEST_CASE("declared feature ranges add data-characteristics tags") {
  auto profile = build_reference(static_trace(5));
  profile.declared_input_ranges = {{-3.0, 3.0}};
  const auto tags = classify_ood_record(record_at(3.5), profile);
  CHECK(tags.count(OodTag::DataCharacteristics) == 1);
}

TEST_CASE("shift labels: covariate, concept, target, null") {
  const auto profile = build_reference(static_trace(6));

  auto labels = [&](const Trace& stream, std::size_t width) {
    const auto result = monitor_stream(stream.span(), profile, width);
    std::vector<ShiftLabel> out;
    for (const auto& r : result.reports) out.push_back(r.label);
    return out;
  };

  for (const auto label : labels(shifted_input_trace(7, 4000, 3.0), 500)) {
    CHECK(label == ShiftLabel::Covariate);
  }
  for (const auto label : labels(doubled_weight_trace(8, 4000), 500)) {
    CHECK(label == ShiftLabel::Concept);
  }

  // Anticausal reference; output-prior shift in the runtime stream.
  GeneratorConfig anti;
  anti.model = AnticausalModelParams{};
  const auto anti_dev = generate_trace(anti, 20000, 9);
  const auto anti_profile = build_reference(anti_dev);
  GeneratorConfig shifted = anti;
  shifted.model = AnticausalModelParams{0.55, 1.0, 1.0};
  const auto target_stream = generate_trace(shifted, 4000, 10);
  const auto reports = monitor_stream(target_stream.span(), anti_profile, 1000);
  std::size_t target_count = 0;
  for (const auto& r : reports.reports) {
    if (r.label == ShiftLabel::Target) ++target_count;
  }
  CHECK(target_count >= 3);  // of 4 windows

  const auto null_stream = generate_trace(anti, 4000, 11);
  for (const auto& r : monitor_stream(null_stream.span(), anti_profile, 1000).reports) {
    CHECK(r.label == ShiftLabel::None);
  }
}

TEST_CASE("label none iff all three statistics sit below their thresholds") {
  const auto profile = build_reference(static_trace(12));
  const ShiftThresholds th;
  for (std::uint64_t seed : {13, 14}) {
    const auto stream = shifted_input_trace(seed, 3000, 1.0);  // mild shift
    for (const auto& r : monitor_stream(stream.span(), profile, 500).reports) {
      const bool below = r.input_kl <= th.input && r.output_kl <= th.output &&
                         (!r.conditional_kl.has_value() ||
                          *r.conditional_kl <= th.conditional);
      CHECK((r.label == ShiftLabel::None) == below);
    }
  }
}

TEST_CASE("lowering the floor only shrinks the flagged set") {
  auto profile = build_reference(static_trace(15));
  const auto stream = shifted_input_trace(16, 2000, 2.0);

  auto flagged = [&](double floor) {
    profile.density_floor = floor;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < stream.records.size(); ++i) {
      if (!classify_ood_record(stream.records[i], profile).empty()) out.push_back(i);
    }
    return out;
  };
  const auto high = flagged(profile.density_floor);
  const auto low = flagged(profile.density_floor * 0.25);
  CHECK(low.size() <= high.size());
  for (const auto idx : low) {
    CHECK(std::find(high.begin(), high.end(), idx) != high.end());
  }
}

TEST_CASE("monitoring is deterministic in the record order") {
  const auto profile = build_reference(static_trace(17));
  const auto stream = shifted_input_trace(18, 3000, 3.0);
  const auto a = monitor_stream(stream.span(), profile, 500);
  const auto b = monitor_stream(stream.span(), profile, 500);
  REQUIRE(a.reports.size() == b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(a.reports[i].label == b.reports[i].label);
    CHECK(a.reports[i].input_kl == b.reports[i].input_kl);
    CHECK(a.reports[i].flagged_records == b.reports[i].flagged_records);
  }
}

TEST_CASE("dimension mismatch and short streams") {
  const auto profile = build_reference(static_trace(19));
  Trace bad;
  bad.meta.x_dim = 2;
  bad.meta.y_dim = 1;
  bad.records.push_back({0, {1.0, 2.0}, {0.5}, {}, {}});
  CHECK_THROWS_AS(monitor_stream(bad.span(), profile, 500), Error);

  const auto tiny = static_trace(20, 100);
  const auto result = monitor_stream(tiny.span(), profile, 500);
  CHECK(result.reports.empty());
  REQUIRE(!result.warnings.empty());
  CHECK(result.warnings.front().find("no complete window") != std::string::npos);
}

TEST_CASE("svg rendering") {
  const auto profile = build_reference(static_trace(21));
  const auto stream = static_trace(22, 2000);
  const auto result = monitor_stream(stream.span(), profile, 500);
  const auto svg = render_kl_series_svg(result.reports, {});
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
}
