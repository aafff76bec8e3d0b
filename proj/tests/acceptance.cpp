// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits non-zero when any criterion fails.
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "datactl/cli.hpp"
#include "datactl/imagination.hpp"
#include "datactl/kernels.hpp"
#include "datactl/monitor.hpp"
#include "datactl/properties.hpp"
#include "datactl/refsys.hpp"
#include "datactl/retrospect.hpp"
#include "datactl/sysclass.hpp"
#include "datactl/stats.hpp"
#include "datactl/trace.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace datactl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool ok,
            const std::string& detail) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": "
            << what << " — " << detail << '\n';
  if (!ok) ++g_failures;
}

Trace static_trace(std::uint64_t seed, std::size_t n = 10000) {
  GeneratorConfig config;
  config.model = StaticModelParams{{1.0}, 0.1};
  return generate_trace(config, n, seed);
}

Trace nonstat_trace(std::uint64_t seed, std::size_t n = 10000) {
  GeneratorConfig config;
  config.model = ContextModelParams{{1.0}, 0.5, 0.3};
  config.knobs.context.kind = ContextSignal::Kind::Levels;
  config.knobs.context.levels = {0.0, 0.45, 0.9};
  return generate_trace(config, n, seed);
}

Trace dynamic_trace(std::uint64_t seed, std::size_t n = 10000) {
  GeneratorConfig config;
  config.model = DynamicModelParams{};
  return generate_trace(config, n, seed);
}

Trace bernoulli_trace(double p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  Trace t;
  t.meta.x_dim = 1;
  t.meta.y_dim = 1;
  for (std::size_t i = 0; i < n; ++i) {
    t.records.push_back({static_cast<std::int64_t>(i), {0.5},
                         {coin(rng) ? 1.0 : 0.0}, {}, {}});
  }
  return t;
}

// --- criterion 1: divergence estimator accuracy --------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto tp = bernoulli_trace(0.5, 100000, 11);
  const auto tq = bernoulli_trace(0.25, 100000, 12);
  const auto spec = fit_binning(tp, 2, 2);
  const auto p = estimate_conditional(tp.span(), spec);
  const auto q = estimate_conditional(tq.span(), spec);
  const auto weights = pooled_input_marginal(tp.span(), tq.span(), spec);
  const double estimate = conditional_kl(p, q, weights).nats;
  const auto elapsed = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - t0).count();

  const double truth = oracle::bernoulli_kl(0.5, 0.25);  // 0.14384...
  const double err = std::abs(estimate - truth);
  std::ostringstream detail;
  detail << "estimate " << estimate << " vs closed form " << truth << " (|err| "
         << err << " < 0.01), " << elapsed << " s";
  report(1, "binary-output divergence at n=1e5 within 0.01 nats in under 5 s",
         err < 0.01 && elapsed < 5.0, detail.str());
}

// --- criterion 2: predator-prey integration ------------------------------

void criterion_2() {
  LotkaVolterraParams p;  // 1.0 / 0.5 / 0.8 / 0.4, start (3, 2), dt 1e-3
  const auto series = lv_simulate(p, 50.0);
  const double v0 = oracle::lv_invariant(series.front().prey,
                                         series.front().predators,
                                         p.prey_birth_rate, p.predation_rate,
                                         p.predator_death_rate,
                                         p.predator_birth_rate);
  double worst = 0.0;
  for (const auto& s : series) {
    const double v = oracle::lv_invariant(s.prey, s.predators, p.prey_birth_rate,
                                          p.predation_rate, p.predator_death_rate,
                                          p.predator_birth_rate);
    worst = std::max(worst, std::abs(v - v0) / std::abs(v0));
  }

  LotkaVolterraParams eq = p;
  eq.prey0 = p.predator_death_rate / p.predator_birth_rate;
  eq.predators0 = p.prey_birth_rate / p.predation_rate;
  double eq_dev = 0.0;
  for (const auto& s : lv_simulate(eq, 10.0)) {
    eq_dev = std::max({eq_dev, std::abs(s.prey - eq.prey0),
                       std::abs(s.predators - eq.predators0)});
  }
  std::ostringstream detail;
  detail << "invariant drift " << worst << " (<1e-6), equilibrium deviation "
         << eq_dev << " (<1e-9)";
  report(2, "conserved quantity over t=50 at dt=1e-3 and fixed equilibrium",
         worst < 1e-6 && eq_dev < 1e-9, detail.str());
}

// --- criterion 3: system classification ----------------------------------

void criterion_3() {
  int correct_static = 0, correct_nonstat = 0, correct_dynamic = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    if (classify_passive(static_trace(100 + seed)).kind == SystemClassKind::Static) {
      ++correct_static;
    }
    if (classify_passive(nonstat_trace(200 + seed)).kind ==
        SystemClassKind::NonStationary) {
      ++correct_nonstat;
    }
    if (classify_passive(dynamic_trace(300 + seed)).kind ==
        SystemClassKind::Dynamic) {
      ++correct_dynamic;
    }
  }
  std::ostringstream detail;
  detail << "static " << correct_static << "/20, non-stationary " << correct_nonstat
         << "/20, dynamic " << correct_dynamic << "/20 (need >=19 each)";
  report(3, "reference models classified correctly over 20 seeds",
         correct_static >= 19 && correct_nonstat >= 19 && correct_dynamic >= 19,
         detail.str());
}

// --- criterion 4: invariance checking ------------------------------------

void criterion_4() {
  RobustnessSpec spec;
  spec.factors.push_back({"noise", 0.0, 1.0});
  spec.kappa = 0.05;

  int pass_count = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig config;
    config.model = StaticModelParams{{1.0}, 0.1};
    CircumstanceFactor f;
    f.name = "noise";
    config.knobs.factors.push_back(f);
    const auto verdict =
        check_robustness(generate_trace(config, 10000, 400 + seed), spec);
    if (verdict.outcome == Outcome::Pass) ++pass_count;
  }

  int fail_count = 0, identified = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig config;
    config.model = StaticModelParams{{1.0}, 0.1};
    CircumstanceFactor f;
    f.name = "noise";
    f.effect = CircumstanceFactor::Effect::ScaleWeightsAbove;
    f.threshold = 0.75;
    f.factor = 2.0;
    config.knobs.factors.push_back(f);
    const auto verdict =
        check_robustness(generate_trace(config, 10000, 500 + seed), spec);
    if (verdict.outcome == Outcome::Fail) ++fail_count;
    // Every violated pair must involve the top quantile group.
    double top_label = -1.0;
    for (const auto& e : verdict.evidence) {
      top_label = std::max(top_label, std::stod(e.id.substr(e.id.rfind('|') + 1)));
    }
    bool all_point_at_top = false;
    for (const auto& e : verdict.evidence) {
      if (!e.violated) continue;
      all_point_at_top =
          std::stod(e.id.substr(e.id.rfind('|') + 1)) == top_label;
      if (!all_point_at_top) break;
    }
    if (all_point_at_top) ++identified;
  }
  std::ostringstream detail;
  detail << "inert factor PASS " << pass_count << "/20 (>=19), induced change FAIL "
         << fail_count << "/20 with offending pair identified " << identified
         << "/20 (need 20)";
  report(4, "invariance verdicts across circumstance groups",
         pass_count >= 19 && fail_count == 20 && identified == 20, detail.str());
}

// --- criterion 5: sensitivity band ---------------------------------------

void criterion_5() {
  // Band calibrated once from the expected-count closed-form oracle on a
  // dedicated calibration trace, then frozen for all seeds.
  const auto calib = nonstat_trace(999);
  const auto binning = fit_binning(calib, 8, 8);
  oracle::ContextKlOracle o;
  o.weight = 1.0;
  o.ctx_gain = 0.5;
  o.noise_sd = 0.3;
  o.group_n = static_cast<double>(calib.records.size()) / 3.0;
  o.x_edges = binning.x_dims[0].edges;
  o.y_edges = binning.y_dims[0].edges;
  const double tau = 0.5, delta = 0.9;
  const double alpha =
      0.5 * (o.directed(0.0, 0.9) + o.directed(0.9, 0.0)) * tau / delta;

  SensitivitySpec spec;
  spec.factors.push_back({"ctx", tau, alpha, 0.5 * alpha});

  int pass_count = 0;
  bool skipped_ok = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto verdict = check_sensitivity(nonstat_trace(600 + seed), spec);
    if (verdict.outcome == Outcome::Pass) ++pass_count;
    int skipped = 0;
    for (const auto& e : verdict.evidence) {
      if (e.skipped && e.note == "sub-threshold") ++skipped;
    }
    skipped_ok = skipped_ok && skipped == 4;  // both sub-threshold deltas, ordered
  }

  SensitivitySpec off_band = spec;
  off_band.factors[0].ratio = 10.0 * alpha;
  off_band.factors[0].tolerance = 5.0 * alpha;
  int fail_count = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto verdict = check_sensitivity(nonstat_trace(700 + seed), off_band);
    bool all_violated = verdict.outcome == Outcome::Fail;
    for (const auto& e : verdict.evidence) {
      if (!e.skipped) all_violated = all_violated && e.violated;
    }
    if (all_violated) ++fail_count;
  }

  // Identical halves labelled 0 and 2*tau: zero divergence under a positive
  // lower band.
  int zero_fail = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(800 + seed);
    std::normal_distribution<double> g;
    Trace trace;
    trace.meta.x_dim = 1;
    trace.meta.y_dim = 1;
    trace.meta.circ_vocabulary = {"ctx"};
    std::vector<std::pair<double, double>> base;
    for (int i = 0; i < 1000; ++i) base.emplace_back(g(rng), g(rng));
    std::int64_t t = 0;
    for (double lambda : {0.0, 2.0 * tau}) {
      for (const auto& [x, y] : base) {
        trace.records.push_back({t++, {x}, {y}, {{"ctx", lambda}}, {}});
      }
    }
    if (check_sensitivity(trace, spec).outcome == Outcome::Fail) ++zero_fail;
  }

  std::ostringstream detail;
  detail << "calibrated band PASS " << pass_count << "/20 (>=19, alpha=" << alpha
         << "), identical segments FAIL " << zero_fail
         << "/20, 10x band FAIL on every pair " << fail_count
         << "/20, sub-threshold reporting " << (skipped_ok ? "ok" : "broken");
  report(5, "responsiveness band verdicts",
         pass_count >= 19 && zero_fail == 20 && fail_count == 20 && skipped_ok,
         detail.str());
}

// --- criterion 6: window-to-window divergence stability -------------------

void criterion_6() {
  // (a) Identical windows: zero divergence, non-increase holds at zero slack.
  bool constant_ok = true;
  {
    Trace trace;
    trace.meta.x_dim = 1;
    trace.meta.y_dim = 1;
    for (int i = 0; i < 4000; ++i) {
      const double v = static_cast<double>(i % 8);
      trace.records.push_back({i, {v}, {0.5 * v}, {}, {}});
    }
    for (double slack : {0.0, 0.01, 0.02}) {
      StabilityParams params;
      params.width = 500;
      params.stride = 500;
      params.slack = slack;
      constant_ok = constant_ok &&
                    check_stability(trace, params).outcome == Outcome::Pass;
    }
  }

  // (b) Contracting state with a marked disturbance: pass after the grace
  // region. Slack 0.12 absorbs the estimation noise of the wide recurrent
  // conditional at this window size (calibrated by simulation).
  int kick_pass = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig config;
    config.model = DynamicModelParams{};
    Intervention iv;
    iv.at_index = 10000;
    iv.kind = Intervention::Kind::StateKick;
    iv.amount = 30.0;
    config.knobs.interventions.push_back(iv);
    const auto trace = generate_trace(config, 20000, 900 + seed);
    StabilityParams params;
    params.width = 1000;
    params.stride = 500;
    params.slack = 0.12;
    params.grace = 2;
    if (check_stability(trace, params).outcome == Outcome::Pass) ++kick_pass;
  }

  // (c) Unmarked random-walk drift of the relationship: must fail.
  int drift_fail = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig config;
    config.model = StaticModelParams{{1.0}, 0.1};
    config.knobs.latent_drift_sd = 0.05;
    const auto trace = generate_trace(config, 10000, 1000 + seed);
    StabilityParams params;
    params.width = 500;
    params.stride = 500;
    params.slack = 0.02;
    const auto verdict = check_stability(trace, params);
    std::size_t violations = 0;
    for (const auto& e : verdict.evidence) violations += e.violated ? 1 : 0;
    if (verdict.outcome == Outcome::Fail && violations >= 1) ++drift_fail;
  }

  std::ostringstream detail;
  detail << "identical windows pass at slack 0/0.01/0.02: "
         << (constant_ok ? "yes" : "no") << ", contracting+marked kick PASS "
         << kick_pass << "/20, drifting weights FAIL " << drift_fail << "/20";
  report(6, "divergence non-increase outside marked-change grace regions",
         constant_ok && kick_pass == 20 && drift_fail == 20, detail.str());
}

// --- criterion 7: shift taxonomy -----------------------------------------

void criterion_7() {
  const auto dev = static_trace(777);
  const auto profile = build_reference(dev);

  auto label_rate = [&](const Trace& stream, std::size_t width, ShiftLabel want) {
    const auto result = monitor_stream(stream.span(), profile, width);
    std::size_t hit = 0;
    for (const auto& r : result.reports) hit += r.label == want ? 1 : 0;
    return std::make_pair(hit, result.reports.size());
  };

  const auto null_stream = static_trace(778);
  const auto [null_hit, null_n] = label_rate(null_stream, 500, ShiftLabel::None);

  GeneratorConfig cov;
  cov.model = StaticModelParams{{1.0}, 0.1};
  cov.input.mean = 3.0;
  const auto [cov_hit, cov_n] =
      label_rate(generate_trace(cov, 10000, 779), 500, ShiftLabel::Covariate);

  GeneratorConfig con;
  con.model = StaticModelParams{{2.0}, 0.1};
  const auto [con_hit, con_n] =
      label_rate(generate_trace(con, 10000, 780), 500, ShiftLabel::Concept);

  GeneratorConfig anti;
  anti.model = AnticausalModelParams{};
  const auto anti_profile = build_reference(generate_trace(anti, 20000, 781));
  GeneratorConfig anti_shift = anti;
  anti_shift.model = AnticausalModelParams{0.55, 1.0, 1.0};
  const auto target_stream = generate_trace(anti_shift, 20000, 782);
  const auto target_result = monitor_stream(target_stream.span(), anti_profile, 1000);
  std::size_t tgt_hit = 0;
  for (const auto& r : target_result.reports) {
    tgt_hit += r.label == ShiftLabel::Target ? 1 : 0;
  }
  const std::size_t tgt_n = target_result.reports.size();

  const auto anti_null = generate_trace(anti, 10000, 783);
  const auto anti_null_result = monitor_stream(anti_null.span(), anti_profile, 1000);
  std::size_t anti_null_hit = 0;
  for (const auto& r : anti_null_result.reports) {
    anti_null_hit += r.label == ShiftLabel::None ? 1 : 0;
  }

  const bool ok = null_hit * 100 >= null_n * 95 &&
                  cov_hit * 100 >= cov_n * 90 && con_hit * 100 >= con_n * 90 &&
                  tgt_hit * 100 >= tgt_n * 90 &&
                  anti_null_hit * 100 >= anti_null_result.reports.size() * 95;
  std::ostringstream detail;
  detail << "null none " << null_hit << "/" << null_n << ", covariate " << cov_hit
         << "/" << cov_n << ", concept " << con_hit << "/" << con_n << ", target "
         << tgt_hit << "/" << tgt_n << ", anticausal null " << anti_null_hit << "/"
         << anti_null_result.reports.size();
  report(7, "shift labels (>=90% shifted, >=95% null)", ok, detail.str());
}

// --- criterion 8: hazard-imagination pipeline ----------------------------

void criterion_8() {
  const auto profile = build_reference(static_trace(801));
  std::vector<HazardTemplate> kb;
  {
    HazardTemplate a;
    a.id = "surge";
    a.offset = {1.0};
    a.jitter_sd = {0.05};
    a.prior = 0.8;
    a.severity = 0.9;
    kb.push_back(a);
    HazardTemplate b;
    b.id = "stall";
    b.offset = {-1.0};
    b.prior = 0.6;
    b.severity = 1.0;
    kb.push_back(b);
  }

  std::vector<TraceRecord> stream;
  std::mt19937_64 rng(802);
  std::normal_distribution<double> g;
  for (int i = 0; i < 400; ++i) {
    TraceRecord r;
    r.t = i;
    r.x = {g(rng)};
    r.y = {r.x[0]};
    if (i % 37 == 20) r.x[0] = std::nan("");
    if (i % 53 == 40) r.x[0] = 50.0;
    stream.push_back(r);
  }

  auto run_once = [&] {
    ImaginationPipeline pipeline(profile, kb, 2);
    std::vector<PipelineOutput> outs;
    for (const auto& r : stream) outs.push_back(pipeline.process(r));
    return outs;
  };

  const auto first = run_once();
  bool risk_exact = true, nan_substituted = false, any_misuse = false;
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (const auto& c : first[i].substitutes) {
      risk_exact = risk_exact && c.risk == c.probability * c.severity;
    }
    if (first[i].misuse) {
      any_misuse = true;
      if (std::isnan(stream[i].x[0]) && !first[i].substitutes.empty()) {
        nan_substituted = true;
      }
    }
  }

  bool deterministic = true;
  for (int rep = 0; rep < 4 && deterministic; ++rep) {
    const auto again = run_once();
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (again[i].misuse != first[i].misuse ||
          again[i].substitutes.size() != first[i].substitutes.size()) {
        deterministic = false;
        break;
      }
      for (std::size_t c = 0; c < first[i].substitutes.size(); ++c) {
        if (again[i].substitutes[c].input != first[i].substitutes[c].input ||
            again[i].substitutes[c].risk != first[i].substitutes[c].risk) {
          deterministic = false;
          break;
        }
      }
    }
  }

  std::ostringstream detail;
  detail << "risk product exact: " << (risk_exact ? "yes" : "no")
         << ", 5-run replay identical: " << (deterministic ? "yes" : "no")
         << ", NaN record substituted: " << (nan_substituted ? "yes" : "no");
  report(8, "imagination pipeline exactness and determinism",
         risk_exact && deterministic && nan_substituted && any_misuse, detail.str());
}

// --- criterion 9: trust estimator ----------------------------------------

void criterion_9() {
  // Perfect predictions pin trust at exactly 1.
  TrustState perfect;
  const std::vector<double> unit{1.0};
  for (int i = 0; i < 100; ++i) {
    PredictionPair p;
    p.t = i;
    p.predicted = {3.0};
    p.realized = {3.0};
    perfect.update(p, unit);
  }
  const bool exact_one = perfect.trust() == 1.0;

  // Constant unit discrepancy converges to exp(-1) within 10 H updates.
  TrustOptions opts;
  opts.window = 50;
  opts.beta = 1.0;
  TrustState constant(opts);
  for (std::size_t i = 0; i < 10 * opts.window; ++i) {
    PredictionPair p;
    p.t = static_cast<std::int64_t>(i);
    p.predicted = {1.0};
    p.realized = {0.0};
    constant.update(p, unit);
  }
  const double gap = std::abs(constant.trust() - std::exp(-1.0));

  // Pointwise-increased replays never end with more trust.
  std::mt19937_64 rng(901);
  std::exponential_distribution<double> d0(0.5);
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  bool monotone = true;
  for (int trial = 0; trial < 100 && monotone; ++trial) {
    TrustState a, b;
    for (int i = 0; i < 80; ++i) {
      const double base = d0(rng);
      PredictionPair pa, pb;
      pa.t = pb.t = i;
      pa.predicted = {base};
      pa.realized = {0.0};
      pb.predicted = {base + bump(rng)};
      pb.realized = {0.0};
      a.update(pa, unit);
      b.update(pb, unit);
    }
    monotone = b.trust() <= a.trust();
  }

  std::ostringstream detail;
  detail << "perfect trust == 1: " << (exact_one ? "yes" : "no")
         << ", |trust - e^-1| = " << gap << " (<=1e-3), monotone replays: "
         << (monotone ? "100/100" : "violated");
  report(9, "trust estimator exactness, convergence, monotonicity",
         exact_one && gap <= 1e-3 && monotone, detail.str());
}

// --- criterion 10: CLI exit-code and report contract ----------------------

struct CliFixture {
  fs::path dir;
  std::string good_trace, short_trace, rigged_trace, pairs, kb, rob_spec,
      vac_spec, bad_file;

  CliFixture() {
    dir = fs::temp_directory_path() /
          ("datactl_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    good_trace = (dir / "good.jsonl").string();
    write_trace(static_trace(10'001, 1500), good_trace);
    short_trace = (dir / "short.jsonl").string();
    write_trace(static_trace(10'002, 120), short_trace);

    GeneratorConfig rigged;
    rigged.model = StaticModelParams{{1.0}, 0.1};
    CircumstanceFactor f;
    f.name = "noise";
    f.effect = CircumstanceFactor::Effect::ScaleWeightsAbove;
    f.threshold = 0.75;
    f.factor = 2.0;
    rigged.knobs.factors.push_back(f);
    rigged_trace = (dir / "rigged.jsonl").string();
    write_trace(generate_trace(rigged, 6000, 10'003), rigged_trace);

    pairs = (dir / "pairs.jsonl").string();
    {
      std::ofstream out(pairs);
      std::mt19937_64 rng(10'004);
      std::normal_distribution<double> g;
      for (int i = 0; i < 100; ++i) {
        const double y = g(rng);
        out << "{\"t\":" << i << ",\"y_hat\":[" << y + 0.05 * g(rng)
            << "],\"y\":[" << y << "]}\n";
      }
    }
    kb = (dir / "kb.json").string();
    {
      std::ofstream out(kb);
      out << R"([{"id":"surge","offset":[1.0],"prior":0.8,"severity":0.9}])";
    }
    rob_spec = (dir / "rob.json").string();
    {
      std::ofstream out(rob_spec);
      out << R"({"kappa":0.05,"factors":[{"name":"noise","low":0.0,"high":1.0}]})";
    }
    vac_spec = (dir / "vac.json").string();
    {
      std::ofstream out(vac_spec);
      out << R"({"factors":[{"name":"noise","threshold":99.0,"ratio":1.0,"tolerance":0.5}]})";
    }
    bad_file = (dir / "bad.jsonl").string();
    std::ofstream(bad_file) << "definitely not json\n";
  }
  ~CliFixture() { fs::remove_all(dir); }

  std::string out_file(int i) const {
    return (dir / ("out_" + std::to_string(i) + ".json")).string();
  }
};

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"datactl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return datactl::cli::run(static_cast<int>(argv.size()), argv.data());
}

bool report_parses(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) return false;
  std::string line;
  bool any = false;
  // Accept a pretty-printed object or line-delimited records.
  std::stringstream whole;
  whole << in.rdbuf();
  const std::string text = whole.str();
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("pass")) {
      // Verdict reports: a fail needs violated evidence, a pass forbids it,
      // and an indeterminate verdict never passes.
      bool any_violated = false;
      for (const auto& e : j.at("evidence")) {
        any_violated = any_violated || e.value("violated", false);
      }
      if (j.at("outcome") == "indeterminate") {
        return !j.at("pass").get<bool>() && !any_violated;
      }
      return j.at("pass").get<bool>() == !any_violated;
    }
    return true;
  } catch (const nlohmann::json::parse_error&) {
    // JSONL: every line must parse.
    std::istringstream lines(text);
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      try {
        const auto parsed = nlohmann::json::parse(line);
        any = parsed.is_object();
      } catch (const nlohmann::json::parse_error&) {
        return false;
      }
    }
    return any;
  }
}

void criterion_10() {
  CliFixture fx;
  std::mt19937_64 rng(10'005);
  std::uniform_int_distribution<int> pick(0, 13);

  int checked = 0, correct = 0, parse_ok = 0, parse_total = 0;
  for (int i = 0; i < 1000; ++i) {
    const int kind = pick(rng);
    int expected = -1, got = -2;
    std::string out = fx.out_file(i % 7);
    bool check_report = false;
    switch (kind) {
      case 0:
        expected = 0;
        got = run_cli({"classify", "--trace", fx.good_trace, "--out", out});
        check_report = true;
        break;
      case 1:
        expected = 3;
        got = run_cli({"classify", "--trace", fx.short_trace});
        break;
      case 2:
        expected = 3;
        got = run_cli({"classify", "--trace", (fx.dir / "missing.jsonl").string()});
        break;
      case 3:
        expected = 3;
        got = run_cli({"frobnicate"});
        break;
      case 4:
        expected = 3;
        got = run_cli({"classify", "--trace", fx.good_trace, "--bogus-flag"});
        break;
      case 5:
        expected = 2;
        got = run_cli({"check-stability", "--trace", fx.short_trace, "--window",
                       "500", "--stride", "500", "--out", out});
        check_report = true;
        break;
      case 6:
        expected = 1;
        got = run_cli({"check-robustness", "--trace", fx.rigged_trace, "--spec",
                       fx.rob_spec, "--out", out});
        check_report = true;
        break;
      case 7:
        expected = 2;
        got = run_cli({"check-sensitivity", "--trace", fx.rigged_trace, "--spec",
                       fx.vac_spec, "--out", out});
        check_report = true;
        break;
      case 8:
        expected = 0;
        got = run_cli({"trust", "--pairs", fx.pairs, "--out", out});
        check_report = true;
        break;
      case 9:
        expected = 3;
        got = run_cli({"trust", "--pairs", fx.bad_file});
        break;
      case 10:
        expected = 0;
        got = run_cli({"monitor", "--reference", fx.good_trace, "--stream",
                       fx.good_trace, "--width", "500", "--out", out});
        check_report = true;
        break;
      case 11:
        expected = 2;
        got = run_cli({"monitor", "--reference", fx.good_trace, "--stream",
                       fx.short_trace, "--width", "500", "--out", out});
        break;
      case 12:
        expected = 0;
        got = run_cli({"imagine", "--reference", fx.good_trace, "--stream",
                       fx.short_trace, "--kb", fx.kb, "--out", out});
        check_report = true;
        break;
      case 13:
        expected = 3;
        got = run_cli({"simulate", "--system", "nonesuch", "--out", out});
        break;
    }
    ++checked;
    if (got == expected) ++correct;
    if (check_report && got == expected) {
      ++parse_total;
      if (report_parses(out)) ++parse_ok;
    }
  }
  std::ostringstream detail;
  detail << correct << "/" << checked << " exit codes as expected, " << parse_ok
         << "/" << parse_total << " emitted reports parse with consistent verdicts";
  report(10, "exit-code and report contract over 1000 randomized invocations",
         correct == checked && parse_ok == parse_total, detail.str());
}

}  // namespace

int main() {
  std::cout << "acceptance suite (kernel backend: "
            << datactl::kernels::backend_name() << ")\n";
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                : std::to_string(g_failures) + " CRITERIA FAILED")
            << '\n';
  return g_failures == 0 ? 0 : 1;
}
