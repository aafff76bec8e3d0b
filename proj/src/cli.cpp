// SPDX-License-Identifier: Apache-2.0
#include "datactl/cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "datactl/error.hpp"
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

namespace datactl::cli {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitIndeterminate = 2;
constexpr int kExitError = 3;

// Flag > config-file value > built-in default.
class ConfigBinder {
 public:
  template <typename T>
  void bind(CLI::Option* opt, T* target, std::string key) {
    appliers_.push_back([opt, target, key = std::move(key)](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) {
        *target = cfg.at(key).get<T>();
      }
    });
  }
  void apply(const json& cfg) const {
    for (const auto& f : appliers_) f(cfg);
  }

 private:
  std::vector<std::function<void(const json&)>> appliers_;
};

struct Output {
  explicit Output(std::string p) : path(std::move(p)) {}

  std::string path;  // empty: stdout
  std::ofstream file;
  std::ostream* stream = &std::cout;

  void open() {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw Error("cannot open output file: " + path);
    stream = &file;
  }
};

json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(std::string("cannot open ") + what + ": " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed ") + what + ": " + e.what());
  }
  return j;
}

GeneratorConfig generator_from_json(const std::string& system, const json& p) {
  GeneratorConfig config;
  if (system == "static") {
    StaticModelParams m;
    if (p.contains("weights")) m.weights = p["weights"].get<std::vector<double>>();
    m.noise_sd = p.value("noise_sd", m.noise_sd);
    config.model = m;
  } else if (system == "nonstat") {
    ContextModelParams m;
    if (p.contains("weights")) m.weights = p["weights"].get<std::vector<double>>();
    m.ctx_gain = p.value("ctx_gain", m.ctx_gain);
    m.noise_sd = p.value("noise_sd", m.noise_sd);
    config.model = m;
    // A context-conditioned model without a context signal degenerates to a
    // fixed map; default to three equal blocks.
    config.knobs.context.kind = ContextSignal::Kind::Levels;
    config.knobs.context.levels = {0.0, 0.45, 0.9};
  } else if (system == "dynamic") {
    DynamicModelParams m;
    m.contraction = p.value("contraction", m.contraction);
    m.input_gain = p.value("input_gain", m.input_gain);
    m.state_gain = p.value("state_gain", m.state_gain);
    m.feedthrough = p.value("feedthrough", m.feedthrough);
    m.noise_sd = p.value("noise_sd", m.noise_sd);
    config.model = m;
  } else {
    throw Error("unknown system \"" + system + "\"");
  }
  if (p.contains("input")) {
    const auto& in = p["input"];
    config.input.dim = in.value("dim", config.input.dim);
    config.input.mean = in.value("mean", config.input.mean);
    config.input.sd = in.value("sd", config.input.sd);
  }
  if (p.contains("knobs")) {
    const auto& k = p["knobs"];
    if (k.contains("interventions")) {
      for (const auto& iv : k["interventions"]) {
        Intervention out;
        out.at_index = iv.at("at").get<std::int64_t>();
        const std::string kind = iv.value("kind", "scale_weights");
        if (kind == "scale_weights") {
          out.kind = Intervention::Kind::ScaleWeights;
        } else if (kind == "state_kick") {
          out.kind = Intervention::Kind::StateKick;
        } else {
          throw Error("unknown intervention kind \"" + kind + "\"");
        }
        out.amount = iv.value("amount", out.amount);
        config.knobs.interventions.push_back(out);
      }
    }
    if (k.contains("context")) {
      const auto& c = k["context"];
      const std::string kind = c.value("kind", "none");
      if (kind == "none") {
        config.knobs.context.kind = ContextSignal::Kind::None;
      } else if (kind == "levels") {
        config.knobs.context.kind = ContextSignal::Kind::Levels;
        config.knobs.context.levels = c.at("levels").get<std::vector<double>>();
      } else if (kind == "sine") {
        config.knobs.context.kind = ContextSignal::Kind::Sine;
        config.knobs.context.period = c.value("period", config.knobs.context.period);
      } else if (kind == "walk") {
        config.knobs.context.kind = ContextSignal::Kind::Walk;
        config.knobs.context.walk_sd = c.value("walk_sd", config.knobs.context.walk_sd);
      } else {
        throw Error("unknown context kind \"" + kind + "\"");
      }
    }
    if (k.contains("factors")) {
      for (const auto& f : k["factors"]) {
        CircumstanceFactor out;
        out.name = f.at("name").get<std::string>();
        const std::string effect = f.value("effect", "inert");
        if (effect == "inert") {
          out.effect = CircumstanceFactor::Effect::Inert;
        } else if (effect == "scale_noise") {
          out.effect = CircumstanceFactor::Effect::ScaleNoise;
        } else if (effect == "scale_weights_above") {
          out.effect = CircumstanceFactor::Effect::ScaleWeightsAbove;
        } else {
          throw Error("unknown factor effect \"" + effect + "\"");
        }
        out.low = f.value("low", out.low);
        out.high = f.value("high", out.high);
        out.threshold = f.value("threshold", out.threshold);
        out.factor = f.value("factor", out.factor);
        config.knobs.factors.push_back(out);
      }
    }
    config.knobs.latent_drift_sd = k.value("latent_drift_sd", 0.0);
    config.knobs.confounder_coupling = k.value("confounder_coupling", 0.0);
    config.knobs.environment_tag = k.value("environment_tag", std::string("refsys"));
  }
  return config;
}

Trace lv_trace(const json& p, std::size_t n) {
  LotkaVolterraParams params;
  params.prey_birth_rate = p.value("prey_birth_rate", params.prey_birth_rate);
  params.predation_rate = p.value("predation_rate", params.predation_rate);
  params.predator_death_rate = p.value("predator_death_rate", params.predator_death_rate);
  params.predator_birth_rate = p.value("predator_birth_rate", params.predator_birth_rate);
  params.prey0 = p.value("prey0", params.prey0);
  params.predators0 = p.value("predators0", params.predators0);
  params.dt = p.value("dt", 1e-3);
  const std::size_t emit_every = p.value("emit_every", std::size_t{10});
  if (emit_every < 1) throw Error("emit_every must be >= 1");

  const double t_end = params.dt * static_cast<double>(emit_every) *
                       static_cast<double>(n);
  const auto series = lv_simulate(params, t_end);
  Trace trace;
  trace.meta.x_dim = 2;
  trace.meta.y_dim = 2;
  trace.meta.source = "lotka-volterra";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& now = series[i * emit_every];
    const auto& next = series[(i + 1) * emit_every];
    TraceRecord rec;
    rec.t = static_cast<std::int64_t>(i);
    rec.x = {now.prey, now.predators};
    rec.y = {next.prey, next.predators};
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

ojson classify_report(const SystemClass& result) {
  ojson j;
  j["class"] = to_string(result.kind);
  j["confidence"] = result.confidence;
  j["segment_stat"] = result.evidence.segment_stat;
  j["memory_stat"] = result.evidence.memory_stat;
  j["memory_conclusive"] = result.evidence.memory_conclusive;
  auto dump_stats = [](const std::vector<ClassStat>& stats) {
    ojson arr = ojson::array();
    for (const auto& s : stats) {
      arr.push_back(ojson{{"id", s.id}, {"value", s.value}});
    }
    return arr;
  };
  j["segment_pairs"] = dump_stats(result.evidence.segment_pairs);
  j["memory_cells"] = dump_stats(result.evidence.memory_cells);
  if (!result.evidence.warnings.empty()) j["warnings"] = result.evidence.warnings;
  return j;
}

void annotate_model(ojson& report, const std::string& descriptor_path) {
  if (descriptor_path.empty()) return;
  const ModelDescriptor d = load_model_descriptor(descriptor_path);
  ojson m;
  m["name"] = d.name;
  if (!d.environment_id.empty()) m["environment"] = d.environment_id;
  if (!d.parameter_tag.empty()) m["parameter_tag"] = d.parameter_tag;
  if (!d.loss_name.empty()) m["loss"] = d.loss_name;
  report["model"] = std::move(m);
}

int emit_verdict(const Verdict& verdict, Output& out,
                 const std::string& descriptor_path = "") {
  out.open();
  ojson report = to_json(verdict);
  annotate_model(report, descriptor_path);
  *out.stream << report.dump(2) << '\n';
  std::cerr << verdict.summary << '\n';
  for (const auto& w : verdict.warnings) std::cerr << "warning: " << w << '\n';
  return exit_code(verdict.outcome);
}

int run_or_report(const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"statistical input-output analysis toolkit"};
  app.set_version_flag("--version", std::string("datactl ") + kVersion);
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file; explicit flags take precedence");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "generate a reference-system trace");
  sim->fallthrough();
  std::string sim_system;
  std::string sim_params_path, sim_out;
  std::size_t sim_n = 10000;
  std::uint64_t sim_seed = 7;
  ConfigBinder sim_cfg;
  sim_cfg.bind(sim->add_option("--system", sim_system,
                               "one of lv|static|nonstat|dynamic")
                   ->check(CLI::IsMember({"lv", "static", "nonstat", "dynamic"})),
               &sim_system, "system");
  sim_cfg.bind(sim->add_option("--params", sim_params_path, "model parameter JSON"),
               &sim_params_path, "params");
  sim_cfg.bind(sim->add_option("--n", sim_n, "records to generate"), &sim_n, "n");
  sim_cfg.bind(sim->add_option("--seed", sim_seed, "generator seed"), &sim_seed,
               "seed");
  sim_cfg.bind(sim->add_option("--out", sim_out, "output trace path (default stdout)"),
               &sim_out, "out");

  // ---- classify ----
  auto* cls = app.add_subcommand("classify", "classify a system from a trace");
  cls->fallthrough();
  std::string cls_trace, cls_out, cls_dump, cls_descriptor;
  ClassifyOptions cls_opts;
  bool cls_lenient = false;
  ConfigBinder cls_cfg;
  cls_cfg.bind(cls->add_option("--trace", cls_trace, "trace file")->required(),
               &cls_trace, "trace");
  cls_cfg.bind(cls->add_option("--segments", cls_opts.segments, "temporal segments"),
               &cls_opts.segments, "segments");
  cls_cfg.bind(cls->add_option("--kappa", cls_opts.kappa, "class tolerance (nats)"),
               &cls_opts.kappa, "kappa");
  cls_cfg.bind(cls->add_option("--x-bins", cls_opts.x_bins, "input bins per dim"),
               &cls_opts.x_bins, "x-bins");
  cls_cfg.bind(cls->add_option("--y-bins", cls_opts.y_bins, "output bins per dim"),
               &cls_opts.y_bins, "y-bins");
  cls->add_flag("--lenient", cls_lenient, "ignore unknown trace keys");
  cls->add_option("--out", cls_out, "report path (default stdout)");
  cls->add_option("--dump-dist", cls_dump, "dump the fitted distributions (JSONL)");
  cls->add_option("--descriptor", cls_descriptor,
                  "model descriptor JSON to annotate the report");

  // ---- check-robustness ----
  auto* rob = app.add_subcommand("check-robustness",
                                 "invariance across declared circumstances");
  rob->fallthrough();
  std::string rob_trace, rob_spec, rob_out, rob_descriptor;
  CheckOptions rob_opts;
  bool rob_lenient = false;
  ConfigBinder rob_cfg;
  rob_cfg.bind(rob->add_option("--trace", rob_trace, "trace file")->required(),
               &rob_trace, "trace");
  rob_cfg.bind(rob->add_option("--spec", rob_spec, "robustness spec JSON")->required(),
               &rob_spec, "spec");
  rob_cfg.bind(rob->add_option("--x-bins", rob_opts.x_bins, "input bins per dim"),
               &rob_opts.x_bins, "x-bins");
  rob_cfg.bind(rob->add_option("--y-bins", rob_opts.y_bins, "output bins per dim"),
               &rob_opts.y_bins, "y-bins");
  rob->add_flag("--lenient", rob_lenient, "ignore unknown trace keys");
  rob->add_option("--out", rob_out, "report path (default stdout)");
  rob->add_option("--descriptor", rob_descriptor,
                  "model descriptor JSON to annotate the report");

  // ---- check-sensitivity ----
  auto* sen = app.add_subcommand("check-sensitivity",
                                 "band-bounded response to declared circumstances");
  sen->fallthrough();
  std::string sen_trace, sen_spec, sen_out, sen_descriptor;
  CheckOptions sen_opts;
  bool sen_lenient = false;
  ConfigBinder sen_cfg;
  sen_cfg.bind(sen->add_option("--trace", sen_trace, "trace file")->required(),
               &sen_trace, "trace");
  sen_cfg.bind(sen->add_option("--spec", sen_spec, "sensitivity spec JSON")->required(),
               &sen_spec, "spec");
  sen_cfg.bind(sen->add_option("--x-bins", sen_opts.x_bins, "input bins per dim"),
               &sen_opts.x_bins, "x-bins");
  sen_cfg.bind(sen->add_option("--y-bins", sen_opts.y_bins, "output bins per dim"),
               &sen_opts.y_bins, "y-bins");
  sen->add_flag("--lenient", sen_lenient, "ignore unknown trace keys");
  sen->add_option("--out", sen_out, "report path (default stdout)");
  sen->add_option("--descriptor", sen_descriptor,
                  "model descriptor JSON to annotate the report");

  // ---- check-stability ----
  auto* stb = app.add_subcommand("check-stability",
                                 "window-to-window divergence non-increase");
  stb->fallthrough();
  std::string stb_trace, stb_out, stb_descriptor;
  StabilityParams stb_params;
  CheckOptions stb_opts;
  bool stb_lenient = false;
  ConfigBinder stb_cfg;
  stb_cfg.bind(stb->add_option("--trace", stb_trace, "trace file")->required(),
               &stb_trace, "trace");
  stb_cfg.bind(stb->add_option("--window", stb_params.width, "window width (records)"),
               &stb_params.width, "window");
  stb_cfg.bind(stb->add_option("--stride", stb_params.stride, "window stride"),
               &stb_params.stride, "stride");
  stb_cfg.bind(stb->add_option("--eta", stb_params.slack, "increase slack (nats)"),
               &stb_params.slack, "eta");
  stb_cfg.bind(stb->add_option("--grace", stb_params.grace,
                               "windows ignored after each marked change"),
               &stb_params.grace, "grace");
  stb_cfg.bind(stb->add_option("--x-bins", stb_opts.x_bins, "input bins per dim"),
               &stb_opts.x_bins, "x-bins");
  stb_cfg.bind(stb->add_option("--y-bins", stb_opts.y_bins, "output bins per dim"),
               &stb_opts.y_bins, "y-bins");
  stb->add_flag("--lenient", stb_lenient, "ignore unknown trace keys");
  stb->add_option("--out", stb_out, "report path (default stdout)");
  stb->add_option("--descriptor", stb_descriptor,
                  "model descriptor JSON to annotate the report");

  // ---- monitor ----
  auto* mon = app.add_subcommand("monitor", "windowed reference-vs-runtime analysis");
  mon->fallthrough();
  std::string mon_ref, mon_stream, mon_out, mon_plot;
  std::size_t mon_width = 500;
  ShiftThresholds mon_thresholds;
  MonitorOptions mon_opts;
  bool mon_lenient = false;
  ConfigBinder mon_cfg;
  mon_cfg.bind(mon->add_option("--reference", mon_ref, "development trace")->required(),
               &mon_ref, "reference");
  mon_cfg.bind(mon->add_option("--stream", mon_stream, "runtime trace")->required(),
               &mon_stream, "stream");
  mon_cfg.bind(mon->add_option("--width", mon_width, "window width (records)"),
               &mon_width, "width");
  mon_cfg.bind(mon->add_option("--theta-x", mon_thresholds.input,
                               "input-marginal threshold (nats)"),
               &mon_thresholds.input, "theta-x");
  mon_cfg.bind(mon->add_option("--theta-y", mon_thresholds.output,
                               "output-marginal threshold (nats)"),
               &mon_thresholds.output, "theta-y");
  mon_cfg.bind(mon->add_option("--theta-c", mon_thresholds.conditional,
                               "conditional threshold (nats)"),
               &mon_thresholds.conditional, "theta-c");
  mon_cfg.bind(mon->add_option("--x-bins", mon_opts.x_bins, "input bins per dim"),
               &mon_opts.x_bins, "x-bins");
  mon_cfg.bind(mon->add_option("--y-bins", mon_opts.y_bins, "output bins per dim"),
               &mon_opts.y_bins, "y-bins");
  mon->add_flag("--lenient", mon_lenient, "ignore unknown trace keys");
  mon->add_option("--out", mon_out, "report path (default stdout)");
  mon->add_option("--plot", mon_plot, "write an SVG of the divergence series");

  // ---- imagine ----
  auto* img = app.add_subcommand("imagine",
                                 "misuse detection with hazard-case substitution");
  img->fallthrough();
  std::string img_ref, img_stream, img_kb, img_out, img_critical;
  std::size_t img_topk = 3, img_buffer = 64;
  bool img_lenient = false;
  ConfigBinder img_cfg;
  img_cfg.bind(img->add_option("--reference", img_ref, "development trace")->required(),
               &img_ref, "reference");
  img_cfg.bind(img->add_option("--stream", img_stream, "runtime trace")->required(),
               &img_stream, "stream");
  img_cfg.bind(img->add_option("--kb", img_kb, "hazard knowledge base JSON")->required(),
               &img_kb, "kb");
  img_cfg.bind(img->add_option("--top-k", img_topk, "substitute inputs per misuse"),
               &img_topk, "top-k");
  img_cfg.bind(img->add_option("--buffer", img_buffer, "runtime buffer capacity"),
               &img_buffer, "buffer");
  img->add_flag("--lenient", img_lenient, "ignore unknown trace keys");
  img->add_option("--out", img_out, "report path (default stdout)");
  img->add_option("--critical-out", img_critical, "persist misused records (JSONL)");

  // ---- trust ----
  auto* tru = app.add_subcommand("trust", "retrospective prediction-trust series");
  tru->fallthrough();
  std::string tru_pairs, tru_out, tru_scale = "auto";
  TrustOptions tru_opts;
  ConfigBinder tru_cfg;
  tru_cfg.bind(tru->add_option("--pairs", tru_pairs, "prediction pairs JSONL")->required(),
               &tru_pairs, "pairs");
  tru_cfg.bind(tru->add_option("--beta", tru_opts.beta, "trust decay rate"),
               &tru_opts.beta, "beta");
  tru_cfg.bind(tru->add_option("--window", tru_opts.window, "discrepancy window H"),
               &tru_opts.window, "window");
  tru_cfg.bind(tru->add_option("--scale", tru_scale,
                               "\"auto\" or comma-separated per-dimension scales"),
               &tru_scale, "scale");
  tru->add_option("--out", tru_out, "report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  json cfg = json::object();
  if (!config_path.empty()) {
    const int rc = run_or_report([&] {
      cfg = load_json_file(config_path, "config file");
      return kExitPass;
    });
    if (rc != kExitPass) return rc;
  }

  if (sim->parsed()) {
    return run_or_report([&] {
      sim_cfg.apply(cfg);
      if (sim_system.empty()) throw Error("--system is required");
      json params = json::object();
      if (!sim_params_path.empty()) params = load_json_file(sim_params_path, "params");
      Trace trace;
      if (sim_system == "lv") {
        trace = lv_trace(params, sim_n);
      } else {
        trace = generate_trace(generator_from_json(sim_system, params), sim_n, sim_seed);
      }
      Output out(sim_out);
      out.open();
      serialize_trace(trace, *out.stream);
      std::cerr << "wrote " << trace.records.size() << " records ("
                << sim_system << ")\n";
      return kExitPass;
    });
  }

  if (cls->parsed()) {
    return run_or_report([&] {
      cls_cfg.apply(cfg);
      const Trace trace = parse_trace(cls_trace, {cls_lenient});
      const SystemClass result = classify_passive(trace, cls_opts);
      if (!cls_dump.empty()) {
        std::ofstream dump(cls_dump);
        if (!dump) throw Error("cannot open dump file: " + cls_dump);
        const auto binning = fit_binning(trace, cls_opts.x_bins, cls_opts.y_bins);
        dump_distribution(estimate_conditional(trace.span(), binning), dump);
        dump_distribution(estimate_marginal(trace.span(), binning, Space::Input), dump);
      }
      Output out(cls_out);
      out.open();
      ojson report = classify_report(result);
      annotate_model(report, cls_descriptor);
      *out.stream << report.dump(2) << '\n';
      std::cerr << "class: " << to_string(result.kind)
                << " (confidence " << result.confidence << ")\n";
      for (const auto& w : result.evidence.warnings) std::cerr << "warning: " << w << '\n';
      return kExitPass;
    });
  }

  if (rob->parsed()) {
    return run_or_report([&] {
      rob_cfg.apply(cfg);
      const Trace trace = parse_trace(rob_trace, {rob_lenient});
      const Verdict verdict =
          check_robustness(trace, load_robustness_spec(rob_spec), rob_opts);
      Output out(rob_out);
      return emit_verdict(verdict, out, rob_descriptor);
    });
  }

  if (sen->parsed()) {
    return run_or_report([&] {
      sen_cfg.apply(cfg);
      const Trace trace = parse_trace(sen_trace, {sen_lenient});
      const Verdict verdict =
          check_sensitivity(trace, load_sensitivity_spec(sen_spec), sen_opts);
      Output out(sen_out);
      return emit_verdict(verdict, out, sen_descriptor);
    });
  }

  if (stb->parsed()) {
    return run_or_report([&] {
      stb_cfg.apply(cfg);
      const Trace trace = parse_trace(stb_trace, {stb_lenient});
      const Verdict verdict = check_stability(trace, stb_params, stb_opts);
      Output out(stb_out);
      return emit_verdict(verdict, out, stb_descriptor);
    });
  }

  if (mon->parsed()) {
    return run_or_report([&] {
      mon_cfg.apply(cfg);
      const Trace dev = parse_trace(mon_ref, {mon_lenient});
      const Trace stream = parse_trace(mon_stream, {mon_lenient});
      const ReferenceProfile profile = build_reference(dev, mon_opts, mon_ref);
      const MonitorResult result =
          monitor_stream(stream.span(), profile, mon_width, mon_thresholds);
      Output out(mon_out);
      out.open();
      for (const auto& r : result.reports) {
        ojson j;
        j["window"] = r.window_index;
        j["start_t"] = r.start_t;
        j["end_t"] = r.end_t;
        j["input_kl"] = r.input_kl;
        j["output_kl"] = r.output_kl;
        if (r.conditional_kl.has_value()) {
          j["conditional_kl"] = *r.conditional_kl;
        } else {
          j["conditional_kl"] = nullptr;
        }
        j["conditional_excluded"] = r.conditional_excluded;
        j["label"] = to_string(r.label);
        j["flagged"] = r.flagged_records;
        *out.stream << j.dump() << '\n';
      }
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      if (!mon_plot.empty()) {
        std::ofstream svg(mon_plot);
        if (!svg) throw Error("cannot open plot file: " + mon_plot);
        svg << render_kl_series_svg(result.reports, mon_thresholds);
      }
      std::cerr << result.reports.size() << " windows analyzed\n";
      return result.reports.empty() ? kExitIndeterminate : kExitPass;
    });
  }

  if (img->parsed()) {
    return run_or_report([&] {
      img_cfg.apply(cfg);
      const Trace dev = parse_trace(img_ref, {img_lenient});
      const Trace stream = parse_trace(img_stream, {img_lenient});
      const ReferenceProfile profile = build_reference(dev, MonitorOptions{}, img_ref);
      ImaginationPipeline pipeline(profile, load_knowledge_base(img_kb), img_topk,
                                   img_buffer, img_critical);
      Output out(img_out);
      out.open();
      for (const auto& rec : stream.records) {
        const PipelineOutput po = pipeline.process(rec);
        ojson j;
        j["index"] = po.record_index;
        j["misuse"] = po.misuse;
        if (!po.misuse) {
          j["input"] = po.passthrough_input;
        } else {
          ojson tags = ojson::array();
          for (const auto& t : po.tags) tags.push_back(to_string(t));
          j["tags"] = tags;
          ojson subs = ojson::array();
          for (const auto& c : po.substitutes) {
            subs.push_back(ojson{{"template", c.template_id},
                                 {"input", c.input},
                                 {"probability", c.probability},
                                 {"severity", c.severity},
                                 {"risk", c.risk}});
          }
          j["substitute_inputs"] = subs;
          if (po.degraded) j["degraded"] = true;
        }
        *out.stream << j.dump() << '\n';
      }
      std::cerr << pipeline.misuse_count() << " misused records of "
                << stream.records.size() << '\n';
      return kExitPass;
    });
  }

  if (tru->parsed()) {
    return run_or_report([&] {
      tru_cfg.apply(cfg);
      std::ifstream in(tru_pairs);
      if (!in) throw Error("cannot open pairs file: " + tru_pairs);
      std::vector<PredictionPair> pairs;
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::parse_error& e) {
          throw ParseError(std::string("malformed pair: ") + e.what(), line_no);
        }
        PredictionPair p;
        p.t = j.at("t").get<std::int64_t>();
        p.horizon = j.value("k", 1);
        for (const auto& v : j.at("y_hat")) {
          p.predicted.push_back(v.is_null() ? std::nan("") : v.get<double>());
        }
        for (const auto& v : j.at("y")) {
          p.realized.push_back(v.is_null() ? std::nan("") : v.get<double>());
        }
        pairs.push_back(std::move(p));
      }
      if (pairs.empty()) throw Error("empty pairs file");

      const std::size_t dim = pairs.front().realized.size();
      std::vector<double> scale(dim, 1.0);
      if (tru_scale == "auto") {
        // Per-dimension standard deviation of the realized outputs.
        for (std::size_t d = 0; d < dim; ++d) {
          std::vector<double> col;
          col.reserve(pairs.size());
          for (const auto& p : pairs) {
            if (d < p.realized.size() && std::isfinite(p.realized[d])) {
              col.push_back(p.realized[d]);
            }
          }
          if (col.size() < 2) continue;
          const auto m = kernels::moments(col.data(), col.size());
          const double n = static_cast<double>(col.size());
          const double var = std::max(m.sum_sq / n - (m.sum / n) * (m.sum / n), 0.0);
          if (var > 0) scale[d] = std::sqrt(var);
        }
      } else {
        scale.clear();
        std::stringstream ss(tru_scale);
        std::string item;
        while (std::getline(ss, item, ',')) scale.push_back(std::stod(item));
        if (scale.size() != dim) throw Error("scale dimension mismatch");
      }

      TrustState state(tru_opts);
      Output out(tru_out);
      out.open();
      for (const auto& p : pairs) {
        state.update(p, scale);
        ojson j;
        j["t"] = p.t;
        j["trust"] = state.trust();
        j["conservatism"] = state.conservatism();
        j["ewma"] = state.ewma();
        j["accepted"] = state.accepted();
        j["rejected"] = state.rejected();
        *out.stream << j.dump() << '\n';
      }
      const TrustReport report = trust_report(state);
      if (report.indeterminate) {
        std::cerr << "no accepted pairs\n";
        return kExitIndeterminate;
      }
      std::cerr << "final trust " << report.trust << " (conservatism "
                << report.conservatism << ", " << report.rejected << " rejected)\n";
      return kExitPass;
    });
  }

  return kExitError;
}

}  // namespace datactl::cli
