// SPDX-License-Identifier: Apache-2.0
#include "datactl/sysclass.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "datactl/error.hpp"
#include "datactl/kernels.hpp"
#include "datactl/stats.hpp"

namespace datactl {

namespace {

// Smoothed symmetrized divergence between two raw count histograms with the
// same plug-in bias subtraction conditional_kl applies per cell.
double corrected_sym_kl(const std::vector<double>& a, const std::vector<double>& b) {
  const double k = static_cast<double>(a.size());
  double na = 0.0, nb = 0.0;
  for (double v : a) na += v;
  for (double v : b) nb += v;
  std::vector<double> pa(a.size()), pb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[i] = (a[i] + kSmoothingMass) / (na + kSmoothingMass * k);
    pb[i] = (b[i] + kSmoothingMass) / (nb + kSmoothingMass * k);
  }
  const double ab = kernels::kl_terms(pa.data(), pb.data(), pa.size()).nats;
  const double ba = kernels::kl_terms(pb.data(), pa.data(), pa.size()).nats;
  const double bias = (k - 1.0) / 2.0 * (1.0 / na + 1.0 / nb);
  return std::max(0.5 * (ab + ba) - bias, 0.0);
}

double margin_confidence(double stat, double kappa) {
  if (stat + kappa <= 0.0) return 1.0;
  return std::abs(stat - kappa) / (stat + kappa);
}

bool marginal(double stat, double kappa) {
  return std::abs(stat - kappa) <= 0.1 * kappa;
}

struct MemoryTest {
  double stat = 0.0;
  bool conclusive = false;
  std::vector<ClassStat> cells;
};

MemoryTest memory_test(const Trace& trace, const BinningSpec& binning,
                       const ClassifyOptions& opts) {
  MemoryTest out;
  const std::size_t n = trace.records.size();
  const std::size_t dims = trace.meta.x_dim;
  const int lags = opts.history_lags;

  // Median split per input dimension gives a coarse, balanced signature
  // alphabet; finer alphabets starve the partitions.
  std::vector<double> medians(dims);
  {
    std::vector<double> column;
    column.reserve(n);
    for (std::size_t d = 0; d < dims; ++d) {
      column.clear();
      for (const auto& r : trace.records) {
        if (kernels::all_finite(r.x.data(), r.x.size())) column.push_back(r.x[d]);
      }
      if (column.empty()) return out;
      std::nth_element(column.begin(), column.begin() + column.size() / 2,
                       column.end());
      medians[d] = column[column.size() / 2];
    }
  }

  const std::size_t yk = binning.y_cells();
  // x-cell -> signature -> y histogram
  std::map<std::int64_t, std::map<std::uint64_t, std::vector<double>>> parts;
  for (std::size_t i = static_cast<std::size_t>(lags); i < n; ++i) {
    const auto& r = trace.records[i];
    if (!kernels::all_finite(r.x.data(), r.x.size()) ||
        !kernels::all_finite(r.y.data(), r.y.size())) {
      continue;
    }
    std::uint64_t sig = 0;
    bool ok = true;
    for (int l = 1; l <= lags && ok; ++l) {
      const auto& prev = trace.records[i - static_cast<std::size_t>(l)];
      if (!kernels::all_finite(prev.x.data(), prev.x.size())) {
        ok = false;
        break;
      }
      for (std::size_t d = 0; d < dims; ++d) {
        sig = (sig << 1) | (prev.x[d] > medians[d] ? 1u : 0u);
      }
    }
    if (!ok) continue;
    bool clamped = false;
    const std::int64_t xc = binning.x_cell(r.x, &clamped);
    const std::int64_t ycell = binning.y_cell(r.y, &clamped);
    auto& hist = parts[xc][sig];
    if (hist.empty()) hist.assign(yk, 0.0);
    hist[static_cast<std::size_t>(ycell)] += 1.0;
  }

  for (const auto& [xc, by_sig] : parts) {
    // Two largest qualifying partitions carry the strongest evidence.
    const std::vector<double>* best = nullptr;
    const std::vector<double>* second = nullptr;
    double best_n = 0.0, second_n = 0.0;
    for (const auto& [sig, hist] : by_sig) {
      double cnt = 0.0;
      for (double v : hist) cnt += v;
      if (cnt < opts.min_partition) continue;
      if (cnt > best_n) {
        second = best;
        second_n = best_n;
        best = &hist;
        best_n = cnt;
      } else if (cnt > second_n) {
        second = &hist;
        second_n = cnt;
      }
    }
    if (best == nullptr || second == nullptr) continue;
    out.conclusive = true;
    const double v = corrected_sym_kl(*best, *second);
    out.cells.push_back({"xcell=" + std::to_string(xc), v});
    out.stat = std::max(out.stat, v);
  }
  return out;
}

SystemClass decide(double seg_stat, const MemoryTest& mem,
                   std::vector<ClassStat> segment_pairs,
                   const ClassifyOptions& opts,
                   std::vector<std::string> warnings) {
  SystemClass out;
  out.evidence.segment_stat = seg_stat;
  out.evidence.memory_stat = mem.stat;
  out.evidence.memory_conclusive = mem.conclusive;
  out.evidence.segment_pairs = std::move(segment_pairs);
  out.evidence.memory_cells = mem.cells;
  out.evidence.warnings = std::move(warnings);
  if (!mem.conclusive) {
    out.evidence.warnings.push_back("memory test inconclusive");
  }

  const double kappa = opts.kappa;
  if (mem.conclusive && mem.stat > kappa) {
    if (marginal(mem.stat, kappa) && marginal(seg_stat, kappa)) {
      // Both statistics sit on the fence: report the weaker claim.
      out.kind = SystemClassKind::NonStationary;
      out.confidence = std::min(margin_confidence(mem.stat, kappa),
                                margin_confidence(seg_stat, kappa));
      out.evidence.warnings.push_back("marginal statistics: weaker claim reported");
      return out;
    }
    out.kind = SystemClassKind::Dynamic;
    out.confidence = margin_confidence(mem.stat, kappa);
    return out;
  }
  if (seg_stat > kappa) {
    out.kind = SystemClassKind::NonStationary;
    out.confidence = margin_confidence(seg_stat, kappa);
    return out;
  }
  out.kind = SystemClassKind::Static;
  const double binding = std::max(seg_stat, mem.conclusive ? mem.stat : 0.0);
  out.confidence = margin_confidence(binding, kappa);
  return out;
}

}  // namespace

const char* to_string(SystemClassKind kind) {
  switch (kind) {
    case SystemClassKind::Static:
      return "static";
    case SystemClassKind::NonStationary:
      return "non-stationary";
    case SystemClassKind::Dynamic:
      return "dynamic";
  }
  return "?";
}

SystemClass classify_passive(const Trace& trace, const ClassifyOptions& opts) {
  if (opts.segments < 2) throw Error("need at least 2 segments");
  const std::size_t n = trace.records.size();
  if (n < static_cast<std::size_t>(opts.segments) * 50) {
    throw Error("trace too short: need at least " +
                std::to_string(opts.segments * 50) + " records");
  }
  const BinningSpec binning = fit_binning(trace, opts.x_bins, opts.y_bins);

  const std::size_t seg_len = n / static_cast<std::size_t>(opts.segments);
  std::vector<std::span<const TraceRecord>> segments;
  for (int i = 0; i < opts.segments; ++i) {
    segments.push_back(
        {trace.records.data() + static_cast<std::size_t>(i) * seg_len, seg_len});
  }
  std::vector<ConditionalDistribution> estimates;
  estimates.reserve(segments.size());
  for (const auto& s : segments) estimates.push_back(estimate_conditional(s, binning));

  std::vector<ClassStat> pairs;
  std::vector<std::string> warnings;
  double seg_stat = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t j = i + 1; j < segments.size(); ++j) {
      const auto weights = pooled_input_marginal(segments[i], segments[j], binning);
      double v = 0.0;
      try {
        v = symmetrized_kl(estimates[i], estimates[j], weights).nats;
      } catch (const Error& e) {
        warnings.push_back("segment pair " + std::to_string(i) + "-" +
                           std::to_string(j) + ": " + e.what());
        continue;
      }
      pairs.push_back(
          {"seg" + std::to_string(i) + "-seg" + std::to_string(j), v});
      seg_stat = std::max(seg_stat, v);
    }
  }

  const MemoryTest mem = memory_test(trace, binning, opts);
  return decide(seg_stat, mem, std::move(pairs), opts, std::move(warnings));
}

SystemClass classify_active(System& system, const ProbeProtocol& protocol,
                            const ClassifyOptions& opts, std::uint64_t seed) {
  if (protocol.prefix_pairs < 1 || protocol.prefix_length < 1 ||
      protocol.repetitions < 1) {
    throw Error("probe protocol counts must be >= 1");
  }
  if (protocol.terminal_input.size() != system.input_dim()) {
    throw Error("terminal input dimension mismatch");
  }

  if (!system.reset()) {
    // Passive fallback: drive the system open-loop and classify the trace.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Trace trace;
    trace.meta.x_dim = system.input_dim();
    trace.meta.y_dim = system.output_dim();
    trace.meta.source = "active-fallback";
    const std::size_t n = 5000;
    for (std::size_t i = 0; i < n; ++i) {
      TraceRecord rec;
      rec.t = static_cast<std::int64_t>(i);
      rec.x.resize(system.input_dim());
      for (auto& v : rec.x) v = gauss(rng);
      rec.y = system.step(rec.x);
      trace.records.push_back(std::move(rec));
    }
    SystemClass out = classify_passive(trace, opts);
    out.evidence.warnings.insert(out.evidence.warnings.begin(),
                                 "system refused reset: passive fallback");
    return out;
  }

  const std::size_t dim = system.input_dim();
  auto collect_terminal = [&](double prefix_value) {
    std::vector<double> outs;
    outs.reserve(static_cast<std::size_t>(protocol.repetitions));
    const std::vector<double> prefix(dim, prefix_value);
    for (int r = 0; r < protocol.repetitions; ++r) {
      system.reset();
      for (int s = 0; s < protocol.prefix_length; ++s) system.step(prefix);
      outs.push_back(system.step(protocol.terminal_input)[0]);
    }
    return outs;
  };

  auto hist_sym_kl = [&](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto mm = kernels::minmax(pooled.data(), pooled.size());
    const int bins = opts.y_bins;
    double lo = mm.min, hi = mm.max;
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double pad = 0.01 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
    const double inv_w = bins / (hi - lo);
    auto histogram = [&](const std::vector<double>& v) {
      std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
      std::vector<std::int32_t> idx(v.size());
      std::vector<std::uint8_t> cl(v.size());
      kernels::quantize(v.data(), v.size(), lo, inv_w, bins, idx.data(), cl.data());
      for (auto i : idx) h[static_cast<std::size_t>(i)] += 1.0;
      return h;
    };
    return corrected_sym_kl(histogram(a), histogram(b));
  };

  ClassEvidence evidence;
  double memory_stat = 0.0;
  for (int p = 0; p < protocol.prefix_pairs; ++p) {
    const double amp = 0.5 * (p + 1);
    const auto high = collect_terminal(amp);
    const auto low = collect_terminal(-amp);
    const double v = hist_sym_kl(high, low);
    evidence.memory_cells.push_back({"prefix-pair " + std::to_string(p), v});
    memory_stat = std::max(memory_stat, v);
  }
  evidence.memory_stat = memory_stat;
  evidence.memory_conclusive = true;

  // Input-conditioned change: same input under different contexts, or after
  // a plain time offset when the system exposes no context knob.
  const std::vector<double> probe_input(dim, 1.0);
  auto collect_ctx = [&](double ctx, int idle) {
    std::vector<double> outs;
    outs.reserve(static_cast<std::size_t>(protocol.repetitions));
    for (int r = 0; r < protocol.repetitions; ++r) {
      system.reset();
      system.set_context(ctx);
      for (int s = 0; s < idle; ++s) system.step(probe_input);
      outs.push_back(system.step(probe_input)[0]);
    }
    return outs;
  };
  double context_stat = 0.0;
  if (system.has_context()) {
    const double v = hist_sym_kl(collect_ctx(0.0, 0), collect_ctx(1.0, 0));
    evidence.segment_pairs.push_back({"ctx 0 vs 1", v});
    context_stat = v;
  } else if (memory_stat <= opts.kappa) {
    // Memoryless so far; repeated identical inputs only shift the clock.
    const double v = hist_sym_kl(collect_ctx(0.0, 0), collect_ctx(0.0, 50));
    evidence.segment_pairs.push_back({"time offset 0 vs 50", v});
    context_stat = v;
  }
  evidence.segment_stat = context_stat;

  SystemClass out;
  out.evidence = std::move(evidence);
  if (memory_stat > opts.kappa) {
    out.kind = SystemClassKind::Dynamic;
    out.confidence = margin_confidence(memory_stat, opts.kappa);
  } else if (context_stat > opts.kappa) {
    out.kind = SystemClassKind::NonStationary;
    out.confidence = margin_confidence(context_stat, opts.kappa);
  } else {
    out.kind = SystemClassKind::Static;
    out.confidence = margin_confidence(std::max(memory_stat, context_stat), opts.kappa);
  }
  return out;
}

}  // namespace datactl
