// SPDX-License-Identifier: Apache-2.0
#include "datactl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "datactl/error.hpp"
#include "datactl/kernels.hpp"
#include "json.hpp"

namespace datactl {

namespace {

std::size_t cell_product(const std::vector<DimensionBinning>& dims) {
  std::size_t p = 1;
  for (const auto& d : dims) p *= static_cast<std::size_t>(d.bins);
  return p;
}

std::int64_t flat_cell(std::span<const double> v,
                       const std::vector<DimensionBinning>& dims, bool* clamped) {
  std::int64_t cell = 0;
  bool cl = false;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    std::int32_t idx;
    std::uint8_t c;
    kernels::quantize(&v[d], 1, dims[d].lo, dims[d].inv_width(), dims[d].bins,
                      &idx, &c);
    cell = cell * dims[d].bins + idx;
    cl = cl || (c != 0);
  }
  if (clamped != nullptr) *clamped = cl;
  return cell;
}

DimensionBinning fit_dimension(std::span<const double> column, int bins,
                               double padding, std::size_t dim_index, Space space,
                               std::vector<std::string>* warnings) {
  if (bins < 2) throw Error("bin counts must be >= 2");
  const auto mm = kernels::minmax(column.data(), column.size());
  DimensionBinning out;
  if (mm.min == mm.max) {
    out.lo = mm.min - 0.5;
    out.width = 1.0;
    out.bins = 1;
    out.edges = {out.lo, out.lo + 1.0};
    warnings->push_back(std::string("zero-variance ") +
                        (space == Space::Input ? "x" : "y") +
                        std::to_string(dim_index) + ": single degenerate cell");
    return out;
  }
  const double range = mm.max - mm.min;
  const double lo = mm.min - padding * range;
  const double hi = mm.max + padding * range;
  out.lo = lo;
  out.width = (hi - lo) / bins;
  out.bins = bins;
  out.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) out.edges[i] = lo + i * out.width;
  out.edges.back() = hi;
  return out;
}

// Column-major gather of the binnable records, then batch quantization.
struct BinnedRecords {
  std::vector<std::size_t> record_index;  // into the slice
  std::vector<std::int64_t> x_cell, y_cell;
  std::vector<std::uint8_t> clamped;
  std::size_t nonfinite = 0;
};

BinnedRecords bin_records(std::span<const TraceRecord> records,
                          const BinningSpec& binning) {
  BinnedRecords out;
  out.record_index.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!kernels::all_finite(r.x.data(), r.x.size()) ||
        !kernels::all_finite(r.y.data(), r.y.size())) {
      ++out.nonfinite;
      continue;
    }
    out.record_index.push_back(i);
  }
  const std::size_t n = out.record_index.size();
  out.x_cell.assign(n, 0);
  out.y_cell.assign(n, 0);
  out.clamped.assign(n, 0);
  std::vector<double> column(n);
  std::vector<std::int32_t> idx(n);
  std::vector<std::uint8_t> cl(n);
  auto accumulate = [&](const std::vector<DimensionBinning>& dims, bool is_x) {
    auto& cells = is_x ? out.x_cell : out.y_cell;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      for (std::size_t k = 0; k < n; ++k) {
        const auto& r = records[out.record_index[k]];
        column[k] = is_x ? r.x[d] : r.y[d];
      }
      kernels::quantize(column.data(), n, dims[d].lo, dims[d].inv_width(),
                        dims[d].bins, idx.data(), cl.data());
      for (std::size_t k = 0; k < n; ++k) {
        cells[k] = cells[k] * dims[d].bins + idx[k];
        out.clamped[k] |= cl[k];
      }
    }
  };
  accumulate(binning.x_dims, true);
  accumulate(binning.y_dims, false);
  return out;
}

double plugin_bias(double k_cells, double n_p, double n_q) {
  return (k_cells - 1.0) / 2.0 * (1.0 / n_p + 1.0 / n_q);
}

}  // namespace

std::size_t BinningSpec::x_cells() const { return cell_product(x_dims); }
std::size_t BinningSpec::y_cells() const { return cell_product(y_dims); }

bool BinningSpec::same_shape(const BinningSpec& other) const {
  return x_dims == other.x_dims && y_dims == other.y_dims;
}

std::int64_t BinningSpec::x_cell(std::span<const double> x, bool* clamped) const {
  return flat_cell(x, x_dims, clamped);
}

std::int64_t BinningSpec::y_cell(std::span<const double> y, bool* clamped) const {
  return flat_cell(y, y_dims, clamped);
}

BinningSpec fit_binning(const Trace& trace, std::span<const int> x_bins,
                        std::span<const int> y_bins, const FitOptions& opts) {
  if (trace.records.empty()) throw Error("empty trace");
  if (x_bins.size() != trace.meta.x_dim || y_bins.size() != trace.meta.y_dim) {
    throw Error("bin count per dimension mismatch");
  }
  // Cap check up front on the requested counts.
  long double product = 1.0L;
  for (int b : x_bins) product *= b;
  for (int b : y_bins) product *= b;
  if (product > static_cast<long double>(opts.cell_cap)) {
    throw Error("cell cap exceeded (" + std::to_string(static_cast<double>(product)) +
                " > " + std::to_string(opts.cell_cap) + "): use fewer bins");
  }

  std::vector<double> column;
  column.reserve(trace.records.size());
  auto gather = [&](std::size_t d, Space space) {
    column.clear();
    for (const auto& r : trace.records) {
      const auto& v = space == Space::Input ? r.x : r.y;
      if (kernels::all_finite(r.x.data(), r.x.size()) &&
          kernels::all_finite(r.y.data(), r.y.size())) {
        column.push_back(v[d]);
      }
    }
  };

  BinningSpec spec;
  spec.cell_cap = opts.cell_cap;
  for (std::size_t d = 0; d < trace.meta.x_dim; ++d) {
    gather(d, Space::Input);
    if (column.empty()) throw Error("no binnable records (non-finite values)");
    spec.x_dims.push_back(fit_dimension(column, x_bins[d], opts.padding, d,
                                        Space::Input, &spec.warnings));
  }
  for (std::size_t d = 0; d < trace.meta.y_dim; ++d) {
    gather(d, Space::Output);
    spec.y_dims.push_back(fit_dimension(column, y_bins[d], opts.padding, d,
                                        Space::Output, &spec.warnings));
  }
  return spec;
}

BinningSpec fit_binning(const Trace& trace, int x_bins, int y_bins,
                        const FitOptions& opts) {
  std::vector<int> xb(trace.meta.x_dim, x_bins), yb(trace.meta.y_dim, y_bins);
  return fit_binning(trace, xb, yb, opts);
}

double MarginalDistribution::smoothed_probability(std::int64_t cell) const {
  const double k = static_cast<double>(counts.size());
  return (counts[static_cast<std::size_t>(cell)] + smoothing) /
         (n_total + smoothing * k);
}

std::vector<double> MarginalDistribution::smoothed() const {
  std::vector<double> p(counts.size());
  const double denom = n_total + smoothing * static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p[i] = (counts[i] + smoothing) / denom;
  }
  return p;
}

std::int64_t MarginalDistribution::cell_of(std::span<const double> v,
                                           bool* clamped) const {
  return flat_cell(v, dims, clamped);
}

std::vector<double> ConditionalDistribution::smoothed_row(std::int64_t x_cell) const {
  const std::size_t k = binning.y_cells();
  std::vector<double> p(k, 0.0);
  const auto it = cells.find(x_cell);
  const double n = it == cells.end() ? 0.0 : it->second.n;
  const double denom = n + smoothing * static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double c = it == cells.end() ? 0.0 : it->second.y_counts[i];
    p[i] = (c + smoothing) / denom;
  }
  return p;
}

double ConditionalDistribution::cell_count(std::int64_t x_cell) const {
  const auto it = cells.find(x_cell);
  return it == cells.end() ? 0.0 : it->second.n;
}

MarginalDistribution estimate_marginal(std::span<const TraceRecord> records,
                                       const BinningSpec& binning, Space space) {
  if (records.empty()) throw Error("empty slice");
  MarginalDistribution m;
  m.dims = space == Space::Input ? binning.x_dims : binning.y_dims;
  m.counts.assign(cell_product(m.dims), 0.0);

  std::vector<std::size_t> usable;
  usable.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& v = space == Space::Input ? records[i].x : records[i].y;
    if (kernels::all_finite(v.data(), v.size())) usable.push_back(i);
  }
  const std::size_t n = usable.size();
  std::vector<std::int64_t> cells(n, 0);
  std::vector<double> column(n);
  std::vector<std::int32_t> idx(n);
  std::vector<std::uint8_t> cl(n);
  for (std::size_t d = 0; d < m.dims.size(); ++d) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto& r = records[usable[k]];
      column[k] = space == Space::Input ? r.x[d] : r.y[d];
    }
    kernels::quantize(column.data(), n, m.dims[d].lo, m.dims[d].inv_width(),
                      m.dims[d].bins, idx.data(), cl.data());
    for (std::size_t k = 0; k < n; ++k) cells[k] = cells[k] * m.dims[d].bins + idx[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    m.counts[static_cast<std::size_t>(cells[k])] += 1.0;
  }
  m.n_total = static_cast<double>(n);
  return m;
}

ConditionalDistribution estimate_conditional(std::span<const TraceRecord> records,
                                             const BinningSpec& binning) {
  if (records.empty()) throw Error("empty slice");
  ConditionalDistribution c;
  c.binning = binning;
  const auto binned = bin_records(records, binning);
  c.skipped_nonfinite = static_cast<double>(binned.nonfinite);
  const std::size_t yk = binning.y_cells();
  for (std::size_t k = 0; k < binned.record_index.size(); ++k) {
    auto& cell = c.cells[binned.x_cell[k]];
    if (cell.y_counts.empty()) cell.y_counts.assign(yk, 0.0);
    cell.y_counts[static_cast<std::size_t>(binned.y_cell[k])] += 1.0;
    cell.n += 1.0;
    c.n_total += 1.0;
    if (binned.clamped[k]) {
      cell.clamped += 1.0;
      c.out_of_support += 1.0;
    }
  }
  return c;
}

double kl_discrete(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("length mismatch");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw Error("negative probability entry");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw Error("non-normalized input");
  }
  const auto r = kernels::kl_terms(p.data(), q.data(), p.size());
  if (r.disjoint) return std::numeric_limits<double>::infinity();
  return r.nats;
}

CondKlResult conditional_kl(const ConditionalDistribution& p,
                            const ConditionalDistribution& q,
                            const MarginalDistribution& weights,
                            const CondKlOptions& opts) {
  if (!p.binning.same_shape(q.binning)) throw Error("binning mismatch");
  if (weights.dims != p.binning.x_dims) throw Error("weights binning mismatch");

  const double yk = static_cast<double>(p.binning.y_cells());
  double total_w = 0.0, included_w = 0.0, acc = 0.0;
  std::size_t used = 0;
  for (double w : weights.counts) total_w += w;
  if (total_w <= 0.0) throw Error("weights carry no mass");

  struct Term {
    std::int64_t cell;
    double w;
  };
  std::vector<Term> included;
  for (std::size_t cell = 0; cell < weights.counts.size(); ++cell) {
    const double w = weights.counts[cell];
    if (w <= 0.0) continue;
    const auto ip = p.cells.find(static_cast<std::int64_t>(cell));
    const auto iq = q.cells.find(static_cast<std::int64_t>(cell));
    if (ip == p.cells.end() || iq == q.cells.end()) continue;
    const auto& cp = ip->second;
    const auto& cq = iq->second;
    if (cp.n < opts.min_cell_count || cq.n < opts.min_cell_count) continue;
    if (cp.clamped / cp.n > opts.max_clamped_fraction ||
        cq.clamped / cq.n > opts.max_clamped_fraction) {
      continue;
    }
    included.push_back({static_cast<std::int64_t>(cell), w});
    included_w += w;
  }
  if (included.empty()) throw Error("insufficient overlap");

  for (const auto& term : included) {
    const auto pr = p.smoothed_row(term.cell);
    const auto qr = q.smoothed_row(term.cell);
    double v = kernels::kl_terms(pr.data(), qr.data(), pr.size()).nats;
    if (opts.bias_correct) {
      v -= plugin_bias(yk, p.cell_count(term.cell), q.cell_count(term.cell));
      v = std::max(v, 0.0);
    }
    acc += (term.w / included_w) * v;
    ++used;
  }
  return {acc, 1.0 - included_w / total_w, used};
}

CondKlResult symmetrized_kl(const ConditionalDistribution& p,
                            const ConditionalDistribution& q,
                            const MarginalDistribution& weights,
                            const CondKlOptions& opts) {
  const auto a = conditional_kl(p, q, weights, opts);
  const auto b = conditional_kl(q, p, weights, opts);
  return {0.5 * (a.nats + b.nats), a.excluded_mass, a.cells_used};
}

void dump_distribution(const MarginalDistribution& m, std::ostream& out) {
  nlohmann::ordered_json j;
  j["kind"] = "marginal";
  j["n_total"] = m.n_total;
  j["smoothing"] = m.smoothing;
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& d : m.dims) edges.push_back(d.edges);
  j["counts"] = m.counts;
  out << j.dump() << '\n';
}

void dump_distribution(const ConditionalDistribution& c, std::ostream& out) {
  nlohmann::ordered_json hdr;
  hdr["kind"] = "conditional";
  hdr["n_total"] = c.n_total;
  hdr["out_of_support"] = c.out_of_support;
  hdr["smoothing"] = c.smoothing;
  out << hdr.dump() << '\n';
  std::vector<std::int64_t> keys;
  keys.reserve(c.cells.size());
  for (const auto& [k, v] : c.cells) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (std::int64_t k : keys) {
    const auto& cell = c.cells.at(k);
    nlohmann::ordered_json row;
    row["x_cell"] = k;
    row["n"] = cell.n;
    row["clamped"] = cell.clamped;
    row["y_counts"] = cell.y_counts;
    out << row.dump() << '\n';
  }
}

MarginalDistribution pooled_input_marginal(std::span<const TraceRecord> a,
                                           std::span<const TraceRecord> b,
                                           const BinningSpec& binning) {
  MarginalDistribution m = estimate_marginal(a, binning, Space::Input);
  const MarginalDistribution mb = estimate_marginal(b, binning, Space::Input);
  for (std::size_t i = 0; i < m.counts.size(); ++i) m.counts[i] += mb.counts[i];
  m.n_total += mb.n_total;
  return m;
}

}  // namespace datactl
