// SPDX-License-Identifier: Apache-2.0
#include "datactl/trace.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "datactl/error.hpp"
#include "json.hpp"

namespace datactl {

namespace {

using json = nlohmann::ordered_json;

double number_or_nan(const json& v, std::size_t line, const char* key) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) {
    throw ParseError(std::string("non-numeric entry in \"") + key + "\"", line);
  }
  return v.get<double>();
}

std::vector<double> parse_vector(const json& arr, std::size_t line,
                                 const char* key) {
  if (!arr.is_array()) {
    throw ParseError(std::string("\"") + key + "\" must be an array", line);
  }
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(number_or_nan(v, line, key));
  return out;
}

}  // namespace

void validate(const Trace& trace) {
  if (trace.records.empty()) throw Error("empty trace");
  const std::size_t xd = trace.meta.x_dim;
  const std::size_t yd = trace.meta.y_dim;
  std::int64_t prev_t = 0;
  bool first = true;
  for (const auto& r : trace.records) {
    if (r.x.size() != xd || r.y.size() != yd) {
      throw Error("dimension mismatch at t=" + std::to_string(r.t));
    }
    if (!first && r.t <= prev_t) {
      throw Error("non-monotone t at t=" + std::to_string(r.t));
    }
    prev_t = r.t;
    first = false;
    if (!trace.meta.circ_vocabulary.empty()) {
      for (const auto& [k, v] : r.circ) {
        if (!trace.meta.circ_vocabulary.count(k)) {
          throw Error("undeclared circumstance \"" + k + "\"");
        }
      }
    }
  }
}

Trace parse_trace_stream(std::istream& in, const std::string& source_label,
                         const ParseOptions& opts) {
  Trace trace;
  trace.meta.source = source_label;
  std::string line;
  std::size_t line_no = 0;
  bool have_dims = false;
  std::int64_t prev_t = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError("record is not a JSON object", line_no);

    TraceRecord rec;
    bool has_t = false, has_x = false, has_y = false;
    for (const auto& [key, value] : obj.items()) {
      if (key == "t") {
        if (!value.is_number_integer()) {
          throw ParseError("\"t\" must be an integer", line_no);
        }
        rec.t = value.get<std::int64_t>();
        has_t = true;
      } else if (key == "x") {
        rec.x = parse_vector(value, line_no, "x");
        has_x = true;
      } else if (key == "y") {
        rec.y = parse_vector(value, line_no, "y");
        has_y = true;
      } else if (key == "circ") {
        if (!value.is_object()) throw ParseError("\"circ\" must be an object", line_no);
        for (const auto& [ck, cv] : value.items()) {
          rec.circ[ck] = number_or_nan(cv, line_no, "circ");
        }
      } else if (key == "events") {
        if (!value.is_array()) throw ParseError("\"events\" must be an array", line_no);
        for (const auto& ev : value) {
          if (!ev.is_string()) throw ParseError("event tags must be strings", line_no);
          rec.events.insert(ev.get<std::string>());
        }
      } else if (!opts.lenient) {
        throw ParseError("unknown key \"" + key + "\" (use lenient mode to ignore)",
                         line_no);
      }
    }
    if (!has_t || !has_x || !has_y) {
      throw ParseError("record needs \"t\", \"x\" and \"y\"", line_no);
    }
    if (!have_dims) {
      trace.meta.x_dim = rec.x.size();
      trace.meta.y_dim = rec.y.size();
      have_dims = true;
    } else {
      if (rec.x.size() != trace.meta.x_dim || rec.y.size() != trace.meta.y_dim) {
        throw ParseError("dimension mismatch", line_no);
      }
      if (rec.t <= prev_t) throw ParseError("non-monotone t", line_no);
    }
    prev_t = rec.t;
    for (const auto& [k, v] : rec.circ) trace.meta.circ_vocabulary.insert(k);
    trace.records.push_back(std::move(rec));
  }
  if (trace.records.empty()) throw Error("empty trace");
  return trace;
}

Trace parse_trace(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return parse_trace_stream(in, path, opts);
}

ModelDescriptor load_model_descriptor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open descriptor file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed descriptor: ") + e.what());
  }
  ModelDescriptor d;
  d.name = j.value("name", std::string{});
  if (d.name.empty()) throw Error("descriptor name must be non-empty");
  d.environment_id = j.value("environment", std::string{});
  d.parameter_tag = j.value("parameter_tag", std::string{});
  d.loss_name = j.value("loss", std::string{});
  return d;
}

void serialize_trace(const Trace& trace, std::ostream& out) {
  for (const auto& r : trace.records) {
    json obj;
    obj["t"] = r.t;
    obj["x"] = r.x;
    obj["y"] = r.y;
    if (!r.circ.empty()) obj["circ"] = r.circ;
    if (!r.events.empty()) obj["events"] = r.events;
    out << obj.dump() << '\n';
  }
}

void write_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  serialize_trace(trace, out);
}

std::vector<std::span<const TraceRecord>> window(const Trace& trace,
                                                 std::size_t width,
                                                 std::size_t stride) {
  if (width < 1 || stride < 1) throw Error("window width and stride must be >= 1");
  const std::size_t n = trace.records.size();
  if (width > n) {
    throw Error("window width " + std::to_string(width) + " exceeds trace length " +
                std::to_string(n));
  }
  std::vector<std::span<const TraceRecord>> out;
  out.reserve((n - width) / stride + 1);
  for (std::size_t off = 0; off + width <= n; off += stride) {
    out.push_back({trace.records.data() + off, width});
  }
  return out;
}

}  // namespace datactl
