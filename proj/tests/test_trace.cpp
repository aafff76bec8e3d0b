// SPDX-License-Identifier: Apache-2.0
#include "datactl/trace.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "datactl/error.hpp"
#include "doctest.h"

using namespace datactl;

namespace {

Trace parse_text(const std::string& text, bool lenient = false) {
  std::istringstream in(text);
  return parse_trace_stream(in, "test", {lenient});
}

Trace random_trace(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> value(-5.0, 5.0);
  std::bernoulli_distribution coin(0.3);
  Trace trace;
  trace.meta.x_dim = 2;
  trace.meta.y_dim = 1;
  trace.meta.source = "test";
  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord r;
    r.t = static_cast<std::int64_t>(i * 2);  // gaps are fine, order matters
    r.x = {value(rng), value(rng)};
    r.y = {value(rng)};
    if (coin(rng)) r.circ["noise"] = value(rng);
    if (coin(rng)) r.events.insert("circumstance_change");
    for (const auto& [k, v] : r.circ) trace.meta.circ_vocabulary.insert(k);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

}  // namespace

TEST_CASE("parse three well-formed lines") {
  const auto trace = parse_text(
      R"({"t":0,"x":[1.0,2.0],"y":[0.5]}
{"t":1,"x":[1.5,2.5],"y":[0.6],"circ":{"noise":0.1}}
{"t":2,"x":[2.0,3.0],"y":[0.7],"events":["circumstance_change"]}
)");
  CHECK(trace.records.size() == 3);
  CHECK(trace.meta.x_dim == 2);
  CHECK(trace.meta.y_dim == 1);
  CHECK(trace.records[1].circ.at("noise") == doctest::Approx(0.1));
  CHECK(trace.records[2].events.count("circumstance_change") == 1);
  CHECK(trace.meta.circ_vocabulary.count("noise") == 1);
}

TEST_CASE("empty file is an error") {
  CHECK_THROWS_WITH_AS(parse_text(""), "empty trace", Error);
  CHECK_THROWS_WITH_AS(parse_text("\n  \n"), "empty trace", Error);
}

TEST_CASE("dimension mismatch reports the offending line") {
  try {
    parse_text(R"({"t":0,"x":[1,2],"y":[0]}
{"t":1,"x":[1,2,3],"y":[0]}
)");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("non-monotone and duplicate t are rejected") {
  CHECK_THROWS_AS(parse_text(R"({"t":1,"x":[1],"y":[0]}
{"t":0,"x":[1],"y":[0]}
)"),
                  ParseError);
  CHECK_THROWS_AS(parse_text(R"({"t":1,"x":[1],"y":[0]}
{"t":1,"x":[1],"y":[0]}
)"),
                  ParseError);
}

TEST_CASE("unknown keys: strict rejects, lenient ignores") {
  const std::string line = R"({"t":0,"x":[1],"y":[0],"extra":42})";
  CHECK_THROWS_AS(parse_text(line), ParseError);
  const auto trace = parse_text(line, true);
  CHECK(trace.records.size() == 1);
}

TEST_CASE("null feature entries load as NaN") {
  const auto trace = parse_text(R"({"t":0,"x":[null,1.0],"y":[0]})", false);
  CHECK(std::isnan(trace.records[0].x[0]));
  CHECK(trace.records[0].x[1] == 1.0);
}

TEST_CASE("malformed JSON reports the line") {
  try {
    parse_text("{\"t\":0,\"x\":[1],\"y\":[0]}\nnot json\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("window arithmetic") {
  std::mt19937_64 rng(7);
  const auto trace = random_trace(rng, 10);

  const auto w1 = window(trace, 4, 3);
  REQUIRE(w1.size() == 3);
  CHECK(w1[0].front().t == trace.records[0].t);
  CHECK(w1[1].front().t == trace.records[3].t);
  CHECK(w1[2].front().t == trace.records[6].t);

  const auto exact = window(trace, 10, 1);
  CHECK(exact.size() == 1);

  Trace small = trace;
  small.records.resize(3);
  CHECK_THROWS_AS(window(small, 4, 1), Error);
  CHECK_THROWS_AS(window(trace, 0, 1), Error);
  CHECK_THROWS_AS(window(trace, 4, 0), Error);
}

TEST_CASE("window coverage property") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> n_dist(5, 60);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = n_dist(rng);
    const auto trace = random_trace(rng, n);
    std::uniform_int_distribution<std::size_t> w_dist(1, n);
    const std::size_t width = w_dist(rng);
    std::uniform_int_distribution<std::size_t> s_dist(1, width);
    const std::size_t stride = s_dist(rng);

    const auto windows = window(trace, width, stride);
    std::vector<bool> covered(n, false);
    for (const auto& w : windows) {
      const std::size_t off = static_cast<std::size_t>(w.data() - trace.records.data());
      for (std::size_t i = off; i < off + w.size(); ++i) covered[i] = true;
    }
    const std::size_t covered_end = (n - width) / stride * stride + width;
    for (std::size_t i = 0; i < covered_end; ++i) {
      CAPTURE(n);
      CAPTURE(width);
      CAPTURE(stride);
      CAPTURE(i);
      REQUIRE(covered[i]);
    }
  }
}

TEST_CASE("serialize/parse round trip preserves every field") {
  std::mt19937_64 rng(23);
  for (int iter = 0; iter < 20; ++iter) {
    const auto trace = random_trace(rng, 30);
    std::ostringstream out;
    serialize_trace(trace, out);
    std::istringstream in(out.str());
    const auto back = parse_trace_stream(in, "test", {});
    REQUIRE(back.records.size() == trace.records.size());
    CHECK(back.records == trace.records);
    CHECK(back.meta.x_dim == trace.meta.x_dim);
    CHECK(back.meta.y_dim == trace.meta.y_dim);
    CHECK(back.meta.circ_vocabulary == trace.meta.circ_vocabulary);
  }
}

TEST_CASE("validate enforces the trace invariants") {
  std::mt19937_64 rng(3);
  auto trace = random_trace(rng, 5);
  CHECK_NOTHROW(validate(trace));

  auto broken = trace;
  broken.records[2].t = broken.records[1].t;
  CHECK_THROWS_AS(validate(broken), Error);

  broken = trace;
  broken.records[3].x.push_back(1.0);
  CHECK_THROWS_AS(validate(broken), Error);

  broken = trace;
  broken.records.clear();
  CHECK_THROWS_AS(validate(broken), Error);

  broken = trace;
  broken.meta.circ_vocabulary = {"noise"};
  for (auto& r : broken.records) r.circ.clear();
  broken.records[0].circ["undeclared"] = 1.0;
  CHECK_THROWS_AS(validate(broken), Error);
}
