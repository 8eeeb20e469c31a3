#include <doctest.h>

#include <string>

#include "zc/config.hpp"

using namespace zc;

namespace {

std::string error_of(const std::string& json) {
  try {
    validate(parse_config(json));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool mentions(const std::string& msg, const std::string& what) { return msg.find(what) != std::string::npos; }

}  // namespace

TEST_CASE("default config is valid and round-trips") {
  const auto c = default_config();
  CHECK_NOTHROW(validate(c));
  const auto text = dump_config(c);
  const auto back = parse_config(text);
  CHECK(dump_config(back) == text);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(c.trace.duration_s == 172800.0);
  CHECK(c.trace.fps == 1.0);
  CHECK(c.query.span.end_s == 172800.0);
}

TEST_CASE("empty object means the defaults") {
  CHECK(dump_config(parse_config("{}")) == dump_config(default_config()));
}

TEST_CASE("overrides land in the right fields") {
  auto c = parse_config(R"({
    "seed": 9,
    "system": "cloudonly",
    "trace": {"duration_s": 3600, "difficulty": {"hard_fraction": 0.4}},
    "camera": {"preset": "rpi3", "compute_rate": 2e9},
    "network": {"uplink_bytes_per_s": 2097152},
    "landmarks": {"interval_frames": 60, "drop_probability": 0.2},
    "operators": {"limit": 12, "explicit": [{"fps": 5, "sigma": 0.1, "region": {"x": 0, "y": 0, "w": 10, "h": 10}}]},
    "policy": {"alpha": 0.25},
    "query": {"type": "tagging", "class": 0, "span": [0, 1800], "levels": [20, 5]},
    "run": {"abort_time_s": 100, "verify": true}
  })");
  CHECK(c.seed == 9);
  CHECK(c.system == "cloudonly");
  CHECK(c.trace.duration_s == 3600);
  CHECK(c.trace.synth.difficulty.hard_fraction == 0.4);
  CHECK(c.camera.compute_rate == 2e9);
  CHECK(c.network.uplink_bytes_per_s == 2097152);
  CHECK(c.camera.landmark_interval_frames == 60);
  CHECK(c.corruption.drop_probability == 0.2);
  CHECK(c.family_limit == 12);
  REQUIRE(c.operators.size() == 1);
  CHECK(c.operators[0].region == Rect{0, 0, 10, 10});
  CHECK(c.policy.alpha == 0.25);
  CHECK(c.query.type == QueryType::Tagging);
  CHECK(c.query.levels == std::vector<int>{20, 5});
  CHECK(c.query.span.end_s == 1800);
  CHECK(c.abort_time_s == 100.0);
  CHECK(c.verify);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("span defaults to the whole trace") {
  auto c = parse_config(R"({"trace": {"duration_s": 7200}})");
  CHECK(c.query.span.start_s == 0.0);
  CHECK(c.query.span.end_s == 7200.0);
}

TEST_CASE("errors name the offending field") {
  CHECK(mentions(error_of(R"({"trace": {"fsp": 1}})"), "trace.fsp: unknown field"));
  CHECK(mentions(error_of(R"({"bogus": 1})"), "bogus: unknown field"));
  CHECK(mentions(error_of(R"({"trace": {"fps": "fast"}})"), "trace.fps: expected a number"));
  CHECK(mentions(error_of(R"({"policy": {"alpha": 1.5}})"), "policy.alpha"));
  CHECK(mentions(error_of(R"({"policy": {"window_w": 3}})"), "policy.window_w"));
  CHECK(mentions(error_of(R"({"query": {"type": "sum"}})"), "query.type"));
  CHECK(mentions(error_of(R"({"query": {"span": [5]}})"), "query.span"));
  CHECK(mentions(error_of(R"({"query": {"span": [0, 999999]}})"), "query.span"));
  CHECK(mentions(error_of(R"({"query": {"class": 7}})"), "query.class"));
  CHECK(mentions(error_of(R"({"query": {"type": "tagging", "levels": [5, 10]}})"), "query.levels"));
  CHECK(mentions(error_of(R"({"camera": {"preset": "cray"}})"), "camera.preset"));
  CHECK(mentions(error_of(R"({"system": "magic"})"), "system: unknown system"));
  CHECK(mentions(error_of(R"({"network": {"uplink_bytes_per_s": 0}})"), "network.uplink_bytes_per_s"));
  CHECK(mentions(error_of(R"({"landmarks": {"drop_probability": 2}})"), "landmarks.drop_probability"));
  CHECK(mentions(error_of(R"({"operators": {"explicit": [{"fps": -1}]}})"), "operators.explicit[0].fps"));
  CHECK(mentions(error_of(R"({"trace": {"classes": [{"id": 0, "occurrence_rate": 3}]}})"), "trace.classes"));
  CHECK(mentions(error_of(R"({"trace": {"classes": [{"id": 0, "count": {"kind": "normal"}}]}})"),
                 "trace.classes[0].count.kind"));
  CHECK(mentions(error_of("{not json"), "parse error"));
  CHECK(mentions(error_of(R"({"run": {"first_pass_stride": 0}})"), "run.first_pass_stride"));
}

TEST_CASE("hash tracks simulated content only") {
  auto a = default_config();
  auto b = a;
  b.verify = true;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  auto c = a;
  c.policy.beta = 3.0;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("synthesized trace follows the config") {
  auto c = parse_config(R"({"trace": {"duration_s": 600, "fps": 2}})");
  auto t = materialize_trace(c);
  CHECK(t.frame_count() == 1200);
  CHECK(t.fps == 2.0);
  CHECK(materialize_trace(c) == t);
  c.trace.path = "/nonexistent/trace.csv";
  CHECK_THROWS(materialize_trace(c));
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
