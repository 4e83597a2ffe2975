#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "helpers.hpp"
#include "nars/candidate_io.hpp"
#include "nars/error.hpp"
#include "nars/plugin_evaluator.hpp"
#include "nars/protocol.hpp"

using namespace nars;

namespace {

const std::string kDouble = NARS_PLUGIN_DOUBLE;

// Same formula as the test double.
std::vector<double> fixture_curve(std::uint64_t id, int budget) {
  std::vector<double> c;
  for (int e = 1; e <= budget; ++e) c.push_back(0.3 + 0.05 * e + 0.001 * static_cast<double>(id % 7));
  return c;
}

std::vector<EvalRequest> requests(std::size_t n, int budget) {
  std::vector<EvalRequest> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({100 + i, sample_uniform(testutil::toy(), i), budget, i});
  }
  return out;
}

PluginOptions plugin(std::vector<std::string> extra, int parallelism = 1) {
  PluginOptions o;
  o.command = {kDouble};
  o.command.insert(o.command.end(), extra.begin(), extra.end());
  o.parallelism = parallelism;
  return o;
}

std::string temp_file(const std::string &stem) {
  return (std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(::getpid()))).string();
}

long counter_max(const std::string &path) {
  std::ifstream in(path);
  long cur = -1, mx = -1;
  in >> cur >> mx;
  return mx;
}

}  // namespace

TEST_CASE("message round trip") {
  for (std::uint64_t i = 0; i < 20; ++i) {
    const EvalRequest req{i * 977, sample_uniform(testutil::joint(), i), 1 + static_cast<int>(i), i * 31};
    CHECK(parse_request(to_line(to_json(req))) == req);

    EvalResult ok{i, fixture_curve(i, 5), EvalStatus::Ok, ""};
    CHECK(std::get<EvalResult>(parse_reply(to_line(to_json(ok)))) == ok);
    EvalResult failed{i, {0.1}, EvalStatus::Failed, "out of memory"};
    CHECK(std::get<EvalResult>(parse_reply(to_line(to_json(failed)))) == failed);
  }
  const HelloMessage hello{1, {"a", "b"}};
  CHECK(std::get<HelloMessage>(parse_reply(to_line(to_json(hello)))) == hello);
  const ProgressMessage prog{4, 2, 0.125};
  CHECK(std::get<ProgressMessage>(parse_reply(to_line(to_json(prog)))) == prog);

  const auto line = to_line(to_json(hello));
  CHECK(line.back() == '\n');
  CHECK(std::count(line.begin(), line.end(), '\n') == 1);
}

TEST_CASE("malformed messages") {
  CHECK_THROWS_AS(parse_reply("not json"), ProtocolError);
  CHECK_THROWS_AS(parse_reply(R"({"id":1})"), ProtocolError);
  CHECK_THROWS_AS(parse_reply(R"({"type":"progress","id":1,"epoch":"x","accuracy":0.1})"), ProtocolError);
  CHECK_THROWS_AS(parse_request(R"({"type":"eval","id":1,"epoch_budget":0,"seed":1,"candidate":{}})"),
                  ProtocolError);
  try {
    parse_reply("garbage line");
  } catch (const ProtocolError &e) {
    CHECK(std::string(e.what()).find("garbage line") != std::string::npos);
  }
}

TEST_CASE("candidate files") {
  std::vector<Candidate> cs;
  for (std::uint64_t i = 0; i < 5; ++i) cs.push_back(sample_uniform(testutil::joint(), i));
  std::stringstream ss;
  write_candidates(ss, cs);
  CHECK(read_candidates(ss) == cs);
  std::stringstream bad("{\"arch\": 3}\n");
  CHECK_THROWS_AS(read_candidates(bad), ParseError);
}

TEST_CASE("plugin evaluator") {
  SUBCASE("fixed curves") {
    PluginEvaluator ev(plugin({}, 3));
    const auto reqs = requests(7, 4);
    const auto res = ev.evaluate(reqs);
    REQUIRE(res.size() == reqs.size());
    for (std::size_t i = 0; i < res.size(); ++i) {
      const EvalResult want{reqs[i].id, fixture_curve(reqs[i].id, 4), EvalStatus::Ok, ""};
      CHECK(to_line(to_json(res[i])) == to_line(to_json(want)));
    }
    CHECK(ev.capabilities() == std::vector<std::string>{"double"});
    CHECK(ev.launches() == 1);
  }

  SUBCASE("a dying plugin fails only its request") {
    PluginEvaluator ev(plugin({"--die-on-id", "103"}, 1));
    const auto res = ev.evaluate(requests(6, 3));
    for (const auto &r : res) {
      if (r.id == 103) {
        CHECK_FALSE(r.ok());
        CHECK(r.curve.size() == 1);
        CHECK(r.reason.find("3") != std::string::npos);
      } else {
        CHECK(r.ok());
      }
    }
    CHECK(ev.launches() == 2);
  }

  SUBCASE("timeout fails the hung request and requeues the rest") {
    auto o = plugin({"--hang-on-id", "101"}, 4);
    o.timeout = 0.5;
    PluginEvaluator ev(o);
    const auto res = ev.evaluate(requests(5, 2));
    for (const auto &r : res) {
      if (r.id == 101) {
        CHECK_FALSE(r.ok());
        CHECK(r.reason.find("timed out") != std::string::npos);
      } else {
        CHECK(r.ok());
      }
    }
  }

  SUBCASE("garbage output is a protocol error") {
    PluginEvaluator ev(plugin({"--garbage-on-id", "102"}, 2));
    CHECK_THROWS_AS(ev.evaluate(requests(4, 2)), ProtocolError);
  }

  SUBCASE("version mismatch") {
    PluginEvaluator ev(plugin({"--version", "2"}, 1));
    CHECK_THROWS_AS(ev.evaluate(requests(1, 2)), ProtocolError);
  }

  SUBCASE("parallelism bound, one process per slot") {
    const auto counter = temp_file("nars_counter");
    std::remove(counter.c_str());
    auto o = plugin({"--counter", counter, "--delay-ms", "20"}, 8);
    o.mode = PluginOptions::Mode::PerSlot;
    PluginEvaluator ev(o);
    const auto res = ev.evaluate(requests(48, 2));
    for (const auto &r : res) CHECK(r.ok());
    const long mx = counter_max(counter);
    CHECK(mx <= 8);
    CHECK(mx >= 2);
    CHECK(ev.launches() == 8);
    std::remove(counter.c_str());
  }

  SUBCASE("parallelism bound, multiplexed") {
    const auto counter = temp_file("nars_counter_mx");
    std::remove(counter.c_str());
    PluginEvaluator ev(plugin({"--counter", counter, "--delay-ms", "5"}, 8));
    const auto res = ev.evaluate(requests(48, 2));
    for (const auto &r : res) CHECK(r.ok());
    const long mx = counter_max(counter);
    CHECK(mx <= 8);
    CHECK(mx >= 2);
    std::remove(counter.c_str());
  }

  SUBCASE("duplicate ids") {
    PluginEvaluator ev(plugin({}, 1));
    auto reqs = requests(2, 1);
    reqs[1].id = reqs[0].id;
    CHECK_THROWS_AS(ev.evaluate(reqs), Error);
  }

  SUBCASE("missing executable") {
    PluginOptions o;
    o.command = {"/nonexistent/plugin"};
    PluginEvaluator ev(o);
    CHECK_THROWS_AS(ev.evaluate(requests(1, 1)), Error);
  }
}
