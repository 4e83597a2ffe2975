#include "nars/protocol.hpp"

#include <cmath>

#include "nars/candidate_io.hpp"
#include "nars/error.hpp"

namespace nars {

using nlohmann::json;

namespace {

[[noreturn]] void bad(std::string_view line, const std::string &why) {
  throw ProtocolError("malformed plugin message (" + why + "): " + std::string(line));
}

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception &) {
    bad(line, "not JSON");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) bad(line, "missing type");
  return j;
}

template <class T>
T get(const json &j, const char *key, std::string_view line) {
  if (!j.contains(key)) bad(line, std::string("missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    bad(line, std::string("bad '") + key + "'");
  }
}

}  // namespace

json to_json(const EvalRequest &r) {
  return {{"type", "eval"},
          {"id", r.id},
          {"candidate", to_json(r.candidate)},
          {"epoch_budget", r.epoch_budget},
          {"seed", r.seed}};
}

json to_json(const EvalResult &r) {
  json j = {{"type", "result"}, {"id", r.id}};
  if (r.ok()) {
    j["curve"] = r.curve;
    j["status"] = "ok";
  } else {
    if (!r.curve.empty()) j["curve"] = r.curve;
    j["status"] = "failed";
    j["reason"] = r.reason;
  }
  return j;
}

json to_json(const HelloMessage &h) {
  return {{"type", "hello"}, {"protocol_version", h.protocol_version}, {"capabilities", h.capabilities}};
}

json to_json(const ProgressMessage &p) {
  return {{"type", "progress"}, {"id", p.id}, {"epoch", p.epoch}, {"accuracy", p.accuracy}};
}

std::string to_line(const json &message) { return message.dump() + "\n"; }

EvalRequest parse_request(std::string_view line) {
  const json j = parse_object(line);
  if (j["type"] != "eval") bad(line, "expected an eval request");
  EvalRequest r;
  r.id = get<std::uint64_t>(j, "id", line);
  r.epoch_budget = get<int>(j, "epoch_budget", line);
  r.seed = get<std::uint64_t>(j, "seed", line);
  if (r.epoch_budget < 1) bad(line, "epoch_budget must be >= 1");
  try {
    r.candidate = candidate_from_json(get<json>(j, "candidate", line));
  } catch (const ParseError &e) {
    bad(line, e.what());
  }
  return r;
}

PluginMessage parse_reply(std::string_view line) {
  const json j = parse_object(line);
  const auto type = j["type"].get<std::string>();
  if (type == "hello") {
    HelloMessage h;
    h.protocol_version = get<int>(j, "protocol_version", line);
    if (j.contains("capabilities")) h.capabilities = get<std::vector<std::string>>(j, "capabilities", line);
    return h;
  }
  if (type == "progress") {
    ProgressMessage p;
    p.id = get<std::uint64_t>(j, "id", line);
    p.epoch = get<int>(j, "epoch", line);
    p.accuracy = get<double>(j, "accuracy", line);
    return p;
  }
  if (type == "result") {
    EvalResult r;
    r.id = get<std::uint64_t>(j, "id", line);
    const auto status = get<std::string>(j, "status", line);
    if (j.contains("curve")) r.curve = get<std::vector<double>>(j, "curve", line);
    if (status == "ok") {
      r.status = EvalStatus::Ok;
      if (!j.contains("curve")) bad(line, "ok result without curve");
    } else if (status == "failed") {
      r.status = EvalStatus::Failed;
      r.reason = j.contains("reason") ? get<std::string>(j, "reason", line) : std::string("unspecified");
    } else {
      bad(line, "unknown status '" + status + "'");
    }
    for (double v : r.curve) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) bad(line, "accuracy outside [0, 1]");
    }
    return r;
  }
  bad(line, "unknown type '" + type + "'");
}

}  // namespace nars
