#pragma once

// Evaluator plugin wire protocol, version 1. One JSON object per line on the
// plugin's stdin (requests) and stdout (replies):
//
//   <- {"type":"hello","protocol_version":1,"capabilities":[...]}
//   -> {"type":"eval","id":7,"candidate":{...},"epoch_budget":40,"seed":3}
//   <- {"type":"progress","id":7,"epoch":1,"accuracy":0.41}
//   <- {"type":"result","id":7,"curve":[...],"status":"ok"}
//   <- {"type":"result","id":7,"status":"failed","reason":"..."}

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nars/evaluator.hpp"

namespace nars {

inline constexpr int kProtocolVersion = 1;

struct HelloMessage {
  int protocol_version = kProtocolVersion;
  std::vector<std::string> capabilities;

  bool operator==(const HelloMessage &) const = default;
};

struct ProgressMessage {
  std::uint64_t id = 0;
  int epoch = 0;
  double accuracy = 0;

  bool operator==(const ProgressMessage &) const = default;
};

using PluginMessage = std::variant<HelloMessage, ProgressMessage, EvalResult>;

nlohmann::json to_json(const EvalRequest &request);
nlohmann::json to_json(const EvalResult &result);
nlohmann::json to_json(const HelloMessage &hello);
nlohmann::json to_json(const ProgressMessage &progress);

/// Compact single-line serialization with a trailing newline.
std::string to_line(const nlohmann::json &message);

/// Parses a request line (the plugin side). Throws ProtocolError quoting the
/// offending line.
EvalRequest parse_request(std::string_view line);
/// Parses a reply line (the engine side). Throws ProtocolError quoting the
/// offending line.
PluginMessage parse_reply(std::string_view line);

}  // namespace nars
