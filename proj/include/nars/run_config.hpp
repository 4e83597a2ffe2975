#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nars/plugin_evaluator.hpp"
#include "nars/search_engine.hpp"

namespace nars {

struct EvaluatorSpec {
  enum class Kind { Synthetic, Plugin } kind = Kind::Synthetic;
  std::vector<std::string> command;
  PluginOptions::Mode mode = PluginOptions::Mode::Multiplex;
  double timeout = 0;  // seconds, 0 = adaptive
};

/// A run description. JSON with // and /* */ comments; relative paths are
/// resolved against the directory of the config file.
struct RunConfig {
  std::string space_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  int parallelism = 1;
  EvaluatorSpec evaluator;
  PipelineConfig pipeline;
};

/// Throws ParseError naming the offending field (unknown keys included).
RunConfig parse_run_config(std::string_view text, const std::string &base_dir = ".");
RunConfig load_run_config(const std::string &path);

nlohmann::json to_json(const RunConfig &config);

/// "flops<=450M,params<=6M" style bound lists; suffixes K, M, G.
ConstraintSet parse_constraint_set(std::string_view text);

std::unique_ptr<Evaluator> make_evaluator(const RunConfig &config, const SearchSpace &space);

}  // namespace nars
