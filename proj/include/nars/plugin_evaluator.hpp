#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nars/evaluator.hpp"

namespace nars {

struct PluginOptions {
  /// argv of the plugin; searched on PATH when argv[0] has no slash.
  std::vector<std::string> command;
  /// Maximum requests in flight across all plugin processes.
  int parallelism = 1;
  /// Multiplex: one process holds up to `parallelism` requests.
  /// PerSlot: `parallelism` processes with one request each.
  enum class Mode { Multiplex, PerSlot } mode = Mode::Multiplex;
  /// Per-request timeout in seconds; 0 selects the adaptive rule
  /// max(timeout_floor, timeout_factor * median completed wall time), which
  /// is unbounded until the first request completes.
  double timeout = 0;
  double timeout_floor = 60;
  double timeout_factor = 10;
};

/// Runs a trainer plugin as a subprocess speaking the line protocol in
/// protocol.hpp. A plugin that exits or is killed fails its in-flight
/// requests (keeping any progress curve) and is relaunched for the rest. A
/// timed-out request fails; other requests in flight on the same process are
/// resubmitted. Malformed output or a protocol version mismatch throws
/// ProtocolError.
class PluginEvaluator : public Evaluator {
 public:
  explicit PluginEvaluator(PluginOptions options);
  ~PluginEvaluator() override;

  PluginEvaluator(const PluginEvaluator &) = delete;
  PluginEvaluator &operator=(const PluginEvaluator &) = delete;

  const PluginOptions &options() const noexcept { return options_; }
  /// Capabilities announced by the most recent hello.
  const std::vector<std::string> &capabilities() const noexcept { return capabilities_; }
  std::size_t launches() const noexcept { return launches_; }

 protected:
  std::vector<EvalResult> run(std::span<const EvalRequest> requests) override;

 private:
  struct Worker;

  void launch(Worker &worker);
  double current_timeout() const;

  PluginOptions options_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::string> capabilities_;
  std::vector<double> durations_;
  std::size_t launches_ = 0;
};

}  // namespace nars
