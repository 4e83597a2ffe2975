#include "nars/plugin_evaluator.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include "nars/error.hpp"
#include "nars/protocol.hpp"
#include "nars/stats.hpp"

extern char **environ;

namespace nars {
namespace {

using Clock = std::chrono::steady_clock;

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "plugin exited with status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "plugin killed by signal " + std::to_string(WTERMSIG(status));
  return "plugin stopped";
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

}  // namespace

struct PluginEvaluator::Worker {
  struct InFlight {
    std::size_t index = 0;
    Clock::time_point start;
    std::vector<double> curve;
  };

  pid_t pid = -1;
  int fd = -1;
  std::string buffer;
  std::map<std::uint64_t, InFlight> inflight;

  bool alive() const { return pid > 0; }

  // Returns the wait status.
  int kill_now() {
    int status = 0;
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
    }
    reset();
    return status;
  }

  int reap() {
    int status = 0;
    if (pid > 0) ::waitpid(pid, &status, 0);
    reset();
    return status;
  }

  void shutdown_gracefully() {
    if (pid <= 0) return;
    ::shutdown(fd, SHUT_WR);
    const auto deadline = Clock::now() + std::chrono::seconds(2);
    while (Clock::now() < deadline) {
      int status = 0;
      if (::waitpid(pid, &status, WNOHANG) == pid) {
        reset();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill_now();
  }

  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
    pid = -1;
    buffer.clear();
  }

  bool send_line(const std::string &line) {
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::send(fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      sent += static_cast<std::size_t>(n);
    }
    return true;
  }

  // Appends available bytes to the buffer; false on EOF or error.
  bool fill() {
    char chunk[65536];
    while (true) {
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buffer.append(chunk, static_cast<std::size_t>(n));
      return true;
    }
  }

  std::optional<std::string> take_line() {
    const auto nl = buffer.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = buffer.substr(0, nl);
    buffer.erase(0, nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
};

PluginEvaluator::PluginEvaluator(PluginOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw Error("plugin command is empty");
  if (options_.parallelism < 1) throw Error("plugin parallelism must be at least 1");
}

PluginEvaluator::~PluginEvaluator() {
  for (auto &w : workers_) w->shutdown_gracefully();
}

void PluginEvaluator::launch(Worker &worker) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(std::string("socketpair failed: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);
  std::vector<char *> argv;
  for (auto &arg : options_.command) argv.push_back(const_cast<char *>(arg.c_str()));
  argv.push_back(nullptr);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    throw Error("cannot launch plugin '" + options_.command.front() + "': " + std::strerror(rc));
  }
  worker.pid = pid;
  worker.fd = sv[0];
  ++launches_;

  const auto deadline = Clock::now() + std::chrono::duration<double>(options_.timeout_floor);
  while (true) {
    if (auto line = worker.take_line()) {
      const auto msg = parse_reply(*line);
      const auto *hello = std::get_if<HelloMessage>(&msg);
      if (!hello) throw ProtocolError("plugin did not start with a hello message: " + *line);
      if (hello->protocol_version != kProtocolVersion) {
        worker.kill_now();
        throw ProtocolError("plugin speaks protocol version " + std::to_string(hello->protocol_version) +
                            ", expected " + std::to_string(kProtocolVersion));
      }
      capabilities_ = hello->capabilities;
      return;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) {
      worker.kill_now();
      throw Error("plugin did not send hello in time");
    }
    pollfd p{worker.fd, POLLIN, 0};
    if (::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1000))) > 0 && !worker.fill()) {
      const int status = worker.reap();
      throw Error(describe_status(status) + " before hello");
    }
  }
}

double PluginEvaluator::current_timeout() const {
  if (options_.timeout > 0) return options_.timeout;
  if (durations_.empty()) return 0;
  return std::max(options_.timeout_floor, options_.timeout_factor * median(durations_));
}

std::vector<EvalResult> PluginEvaluator::run(std::span<const EvalRequest> requests) {
  {
    std::set<std::uint64_t> ids;
    for (const auto &r : requests) {
      if (!ids.insert(r.id).second) throw Error("duplicate request id " + std::to_string(r.id));
    }
  }
  const bool multiplex = options_.mode == PluginOptions::Mode::Multiplex;
  const std::size_t n_workers = multiplex ? 1 : static_cast<std::size_t>(options_.parallelism);
  const std::size_t cap = multiplex ? static_cast<std::size_t>(options_.parallelism) : 1;
  while (workers_.size() < n_workers) workers_.push_back(std::make_unique<Worker>());

  std::vector<std::optional<EvalResult>> results(requests.size());
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < requests.size(); ++i) queue.push_back(i);
  std::size_t done = 0;

  auto fail = [&](std::size_t index, std::string reason, std::vector<double> curve) {
    EvalResult r;
    r.id = requests[index].id;
    r.status = EvalStatus::Failed;
    r.reason = std::move(reason);
    r.curve = std::move(curve);
    results[index] = std::move(r);
    ++done;
  };
  auto crash = [&](Worker &w, int status) {
    const std::string reason = describe_status(status);
    for (auto &[id, f] : w.inflight) fail(f.index, reason, std::move(f.curve));
    w.inflight.clear();
  };
  auto handle_line = [&](Worker &w, const std::string &line) {
    const auto msg = parse_reply(line);
    if (std::holds_alternative<HelloMessage>(msg)) throw ProtocolError("unexpected hello: " + line);
    if (const auto *p = std::get_if<ProgressMessage>(&msg)) {
      auto it = w.inflight.find(p->id);
      if (it == w.inflight.end()) throw ProtocolError("progress for unknown request: " + line);
      if (p->epoch < 1) throw ProtocolError("progress epoch must be >= 1: " + line);
      auto &curve = it->second.curve;
      if (curve.size() < static_cast<std::size_t>(p->epoch)) curve.resize(static_cast<std::size_t>(p->epoch), 0.0);
      curve[static_cast<std::size_t>(p->epoch - 1)] = p->accuracy;
      return;
    }
    EvalResult r = std::get<EvalResult>(msg);
    auto it = w.inflight.find(r.id);
    if (it == w.inflight.end()) throw ProtocolError("result for unknown request: " + line);
    const auto index = it->second.index;
    const auto budget = static_cast<std::size_t>(requests[index].epoch_budget);
    if (r.ok()) {
      durations_.push_back(seconds_since(it->second.start));
      if (r.curve.size() != budget) {
        r.status = EvalStatus::Failed;
        r.reason = "curve has " + std::to_string(r.curve.size()) + " entries, expected " + std::to_string(budget);
      }
    } else if (r.curve.empty()) {
      r.curve = std::move(it->second.curve);
    }
    w.inflight.erase(it);
    results[index] = std::move(r);
    ++done;
  };

  try {
    while (done < requests.size()) {
      for (auto &wp : workers_) {
        Worker &w = *wp;
        if (queue.empty()) break;
        if (!w.alive()) launch(w);
        while (w.inflight.size() < cap && !queue.empty()) {
          const std::size_t index = queue.front();
          if (!w.send_line(to_line(to_json(requests[index])))) {
            crash(w, w.kill_now());
            break;
          }
          queue.pop_front();
          w.inflight[requests[index].id] = {index, Clock::now(), {}};
        }
      }

      const double timeout = current_timeout();
      std::vector<pollfd> fds;
      std::vector<Worker *> polled;
      long long wait_ms = 1000;
      for (auto &wp : workers_) {
        if (!wp->alive() || wp->inflight.empty()) continue;
        fds.push_back({wp->fd, POLLIN, 0});
        polled.push_back(wp.get());
        if (timeout > 0) {
          for (const auto &[id, f] : wp->inflight) {
            const double left = timeout - seconds_since(f.start);
            wait_ms = std::min(wait_ms, static_cast<long long>(std::max(0.0, left) * 1000.0) + 1);
          }
        }
      }
      if (fds.empty()) continue;
      ::poll(fds.data(), fds.size(), static_cast<int>(wait_ms));

      for (std::size_t k = 0; k < fds.size(); ++k) {
        if (!(fds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
        Worker &w = *polled[k];
        const bool open = w.fill();
        while (auto line = w.take_line()) {
          if (!line->empty()) handle_line(w, *line);
        }
        if (!open) crash(w, w.reap());
      }

      if (timeout > 0) {
        for (auto &wp : workers_) {
          Worker &w = *wp;
          bool expired = false;
          for (auto &[id, f] : w.inflight) {
            if (seconds_since(f.start) > timeout) {
              expired = true;
              char buf[64];
              std::snprintf(buf, sizeof buf, "timed out after %.1f s", timeout);
              fail(f.index, buf, std::move(f.curve));
              f.index = requests.size();  // consumed
            }
          }
          if (!expired) continue;
          std::vector<std::size_t> again;
          for (const auto &[id, f] : w.inflight) {
            if (f.index < requests.size()) again.push_back(f.index);
          }
          std::sort(again.begin(), again.end());
          for (auto it = again.rbegin(); it != again.rend(); ++it) queue.push_front(*it);
          w.inflight.clear();
          w.kill_now();
        }
      }
    }
  } catch (...) {
    for (auto &wp : workers_) {
      wp->inflight.clear();
      wp->kill_now();
    }
    throw;
  }

  std::vector<EvalResult> out;
  out.reserve(results.size());
  for (auto &r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace nars
