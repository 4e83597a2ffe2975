// Test double for the trainer plugin protocol. It never trains anything: the
// curve for a request is a fixed function of its id and epoch.
//
//   --version N        protocol version announced in hello
//   --delay-ms N       sleep before answering each request
//   --counter FILE     track requests in flight across processes; the file
//                      holds "current max" and is updated under flock
//   --die-on-id N      exit(3) after the first progress line of request N
//   --hang-on-id N     accept request N and never answer it
//   --garbage-on-id N  answer request N with a line that is not JSON

#include <fcntl.h>
#include <poll.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <deque>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "nars/protocol.hpp"

namespace {

double curve_value(std::uint64_t id, int epoch) {
  return 0.3 + 0.05 * static_cast<double>(epoch) + 0.001 * static_cast<double>(id % 7);
}

void bump_counter(const std::string &path, int delta) {
  if (path.empty()) return;
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd < 0) return;
  ::flock(fd, LOCK_EX);
  char buf[64] = {0};
  const auto n = ::pread(fd, buf, sizeof buf - 1, 0);
  long cur = 0, mx = 0;
  if (n > 0) std::sscanf(buf, "%ld %ld", &cur, &mx);
  cur += delta;
  if (cur > mx) mx = cur;
  const int len = std::snprintf(buf, sizeof buf, "%ld %ld\n", cur, mx);
  if (::ftruncate(fd, 0) != 0 || ::pwrite(fd, buf, static_cast<std::size_t>(len), 0) < 0) std::perror("counter");
  ::flock(fd, LOCK_UN);
  ::close(fd);
}

void emit(const nlohmann::json &j) {
  const auto line = nars::to_line(j);
  std::fwrite(line.data(), 1, line.size(), stdout);
  std::fflush(stdout);
}

std::string pending;

// Next complete line from stdin; waits up to `wait_ms` (-1: forever).
std::optional<std::string> read_line(int wait_ms) {
  for (;;) {
    const auto nl = pending.find('\n');
    if (nl != std::string::npos) {
      std::string line = pending.substr(0, nl);
      pending.erase(0, nl + 1);
      return line;
    }
    pollfd p{0, POLLIN, 0};
    if (::poll(&p, 1, wait_ms) <= 0) return std::nullopt;
    char buf[4096];
    const auto n = ::read(0, buf, sizeof buf);
    if (n <= 0) std::exit(0);
    pending.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"protocol test double"};
  int version = nars::kProtocolVersion;
  int delay_ms = 0;
  std::string counter;
  long long die_on = -1, hang_on = -1, garbage_on = -1;
  app.add_option("--version", version);
  app.add_option("--delay-ms", delay_ms);
  app.add_option("--counter", counter);
  app.add_option("--die-on-id", die_on);
  app.add_option("--hang-on-id", hang_on);
  app.add_option("--garbage-on-id", garbage_on);
  CLI11_PARSE(app, argc, argv);

  emit(nars::to_json(nars::HelloMessage{version, {"double"}}));

  std::deque<nars::EvalRequest> queue;
  auto accept = [&](const std::string &line) {
    if (line.empty()) return;
    queue.push_back(nars::parse_request(line));
    bump_counter(counter, +1);
  };
  for (;;) {
    if (queue.empty()) {
      if (auto line = read_line(-1)) accept(*line);
    }
    while (auto more = read_line(20)) accept(*more);
    if (queue.empty()) continue;

    const auto req = queue.front();
    queue.pop_front();
    const auto id = static_cast<long long>(req.id);
    if (id == hang_on) continue;
    if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    if (id == garbage_on) {
      std::fputs("this is not json\n", stdout);
      std::fflush(stdout);
      bump_counter(counter, -1);
      continue;
    }
    nars::EvalResult r;
    r.id = req.id;
    for (int e = 1; e <= req.epoch_budget; ++e) {
      const double acc = curve_value(req.id, e);
      r.curve.push_back(acc);
      emit(nars::to_json(nars::ProgressMessage{req.id, e, acc}));
      if (id == die_on) return 3;
    }
    bump_counter(counter, -1);
    emit(nars::to_json(r));
  }
}
