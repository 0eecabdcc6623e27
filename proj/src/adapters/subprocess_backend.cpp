#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ocuflow/adapters/transport_backends.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow {

namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
  int fds[2] = {-1, -1};
  bool open() { return ::pipe2(fds, O_CLOEXEC) == 0; }
  void close_read() { if (fds[0] >= 0) ::close(fds[0]); fds[0] = -1; }
  void close_write() { if (fds[1] >= 0) ::close(fds[1]); fds[1] = -1; }
  ~Pipe() { close_read(); close_write(); }
};

int remaining_ms(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

}  // namespace

TransportResult SubprocessBackend::call(const ToolDescriptor&, const Json& request,
                                        std::chrono::milliseconds deadline) {
  auto args = text::split(locator_, ' ');
  std::erase_if(args, [](const std::string& a) { return a.empty(); });
  if (args.empty()) return TransportResult::transport_failure("empty subprocess locator");

  Pipe in, out;
  if (!in.open() || !out.open()) return TransportResult::transport_failure("pipe failed");

  const auto started = Clock::now();
  const auto until = started + deadline;
  pid_t pid = ::fork();
  if (pid < 0) return TransportResult::transport_failure("fork failed");
  if (pid == 0) {
    ::dup2(in.fds[0], STDIN_FILENO);
    ::dup2(out.fds[1], STDOUT_FILENO);
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    ::execv(argv[0], argv.data());
    ::_exit(127);
  }
  in.close_read();
  out.close_write();

  ::signal(SIGPIPE, SIG_IGN);
  auto body = request.dump() + "\n";
  std::size_t written = 0;
  while (written < body.size()) {
    auto n = ::write(in.fds[1], body.data() + written, body.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    written += static_cast<std::size_t>(n);
  }
  in.close_write();

  std::string response;
  bool timed_out = false;
  char buf[4096];
  while (true) {
    pollfd pfd{out.fds[0], POLLIN, 0};
    int ready = ::poll(&pfd, 1, remaining_ms(until));
    if (ready < 0 && errno == EINTR) continue;
    if (ready == 0) {
      timed_out = true;
      break;
    }
    auto n = ::read(out.fds[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    response.append(buf, static_cast<std::size_t>(n));
  }

  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  double latency = std::chrono::duration<double, std::milli>(Clock::now() - started).count();

  TransportResult result;
  if (timed_out) {
    result = TransportResult::transport_failure("subprocess deadline exceeded");
  } else if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    result = TransportResult::transport_failure(
        "subprocess exited with status " +
        std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  } else {
    auto doc = Json::parse(response, nullptr, false);
    if (doc.is_discarded()) {
      result = TransportResult::transport_failure("subprocess response is not a document");
    } else {
      result = parse_response_document(doc, request.value("request_id", std::string()));
    }
  }
  result.latency_ms = latency;
  return result;
}

}  // namespace ocuflow
