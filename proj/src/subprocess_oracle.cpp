#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "stellbench/errors.hpp"
#include "stellbench/oracle.hpp"

namespace stellbench {

SubprocessOracle::SubprocessOracle(std::string command, SubprocessOracleOptions options)
    : command_(std::move(command)), options_(options) {
  if (!(options_.timeout_seconds > 0)) throw ConfigurationError("oracle timeout must be positive");
  // A dead child must surface as an error, not kill us on write().
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
    throw OracleUnavailableError(std::string("pipe() failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw OracleUnavailableError(std::string("fork() failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessOracle::~SubprocessOracle() { shutdown(); }

void SubprocessOracle::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  to_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }
  if (from_child_ >= 0) ::close(from_child_);
  from_child_ = -1;
}

// Returns false on timeout; sets dead_ on EOF.
bool SubprocessOracle::read_line(std::string& line, double timeout_seconds) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::duration<double>(timeout_seconds);
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return true;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) return false;
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1000)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      dead_ = true;
      return false;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

OracleResponse SubprocessOracle::evaluate(const OracleRequest& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (dead_) throw OracleUnavailableError("oracle process '" + command_ + "' has exited");
  const std::int64_t id = next_id_++;
  std::string out = encode_request(id, request).dump();
  out.push_back('\n');
  std::size_t written = 0;
  while (written < out.size()) {
    const ssize_t n = ::write(to_child_, out.data() + written, out.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      dead_ = true;
      throw OracleUnavailableError("oracle process '" + command_ + "' closed its input");
    }
    written += static_cast<std::size_t>(n);
  }
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::duration<double>(options_.timeout_seconds);
  std::string line;
  while (true) {
    const double left = std::chrono::duration<double>(deadline - Clock::now()).count();
    if (!read_line(line, left)) {
      if (dead_) throw OracleUnavailableError("oracle process '" + command_ + "' exited mid-request");
      return OracleResponse::failure(OracleErrorKind::timeout, "no response within deadline");
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      return OracleResponse::failure(OracleErrorKind::protocol, "unparseable response line");
    }
    try {
      auto [rid, resp] = decode_response(j);
      if (rid != id) continue;  // late answer to an earlier, timed-out request
      return resp;
    } catch (const Error& e) {
      if (j.is_object() && j.contains("id") && j["id"].is_number_integer() && j["id"].get<std::int64_t>() != id) {
        continue;
      }
      return OracleResponse::failure(OracleErrorKind::protocol, e.what());
    }
  }
}

}  // namespace stellbench
