#pragma once

#include <abx/common.hpp>
#include <abx/scorer.hpp>

#include <json.hpp>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace abx {

// Line transport to an external scorer. Lines exclude the trailing newline.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send(std::string_view line) = 0;
  // Next complete line, or a ProtocolError (kTimeout / kChildExit).
  virtual std::string receive(std::chrono::steady_clock::time_point deadline) = 0;
};

// Runs `/bin/sh -c <command>` with its standard input and output connected
// to socket pairs (writes use MSG_NOSIGNAL, so a dead child surfaces as an
// error instead of SIGPIPE). Standard error is inherited. The child leads its
// own process group so teardown also reaches anything the shell started.
class ProcessChannel final : public LineChannel {
 public:
  explicit ProcessChannel(const std::string& command) : command_(command) {
    int in_pair[2];
    int out_pair[2];
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0)
      throw Error(std::string("socketpair: ") + std::strerror(errno));
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, out_pair) != 0) {
      ::close(in_pair[0]);
      ::close(in_pair[1]);
      throw Error(std::string("socketpair: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) throw Error(std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::setpgid(0, 0);
      ::dup2(in_pair[1], STDIN_FILENO);
      ::dup2(out_pair[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    ::close(in_pair[1]);
    ::close(out_pair[1]);
    to_child_ = in_pair[0];
    from_child_ = out_pair[0];
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  ~ProcessChannel() override {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0 && !reaped_) {
      // Closing stdin asks the child to finish; give it a moment, then kill.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
        ::usleep(10000);
      }
      ::kill(-pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  void send(std::string_view line) override {
    std::string buf(line);
    buf.push_back('\n');
    std::size_t done = 0;
    while (done < buf.size()) {
      const auto n = ::send(to_child_, buf.data() + done, buf.size() - done, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(ProtocolError::Kind::kChildExit,
                            "external scorer closed its input (" + exit_status() + ")");
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::string receive(std::chrono::steady_clock::time_point deadline) override {
    while (true) {
      const auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw ProtocolError(ProtocolError::Kind::kTimeout, "external scorer timed out");
      pollfd pfd{from_child_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0 && errno != EINTR) throw Error(std::string("poll: ") + std::strerror(errno));
      if (rc <= 0) continue;
      char buf[4096];
      const auto n = ::read(from_child_, buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(std::string("read: ") + std::strerror(errno));
      }
      if (n == 0)
        throw ProtocolError(ProtocolError::Kind::kChildExit,
                            "external scorer exited (" + exit_status() + ")");
      pending_.append(buf, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string exit_status() {
    if (reaped_) return status_text_;
    int status = 0;
    // The child may still be tearing down after closing its output.
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        reaped_ = true;
        if (WIFEXITED(status))
          status_text_ = "exit status " + std::to_string(WEXITSTATUS(status));
        else if (WIFSIGNALED(status))
          status_text_ = "killed by signal " + std::to_string(WTERMSIG(status));
        return status_text_;
      }
      ::usleep(5000);
    }
    return "still running";
  }

  std::string command_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
  bool reaped_ = false;
  std::string status_text_;
};

inline std::chrono::milliseconds external_timeout_from_env() {
  constexpr long long kDefaultMs = 60000;
  const char* raw = std::getenv("ABX_EXTERNAL_TIMEOUT_MS");
  if (!raw || !*raw) return std::chrono::milliseconds(kDefaultMs);
  char* end = nullptr;
  const long long v = std::strtoll(raw, &end, 10);
  if (*end != '\0' || v <= 0)
    throw InputError(std::string("ABX_EXTERNAL_TIMEOUT_MS must be a positive integer, got '") + raw + "'");
  return std::chrono::milliseconds(v);
}

// Scorer backed by a child process speaking line-delimited JSON:
//   request  {"id": <int>, "s": <str>, "v": <str>, "o": <str>}
//   response {"id": <int>, "logit": <float>}
// A blank line ends each batch. Responses may arrive in any order and are
// matched by id. One batch is in flight at a time; a failed batch poisons the
// adapter because the stream position is no longer known.
class ExternalScorer final : public Scorer {
 public:
  ExternalScorer(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout,
                 std::string name = "external")
      : channel_(std::move(channel)), timeout_(timeout), name_(std::move(name)) {}

  static std::shared_ptr<ExternalScorer> spawn(const std::string& command) {
    return std::make_shared<ExternalScorer>(std::make_unique<ProcessChannel>(command),
                                            external_timeout_from_env(), "external:" + command);
  }

  ScorerInfo info() const override { return {name_, true, false}; }

  double logit(const Event& e) const override { return logits(std::span<const Event>(&e, 1)).front(); }

  std::vector<double> logits(std::span<const Event> batch) const override {
    std::lock_guard lock(mu_);
    if (broken_) throw ProtocolError(ProtocolError::Kind::kViolation, "external scorer unusable: " + *broken_);
    try {
      return run_batch(batch);
    } catch (const std::exception& ex) {
      broken_ = ex.what();
      throw;
    }
  }

 private:
  std::vector<double> run_batch(std::span<const Event> batch) const {
    std::vector<double> out(batch.size());
    if (batch.empty()) return out;
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::map<long long, std::size_t> pending;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const long long id = next_id_++;
      pending.emplace(id, i);
      nlohmann::json req = {{"id", id}, {"s", batch[i].subject}, {"v", batch[i].verb}, {"o", batch[i].object}};
      channel_->send(req.dump());
    }
    channel_->send("");

    while (!pending.empty()) {
      const std::string line = channel_->receive(deadline);
      const auto lineno = ++lines_read_;
      auto violation = [&](const std::string& what) {
        return ProtocolError(ProtocolError::Kind::kViolation,
                             "external scorer protocol violation at response line " +
                                 std::to_string(lineno) + ": " + what);
      };
      nlohmann::json resp;
      try {
        resp = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        throw violation("not JSON: '" + line + "'");
      }
      if (!resp.is_object()) throw violation("expected a JSON object");
      if (resp.contains("error"))
        throw ProtocolError(ProtocolError::Kind::kRemote,
                            "external scorer reported an error at response line " +
                                std::to_string(lineno) + ": " + resp["error"].dump());
      if (!resp.contains("id") || !resp["id"].is_number_integer()) throw violation("missing integer id");
      if (!resp.contains("logit") || !resp["logit"].is_number()) throw violation("missing numeric logit");
      const auto id = resp["id"].get<long long>();
      auto it = pending.find(id);
      if (it == pending.end()) throw violation("unexpected id " + std::to_string(id));
      const double v = resp["logit"].get<double>();
      if (!std::isfinite(v)) throw violation("non-finite logit");
      out[it->second] = v;
      pending.erase(it);
    }
    return out;
  }

  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  std::string name_;
  mutable std::mutex mu_;
  mutable long long next_id_ = 0;
  mutable std::size_t lines_read_ = 0;
  mutable std::optional<std::string> broken_;
};

}  // namespace abx
