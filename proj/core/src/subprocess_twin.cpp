#include "twincheck/subprocess_twin.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <utility>

#include "twincheck/errors.hpp"
#include "twincheck/protocol.hpp"

namespace twincheck {

namespace {

class Process {
 public:
  explicit Process(const std::vector<std::string>& argv) {
    if (argv.empty()) throw ValidationError("subprocess twin needs a command");
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw StageError(std::string("pipe failed: ") + std::strerror(errno));
    pid_ = fork();
    if (pid_ < 0) throw StageError(std::string("fork failed: ") + std::strerror(errno));
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> cargv;
      cargv.reserve(argv.size() + 1);
      for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
      cargv.push_back(nullptr);
      execvp(cargv[0], cargv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
  }

  ~Process() { kill_now(); }

  Process(const Process&) = delete;
  Process& operator=(const Process&) = delete;

  void send_line(const std::string& line) {
    const std::string framed = line + "\n";
    std::size_t off = 0;
    while (off < framed.size()) {
      const ssize_t w = write(in_fd_, framed.data() + off, framed.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("write to twin failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(w);
    }
  }

  std::string recv_line(double timeout_seconds) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto remaining = std::chrono::duration<double>(deadline -
                                                           std::chrono::steady_clock::now())
                                 .count();
      if (remaining <= 0.0) throw ProtocolError("twin exchange timed out");
      pollfd pfd{out_fd_, POLLIN, 0};
      const int rc = poll(&pfd, 1, static_cast<int>(remaining * 1000.0) + 1);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) throw ProtocolError("twin exchange timed out");
      char chunk[4096];
      const ssize_t r = read(out_fd_, chunk, sizeof chunk);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("read from twin failed: ") + std::strerror(errno));
      }
      if (r == 0) throw ProtocolError("twin closed its output stream");
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

  void kill_now() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
    if (in_fd_ >= 0) close(in_fd_);
    if (out_fd_ >= 0) close(out_fd_);
    in_fd_ = out_fd_ = -1;
  }

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
};

}  // namespace

struct SubprocessTwinFactory::Impl {
  SubprocessTwinOptions opts;
  std::mutex mutex;
  std::vector<std::unique_ptr<Process>> idle;
  long spawned = 0;

  std::unique_ptr<Process> lease() {
    {
      std::lock_guard<std::mutex> lock(mutex);
      if (!idle.empty()) {
        auto p = std::move(idle.back());
        idle.pop_back();
        return p;
      }
    }
    auto p = std::make_unique<Process>(opts.argv);
    std::lock_guard<std::mutex> lock(mutex);
    ++spawned;
    return p;
  }

  void release(std::unique_ptr<Process> p) {
    std::lock_guard<std::mutex> lock(mutex);
    idle.push_back(std::move(p));
  }
};

namespace {

class SubprocessSession : public TwinSession {
 public:
  SubprocessSession(std::shared_ptr<SubprocessTwinFactory::Impl> impl)
      : impl_(std::move(impl)), proc_(impl_->lease()) {}

  ~SubprocessSession() override {
    // Only a process that finished its exchanges cleanly goes back to the pool.
    if (proc_ && healthy_) impl_->release(std::move(proc_));
  }

  void init(std::span<const double> x0) override {
    if (fresh_) {
      fresh_ = false;
    } else {
      exchange_ok(ResetRequest{});
    }
    exchange_ok(InitRequest{{x0.begin(), x0.end()}});
  }

  std::vector<double> step(int action, std::span<const double> raw) override {
    StepRequest req;
    req.a = action;
    if (!raw.empty()) req.raw = std::vector<double>(raw.begin(), raw.end());
    const auto resp = exchange(req);
    if (const auto* obs = std::get_if<ObservationResponse>(&resp)) return obs->x;
    if (const auto* err = std::get_if<ErrorResponse>(&resp))
      throw StageError("twin reported: " + err->message);
    fail("step returned an acknowledgment instead of an observation");
  }

  void reset() override { exchange_ok(ResetRequest{}); }

 private:
  Response exchange(const Request& req) {
    if (!proc_ || !healthy_) throw StageError("twin session is no longer usable");
    try {
      proc_->send_line(encode_request(req));
      return decode_response(proc_->recv_line(impl_->opts.timeout_seconds));
    } catch (const ProtocolError&) {
      // Protocol violation or timeout: the process is killed, not reused.
      healthy_ = false;
      proc_->kill_now();
      throw;
    }
  }

  void exchange_ok(const Request& req) {
    const auto resp = exchange(req);
    if (const auto* err = std::get_if<ErrorResponse>(&resp))
      throw StageError("twin reported: " + err->message);
    if (!std::holds_alternative<OkResponse>(resp))
      fail("expected an acknowledgment frame");
  }

  [[noreturn]] void fail(const char* msg) {
    healthy_ = false;
    if (proc_) proc_->kill_now();
    throw ProtocolError(msg);
  }

  std::shared_ptr<SubprocessTwinFactory::Impl> impl_;
  std::unique_ptr<Process> proc_;
  bool healthy_ = true;
  bool fresh_ = true;
};

}  // namespace

SubprocessTwinFactory::SubprocessTwinFactory(SubprocessTwinOptions opts)
    : impl_(std::make_shared<Impl>()) {
  if (opts.argv.empty()) throw ValidationError("subprocess twin needs a command");
  if (opts.timeout_seconds <= 0.0) throw ValidationError("timeout must be positive");
  impl_->opts = std::move(opts);
}

SubprocessTwinFactory::~SubprocessTwinFactory() = default;

std::unique_ptr<TwinSession> SubprocessTwinFactory::make_session(std::uint64_t) {
  return std::make_unique<SubprocessSession>(impl_);
}

std::string SubprocessTwinFactory::id() const { return "subprocess:" + impl_->opts.argv.front(); }

long SubprocessTwinFactory::processes_spawned() const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  return impl_->spawned;
}

}  // namespace twincheck
