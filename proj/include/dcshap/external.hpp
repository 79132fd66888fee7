#ifndef DCSHAP_EXTERNAL_HPP
#define DCSHAP_EXTERNAL_HPP

// Repair algorithms living in another process. The adapter is started once
// and kept alive; each call writes one request line on its stdin and reads
// one response line from its stdout (see wire.hpp for the documents).
//
// A response {"error": text} is a black-box failure. An adapter whose own
// loop did not settle may add {"last_table": table}, which is surfaced as a
// FixpointError so the indicator can score it like an in-process run.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dcshap/errors.hpp"
#include "dcshap/repair.hpp"
#include "dcshap/wire.hpp"

extern char** environ;

namespace dcshap {

struct AdapterConfig {
  std::string name;
  std::string executable;
  std::vector<std::string> args;
  std::chrono::milliseconds timeout{30000};
  std::size_t pool_size = 1;
};

namespace detail {

inline void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

inline std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

// One live adapter process with pipes on stdin, stdout and stderr.
class AdapterProcess {
 public:
  explicit AdapterProcess(const AdapterConfig& config) : name_(config.name) {
    int in[2], out[2], err[2];
    if (::pipe2(in, O_CLOEXEC) != 0) throw BlackBoxError(errno_text("pipe"));
    if (::pipe2(out, O_CLOEXEC) != 0) {
      close_pair(in);
      throw BlackBoxError(errno_text("pipe"));
    }
    if (::pipe2(err, O_CLOEXEC) != 0) {
      close_pair(in);
      close_pair(out);
      throw BlackBoxError(errno_text("pipe"));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out[1], STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err[1], STDERR_FILENO);

    std::vector<std::string> storage;
    storage.push_back(config.executable);
    storage.insert(storage.end(), config.args.begin(), config.args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    argv.push_back(nullptr);

    int rc = ::posix_spawnp(&pid_, config.executable.c_str(), &actions, nullptr, argv.data(),
                            environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in[0]);
    ::close(out[1]);
    ::close(err[1]);
    if (rc != 0) {
      ::close(in[1]);
      ::close(out[0]);
      ::close(err[0]);
      throw BlackBoxError("cannot start adapter '" + config.executable +
                          "': " + std::strerror(rc));
    }
    to_child_ = in[1];
    from_child_ = out[0];
    errors_ = err[0];
    ::fcntl(to_child_, F_SETFL, ::fcntl(to_child_, F_GETFL) | O_NONBLOCK);
    ::fcntl(from_child_, F_SETFL, ::fcntl(from_child_, F_GETFL) | O_NONBLOCK);
    ::fcntl(errors_, F_SETFL, ::fcntl(errors_, F_GETFL) | O_NONBLOCK);
  }

  AdapterProcess(const AdapterProcess&) = delete;
  AdapterProcess& operator=(const AdapterProcess&) = delete;

  ~AdapterProcess() {
    close_fd(to_child_);
    if (pid_ > 0) {
      // Closing stdin asks the adapter to leave; give it a moment, then kill.
      for (int i = 0; i < 20 && !reaped_; ++i) {
        if (::waitpid(pid_, &status_, WNOHANG) == pid_) reaped_ = true;
        else std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      if (!reaped_) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status_, 0);
      }
    }
    close_fd(from_child_);
    close_fd(errors_);
  }

  bool healthy() const { return healthy_; }
  // True when nothing of the current exchange reached the adapter's output,
  // so the request can be retried on a fresh process.
  bool untouched() const { return untouched_; }

  // Sends `line` and returns the next response line (without newline).
  std::string exchange(const std::string& line, std::chrono::milliseconds timeout) {
    untouched_ = true;
    auto deadline = std::chrono::steady_clock::now() + timeout;
    std::string payload = line + '\n';
    std::size_t sent = 0;
    while (sent < payload.size()) {
      ssize_t w = ::write(to_child_, payload.data() + sent, payload.size() - sent);
      if (w >= 0) {
        sent += static_cast<std::size_t>(w);
        continue;
      }
      if (errno == EINTR) continue;
      if (errno != EAGAIN) {
        fail();
        throw BlackBoxError(describe_exit("adapter closed its input"));
      }
      pollfd out{to_child_, POLLOUT, 0};
      if (::poll(&out, 1, remaining_ms(deadline)) == 0) timed_out(timeout);
    }

    for (;;) {
      auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string out = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return out;
      }
      int left = remaining_ms(deadline);
      if (left <= 0) timed_out(timeout);
      pollfd fds[2] = {{from_child_, POLLIN, 0}, {errors_, POLLIN, 0}};
      int n = ::poll(fds, errors_ >= 0 ? 2 : 1, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail();
        throw BlackBoxError(errno_text("poll"));
      }
      if (errors_ >= 0 && (fds[1].revents & (POLLIN | POLLHUP))) drain_stderr();
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[65536];
        ssize_t r = ::read(from_child_, buf, sizeof buf);
        if (r > 0) {
          untouched_ = false;
          pending_.append(buf, static_cast<std::size_t>(r));
        } else if (r == 0) {
          fail();
          if (!pending_.empty()) untouched_ = false;
          throw BlackBoxError(describe_exit("adapter closed its output"));
        } else if (errno != EAGAIN && errno != EINTR) {
          fail();
          throw BlackBoxError(errno_text("read"));
        }
      }
    }
  }

 private:
  static void close_pair(int fds[2]) {
    ::close(fds[0]);
    ::close(fds[1]);
  }
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }

  void fail() { healthy_ = false; }

  static int remaining_ms(std::chrono::steady_clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    return static_cast<int>(std::max<std::chrono::milliseconds::rep>(0, left.count()));
  }

  [[noreturn]] void timed_out(std::chrono::milliseconds timeout) {
    untouched_ = false;
    fail();
    ::kill(pid_, SIGKILL);
    throw BlackBoxError("adapter '" + name_ + "' timed out after " +
                        std::to_string(timeout.count()) + " ms" + stderr_suffix());
  }

  void drain_stderr() {
    char buf[4096];
    for (;;) {
      ssize_t r = ::read(errors_, buf, sizeof buf);
      if (r > 0) {
        stderr_tail_.append(buf, static_cast<std::size_t>(r));
        if (stderr_tail_.size() > 4096) stderr_tail_.erase(0, stderr_tail_.size() - 4096);
        continue;
      }
      if (r == 0) close_fd(errors_);
      return;
    }
  }

  std::string stderr_suffix() {
    if (errors_ >= 0) drain_stderr();
    std::string tail = stderr_tail_;
    while (!tail.empty() && (tail.back() == '\n' || tail.back() == '\r')) tail.pop_back();
    return tail.empty() ? "" : "; stderr: " + tail;
  }

  std::string describe_exit(const std::string& what) {
    for (int i = 0; i < 100 && !reaped_; ++i) {
      if (::waitpid(pid_, &status_, WNOHANG) == pid_) reaped_ = true;
      else std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    std::string msg = "adapter '" + name_ + "': " + what;
    if (reaped_) {
      if (WIFEXITED(status_)) msg += " (exit status " + std::to_string(WEXITSTATUS(status_)) + ")";
      else if (WIFSIGNALED(status_)) msg += " (killed by signal " + std::to_string(WTERMSIG(status_)) + ")";
    }
    return msg + stderr_suffix();
  }

  std::string name_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int errors_ = -1;
  int status_ = 0;
  bool reaped_ = false;
  bool healthy_ = true;
  bool untouched_ = true;
  std::string pending_;
  std::string stderr_tail_;
};

}  // namespace detail

// A RepairAlgorithm backed by a pool of adapter processes. Copies share the
// pool. Dead or timed-out processes are replaced on the next call.
class ExternalRepairer {
 public:
  explicit ExternalRepairer(AdapterConfig config)
      : pool_(std::make_shared<Pool>(std::move(config))) {
    detail::ignore_sigpipe();
    if (pool_->config.pool_size == 0) pool_->config.pool_size = 1;
  }

  const AdapterConfig& config() const { return pool_->config; }

  Table operator()(std::span<const DenialConstraint> constraints, const Table& dirty) const {
    std::string request = wire::adapter_request(constraints, dirty).dump();
    std::string line;
    for (int attempt = 0;; ++attempt) {
      auto proc = acquire();
      try {
        line = proc->exchange(request, pool_->config.timeout);
        release(std::move(proc));
        break;
      } catch (const BlackBoxError&) {
        bool retry = attempt == 0 && proc->untouched();
        release(std::move(proc));
        if (!retry) throw;
      }
    }
    return decode(line, dirty);
  }

  // Registration handshake: the adapter must return the probe table
  // unchanged for an empty constraint set, and do so identically twice.
  void handshake() const {
    Table probe({"A", "B"}, {{Value::text("x"), Value::number("1")},
                             {Value::text("y"), Value::null()}});
    verify_determinism({}, probe);
    if ((*this)({}, probe) != probe) {
      throw ContractError("adapter '" + config().name +
                          "' changed the table under an empty constraint set");
    }
  }

  // Runs the same call twice and requires equal outputs.
  void verify_determinism(std::span<const DenialConstraint> constraints,
                          const Table& table) const {
    auto run = [&]() -> std::optional<Table> {
      try {
        return (*this)(constraints, table);
      } catch (const FixpointError& e) {
        return e.last_table();
      }
    };
    if (run() != run()) {
      throw ContractError("adapter '" + config().name + "' is not deterministic");
    }
  }

 private:
  struct Pool {
    explicit Pool(AdapterConfig c) : config(std::move(c)) {}
    AdapterConfig config;
    std::mutex mutex;
    std::condition_variable available;
    std::vector<std::unique_ptr<detail::AdapterProcess>> idle;
    std::size_t live = 0;
  };

  std::unique_ptr<detail::AdapterProcess> acquire() const {
    std::unique_lock lock(pool_->mutex);
    pool_->available.wait(lock, [&] {
      return !pool_->idle.empty() || pool_->live < pool_->config.pool_size;
    });
    if (!pool_->idle.empty()) {
      auto proc = std::move(pool_->idle.back());
      pool_->idle.pop_back();
      return proc;
    }
    ++pool_->live;
    lock.unlock();
    try {
      return std::make_unique<detail::AdapterProcess>(pool_->config);
    } catch (...) {
      lock.lock();
      --pool_->live;
      pool_->available.notify_one();
      throw;
    }
  }

  void release(std::unique_ptr<detail::AdapterProcess> proc) const {
    bool healthy = proc->healthy();
    if (!healthy) proc.reset();
    std::lock_guard lock(pool_->mutex);
    if (healthy) pool_->idle.push_back(std::move(proc));
    else --pool_->live;
    pool_->available.notify_one();
  }

  Table decode(const std::string& line, const Table& input) const {
    const std::string& name = pool_->config.name;
    wire::json response;
    try {
      response = wire::json::parse(line);
    } catch (const std::exception&) {
      throw BlackBoxError("adapter '" + name + "' sent malformed output: " + line.substr(0, 200));
    }
    if (!response.is_object()) {
      throw BlackBoxError("adapter '" + name + "' sent a non-object response");
    }
    auto read_table = [&](const wire::json& j) {
      Table out;
      try {
        out = wire::table_from_json(j);
      } catch (const std::exception& e) {
        throw BlackBoxError("adapter '" + name + "' sent a malformed table: " + e.what());
      }
      if (out.schema() != input.schema()) {
        throw ContractError("adapter '" + name + "' changed the schema");
      }
      if (out.row_count() != input.row_count()) {
        throw ContractError("adapter '" + name + "' returned " + std::to_string(out.row_count()) +
                            " rows for an input of " + std::to_string(input.row_count()));
      }
      return out;
    };
    if (response.contains("error")) {
      std::string message = response["error"].is_string() ? response["error"].get<std::string>()
                                                          : response["error"].dump();
      if (response.contains("last_table")) {
        throw FixpointError("adapter '" + name + "': " + message,
                            read_table(response["last_table"]));
      }
      throw BlackBoxError("adapter '" + name + "' reported: " + message);
    }
    if (!response.contains("table")) {
      throw BlackBoxError("adapter '" + name + "' response has neither 'table' nor 'error'");
    }
    return read_table(response["table"]);
  }

  std::shared_ptr<Pool> pool_;
};

}  // namespace dcshap

#endif  // DCSHAP_EXTERNAL_HPP
