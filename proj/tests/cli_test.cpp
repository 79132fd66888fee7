#include <gtest/gtest.h>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>

#include <httplib.h>

#include "dcshap/wire.hpp"
#include "support.hpp"

using namespace dcshap;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("dcshap-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Outcome cli(const std::vector<std::string>& args) {
  static fs::path err_file = scratch() / "stderr.txt";
  std::string cmd = quote(DCSHAP_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>" + quote(err_file.string());
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
  int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, read_text(err_file.string())};
}

const std::string kDirty = data_path("laliga/dirty.csv");
const std::string kConstraints = data_path("laliga/constraints.dc");

}  // namespace

TEST(Cli, RepairWritesCleanTableAndChanges) {
  fs::path out = scratch() / "clean.csv";
  Outcome r = cli({"repair", kDirty, kConstraints, "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_table(read_text(out.string())), laliga_clean());
  auto changes = wire::json::parse(read_text(out.string() + ".changes.json"));
  EXPECT_EQ(wire::changes_from_json(changes), diff_tables(laliga_dirty(), laliga_clean()));
}

TEST(Cli, EmptyConstraintFileCopiesTheInput) {
  fs::path dir = scratch();
  std::ofstream(dir / "none.dc") << "# nothing\n";
  Outcome r = cli({"repair", kDirty, (dir / "none.dc").string(), "--out", (dir / "out.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text((dir / "out.csv").string()), serialize_table(laliga_dirty()));
  EXPECT_EQ(parse_table(read_text((dir / "out.csv").string())), laliga_dirty());
}

TEST(Cli, ExplainConstraintsText) {
  Outcome r = cli({"explain", kDirty, kConstraints, "--cell", "5:Country"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> order;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    std::istringstream words(line);
    std::string rank, id, value;
    words >> rank >> id >> value;
    if (!rank.empty() && std::isdigit(static_cast<unsigned char>(rank[0]))) {
      order.push_back(id + "=" + value);
    }
  }
  EXPECT_EQ(order, (std::vector<std::string>{"C3=2/3", "C1=1/6", "C2=1/6", "C4=0"})) << r.out;
}

TEST(Cli, ExplainJsonMatchesLibrary) {
  Outcome r = cli({"explain", kDirty, kConstraints, "--cell", "5:City", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto doc = wire::json::parse(r.out);
  EXPECT_EQ(doc.at("ranking").front(), "C1");
  EXPECT_EQ(doc.at("task").at("expected"), "Madrid");
}

TEST(Cli, SampledCellsAreByteIdenticalForASeed) {
  std::vector<std::string> args = {"explain", kDirty, kConstraints, "--cell", "5:Country",
                                   "--mode", "cells", "--m", "300", "--seed", "7"};
  Outcome a = cli(args);
  Outcome b = cli(args);
  args.insert(args.end(), {"--workers", "3"});
  Outcome c = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  EXPECT_NE(a.out.find("seed  7\n"), std::string::npos) << a.out;
}

TEST(Cli, ThroughTheReferenceAdapter) {
  Outcome local = cli({"explain", kDirty, kConstraints, "--cell", "5:Country", "--format", "json"});
  Outcome remote = cli({"explain", kDirty, kConstraints, "--cell", "5:Country", "--format", "json",
                       "--adapter", DCSHAP_REFERENCE_ADAPTER});
  ASSERT_EQ(remote.code, 0) << remote.err;
  EXPECT_EQ(local.out, remote.out);
}

TEST(Cli, ValidateCountsViolations) {
  Outcome dirty = cli({"validate", kDirty, kConstraints});
  ASSERT_EQ(dirty.code, 0) << dirty.err;
  EXPECT_EQ(dirty.out, "C1  4\nC2  0\nC3  8\nC4  0\ntotal  12\n");
  Outcome clean = cli({"validate", data_path("laliga/clean.csv"), kConstraints});
  EXPECT_EQ(clean.out, "C1  0\nC2  0\nC3  0\nC4  0\ntotal  0\n");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli({"explain", kDirty, kConstraints, "--cell", "5:League"}).code, 4);
  EXPECT_EQ(cli({"validate", "/nonexistent.csv", kConstraints}).code, 2);
  EXPECT_EQ(cli({"explain", kDirty, kConstraints}).code, 2);
  EXPECT_EQ(cli({"explain", kDirty, kConstraints, "--cell", "nine"}).code, 2);
  EXPECT_EQ(cli({"explain", kDirty, kConstraints, "--cell", "5:Country", "--mode", "cells",
                    "--estimator", "exact"})
                .code,
            2);
  EXPECT_EQ(cli({"explain", kDirty, kConstraints, "--cell", "5:Country", "--adapter",
                    std::string(DCSHAP_FAKE_ADAPTER) + "-missing"})
                .code,
            3);

  fs::path dir = scratch();
  std::ofstream(dir / "bad.dc") << "C1: !(t1.Team = t2.Team)\n\nC3: !(t1.A ~ t2.A)\n";
  Outcome bad = cli({"validate", kDirty, (dir / "bad.dc").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("3:"), std::string::npos) << bad.err;

  Table t = laliga_dirty();
  t.set({4, "City"}, Value::text("Barcelona"));
  std::ofstream(dir / "oscillating.csv") << serialize_table(t);
  EXPECT_EQ(cli({"repair", (dir / "oscillating.csv").string(), kConstraints, "--out",
                    (dir / "o.csv").string()})
                .code,
            3);
}

namespace {

// A `dcshap serve` child with its stderr piped back.
class ServeProcess {
 public:
  explicit ServeProcess(std::vector<std::string> args) {
    int fds[2];
    if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid_ = ::fork();
    if (pid_ == 0) {
      ::dup2(fds[1], STDERR_FILENO);
      ::close(fds[0]);
      ::close(fds[1]);
      std::vector<char*> argv{const_cast<char*>(DCSHAP_CLI), const_cast<char*>("serve")};
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(DCSHAP_CLI, argv.data());
      ::_exit(127);
    }
    ::close(fds[1]);
    err_ = ::fdopen(fds[0], "r");
  }
  ~ServeProcess() {
    if (pid_ > 0 && !reaped_) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
    if (err_) std::fclose(err_);
  }

  std::string line() {
    char buf[512];
    if (!std::fgets(buf, sizeof buf, err_)) return "";
    return buf;
  }

  int wait() {
    int status = 0;
    ::waitpid(pid_, &status, 0);
    reaped_ = true;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  void terminate() { ::kill(pid_, SIGTERM); }

 private:
  pid_t pid_ = -1;
  FILE* err_ = nullptr;
  bool reaped_ = false;
};

}  // namespace

TEST(CliServe, AnswersAndShutsDownCleanly) {
  fs::path dir = scratch();
  ServeProcess serve({"--addr", "127.0.0.1:0", "--data-dir", (dir / "store").string()});
  std::string first = serve.line();
  auto colon = first.rfind(':');
  ASSERT_NE(first.find("listening on 127.0.0.1:"), std::string::npos) << first;
  int port = std::stoi(first.substr(colon + 1));

  httplib::Client c("127.0.0.1", port);
  auto missing = c.Get("/sessions/unknown");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  wire::json body = {{"table_csv", read_text(kDirty)}, {"constraints", read_text(kConstraints)}};
  auto created = c.Post("/sessions", body.dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);

  serve.terminate();
  EXPECT_EQ(serve.wait(), 0);
}

TEST(CliServe, OccupiedPortIsEnvironmentError) {
  httplib::Server blocker;
  int port = blocker.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  fs::path dir = scratch();
  ServeProcess serve({"--addr", "127.0.0.1:" + std::to_string(port), "--data-dir",
                      (dir / "store").string()});
  EXPECT_EQ(serve.wait(), 5);
}
