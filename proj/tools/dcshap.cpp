// dcshap: repair a CSV table under denial constraints and explain repairs.
//
// Exit codes: 0 ok, 2 input error, 3 repair algorithm failure,
// 4 cell not changed by the repair, 5 environment (port, data directory).

#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "dcshap/dc.hpp"
#include "dcshap/errors.hpp"
#include "dcshap/external.hpp"
#include "dcshap/repair.hpp"
#include "dcshap/service.hpp"
#include "dcshap/shapley.hpp"
#include "dcshap/table.hpp"
#include "dcshap/wire.hpp"

using namespace dcshap;
using wire::json;

namespace {

enum Exit { kOk = 0, kInput = 2, kBlackBox = 3, kUnexplainable = 4, kEnvironment = 5 };

class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw EnvironmentError("cannot write " + path);
}

struct AlgorithmChoice {
  std::string name = "reference";
  std::string adapters;     // registry file
  std::string adapter_exe;  // ad-hoc adapter executable

  void add_to(CLI::App* cmd) {
    cmd->add_option("--algorithm", name, "reference, or an adapter name from --adapters");
    cmd->add_option("--adapters", adapters, "adapter registry file");
    cmd->add_option("--adapter", adapter_exe, "adapter executable to use as the algorithm");
  }

  RepairAlgorithm resolve() const {
    if (!adapter_exe.empty()) {
      ExternalRepairer repairer(AdapterConfig{adapter_exe, adapter_exe, {}});
      repairer.handshake();
      return repairer;
    }
    if (name == "reference") return reference_repair;
    if (adapters.empty()) throw InputError("unknown algorithm '" + name + "'");
    for (const auto& config : load_adapter_registry(adapters)) {
      if (config.name != name) continue;
      ExternalRepairer repairer(config);
      repairer.handshake();
      return repairer;
    }
    throw InputError("no adapter named '" + name + "' in " + adapters);
  }
};

struct Inputs {
  Table table;
  std::vector<DenialConstraint> constraints;
};

Inputs load_inputs(const std::string& table_path, const std::string& dc_path) {
  Inputs in;
  try {
    in.table = parse_table(read_file(table_path));
  } catch (const ParseError& e) {
    throw InputError(table_path + ":" + e.what());
  }
  try {
    in.constraints = parse_constraints(read_file(dc_path));
  } catch (const ParseError& e) {
    throw InputError(dc_path + ":" + e.what());
  }
  for (const auto& dc : in.constraints) bind(dc, in.table);
  return in;
}

CellRef parse_cell(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ArgError("--cell expects ROW:ATTR, got '" + text + "'");
  }
  std::size_t used = 0;
  unsigned long row = 0;
  try {
    row = std::stoul(text.substr(0, colon), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != colon || row == 0) throw ArgError("--cell row must be a positive integer");
  return CellRef{row, text.substr(colon + 1)};
}

std::string fixed(double x, int digits = 6) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << x;
  std::string s = ss.str();
  return s == "-0.000000" ? "0.000000" : s;
}

std::string rational_text(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

void print_header(std::ostream& out, const RepairTask& task, const std::string& method) {
  std::ostringstream before, after;
  before << task.dirty_value();
  after << task.expected;
  out << "target  " << task.target << "  " << before.str() << " -> " << after.str() << "\n";
  out << "method  " << method << "\n";
}

void print_text(std::ostream& out, const ConstraintShapleyReport& report) {
  print_header(out, report.task, report.method);
  std::size_t rank_no = 0;
  for (const auto& r : rank(report)) {
    Rational v = report.value_of(r.player);
    out << std::setw(4) << ++rank_no << "  " << std::left << std::setw(12) << r.player
        << std::right << "  " << rational_text(v) << "  (" << fixed(to_double(v)) << ")\n";
  }
}

void print_text(std::ostream& out, const CellShapleyReport& report) {
  print_header(out, report.task, report.method);
  out << "imputation  " << to_string(report.imputation) << "\n";
  if (!report.is_exact()) out << "samples  " << report.samples << "  seed  " << report.seed << "\n";
  std::size_t rank_no = 0;
  for (const auto& r : rank(report)) {
    std::size_t i = 0;
    while (!(report.players[i] == r.player)) ++i;
    out << std::setw(4) << ++rank_no << "  " << std::left << std::setw(16)
        << r.player.to_string() << std::right << "  ";
    if (report.is_exact()) {
      out << rational_text(report.exact[i]) << "  (" << fixed(report.values[i]) << ")\n";
    } else {
      out << fixed(report.values[i]) << "  +/- " << fixed(report.std_errors[i]) << "\n";
    }
  }
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const CapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const UnexplainableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexplainable;
  } catch (const FixpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBlackBox;
  } catch (const BlackBoxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBlackBox;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBlackBox;
  } catch (const EnvironmentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEnvironment;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEnvironment;
  }
}

int serve(const std::string& addr, const std::string& data_dir, unsigned workers,
          const std::string& adapters) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ArgError("--addr expects HOST:PORT");
  std::string host = addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw ArgError("--addr port must be a number");
  }

  ServiceConfig config;
  config.data_dir = data_dir;
  config.workers = workers;
  if (!adapters.empty()) config.adapters = load_adapter_registry(adapters);

  // Signals are taken by a dedicated thread so the server can stop cleanly.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  std::unique_ptr<Service> service;
  try {
    service = std::make_unique<Service>(config);
  } catch (const std::filesystem::filesystem_error& e) {
    throw EnvironmentError(std::string("data directory: ") + e.what());
  }
  httplib::Server server;
  // httplib also sets SO_REUSEPORT by default, which would let a second
  // server share a busy port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  service->mount(server);

  if (port == 0) {
    port = server.bind_to_any_port(host);
    if (port < 0) throw EnvironmentError("cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw EnvironmentError("cannot bind " + addr + " (address in use?)");
  }
  std::cerr << "listening on " << host << ":" << port << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
  });
  server.listen_after_bind();
  if (waiter.joinable()) {
    // The server may have stopped for another reason; wake the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repair tables under denial constraints and explain the repairs"};
  app.require_subcommand(1);

  std::string table_path, dc_path, out_path;
  AlgorithmChoice algorithm;

  auto* repair = app.add_subcommand("repair", "repair a table and write the clean CSV");
  repair->add_option("table", table_path, "dirty table (CSV)")->required();
  repair->add_option("constraints", dc_path, "denial constraints file")->required();
  repair->add_option("--out", out_path, "clean CSV path; changes go to <out>.changes.json")
      ->required();
  algorithm.add_to(repair);

  std::string cell, mode = "constraints", estimator = "sampling", imputation, format = "text";
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  auto* explain = app.add_subcommand("explain", "rank constraints or cells by Shapley value");
  explain->add_option("table", table_path, "dirty table (CSV)")->required();
  explain->add_option("constraints", dc_path, "denial constraints file")->required();
  explain->add_option("--cell", cell, "cell of interest as ROW:ATTR")->required();
  explain->add_option("--mode", mode, "constraints or cells")
      ->check(CLI::IsMember({"constraints", "cells"}));
  explain->add_option("--estimator", estimator, "cells mode: sampling or exact")
      ->check(CLI::IsMember({"sampling", "exact"}));
  explain->add_option("--m", samples, "permutation samples per cell");
  explain->add_option("--seed", seed, "sampling seed");
  explain->add_option("--imputation", imputation, "null or column-distribution")
      ->check(CLI::IsMember({"null", "column-distribution"}));
  explain->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  explain->add_option("--workers", workers, "sampling threads (0 = all cores)");
  algorithm.add_to(explain);

  auto* validate = app.add_subcommand("validate", "count violations per constraint");
  validate->add_option("table", table_path, "table (CSV)")->required();
  validate->add_option("constraints", dc_path, "denial constraints file")->required();

  std::string addr = "127.0.0.1:8080", data_dir = "dcshap-data", adapters;
  unsigned serve_workers = 1;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--addr", addr, "HOST:PORT; port 0 picks a free port");
  serve_cmd->add_option("--data-dir", data_dir, "session and job store");
  serve_cmd->add_option("--workers", serve_workers, "sampling threads per job");
  serve_cmd->add_option("--adapters", adapters, "adapter registry file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInput;
  }

  if (*repair) {
    return run_guarded([&] {
      Inputs in = load_inputs(table_path, dc_path);
      Table clean = run_repair(algorithm.resolve(), in.constraints, in.table);
      auto changes = diff_tables(in.table, clean);
      write_file(out_path, serialize_table(clean));
      write_file(out_path + ".changes.json", wire::to_json(changes).dump(2) + "\n");
      std::cerr << changes.size() << " cell(s) changed\n";
      return kOk;
    });
  }

  if (*explain) {
    return run_guarded([&] {
      Inputs in = load_inputs(table_path, dc_path);
      CellRef target = parse_cell(cell);
      RepairAlgorithm alg = algorithm.resolve();
      RepairTask task = make_task(alg, in.constraints, in.table, target);
      std::ostringstream out;
      if (mode == "constraints") {
        auto report = shapley_constraints(alg, task);
        if (format == "json") out << wire::to_json(report).dump(2) << "\n";
        else print_text(out, report);
      } else {
        CellShapleyReport report;
        if (estimator == "exact") {
          if (!imputation.empty() && imputation != "null") {
            throw ArgError("exact cell enumeration uses null imputation");
          }
          report = shapley_cells_exact(alg, task);
        } else {
          SamplingOptions options;
          options.samples = samples;
          options.seed = seed;
          options.workers = workers;
          options.imputation =
              imputation == "null" ? Imputation::kNull : Imputation::kColumnDistribution;
          report = shapley_cells_sampled(alg, task, options);
        }
        if (format == "json") out << wire::to_json(report).dump(2) << "\n";
        else print_text(out, report);
      }
      std::cout << out.str();
      return kOk;
    });
  }

  if (*validate) {
    return run_guarded([&] {
      Inputs in = load_inputs(table_path, dc_path);
      std::size_t total = 0;
      for (const auto& dc : in.constraints) {
        auto found = violations(dc, in.table);
        total += found.size();
        std::cout << dc.id << "  " << found.size() << "\n";
      }
      std::cout << "total  " << total << "\n";
      return kOk;
    });
  }

  return run_guarded([&] { return serve(addr, data_dir, serve_workers, adapters); });
}
