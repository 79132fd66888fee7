#ifndef DCSHAP_SERVICE_HPP
#define DCSHAP_SERVICE_HPP

// HTTP front end: sessions hold a dirty table and constraints, repairs are
// cached per revision, explanations run as persisted background jobs.
//
//   POST   /sessions                   {"table_csv" | "table", "constraints", "algorithm"?}
//   GET    /sessions/{id}
//   POST   /sessions/{id}/repair
//   POST   /sessions/{id}/explain      {"target", "mode", "m"?, "seed"?, "imputation"?,
//                                        "estimator"?, "revision"?}
//   GET    /jobs/{id}
//   PATCH  /sessions/{id}/cells        {"edits": [{"row", "attr", "value"}...]} or one edit
//   PUT    /sessions/{id}/constraints  {"constraints": text}
//   DELETE /sessions/{id}
//
// On disk, under the data directory:
//   sessions/<id>/rev-<n>.json         one snapshot per revision, never rewritten
//   sessions/<id>/rev-<n>.repair.json  repair result of that revision
//   jobs/<id>.json                     latest job state

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dcshap/dc.hpp"
#include "dcshap/errors.hpp"
#include "dcshap/external.hpp"
#include "dcshap/repair.hpp"
#include "dcshap/shapley.hpp"
#include "dcshap/table.hpp"
#include "dcshap/wire.hpp"

namespace dcshap {

namespace fs = std::filesystem;
using wire::json;

// Registry file: {"adapters": [{"name", "executable", "args"?, "timeout_ms"?,
// "pool_size"?}...]}. Relative executables resolve against the file's folder.
inline std::vector<AdapterConfig> load_adapter_registry(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read adapter registry " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const std::exception& e) {
    throw InputError("adapter registry " + path.string() + ": " + e.what());
  }
  std::vector<AdapterConfig> out;
  for (const auto& entry : doc.value("adapters", json::array())) {
    AdapterConfig config;
    config.name = entry.at("name").get<std::string>();
    if (config.name == "reference") throw InputError("adapter name 'reference' is reserved");
    fs::path exe = entry.at("executable").get<std::string>();
    if (exe.is_relative() && exe.has_parent_path()) exe = path.parent_path() / exe;
    config.executable = exe.string();
    config.args = entry.value("args", std::vector<std::string>{});
    config.timeout = std::chrono::milliseconds(entry.value("timeout_ms", 30000));
    config.pool_size = entry.value("pool_size", std::size_t{1});
    out.push_back(std::move(config));
  }
  return out;
}

struct ServiceConfig {
  fs::path data_dir = "dcshap-data";
  unsigned workers = 1;  // sampler threads per explanation job
  std::vector<AdapterConfig> adapters;
};

class Service {
 public:
  struct Reply {
    int status = 200;
    json body;
    std::map<std::string, std::string> headers;
  };

  explicit Service(ServiceConfig config) : config_(std::move(config)) {
    algorithms_["reference"] = RepairAlgorithm(reference_repair);
    for (const auto& adapter : config_.adapters) {
      ExternalRepairer repairer(adapter);
      repairer.handshake();
      algorithms_[adapter.name] = RepairAlgorithm(repairer);
    }
    fs::create_directories(config_.data_dir / "sessions");
    fs::create_directories(config_.data_dir / "jobs");
    load();
    worker_ = std::jthread([this](std::stop_token stop) { job_loop(stop); });
  }

  ~Service() {
    worker_.request_stop();
    queue_ready_.notify_all();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void mount(httplib::Server& server) {
    auto bind = [this](auto method) {
      return [this, method](const httplib::Request& req, httplib::Response& res) {
        Reply reply = guarded([&] { return (this->*method)(req); });
        res.status = reply.status;
        for (const auto& [k, v] : reply.headers) res.set_header(k, v);
        res.set_content(reply.body.dump(), "application/json");
      };
    };
    server.Post("/sessions", bind(&Service::create_session));
    server.Get(R"(/sessions/([^/]+))", bind(&Service::get_session));
    server.Post(R"(/sessions/([^/]+)/repair)", bind(&Service::repair));
    server.Post(R"(/sessions/([^/]+)/explain)", bind(&Service::submit_explain));
    server.Get(R"(/jobs/([^/]+))", bind(&Service::get_job));
    server.Patch(R"(/sessions/([^/]+)/cells)", bind(&Service::edit_cells));
    server.Put(R"(/sessions/([^/]+)/constraints)", bind(&Service::edit_constraints));
    server.Delete(R"(/sessions/([^/]+))", bind(&Service::delete_session));
  }

  // Blocks until the job queue is empty and no job is running.
  void wait_idle() {
    std::unique_lock lock(mutex_);
    idle_.wait(lock, [&] { return queue_.empty() && !busy_; });
  }

 private:
  struct Session {
    std::string id;
    std::uint64_t revision = 0;
    std::string algorithm;
    std::string constraint_text;
    Table dirty;
    std::vector<DenialConstraint> constraints;
    std::optional<Table> clean;
    std::vector<CellChange> changes;
  };

  struct Job {
    std::string id;
    std::string session;
    std::uint64_t revision = 0;
    CellRef target;
    std::string mode;       // constraints | cells
    std::string estimator;  // cells only: sampling | exact
    SamplingOptions params;
    std::string status = "pending";
    json result;
    json error;
  };

  class HttpError : public std::runtime_error {
   public:
    HttpError(int status, const std::string& message, json extra = json::object())
        : std::runtime_error(message), status_(status), extra_(std::move(extra)) {}
    int status() const { return status_; }
    const json& extra() const { return extra_; }

   private:
    int status_;
    json extra_;
  };

  static json error_body(const std::string& kind, const std::string& message) {
    return {{"error", message}, {"kind", kind}};
  }

  template <class F>
  Reply guarded(F&& f) {
    try {
      return f();
    } catch (const HttpError& e) {
      json body = error_body("request", e.what());
      body.update(e.extra());
      return {e.status(), body, {}};
    } catch (const FixpointError& e) {
      json body = error_body("fixpoint", e.what());
      body["last_table"] = wire::to_json(e.last_table());
      return {409, body, {}};
    } catch (const ParseError& e) {
      json body = error_body("parse", e.what());
      body["diagnostics"] = json::array({{{"line", e.line()},
                                          {"column", e.column()},
                                          {"message", e.detail()}}});
      return {422, body, {}};
    } catch (const InputError& e) {
      return {422, error_body("input", e.what()), {}};
    } catch (const UnexplainableError& e) {
      return {409, error_body("unexplainable", e.what()), {}};
    } catch (const BlackBoxError& e) {
      return {502, error_body("black-box", e.what()), {}};
    } catch (const ContractError& e) {
      return {502, error_body("contract", e.what()), {}};
    } catch (const json::exception& e) {
      return {400, error_body("request", std::string("malformed request: ") + e.what()), {}};
    } catch (const std::exception& e) {
      return {500, error_body("internal", e.what()), {}};
    }
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json body = json::parse(req.body);
    if (!body.is_object()) throw HttpError(400, "request body must be a JSON object");
    return body;
  }

  std::string fresh_id() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::uniform_int_distribution<int> digit(0, 15);
    std::string id;
    for (int i = 0; i < 16; ++i) id += kHex[digit(id_rng_)];
    return id;
  }

  const RepairAlgorithm& algorithm(const std::string& name) const {
    auto it = algorithms_.find(name);
    if (it == algorithms_.end()) throw HttpError(422, "unknown algorithm '" + name + "'");
    return it->second;
  }

  // Parses constraint text and binds it to `table`. Bind failures name the
  // offending constraint and its line.
  static std::vector<DenialConstraint> parse_and_bind(const std::string& text,
                                                      const Table& table) {
    auto dcs = parse_constraints(text);
    for (const auto& dc : dcs) {
      try {
        bind(dc, table);
      } catch (const BindError& e) {
        json diag = {{"constraint", dc.id}, {"message", e.what()}};
        if (auto line = line_of(text, dc.id)) diag["line"] = *line;
        throw HttpError(422, e.what(), {{"kind", "bind"}, {"diagnostics", json::array({diag})}});
      }
    }
    return dcs;
  }

  static std::optional<std::size_t> line_of(const std::string& text, const std::string& id) {
    std::istringstream in(text);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      auto colon = line.find(':', first);
      if (colon == std::string::npos) continue;
      std::string label = line.substr(first, colon - first);
      while (!label.empty() && (label.back() == ' ' || label.back() == '\t')) label.pop_back();
      if (label == id) return n;
    }
    return std::nullopt;
  }

  Session& find_session(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw HttpError(404, "no session '" + id + "'");
    return it->second;
  }

  json session_json(const Session& s) const {
    json dcs = json::array();
    for (const auto& dc : s.constraints) dcs.push_back(print_dc(dc));
    return {{"id", s.id},
            {"revision", s.revision},
            {"algorithm", s.algorithm},
            {"table", wire::to_json(s.dirty)},
            {"constraints", std::move(dcs)},
            {"clean", s.clean ? wire::to_json(*s.clean) : json(nullptr)},
            {"changes", s.clean ? wire::to_json(s.changes) : json(nullptr)}};
  }

  json job_json(const Job& job) const {
    json params = json::object();
    if (job.mode == "cells") {
      params["estimator"] = job.estimator;
      params["imputation"] = std::string(to_string(job.params.imputation));
      if (job.estimator == "sampling") {
        params["m"] = job.params.samples;
        params["seed"] = job.params.seed;
      }
    }
    json out = {{"id", job.id},
                {"session", job.session},
                {"revision", job.revision},
                {"target", wire::to_json(job.target)},
                {"mode", job.mode},
                {"params", std::move(params)},
                {"status", job.status}};
    if (!job.result.is_null()) out["result"] = job.result;
    if (!job.error.is_null()) out["error"] = job.error;
    return out;
  }

  // ---- persistence -------------------------------------------------------

  static void write_atomically(const fs::path& path, const json& doc) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << doc.dump() << '\n';
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
  }

  fs::path session_dir(const std::string& id) const {
    return config_.data_dir / "sessions" / id;
  }

  fs::path revision_file(const std::string& id, std::uint64_t rev) const {
    return session_dir(id) / ("rev-" + std::to_string(rev) + ".json");
  }

  fs::path repair_file(const std::string& id, std::uint64_t rev) const {
    return session_dir(id) / ("rev-" + std::to_string(rev) + ".repair.json");
  }

  void persist_revision(const Session& s) const {
    fs::create_directories(session_dir(s.id));
    write_atomically(revision_file(s.id, s.revision),
                     {{"id", s.id},
                      {"revision", s.revision},
                      {"algorithm", s.algorithm},
                      {"table", wire::to_json(s.dirty)},
                      {"constraints", s.constraint_text}});
  }

  void persist_repair(const Session& s) const {
    write_atomically(repair_file(s.id, s.revision),
                     {{"clean", wire::to_json(*s.clean)}, {"changes", wire::to_json(s.changes)}});
  }

  void persist_job(const Job& job) const {
    json doc = job_json(job);
    doc["params_raw"] = {{"m", job.params.samples},
                         {"seed", job.params.seed},
                         {"imputation", std::string(to_string(job.params.imputation))}};
    write_atomically(config_.data_dir / "jobs" / (job.id + ".json"), doc);
  }

  static json read_json(const fs::path& path) {
    std::ifstream in(path);
    return json::parse(in);
  }

  Session load_revision(const std::string& id, std::uint64_t rev) const {
    json doc = read_json(revision_file(id, rev));
    Session s;
    s.id = id;
    s.revision = rev;
    s.algorithm = doc.at("algorithm").get<std::string>();
    s.dirty = wire::table_from_json(doc.at("table"));
    s.constraint_text = doc.at("constraints").get<std::string>();
    s.constraints = parse_constraints(s.constraint_text);
    if (fs::exists(repair_file(id, rev))) {
      json repair = read_json(repair_file(id, rev));
      s.clean = wire::table_from_json(repair.at("clean"));
      s.changes = wire::changes_from_json(repair.at("changes"));
    }
    return s;
  }

  void load() {
    for (const auto& dir : fs::directory_iterator(config_.data_dir / "sessions")) {
      if (!dir.is_directory()) continue;
      std::optional<std::uint64_t> latest;
      for (const auto& file : fs::directory_iterator(dir.path())) {
        std::string name = file.path().filename().string();
        if (name.rfind("rev-", 0) != 0 || name.find(".repair") != std::string::npos ||
            file.path().extension() != ".json") {
          continue;
        }
        auto rev = std::stoull(name.substr(4));
        if (!latest || rev > *latest) latest = rev;
      }
      if (!latest) continue;
      std::string id = dir.path().filename().string();
      sessions_[id] = load_revision(id, *latest);
    }
    std::vector<std::string> pending;
    for (const auto& file : fs::directory_iterator(config_.data_dir / "jobs")) {
      if (file.path().extension() != ".json") continue;
      json doc = read_json(file.path());
      Job job;
      job.id = doc.at("id").get<std::string>();
      job.session = doc.at("session").get<std::string>();
      if (!sessions_.count(job.session)) continue;
      job.revision = doc.at("revision").get<std::uint64_t>();
      job.target = wire::cell_from_json(doc.at("target"));
      job.mode = doc.at("mode").get<std::string>();
      job.estimator = doc.at("params").value("estimator", "");
      const json& raw = doc.at("params_raw");
      job.params.samples = raw.at("m").get<std::size_t>();
      job.params.seed = raw.at("seed").get<std::uint64_t>();
      job.params.imputation = raw.at("imputation").get<std::string>() == "null"
                                  ? Imputation::kNull
                                  : Imputation::kColumnDistribution;
      job.status = doc.at("status").get<std::string>();
      if (doc.contains("result")) job.result = doc["result"];
      if (doc.contains("error")) job.error = doc["error"];
      if (job.status == "pending" || job.status == "running") {
        job.status = "pending";
        pending.push_back(job.id);
      }
      jobs_[job.id] = std::move(job);
    }
    // Requeue in a stable order so a restart replays deterministically.
    std::sort(pending.begin(), pending.end());
    for (const auto& id : pending) queue_.push_back(id);
  }

  // ---- handlers ----------------------------------------------------------

  Reply create_session(const httplib::Request& req) {
    json body = parse_body(req);
    Session s;
    s.algorithm = body.value("algorithm", "reference");
    algorithm(s.algorithm);
    if (body.contains("table_csv")) {
      try {
        s.dirty = parse_table(body.at("table_csv").get<std::string>());
      } catch (const ParseError& e) {
        throw HttpError(422, e.what(),
                        {{"kind", "parse"},
                         {"diagnostics", json::array({{{"source", "table"},
                                                       {"line", e.line()},
                                                       {"column", e.column()},
                                                       {"message", e.detail()}}})}});
      }
    } else if (body.contains("table")) {
      s.dirty = wire::table_from_json(body.at("table"));
    } else {
      throw HttpError(422, "request needs 'table_csv' or 'table'");
    }
    s.constraint_text = body.value("constraints", "");
    try {
      s.constraints = parse_and_bind(s.constraint_text, s.dirty);
    } catch (const ParseError& e) {
      throw HttpError(422, e.what(),
                      {{"kind", "parse"},
                       {"diagnostics", json::array({{{"source", "constraints"},
                                                     {"line", e.line()},
                                                     {"column", e.column()},
                                                     {"message", e.detail()}}})}});
    }
    std::lock_guard lock(mutex_);
    s.id = fresh_id();
    persist_revision(s);
    json out = session_json(s);
    sessions_[s.id] = std::move(s);
    return {201, out, {}};
  }

  Reply get_session(const httplib::Request& req) {
    std::lock_guard lock(mutex_);
    return {200, session_json(find_session(req.matches[1])), {}};
  }

  Reply repair(const httplib::Request& req) {
    std::string id = req.matches[1];
    Session snapshot;
    {
      std::lock_guard lock(mutex_);
      Session& s = find_session(id);
      if (s.clean) return {200, repair_json(s), {{"X-Cache", "hit"}}};
      snapshot = s;
    }
    Table clean = run_repair(algorithm(snapshot.algorithm), snapshot.constraints, snapshot.dirty);
    std::lock_guard lock(mutex_);
    Session& s = find_session(id);
    if (s.revision != snapshot.revision) {
      throw HttpError(409, "session was edited while the repair ran",
                      {{"revision", s.revision}});
    }
    if (s.clean) return {200, repair_json(s), {{"X-Cache", "hit"}}};
    s.changes = diff_tables(s.dirty, clean);
    s.clean = std::move(clean);
    persist_repair(s);
    return {200, repair_json(s), {{"X-Cache", "miss"}}};
  }

  json repair_json(const Session& s) const {
    return {{"session", s.id},
            {"revision", s.revision},
            {"clean", wire::to_json(*s.clean)},
            {"changes", wire::to_json(s.changes)}};
  }

  Reply submit_explain(const httplib::Request& req) {
    json body = parse_body(req);
    std::lock_guard lock(mutex_);
    Session& s = find_session(req.matches[1]);
    if (body.contains("revision") && body["revision"].get<std::uint64_t>() != s.revision) {
      throw HttpError(409, "stale revision", {{"revision", s.revision}});
    }
    if (!s.clean) {
      throw HttpError(409, "no repair at the current revision", {{"revision", s.revision}});
    }
    if (!body.contains("target")) throw HttpError(422, "request needs 'target'");
    Job job;
    job.target = wire::cell_from_json(body.at("target"));
    s.dirty.locate(job.target);
    bool changed = std::any_of(s.changes.begin(), s.changes.end(),
                               [&](const CellChange& c) { return c.ref == job.target; });
    if (!changed) {
      throw HttpError(409, "only changed cells are explainable; " + job.target.to_string() +
                               " was not repaired");
    }
    job.mode = body.value("mode", "constraints");
    if (job.mode != "constraints" && job.mode != "cells") {
      throw HttpError(422, "mode must be 'constraints' or 'cells'");
    }
    if (job.mode == "cells") {
      job.estimator = body.value("estimator", "sampling");
      if (job.estimator != "sampling" && job.estimator != "exact") {
        throw HttpError(422, "estimator must be 'sampling' or 'exact'");
      }
      std::string imputation =
          body.value("imputation", job.estimator == "exact" ? "null" : "column-distribution");
      if (imputation == "null") job.params.imputation = Imputation::kNull;
      else if (imputation == "column-distribution") job.params.imputation = Imputation::kColumnDistribution;
      else throw HttpError(422, "imputation must be 'null' or 'column-distribution'");
      if (job.estimator == "exact" && job.params.imputation != Imputation::kNull) {
        throw HttpError(422, "exact cell enumeration uses null imputation");
      }
      job.params.samples = body.value("m", std::size_t{1000});
      job.params.seed = body.value("seed", std::uint64_t{0});
      if (job.estimator == "sampling" && job.params.samples == 0) {
        throw HttpError(422, "m must be at least 1");
      }
    }
    job.id = fresh_id();
    job.session = s.id;
    job.revision = s.revision;
    persist_job(job);
    json out = job_json(job);
    queue_.push_back(job.id);
    jobs_[job.id] = std::move(job);
    queue_ready_.notify_all();
    return {202, out, {}};
  }

  Reply get_job(const httplib::Request& req) {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(req.matches[1]);
    if (it == jobs_.end()) throw HttpError(404, "no job '" + std::string(req.matches[1]) + "'");
    json out = job_json(it->second);
    auto s = sessions_.find(it->second.session);
    out["stale"] = s == sessions_.end() || s->second.revision != it->second.revision;
    return {200, out, {}};
  }

  // Starts a new revision of `s`; the caller has already validated the edit.
  void next_revision(Session& s) {
    ++s.revision;
    s.clean.reset();
    s.changes.clear();
    persist_revision(s);
  }

  Reply edit_cells(const httplib::Request& req) {
    json body = parse_body(req);
    json edits = body.contains("edits") ? body.at("edits") : json::array({body});
    if (!edits.is_array() || edits.empty()) throw HttpError(422, "no edits given");
    std::lock_guard lock(mutex_);
    Session& s = find_session(req.matches[1]);
    Table edited = s.dirty;
    for (const auto& edit : edits) {
      if (!edit.contains("value")) throw HttpError(422, "each edit needs 'value'");
      edited.set(wire::cell_from_json(edit), wire::value_from_json(edit.at("value")));
    }
    for (const auto& dc : s.constraints) bind(dc, edited);
    s.dirty = std::move(edited);
    next_revision(s);
    return {200, session_json(s), {}};
  }

  Reply edit_constraints(const httplib::Request& req) {
    json body = parse_body(req);
    if (!body.contains("constraints") || !body["constraints"].is_string()) {
      throw HttpError(422, "request needs 'constraints' text");
    }
    std::string text = body["constraints"].get<std::string>();
    std::lock_guard lock(mutex_);
    Session& s = find_session(req.matches[1]);
    auto dcs = parse_and_bind(text, s.dirty);
    s.constraint_text = std::move(text);
    s.constraints = std::move(dcs);
    next_revision(s);
    return {200, session_json(s), {}};
  }

  Reply delete_session(const httplib::Request& req) {
    std::string id = req.matches[1];
    std::lock_guard lock(mutex_);
    find_session(id);
    sessions_.erase(id);
    for (auto it = jobs_.begin(); it != jobs_.end();) {
      if (it->second.session == id) {
        fs::remove(config_.data_dir / "jobs" / (it->first + ".json"));
        it = jobs_.erase(it);
      } else {
        ++it;
      }
    }
    std::erase_if(queue_, [&](const std::string& job) { return !jobs_.count(job); });
    fs::remove_all(session_dir(id));
    return {200, {{"deleted", id}}, {}};
  }

  // ---- job execution -----------------------------------------------------

  void job_loop(std::stop_token stop) {
    for (;;) {
      Job job;
      Session snapshot;
      RepairAlgorithm alg;
      {
        std::unique_lock lock(mutex_);
        queue_ready_.wait(lock, stop, [&] { return !queue_.empty(); });
        if (stop.stop_requested()) return;
        std::string id = queue_.front();
        queue_.pop_front();
        auto it = jobs_.find(id);
        if (it == jobs_.end()) continue;
        it->second.status = "running";
        persist_job(it->second);
        job = it->second;
        busy_ = true;
        try {
          snapshot = load_revision(job.session, job.revision);
          alg = algorithms_.at(snapshot.algorithm);
        } catch (const std::exception& e) {
          finish(job.id, nullptr, error_body("internal", e.what()));
          continue;
        }
      }
      json result;
      json error;
      try {
        result = explain(alg, snapshot, job);
      } catch (const FixpointError& e) {
        error = error_body("fixpoint", e.what());
      } catch (const BlackBoxError& e) {
        error = error_body("black-box", e.what());
      } catch (const ContractError& e) {
        error = error_body("contract", e.what());
      } catch (const UnexplainableError& e) {
        error = error_body("unexplainable", e.what());
      } catch (const CapError& e) {
        error = error_body("cap", e.what());
      } catch (const std::exception& e) {
        error = error_body("input", e.what());
      }
      std::lock_guard lock(mutex_);
      finish(job.id, std::move(result), std::move(error));
    }
  }

  // Caller holds mutex_.
  void finish(const std::string& id, json result, json error) {
    auto it = jobs_.find(id);
    if (it != jobs_.end()) {
      it->second.status = error.is_null() ? "done" : "failed";
      it->second.result = std::move(result);
      it->second.error = std::move(error);
      persist_job(it->second);
    }
    busy_ = false;
    if (queue_.empty()) idle_.notify_all();
  }

  json explain(const RepairAlgorithm& alg, const Session& snapshot, const Job& job) const {
    RepairTask task = make_task(alg, snapshot.constraints, snapshot.dirty, job.target);
    json report;
    if (job.mode == "constraints") {
      report = wire::to_json(shapley_constraints(alg, task));
    } else if (job.estimator == "exact") {
      report = wire::to_json(shapley_cells_exact(alg, task));
    } else {
      SamplingOptions options = job.params;
      options.workers = config_.workers;
      report = wire::to_json(shapley_cells_sampled(alg, task, options));
    }
    report["revision"] = job.revision;
    return report;
  }

  ServiceConfig config_;
  std::map<std::string, RepairAlgorithm> algorithms_;

  std::mutex mutex_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, Job> jobs_;
  std::deque<std::string> queue_;
  std::condition_variable_any queue_ready_;
  std::condition_variable_any idle_;
  bool busy_ = false;
  std::mt19937_64 id_rng_{std::random_device{}()};

  std::jthread worker_;
};

}  // namespace dcshap

#endif  // DCSHAP_SERVICE_HPP
