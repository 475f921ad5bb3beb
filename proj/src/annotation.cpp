/// @file annotation.cpp
/// @brief Annotation sessions, event log replay and the HTTP API.

#include "gapdx/annotation.h"

#include <httplib.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

#include "gapdx/errors.h"
#include "gapdx/jsonl.h"
#include "gapdx/rng.h"

namespace gapdx {

using json = nlohmann::json;

std::vector<AnnotatorSession> CreateAssignment(const KeyList& keys, const std::vector<std::string>& annotators,
                                               std::uint64_t seed) {
  if (annotators.size() < 2) throw ProtocolError("dual annotation needs at least two annotators");
  std::set<std::string> distinct(annotators.begin(), annotators.end());
  if (distinct.size() != annotators.size()) throw ProtocolError("annotator ids must be distinct");
  if (distinct.count("")) throw ProtocolError("annotator ids must be non-empty");

  const std::size_t a = annotators.size();
  std::vector<AnnotatorSession> sessions(a);
  for (std::size_t i = 0; i < a; ++i) sessions[i].annotator_id = annotators[i];
  // Slots 2i and 2i+1 walk the annotators cyclically: two distinct annotators
  // per key and loads within one of each other.
  for (std::size_t i = 0; i < keys.keys.size(); ++i) {
    sessions[(2 * i) % a].assigned.push_back(keys.keys[i]);
    sessions[(2 * i + 1) % a].assigned.push_back(keys.keys[i]);
  }
  DeterministicRng rng(seed);
  for (auto& s : sessions) rng.Shuffle(s.assigned);
  return sessions;
}

json AnnotationTask::ToJson() const {
  json j = KeyToJson(key);
  j["key"] = KeyToJson(key);
  j["screenshot_ref"] = screenshot_ref;
  const std::filesystem::path ref(screenshot_ref);
  j["screenshot_url"] = !screenshot_ref.empty() && ref.is_relative() ? "/screenshots/" + ref.generic_string() : "";
  if (overlay) {
    json o{{"x", overlay->point.x}, {"y", overlay->point.y}};
    if (overlay->bbox) {
      o["bbox"] = json::array({overlay->bbox->left, overlay->bbox->top, overlay->bbox->right, overlay->bbox->bottom});
    }
    j["overlay"] = o;
  } else {
    j["overlay"] = nullptr;
  }
  j["instruction"] = instruction;
  j["cot"] = cot;
  j["gt_action"] = gt_action_text;
  return j;
}

AnnotationTask MakeTask(const StepRecord& record) {
  AnnotationTask task{record.key, record.screenshot_ref, std::nullopt, record.instruction, record.cot,
                      DescribeAction(record.gt_action)};
  if (const auto* click = std::get_if<Click>(&record.gt_action)) task.overlay = Overlay{click->point, record.gt_bbox};
  return task;
}

std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

AnnotationStore::AnnotationStore(std::vector<AnnotationTask> tasks, std::vector<AnnotatorSession> sessions,
                                 std::uint64_t seed, std::filesystem::path log_path, Clock clock)
    : sessions_(std::move(sessions)), seed_(seed), log_path_(std::move(log_path)), clock_(std::move(clock)) {
  for (auto& t : tasks) {
    const StepKey key = t.key;
    if (!tasks_.emplace(key, std::move(t)).second) throw DuplicateKeyError("duplicate task " + ToString(key));
  }
  for (const auto& s : sessions_) {
    for (const StepKey& key : s.assigned) {
      if (!tasks_.count(key)) throw ProtocolError("assigned key " + ToString(key) + " has no task");
    }
  }
  Replay();
}

json AnnotationStore::Header() const {
  json sessions = json::array();
  for (const auto& s : sessions_) {
    json keys = json::array();
    for (const auto& k : s.assigned) keys.push_back(KeyToJson(k));
    sessions.push_back(json{{"annotator_id", s.annotator_id}, {"keys", keys}});
  }
  return json{{"event", "assignment"}, {"seed", seed_}, {"sessions", sessions}};
}

void AnnotationStore::Replay() {
  std::error_code ec;
  if (!std::filesystem::exists(log_path_, ec) || std::filesystem::file_size(log_path_, ec) == 0) {
    for (auto& s : sessions_) s.cursor = s.completed = 0;
    WriteTextFile(log_path_, DumpCompact(Header()) + "\n");
    WriteTextFile(snapshot_path(), DumpPretty(SnapshotLocked()));
    return;
  }
  const std::vector<JsonLine> lines = ReadJsonLines(log_path_);
  if (lines.empty() || lines.front().value != Header()) {
    throw ProtocolError(log_path_.string() + " was written for a different assignment");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const json& e = lines[i].value;
    if (e.value("event", "") != "label") {
      throw ProtocolError(log_path_.string() + ":" + std::to_string(lines[i].line_number) + ": unknown event");
    }
    const AnnotationRecord r = AnnotationRecord::FromJson(e);
    Apply(SessionFor(r.annotator_id), r.key, r.label, r.timestamp);
  }
  WriteTextFile(snapshot_path(), DumpPretty(SnapshotLocked()));
}

std::filesystem::path AnnotationStore::snapshot_path() const {
  return log_path_.string() + ".snapshot.json";
}

AnnotatorSession& AnnotationStore::SessionFor(const std::string& session_id) {
  for (auto& s : sessions_) {
    if (s.annotator_id == session_id) return s;
  }
  throw NotFound("unknown session '" + session_id + "'");
}

const AnnotatorSession& AnnotationStore::SessionFor(const std::string& session_id) const {
  return const_cast<AnnotationStore*>(this)->SessionFor(session_id);
}

void AnnotationStore::Apply(AnnotatorSession& session, const StepKey& key, Label label,
                            const std::string& timestamp) {
  for (const auto& r : records_) {
    if (r.key == key && r.annotator_id == session.annotator_id) {
      throw DuplicateAnnotation(session.annotator_id + " already labelled " + ToString(key));
    }
  }
  if (session.cursor >= session.assigned.size() || session.assigned[session.cursor] != key) {
    throw SequenceError(ToString(key) + " is not the current task of " + session.annotator_id);
  }
  records_.push_back(AnnotationRecord{key, session.annotator_id, label, timestamp});
  ++session.cursor;
  ++session.completed;
}

std::optional<AnnotationTask> AnnotationStore::NextTask(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const AnnotatorSession& s = SessionFor(session_id);
  if (s.cursor >= s.assigned.size()) return std::nullopt;
  return tasks_.at(s.assigned[s.cursor]);
}

std::size_t AnnotationStore::SubmitLabel(const std::string& session_id, const StepKey& key, Label label) {
  std::lock_guard lock(mutex_);
  AnnotatorSession& s = SessionFor(session_id);
  Apply(s, key, label, clock_());
  json event = records_.back().ToJson();
  event["event"] = "label";
  std::ofstream out(log_path_, std::ios::app | std::ios::binary);
  out << DumpCompact(event) << '\n';
  out.flush();
  if (!out) {
    records_.pop_back();
    --s.cursor;
    --s.completed;
    throw IoError("cannot append to " + log_path_.string());
  }
  WriteTextFile(snapshot_path(), DumpPretty(SnapshotLocked()));
  return s.completed;
}

json AnnotationStore::Progress() const {
  std::lock_guard lock(mutex_);
  json sessions = json::array();
  std::size_t done = 0;
  std::size_t total = 0;
  for (const auto& s : sessions_) {
    sessions.push_back(json{{"annotator_id", s.annotator_id}, {"completed", s.completed}, {"total", s.assigned.size()}});
    done += s.completed;
    total += s.assigned.size();
  }
  return json{{"sessions", sessions}, {"labels", done}, {"expected_labels", total}, {"keys", tasks_.size()}};
}

std::vector<AnnotationRecord> AnnotationStore::Export() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<AnnotatorSession> AnnotationStore::Sessions() const {
  std::lock_guard lock(mutex_);
  return sessions_;
}

json AnnotationStore::SnapshotLocked() const {
  json sessions = json::array();
  for (const auto& s : sessions_) {
    sessions.push_back(json{{"annotator_id", s.annotator_id},
                            {"cursor", s.cursor},
                            {"completed", s.completed},
                            {"total", s.assigned.size()}});
  }
  return json{{"seed", seed_}, {"sessions", sessions}, {"labels", records_.size()}};
}

json AnnotationStore::Snapshot() const {
  std::lock_guard lock(mutex_);
  return SnapshotLocked();
}

// ---------------------------------------------------------------------------
// HTTP API
// ---------------------------------------------------------------------------

namespace {

HttpReply JsonReply(int status, const json& body) { return {status, "application/json", DumpCompact(body)}; }

HttpReply ErrorReply(const Error& e) {
  int status = 400;
  if (e.name() == "NotFound") status = 404;
  if (e.name() == "SequenceError" || e.name() == "DuplicateAnnotation") status = 409;
  return JsonReply(status, json{{"error", e.name()}, {"message", e.what()}});
}

// "/sessions/{id}/{leaf}" -> id, when the path has exactly that shape.
std::optional<std::string> SessionId(const std::string& path, const std::string& leaf) {
  const std::string prefix = "/sessions/";
  const std::string suffix = "/" + leaf;
  if (path.size() <= prefix.size() + suffix.size() || path.compare(0, prefix.size(), prefix) != 0 ||
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  std::string id = path.substr(prefix.size(), path.size() - prefix.size() - suffix.size());
  if (id.find('/') != std::string::npos) return std::nullopt;
  return httplib::detail::decode_url(id, false);
}

}  // namespace

HttpReply HandleApiRequest(AnnotationStore& store, const std::string& method, const std::string& path,
                           const std::string& body) {
  try {
    if (method == "GET" && path == "/progress") return JsonReply(200, store.Progress());
    if (method == "GET" && path == "/export") {
      std::string out;
      for (const auto& r : store.Export()) out += DumpCompact(r.ToJson()) + "\n";
      return {200, "application/x-ndjson", out};
    }
    if (auto id = SessionId(path, "next"); id && method == "GET") {
      const auto task = store.NextTask(*id);
      if (!task) return JsonReply(200, json{{"done", true}});
      return JsonReply(200, json{{"done", false}, {"task", task->ToJson()}});
    }
    if (auto id = SessionId(path, "labels"); id && method == "POST") {
      json request;
      try {
        request = json::parse(body);
      } catch (const json::parse_error& e) {
        throw ParseError("request", e.byte, e.what());
      } catch (const json::exception& e) {
        throw ParseError("request", 0, e.what());
      }
      if (!request.is_object() || !request.contains("key") || !request["key"].is_object() ||
          !request.contains("label")) {
        throw ParseError("request", 0, "body needs 'key' and 'label'");
      }
      const AnnotationRecord parsed =
          AnnotationRecord::FromJson(json{{"episode_id", request["key"].value("episode_id", json())},
                                          {"step_id", request["key"].value("step_id", json())},
                                          {"annotator_id", *id},
                                          {"label", request["label"]}});
      const std::size_t completed = store.SubmitLabel(*id, parsed.key, parsed.label);
      return JsonReply(200, json{{"ok", true}, {"completed", completed}});
    }
    return JsonReply(404, json{{"error", "NotFound"}, {"message", method + " " + path}});
  } catch (const Error& e) {
    return ErrorReply(e);
  }
}

struct AnnotationServer::Impl {
  explicit Impl(AnnotationStore& s) : store(s) {}
  AnnotationStore& store;
  httplib::Server server;
};

AnnotationServer::AnnotationServer(AnnotationStore& store, std::filesystem::path screenshot_root)
    : impl_(std::make_unique<Impl>(store)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpReply reply = HandleApiRequest(impl_->store, req.method, req.path, req.body);
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  impl_->server.Get(R"(/sessions/[^/]+/next)", route);
  impl_->server.Post(R"(/sessions/[^/]+/labels)", route);
  impl_->server.Get("/progress", route);
  impl_->server.Get("/export", route);
  if (!screenshot_root.empty()) {
    if (!impl_->server.set_mount_point("/screenshots", screenshot_root.string())) {
      throw ConfigError("screenshot directory " + screenshot_root.string() + " does not exist");
    }
  }
}

AnnotationServer::~AnnotationServer() { Stop(); }

int AnnotationServer::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw ConfigError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationServer::Serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::Stop() { impl_->server.stop(); }

}  // namespace gapdx
