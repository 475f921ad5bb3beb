/// @file annotation.h
/// @brief Dual-annotation backend: assignment, per-annotator sessions, an
/// append-only label log and the HTTP API the annotation UI talks to.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapdx/diagnostics.h"
#include "gapdx/sampler.h"
#include "gapdx/trace.h"

namespace gapdx {

struct AnnotatorSession {
  std::string annotator_id;
  std::vector<StepKey> assigned;
  std::size_t cursor = 0;
  std::size_t completed = 0;

  bool operator==(const AnnotatorSession&) const = default;
};

/// Every key goes to exactly two distinct annotators, loads differ by at most
/// one, and each annotator's order is shuffled from `seed`. Throws
/// ProtocolError for fewer than two (or repeated) annotators.
std::vector<AnnotatorSession> CreateAssignment(const KeyList& keys, const std::vector<std::string>& annotators,
                                               std::uint64_t seed);

/// Marker drawn over the screenshot, per-mille coordinates.
struct Overlay {
  Point point;
  std::optional<BBox> bbox;
};

/// What an annotator sees. Deliberately carries no prediction, EM or verdict.
struct AnnotationTask {
  StepKey key;
  std::string screenshot_ref;
  std::optional<Overlay> overlay;  // present iff the ground truth is a click
  std::string instruction;
  std::string cot;
  std::string gt_action_text;

  nlohmann::json ToJson() const;
};

AnnotationTask MakeTask(const StepRecord& record);

using Clock = std::function<std::string()>;

/// UTC wall clock, ISO-8601 with seconds.
std::string UtcTimestamp();

/// Sessions plus the JSONL event log backing them. Opening an existing log
/// replays it; the log must have been written for the same assignment.
/// All methods are thread-safe.
class AnnotationStore {
 public:
  AnnotationStore(std::vector<AnnotationTask> tasks, std::vector<AnnotatorSession> sessions, std::uint64_t seed,
                  std::filesystem::path log_path, Clock clock = UtcTimestamp);

  /// Task at the session cursor, or nullopt when the session is done.
  /// Throws NotFound for an unknown session.
  std::optional<AnnotationTask> NextTask(const std::string& session_id) const;

  /// Persists the label and advances the cursor. Returns the new completed
  /// count. Throws NotFound, DuplicateAnnotation (key already labelled by
  /// this annotator) or SequenceError (key is not the current task).
  std::size_t SubmitLabel(const std::string& session_id, const StepKey& key, Label label);

  nlohmann::json Progress() const;
  std::vector<AnnotationRecord> Export() const;
  std::vector<AnnotatorSession> Sessions() const;
  /// Derived state, also written next to the log after every label.
  nlohmann::json Snapshot() const;

  const std::filesystem::path& log_path() const { return log_path_; }
  std::filesystem::path snapshot_path() const;

 private:
  AnnotatorSession& SessionFor(const std::string& session_id);
  const AnnotatorSession& SessionFor(const std::string& session_id) const;
  void Apply(AnnotatorSession& session, const StepKey& key, Label label, const std::string& timestamp);
  nlohmann::json Header() const;
  void Replay();
  nlohmann::json SnapshotLocked() const;

  std::map<StepKey, AnnotationTask> tasks_;
  std::vector<AnnotatorSession> sessions_;
  std::uint64_t seed_;
  std::filesystem::path log_path_;
  Clock clock_;
  std::vector<AnnotationRecord> records_;
  mutable std::mutex mutex_;
};

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Routes one API request; shared by the HTTP server and tests.
///   GET  /sessions/{id}/next
///   POST /sessions/{id}/labels   {"key": {...}, "label": 1 | 0 | "NA"}
///   GET  /progress
///   GET  /export                 AnnotationRecord JSONL
HttpReply HandleApiRequest(AnnotationStore& store, const std::string& method, const std::string& path,
                           const std::string& body);

class AnnotationServer {
 public:
  /// Screenshots under `screenshot_root` are served at /screenshots/.
  AnnotationServer(AnnotationStore& store, std::filesystem::path screenshot_root);
  ~AnnotationServer();

  /// Binds and returns the port (0 picks a free one).
  int Bind(const std::string& host, int port);
  /// Serves until Stop(). Call after Bind.
  void Serve();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gapdx
