#pragma once

// Append-only NDJSON event log with periodic weight snapshots.

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "klafate/backend/protocol.hpp"

namespace klafate::backend {

inline constexpr std::string_view kRecordKinds[] = {
    "assessment", "ack",        "next",          "solved",        "rating",
    "report",     "weight_update", "kpi_sample", "recipe_change", "fault_injected"};

bool is_record_kind(std::string_view kind);

struct EventRecord {
  std::uint64_t seq = 0;
  double ts = 0.0;
  std::string kind;
  Json payload;

  bool operator==(const EventRecord&) const = default;
};

Json to_json(const EventRecord& r);
EventRecord record_from_json(const Json& j);

class LogError : public Error {
public:
  LogError(const std::string& file, std::size_t line, const std::string& message);
};

// Parses a log, checking that sequence numbers start at 1 and have no gaps.
std::vector<EventRecord> read_log(const std::filesystem::path& file);
std::vector<EventRecord> parse_log(std::string_view text, const std::string& origin = "<memory>");

inline constexpr std::string_view kLogFileName = "events.ndjson";
inline constexpr std::string_view kSnapshotFileName = "weights.snapshot.json";
inline constexpr std::size_t kDefaultSnapshotEvery = 100;

// Directory from KLAFATE_LOG_DIR, otherwise ./klafate-logs.
std::filesystem::path default_log_dir();

struct WeightSnapshot {
  std::uint64_t seq = 0;
  weights::WeightBook book;
};

class EventStore {
public:
  // In-memory store (nothing written to disk).
  EventStore() = default;
  // Opens or creates `dir`, resuming the sequence of an existing log.
  explicit EventStore(const std::filesystem::path& dir,
                      std::size_t snapshot_every = kDefaultSnapshotEvery);
  ~EventStore();
  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  EventRecord append(std::string_view kind, Json payload, double ts);

  std::vector<EventRecord> records() const;
  std::uint64_t last_seq() const;
  std::optional<std::filesystem::path> log_path() const;

  // Writes a snapshot when `snapshot_every` events have passed since the last.
  bool maybe_snapshot(const weights::WeightBook& book);
  void write_snapshot(const weights::WeightBook& book);
  std::optional<WeightSnapshot> load_snapshot() const;

private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> dir_;
  std::FILE* file_ = nullptr;
  std::vector<EventRecord> records_;
  std::size_t snapshot_every_ = kDefaultSnapshotEvery;
  std::uint64_t last_snapshot_seq_ = 0;
};

// --- weight replay ----------------------------------------------------------

class ReplayError : public Error {
public:
  using Error::Error;
};

Json weight_update_payload(const weights::RuleWeight& w, std::string_view reason);

weights::RuleWeight rule_weight_from_json(const Json& j);
weights::WeightBook weight_book_from_json(const Json& j);

// Rebuilds weights from weight_update records, optionally starting from a
// snapshot (records at or before its seq are skipped). Recomputed values
// must match the logged ones.
weights::WeightBook replay_weights(const std::vector<EventRecord>& records,
                                   const std::optional<WeightSnapshot>& from = std::nullopt,
                                   std::optional<std::size_t> window = std::nullopt);

} // namespace klafate::backend
