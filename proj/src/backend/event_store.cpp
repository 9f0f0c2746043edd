#include "klafate/backend/event_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace klafate::backend {

namespace fs = std::filesystem;

bool is_record_kind(std::string_view kind) {
  return std::find(std::begin(kRecordKinds), std::end(kRecordKinds), kind) != std::end(kRecordKinds);
}

Json to_json(const EventRecord& r) {
  Json j;
  j["seq"] = r.seq;
  j["ts"] = r.ts;
  j["kind"] = r.kind;
  j["payload"] = r.payload;
  return j;
}

EventRecord record_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("seq") || !j.contains("ts") || !j.contains("kind") ||
      !j.contains("payload")) {
    throw ProtocolError("event record needs seq, ts, kind and payload");
  }
  if (!j["seq"].is_number_unsigned() || !j["ts"].is_number() || !j["kind"].is_string()) {
    throw ProtocolError("event record fields have the wrong type");
  }
  EventRecord r;
  r.seq = j["seq"].get<std::uint64_t>();
  r.ts = j["ts"].get<double>();
  r.kind = j["kind"].get<std::string>();
  if (!is_record_kind(r.kind)) throw ProtocolError("unknown record kind '" + r.kind + "'");
  r.payload = j["payload"];
  return r;
}

LogError::LogError(const std::string& file, std::size_t line, const std::string& message)
    : Error(file + ":" + std::to_string(line) + ": " + message) {}

std::vector<EventRecord> parse_log(std::string_view text, const std::string& origin) {
  std::vector<EventRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw LogError(origin, line_no, "not valid JSON");
    EventRecord r;
    try {
      r = record_from_json(j);
    } catch (const ProtocolError& e) {
      throw LogError(origin, line_no, e.what());
    }
    if (r.seq != out.size() + 1) {
      throw LogError(origin, line_no,
                     "sequence gap: expected " + std::to_string(out.size() + 1) + ", found " +
                         std::to_string(r.seq));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EventRecord> read_log(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw NotFound("cannot open event log " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str(), file.string());
}

fs::path default_log_dir() {
  if (const char* env = std::getenv("KLAFATE_LOG_DIR"); env && *env) return fs::path(env);
  return fs::path("klafate-logs");
}

EventStore::EventStore(const fs::path& dir, std::size_t snapshot_every)
    : dir_(dir), snapshot_every_(snapshot_every) {
  fs::create_directories(dir);
  const auto log = dir / kLogFileName;
  if (fs::exists(log)) records_ = read_log(log);
  file_ = std::fopen(log.c_str(), "ab");
  if (!file_) throw ConfigurationError("cannot open event log " + log.string() + " for append");
  if (auto snap = load_snapshot()) last_snapshot_seq_ = snap->seq;
}

EventStore::~EventStore() {
  if (file_) std::fclose(file_);
}

EventRecord EventStore::append(std::string_view kind, Json payload, double ts) {
  if (!is_record_kind(kind)) throw ProtocolError("unknown record kind '" + std::string(kind) + "'");
  std::lock_guard lock(mutex_);
  EventRecord r{records_.size() + 1, ts, std::string(kind), std::move(payload)};
  if (file_) {
    const auto line = dump(to_json(r)) + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
      throw ConfigurationError("event log write failed");
    }
    ::fsync(::fileno(file_));
  }
  records_.push_back(r);
  return r;
}

std::vector<EventRecord> EventStore::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::uint64_t EventStore::last_seq() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::optional<fs::path> EventStore::log_path() const {
  if (!dir_) return std::nullopt;
  return *dir_ / kLogFileName;
}

bool EventStore::maybe_snapshot(const weights::WeightBook& book) {
  {
    std::lock_guard lock(mutex_);
    if (records_.size() - last_snapshot_seq_ < snapshot_every_) return false;
  }
  write_snapshot(book);
  return true;
}

void EventStore::write_snapshot(const weights::WeightBook& book) {
  std::lock_guard lock(mutex_);
  last_snapshot_seq_ = records_.size();
  if (!dir_) return;
  Json j;
  j["seq"] = last_snapshot_seq_;
  j["weights"] = to_json(book);
  const auto target = *dir_ / kSnapshotFileName;
  const auto tmp = *dir_ / (std::string(kSnapshotFileName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << dump(j) << "\n";
  }
  fs::rename(tmp, target);
}

std::optional<WeightSnapshot> EventStore::load_snapshot() const {
  if (!dir_) return std::nullopt;
  const auto path = *dir_ / kSnapshotFileName;
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  Json j = Json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.contains("seq") || !j.contains("weights")) {
    throw LogError(path.string(), 1, "malformed weight snapshot");
  }
  return WeightSnapshot{j["seq"].get<std::uint64_t>(), weight_book_from_json(j["weights"])};
}

// --- replay -------------------------------------------------------------------

Json weight_update_payload(const weights::RuleWeight& w, std::string_view reason) {
  Json j;
  j["fm_id"] = w.rule_id;
  j["w_r"] = w.current;
  j["w_ra"] = w.accumulated;
  j["criteria"] = to_json(w.criteria);
  j["reason"] = reason;
  j["ts"] = w.history.empty() ? 0.0 : w.history.back().timestamp;
  return j;
}

weights::RuleWeight rule_weight_from_json(const Json& j) {
  weights::RuleWeight w;
  w.rule_id = j.at("fm_id").get<std::string>();
  w.current = j.at("w_r").get<double>();
  w.accumulated = j.at("w_ra").get<double>();
  w.criteria = criteria_from_json(j.at("criteria"));
  for (const auto& h : j.at("history")) {
    w.history.push_back({h.at("ts").get<double>(), h.at("w_r").get<double>()});
  }
  return w;
}

weights::WeightBook weight_book_from_json(const Json& j) {
  weights::WeightBook book;
  for (const auto& [id, w] : j.items()) book.set(rule_weight_from_json(w));
  return book;
}

weights::WeightBook replay_weights(const std::vector<EventRecord>& records,
                                   const std::optional<WeightSnapshot>& from,
                                   std::optional<std::size_t> window) {
  weights::WeightBook book = from ? from->book : weights::WeightBook{};
  const std::uint64_t skip = from ? from->seq : 0;
  for (const auto& r : records) {
    if (r.seq <= skip || r.kind != "weight_update") continue;
    const auto& p = r.payload;
    const auto id = p.at("fm_id").get<std::string>();
    const auto reason = p.at("reason").get<std::string>();
    const auto criteria = criteria_from_json(p.at("criteria"));
    const double ts = p.at("ts").get<double>();
    weights::RuleWeight w;
    if (reason == "prior") {
      if (!criteria.panel) throw ReplayError("prior weight without panel criterion");
      w = weights::prior_weight(id, *criteria.panel, ts);
    } else {
      if (!book.contains(id)) {
        throw ReplayError("seq " + std::to_string(r.seq) + ": update for unknown rule " + id);
      }
      w = weights::accumulate(book.at(id), weights::rule_weight(criteria), criteria, ts, window);
    }
    if (std::fabs(w.current - p.at("w_r").get<double>()) > 1e-12) {
      throw ReplayError("seq " + std::to_string(r.seq) + ": recomputed w_r differs from log");
    }
    if (!window && std::fabs(w.accumulated - p.at("w_ra").get<double>()) > 1e-12) {
      throw ReplayError("seq " + std::to_string(r.seq) + ": recomputed w_ra differs from log");
    }
    book.set(std::move(w));
  }
  return book;
}

} // namespace klafate::backend
