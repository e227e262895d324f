#pragma once

// Coding service state: corpora, filtered sets, coding sessions and the
// annotations coders submit.
//
// Durability: every mutation is one JSON line appended to <data>/events.jsonl
// and flushed to disk before it is acknowledged. Every `snapshot_every`
// events the full state is written to <data>/snapshot.json (tmp + rename).
// Startup loads the snapshot, then replays log events with a larger sequence
// number. A torn final log line, left by a crash mid-write, is truncated.
//
// Leases are in-memory only; after a restart every uncompleted item is free.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/filtering.hpp"
#include "engage/reliability.hpp"

namespace engage {

using Json = nlohmann::json;

inline constexpr std::int64_t kDefaultLeaseMs = 15 * 60 * 1000;

struct AssignmentPolicy {
  enum class Kind { Single, Double };
  Kind kind = Kind::Single;
  int reliability_percent = 100;  // share of items every coder receives under Double

  friend bool operator==(const AssignmentPolicy&, const AssignmentPolicy&) = default;
};

struct ServiceOptions {
  std::filesystem::path data_dir;
  std::int64_t lease_ms = kDefaultLeaseMs;
  std::size_t snapshot_every = 256;
  std::size_t default_context = 2;
  std::function<std::int64_t()> clock;  // milliseconds; system clock when empty
};

struct CodingItem {
  std::string id;
  std::string transcript_id;
  std::size_t focus = 0;
  std::vector<std::string> matched;
};

namespace detail {

struct Lease {
  std::string coder;
  std::int64_t expires = 0;
};

struct SessionState {
  std::string id;
  std::string corpus_id;
  std::string list_name;
  std::string config_hash;
  std::vector<std::string> roster;
  AssignmentPolicy policy;
  std::size_t context_window = 2;
  bool closed = false;

  std::vector<CodingItem> items;
  std::map<std::string, std::size_t> item_index;
  std::map<std::string, std::vector<std::size_t>> queues;  // key: coder, or "" for the shared queue
  std::map<std::pair<std::string, std::size_t>, Lease> leases;
  std::map<std::pair<std::string, std::size_t>, std::size_t> completions;  // (coder, item) -> annotation index
  std::map<std::size_t, std::string> completed_by;                          // single policy: item -> coder
  std::vector<MessageAnnotation> annotations;
  std::vector<std::size_t> annotation_item;
  std::optional<Json> adjudication;  // last adjudication request, replayed on load
  std::vector<MessageAnnotation> adjudicated;

  bool shared() const { return policy.kind == AssignmentPolicy::Kind::Single; }
  std::string queue_key(const std::string& coder) const { return shared() ? std::string() : coder; }
  bool in_roster(const std::string& coder) const {
    return std::find(roster.begin(), roster.end(), coder) != roster.end();
  }
};

inline std::string policy_name(const AssignmentPolicy& p) {
  return p.kind == AssignmentPolicy::Kind::Single ? "single" : "double";
}

inline Json policy_to_json(const AssignmentPolicy& p) {
  return {{"kind", policy_name(p)}, {"reliability_percent", p.reliability_percent}};
}

inline AssignmentPolicy policy_from_json(const Json& j) {
  AssignmentPolicy p;
  std::string kind = "single";
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else if (j.is_object()) {
    kind = j.value("kind", std::string("single"));
    p.reliability_percent = j.value("reliability_percent", 100);
  } else if (!j.is_null()) {
    throw Error(ErrorCode::BadRequest, "policy must be a string or an object");
  }
  if (kind == "single") p.kind = AssignmentPolicy::Kind::Single;
  else if (kind == "double") p.kind = AssignmentPolicy::Kind::Double;
  else throw Error(ErrorCode::BadRequest, "unknown assignment policy '" + kind + "'");
  if (p.reliability_percent < 0 || p.reliability_percent > 100)
    throw Error(ErrorCode::BadRequest, "reliability_percent must lie in [0, 100]");
  return p;
}

inline std::string seq_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06zu", prefix, n);
  return buf;
}

/// Line-oriented append-only file with a durable flush per record.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path) : path_(std::move(path)) {}

  /// Reads every complete record. A final line that does not parse and lacks
  /// its newline is a torn write and is cut off; any other bad line is fatal.
  std::vector<Json> load() {
    std::vector<Json> out;
    if (!std::filesystem::exists(path_)) return out;
    std::ifstream in(path_, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      const bool complete = nl != std::string::npos;
      const std::string line = content.substr(pos, complete ? nl - pos : std::string::npos);
      ++line_no;
      try {
        if (!line.empty()) out.push_back(Json::parse(line));
      } catch (const Json::parse_error&) {
        if (complete)
          throw Error(ErrorCode::MalformedRecord, "corrupt event log record",
                      {{"path", path_.string()}, {"line", line_no}});
        std::filesystem::resize_file(path_, pos);
        break;
      }
      if (!complete) {
        // Parsed but unterminated: keep it and restore the newline.
        std::ofstream fix(path_, std::ios::binary | std::ios::app);
        fix << '\n';
        break;
      }
      pos = nl + 1;
    }
    return out;
  }

  void append(const Json& event) {
    const std::string line = event.dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot open event log", {{"path", path_.string()}});
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd, line.data() + written, line.size() - written);
      if (n <= 0) {
        ::close(fd);
        throw Error(ErrorCode::IoFailure, "event log write failed", {{"path", path_.string()}});
      }
      written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
  }

 private:
  std::filesystem::path path_;
};

}  // namespace detail

class CodingService {
 public:
  explicit CodingService(ServiceOptions options) : options_(std::move(options)), log_(events_path()) {
    if (options_.data_dir.empty()) throw Error(ErrorCode::InvalidArgument, "data directory is required");
    std::error_code ec;
    std::filesystem::create_directories(options_.data_dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create data directory", {{"path", options_.data_dir.string()}});
    if (!options_.clock)
      options_.clock = [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
      };
    recover();
  }

  std::uint64_t last_sequence() const {
    std::shared_lock lock(mutex_);
    return seq_;
  }

  // ---- corpora and filtered sets ----

  /// Body: a corpus bundle, or {"id", "corpus": bundle, "filtered": [sets]}.
  Json add_corpus(const Json& body) {
    std::unique_lock lock(mutex_);
    const bool wrapped = body.is_object() && body.contains("corpus");
    const Json& bundle = wrapped ? body["corpus"] : body;
    Corpus corpus = corpus_from_json(bundle);
    validate_registry(corpus);
    std::string id = wrapped ? body.value("id", std::string()) : std::string();
    if (id.empty()) id = detail::seq_id("corpus-", corpora_.size() + 1);
    if (corpora_.count(id)) throw Error(ErrorCode::BadRequest, "corpus id already exists", {{"corpus_id", id}});
    std::vector<FilteredSet> sets;
    if (wrapped && body.contains("filtered"))
      for (const auto& f : body["filtered"]) sets.push_back(checked_filtered(corpus, f));
    commit({{"type", "corpus"}, {"corpus_id", id}, {"corpus", bundle}});
    for (const auto& s : sets) commit({{"type", "filtered"}, {"corpus_id", id}, {"set", filtered_set_to_json(s)}});
    return corpus_summary(id);
  }

  Json add_filtered(const std::string& corpus_id, const Json& set_json) {
    std::unique_lock lock(mutex_);
    const auto& corpus = corpus_ref(corpus_id);
    const FilteredSet set = checked_filtered(corpus, set_json);
    commit({{"type", "filtered"}, {"corpus_id", corpus_id}, {"set", filtered_set_to_json(set)}});
    return corpus_summary(corpus_id);
  }

  Json list_corpora() const {
    std::shared_lock lock(mutex_);
    Json out = Json::array();
    for (const auto& [id, c] : corpora_) out.push_back(corpus_summary(id));
    return out;
  }

  // ---- sessions ----

  /// Body: {corpus_id, filtered: {list, config_hash?}, roster, policy, context_window?}.
  Json create_session(const Json& body) {
    std::unique_lock lock(mutex_);
    if (!body.is_object()) throw Error(ErrorCode::BadRequest, "session request must be an object");
    const std::string corpus_id = body.value("corpus_id", std::string());
    corpus_ref(corpus_id);
    const Json fref = body.value("filtered", Json::object());
    std::string list = fref.is_object() ? fref.value("list", std::string()) : std::string();
    std::string hash = fref.is_object() ? fref.value("config_hash", std::string()) : std::string();
    const FilteredSet& set = filtered_ref(corpus_id, list, hash);
    std::vector<std::string> roster;
    try {
      roster = body.value("roster", std::vector<std::string>{});
    } catch (const Json::exception&) {
      throw Error(ErrorCode::BadRequest, "roster must be a list of coder ids");
    }
    const auto policy = detail::policy_from_json(body.value("policy", Json("single")));
    if (roster.empty()) throw Error(ErrorCode::EmptyRoster, "session roster is empty");
    if (std::set<std::string>(roster.begin(), roster.end()).size() != roster.size())
      throw Error(ErrorCode::BadRequest, "roster lists a coder twice");
    if (policy.kind == AssignmentPolicy::Kind::Double && roster.size() < 2)
      throw Error(ErrorCode::DoubleNeedsTwo, "double coding needs at least two coders",
                  {{"roster_size", roster.size()}});
    const std::size_t context = body.value("context_window", options_.default_context);
    const std::string id = detail::seq_id("session-", sessions_.size() + 1);
    commit({{"type", "session"},
            {"session_id", id},
            {"corpus_id", corpus_id},
            {"list", set.list_name},
            {"config_hash", set.config_hash},
            {"roster", roster},
            {"policy", detail::policy_to_json(policy)},
            {"context_window", context}});
    return session_json(sessions_.at(id));
  }

  Json get_session(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return session_json(session_ref(id));
  }

  /// The lowest-ordered item of the coder's queue that is neither completed
  /// nor leased to someone else; it is (re)leased to the coder. {"done": true}
  /// when nothing is left.
  Json next_item(const std::string& session_id, const std::string& coder) {
    std::unique_lock lock(mutex_);
    auto& s = session_mut(session_id);
    require_coder(s, coder);
    if (s.closed) throw Error(ErrorCode::SessionClosed, "session is closed", {{"session_id", s.id}});
    const std::string key = s.queue_key(coder);
    const auto now = options_.clock();
    for (std::size_t idx : s.queues[key]) {
      if (is_completed(s, coder, idx)) continue;
      auto it = s.leases.find({key, idx});
      if (it != s.leases.end() && it->second.coder != coder && it->second.expires > now) continue;
      s.leases[{key, idx}] = {coder, now + options_.lease_ms};
      Json item = item_json(s, idx, s.context_window);
      item["lease"] = {{"coder", coder}, {"expires_at", now + options_.lease_ms}};
      return {{"done", false}, {"item", std::move(item)}};
    }
    return {{"done", true}};
  }

  Json get_item(const std::string& session_id, const std::string& item_id, std::optional<std::size_t> context) const {
    std::shared_lock lock(mutex_);
    const auto& s = session_ref(session_id);
    return item_json(s, item_ref(s, item_id), context.value_or(s.context_window));
  }

  /// Body: {coder, item_id, decision, frame?, appeal?, start?, end?, note?}.
  /// The span defaults to the focus segment.
  Json submit_annotation(const std::string& session_id, const Json& body) {
    std::unique_lock lock(mutex_);
    if (!body.is_object()) throw Error(ErrorCode::BadRequest, "annotation request must be an object");
    auto& s = session_mut(session_id);
    const std::string coder = body.value("coder", std::string());
    require_coder(s, coder);
    if (s.closed) throw Error(ErrorCode::SessionClosed, "session is closed", {{"session_id", s.id}});
    const std::size_t idx = item_ref(s, body.value("item_id", std::string()));
    const auto& queue = s.queues[s.queue_key(coder)];
    if (std::find(queue.begin(), queue.end(), idx) == queue.end())
      throw Error(ErrorCode::UnknownItem, "item is not assigned to this coder",
                  {{"item_id", s.items[idx].id}, {"coder", coder}});
    const CodingItem& item = s.items[idx];

    Json wire = body;
    wire["coder_id"] = coder;
    wire["transcript_id"] = item.transcript_id;
    if (body.contains("span") && body["span"].is_object()) {
      wire["start"] = body["span"].value("start", Json());
      wire["end"] = body["span"].value("end", Json());
    }
    if (!wire.contains("start")) wire["start"] = item.focus;
    if (!wire.contains("end")) wire["end"] = item.focus;
    wire.erase("created_at");
    wire.erase("id");
    auto decoded = decode_annotation(wire);
    if (!decoded.report.ok())
      throw Error(ErrorCode::ValidationFailed, "annotation failed validation",
                  {{"violations", decoded.report.to_json()}});
    MessageAnnotation a = std::move(*decoded.annotation);
    const auto report = validate_annotation(a, *corpora_.at(s.corpus_id).find(item.transcript_id));
    if (!report.ok())
      throw Error(ErrorCode::ValidationFailed, "annotation failed validation", {{"violations", report.to_json()}});

    if (auto done = s.completions.find({coder, idx}); done != s.completions.end()) {
      const auto& prior = s.annotations[done->second];
      if (prior.decision == a.decision && prior.span == a.span && prior.note == a.note)
        return ack(s, done->second, true);
      throw Error(ErrorCode::DuplicateSubmission, "item already coded with a different decision",
                  {{"annotation_id", prior.id}, {"item_id", item.id}});
    }
    const std::string key = s.queue_key(coder);
    if (s.shared()) {
      if (auto by = s.completed_by.find(idx); by != s.completed_by.end())
        throw Error(ErrorCode::LeaseLost, "item was completed by another coder",
                    {{"item_id", item.id}, {"completed_by", by->second}});
    }
    if (auto l = s.leases.find({key, idx});
        l != s.leases.end() && l->second.coder != coder && l->second.expires > options_.clock())
      throw Error(ErrorCode::LeaseLost, "item is leased to another coder",
                  {{"item_id", item.id}, {"leased_to", l->second.coder}});

    a.id = detail::seq_id("a", s.annotations.size() + 1);
    commit({{"type", "annotation"}, {"session_id", s.id}, {"item_id", item.id}, {"annotation", annotation_to_json(a)}});
    return ack(s, s.completions.at({coder, idx}), false);
  }

  Json progress(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    const auto& s = session_ref(session_id);
    const auto now = options_.clock();
    Json coders = Json::object();
    for (const auto& coder : s.roster) {
      const std::string key = s.queue_key(coder);
      const auto q = s.queues.find(key);
      std::size_t total = q == s.queues.end() ? 0 : q->second.size();
      std::size_t completed = 0;
      std::size_t leased = 0;
      if (q != s.queues.end())
        for (std::size_t idx : q->second) {
          if (s.completions.count({coder, idx})) ++completed;
          const auto l = s.leases.find({key, idx});
          if (!s.closed && l != s.leases.end() && l->second.coder == coder && l->second.expires > now &&
              !is_completed(s, coder, idx))
            ++leased;
        }
      coders[coder] = {{"total", total}, {"completed", completed}, {"leased", leased}};
    }
    std::set<std::size_t> any_done;
    for (const auto& [k, v] : s.completions) any_done.insert(k.second);
    Json out = {{"session_id", s.id},
                {"status", s.closed ? "closed" : "open"},
                {"items_total", s.items.size()},
                {"items_completed", any_done.size()},
                {"annotations", s.annotations.size()},
                {"coders", std::move(coders)},
                {"agreement", nullptr}};
    if (!s.shared()) {
      try {
        out["agreement"] = to_json(agreement_report(aligned_pairs(s)));
      } catch (const Error&) {
        // no shared units yet
      }
    }
    return out;
  }

  /// Reliability over the items both of the first two roster coders have
  /// completed.
  Json live_agreement(const std::string& session_id, double threshold = kDefaultOverlapThreshold) const {
    std::shared_lock lock(mutex_);
    const auto& s = session_ref(session_id);
    if (s.shared()) throw Error(ErrorCode::NotDoubleCoded, "session is not double coded", {{"session_id", s.id}});
    Json report = to_json(agreement_report(aligned_pairs(s, threshold)));
    report["coders"] = {s.roster[0], s.roster[1]};
    report["shared_items"] = shared_items(s).size();
    return report;
  }

  /// All annotations in submission order, or the adjudicated set.
  std::vector<MessageAnnotation> annotations(const std::string& session_id, bool adjudicated = false) const {
    std::shared_lock lock(mutex_);
    const auto& s = session_ref(session_id);
    if (!adjudicated) return s.annotations;
    if (!s.adjudication) throw Error(ErrorCode::BadRequest, "session has not been adjudicated", {{"session_id", s.id}});
    return s.adjudicated;
  }

  Json close_session(const std::string& session_id) {
    std::unique_lock lock(mutex_);
    const auto& s = session_ref(session_id);
    if (!s.closed) commit({{"type", "close"}, {"session_id", s.id}});
    return session_json(s);
  }

  /// Merges coders into one set, one annotation per item: an override if
  /// given, else the primary coder's annotation, else the first roster coder
  /// who completed the item. A later pick with exactly the span of an earlier
  /// one is dropped. Body: {primary?, overrides?: [{item_id, decision, ...}]}.
  Json adjudicate(const std::string& session_id, const Json& body) {
    std::unique_lock lock(mutex_);
    const auto& s = session_ref(session_id);
    Json request = body.is_object() ? body : Json::object();
    if (!request.contains("primary")) request["primary"] = s.roster.front();
    if (!request.contains("overrides")) request["overrides"] = Json::array();
    compute_adjudication(s, request);  // validate before logging
    commit({{"type", "adjudication"}, {"session_id", s.id}, {"request", request}});
    Json out = Json::array();
    for (const auto& a : s.adjudicated) out.push_back(annotation_to_json(a));
    return {{"session_id", s.id}, {"primary", request["primary"]}, {"annotations", std::move(out)}};
  }

  /// Writes a snapshot now.
  void compact() {
    std::unique_lock lock(mutex_);
    write_snapshot();
  }

 private:
  std::filesystem::path events_path() const { return options_.data_dir / "events.jsonl"; }
  std::filesystem::path snapshot_path() const { return options_.data_dir / "snapshot.json"; }

  // ---- persistence ----

  void recover() {
    std::uint64_t from = 0;
    if (std::filesystem::exists(snapshot_path())) {
      std::ifstream in(snapshot_path(), std::ios::binary);
      Json snap;
      try {
        snap = Json::parse(in);
      } catch (const Json::exception&) {
        throw Error(ErrorCode::MalformedRecord, "corrupt snapshot", {{"path", snapshot_path().string()}});
      }
      from = snap.at("last_seq").get<std::uint64_t>();
      for (const auto& e : snap.at("events")) apply(e);
      seq_ = from;
    }
    for (const auto& e : log_.load()) {
      const auto n = e.at("seq").get<std::uint64_t>();
      if (n <= from) continue;
      if (n != seq_ + 1) throw Error(ErrorCode::MalformedRecord, "event log has a sequence gap", {{"seq", n}});
      apply(e);
      seq_ = n;
    }
    since_snapshot_ = 0;
  }

  void commit(Json event) {
    event["seq"] = seq_ + 1;
    apply(event);  // throws before anything is written if the event is bad
    log_.append(event);
    ++seq_;
    if (++since_snapshot_ >= options_.snapshot_every) write_snapshot();
  }

  /// The snapshot is the state re-expressed as the minimal event list that
  /// rebuilds it; leases are not part of it.
  void write_snapshot() {
    Json events = Json::array();
    for (const auto& [id, c] : corpora_) {
      events.push_back({{"type", "corpus"}, {"corpus_id", id}, {"corpus", corpus_to_json(c)}});
      for (const auto& f : filtered_[id])
        events.push_back({{"type", "filtered"}, {"corpus_id", id}, {"set", filtered_set_to_json(f)}});
    }
    for (const auto& id : session_order_) {
      const auto& s = sessions_.at(id);
      events.push_back({{"type", "session"},
                        {"session_id", s.id},
                        {"corpus_id", s.corpus_id},
                        {"list", s.list_name},
                        {"config_hash", s.config_hash},
                        {"roster", s.roster},
                        {"policy", detail::policy_to_json(s.policy)},
                        {"context_window", s.context_window}});
      for (std::size_t i = 0; i < s.annotations.size(); ++i)
        events.push_back({{"type", "annotation"},
                          {"session_id", s.id},
                          {"item_id", s.items[s.annotation_item[i]].id},
                          {"annotation", annotation_to_json(s.annotations[i])}});
      if (s.adjudication) events.push_back({{"type", "adjudication"}, {"session_id", s.id}, {"request", *s.adjudication}});
      if (s.closed) events.push_back({{"type", "close"}, {"session_id", s.id}});
    }
    const Json snap = {{"last_seq", seq_}, {"events", std::move(events)}};
    const auto tmp = snapshot_path().string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << snap.dump() << '\n';
      out.flush();
      if (!out) throw Error(ErrorCode::IoFailure, "snapshot write failed", {{"path", tmp}});
    }
    std::filesystem::rename(tmp, snapshot_path());
    since_snapshot_ = 0;
  }

  void apply(const Json& e) {
    const std::string type = e.at("type").get<std::string>();
    if (type == "corpus") {
      Corpus c = corpus_from_json(e.at("corpus"));
      corpora_.emplace(e.at("corpus_id").get<std::string>(), std::move(c));
    } else if (type == "filtered") {
      auto set = filtered_set_from_json(e.at("set"));
      auto& sets = filtered_[e.at("corpus_id").get<std::string>()];
      std::erase_if(sets, [&](const FilteredSet& f) {
        return f.list_name == set.list_name && f.config_hash == set.config_hash;
      });
      sets.push_back(std::move(set));
    } else if (type == "session") {
      apply_session(e);
    } else if (type == "annotation") {
      auto& s = session_mut(e.at("session_id").get<std::string>());
      const std::size_t idx = item_ref(s, e.at("item_id").get<std::string>());
      auto decoded = decode_annotation(e.at("annotation"));
      if (!decoded.annotation) throw Error(ErrorCode::MalformedRecord, "bad annotation event");
      auto a = std::move(*decoded.annotation);
      if (a.created_at == 0) a.created_at = e.at("seq").get<std::uint64_t>();
      const std::string coder = a.coder_id;
      s.completions[{coder, idx}] = s.annotations.size();
      if (s.shared()) s.completed_by.emplace(idx, coder);
      s.leases.erase({s.queue_key(coder), idx});
      s.annotations.push_back(std::move(a));
      s.annotation_item.push_back(idx);
    } else if (type == "close") {
      session_mut(e.at("session_id").get<std::string>()).closed = true;
    } else if (type == "adjudication") {
      auto& s = session_mut(e.at("session_id").get<std::string>());
      s.adjudicated = compute_adjudication(s, e.at("request"));
      s.adjudication = e.at("request");
    } else {
      throw Error(ErrorCode::MalformedRecord, "unknown event type '" + type + "'");
    }
  }

  void apply_session(const Json& e) {
    detail::SessionState s;
    s.id = e.at("session_id").get<std::string>();
    s.corpus_id = e.at("corpus_id").get<std::string>();
    s.list_name = e.at("list").get<std::string>();
    s.config_hash = e.at("config_hash").get<std::string>();
    s.roster = e.at("roster").get<std::vector<std::string>>();
    s.policy = detail::policy_from_json(e.at("policy"));
    s.context_window = e.at("context_window").get<std::size_t>();
    const Corpus& corpus = corpus_ref(s.corpus_id);
    const FilteredSet& set = filtered_ref(s.corpus_id, s.list_name, s.config_hash);

    // Corpus transcript order, then segment index.
    for (const auto& t : corpus.transcripts) {
      const FilteredTranscript* f = set.find(t.id);
      if (!f) continue;
      for (std::size_t i : f->retained) {
        CodingItem item;
        item.id = detail::seq_id("item-", s.items.size() + 1);
        item.transcript_id = t.id;
        item.focus = i;
        if (auto m = f->matches.find(i); m != f->matches.end()) item.matched.assign(m->second.begin(), m->second.end());
        s.item_index[item.id] = s.items.size();
        s.items.push_back(std::move(item));
      }
    }
    if (s.shared()) {
      auto& q = s.queues[""];
      for (std::size_t i = 0; i < s.items.size(); ++i) q.push_back(i);
    } else {
      // Reliability slice spread evenly over the item order; every coder gets
      // it. The remaining items are dealt round-robin.
      for (const auto& c : s.roster) s.queues[c];
      const auto p = static_cast<std::size_t>(s.policy.reliability_percent);
      std::size_t dealt = 0;
      for (std::size_t i = 0; i < s.items.size(); ++i) {
        if ((i + 1) * p / 100 > i * p / 100) {
          for (const auto& c : s.roster) s.queues[c].push_back(i);
        } else {
          s.queues[s.roster[dealt++ % s.roster.size()]].push_back(i);
        }
      }
    }
    session_order_.push_back(s.id);
    sessions_.emplace(s.id, std::move(s));
  }

  std::vector<MessageAnnotation> compute_adjudication(const detail::SessionState& s, const Json& request) const {
    const std::string primary = request.value("primary", s.roster.front());
    require_coder(s, primary);
    std::map<std::size_t, MessageAnnotation> overrides;
    if (request.contains("overrides")) {
      if (!request["overrides"].is_array()) throw Error(ErrorCode::BadRequest, "overrides must be a list");
      for (const auto& o : request["overrides"]) {
        const std::size_t idx = item_ref(s, o.value("item_id", std::string()));
        const auto& item = s.items[idx];
        Json wire = o;
        wire["coder_id"] = "adjudicator";
        wire["transcript_id"] = item.transcript_id;
        if (!wire.contains("start")) wire["start"] = item.focus;
        if (!wire.contains("end")) wire["end"] = item.focus;
        wire.erase("created_at");
        auto decoded = decode_annotation(wire);
        if (!decoded.report.ok())
          throw Error(ErrorCode::ValidationFailed, "override failed validation",
                      {{"item_id", item.id}, {"violations", decoded.report.to_json()}});
        auto a = std::move(*decoded.annotation);
        const auto report = validate_annotation(a, *corpora_.at(s.corpus_id).find(item.transcript_id));
        if (!report.ok())
          throw Error(ErrorCode::ValidationFailed, "override failed validation",
                      {{"item_id", item.id}, {"violations", report.to_json()}});
        a.id = "adj-" + item.id;
        overrides[idx] = std::move(a);
      }
    }
    std::vector<MessageAnnotation> out;
    std::set<std::tuple<std::string, std::size_t, std::size_t>> spans;
    const auto take = [&](const MessageAnnotation& a) {
      if (spans.emplace(a.transcript_id, a.span.start, a.span.end).second) out.push_back(a);
    };
    for (std::size_t idx = 0; idx < s.items.size(); ++idx) {
      if (auto o = overrides.find(idx); o != overrides.end()) {
        take(o->second);
        continue;
      }
      const MessageAnnotation* pick = nullptr;
      if (auto p = s.completions.find({primary, idx}); p != s.completions.end()) pick = &s.annotations[p->second];
      for (const auto& c : s.roster) {
        if (pick) break;
        if (auto p = s.completions.find({c, idx}); p != s.completions.end()) pick = &s.annotations[p->second];
      }
      if (pick) take(*pick);
    }
    return out;
  }

  // ---- lookups ----

  const Corpus& corpus_ref(const std::string& id) const {
    const auto it = corpora_.find(id);
    if (it == corpora_.end()) throw Error(ErrorCode::UnknownCorpus, "unknown corpus", {{"corpus_id", id}});
    return it->second;
  }

  /// An empty config hash matches when the list name alone is unambiguous.
  const FilteredSet& filtered_ref(const std::string& corpus_id, const std::string& list, const std::string& hash) const {
    const FilteredSet* found = nullptr;
    std::size_t hits = 0;
    if (auto it = filtered_.find(corpus_id); it != filtered_.end())
      for (const auto& f : it->second)
        if (f.list_name == list && (hash.empty() || f.config_hash == hash)) {
          found = &f;
          ++hits;
        }
    if (hits != 1)
      throw Error(ErrorCode::UnknownFilteredSet, hits ? "filtered set reference is ambiguous" : "unknown filtered set",
                  {{"corpus_id", corpus_id}, {"list", list}, {"config_hash", hash}});
    return *found;
  }

  FilteredSet checked_filtered(const Corpus& corpus, const Json& j) const {
    FilteredSet set = filtered_set_from_json(j);
    for (const auto& f : set.transcripts) {
      const Transcript* t = corpus.find(f.transcript_id);
      if (!t)
        throw Error(ErrorCode::BadRequest, "filtered set references an unknown transcript",
                    {{"transcript_id", f.transcript_id}});
      if (!f.retained.empty() && *f.retained.rbegin() >= t->segments.size())
        throw Error(ErrorCode::BadRequest, "filtered set references a segment out of range",
                    {{"transcript_id", f.transcript_id}});
    }
    return set;
  }

  const detail::SessionState& session_ref(const std::string& id) const {
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session", {{"session_id", id}});
    return it->second;
  }
  detail::SessionState& session_mut(const std::string& id) {
    return const_cast<detail::SessionState&>(session_ref(id));
  }

  static std::size_t item_ref(const detail::SessionState& s, const std::string& item_id) {
    const auto it = s.item_index.find(item_id);
    if (it == s.item_index.end())
      throw Error(ErrorCode::UnknownItem, "unknown item", {{"session_id", s.id}, {"item_id", item_id}});
    return it->second;
  }

  static void require_coder(const detail::SessionState& s, const std::string& coder) {
    if (!s.in_roster(coder))
      throw Error(ErrorCode::UnknownCoder, "coder is not on the session roster", {{"session_id", s.id}, {"coder", coder}});
  }

  static bool is_completed(const detail::SessionState& s, const std::string& coder, std::size_t idx) {
    return s.shared() ? s.completed_by.count(idx) > 0 : s.completions.count({coder, idx}) > 0;
  }

  static std::vector<std::size_t> shared_items(const detail::SessionState& s) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.items.size(); ++i)
      if (s.completions.count({s.roster[0], i}) && s.completions.count({s.roster[1], i})) out.push_back(i);
    return out;
  }

  AlignedPairs aligned_pairs(const detail::SessionState& s, double threshold = kDefaultOverlapThreshold) const {
    std::vector<MessageAnnotation> a;
    std::vector<MessageAnnotation> b;
    for (std::size_t i : shared_items(s)) {
      a.push_back(s.annotations[s.completions.at({s.roster[0], i})]);
      b.push_back(s.annotations[s.completions.at({s.roster[1], i})]);
    }
    return align_annotations(a, b, threshold, &corpora_.at(s.corpus_id));
  }

  // ---- views ----

  Json corpus_summary(const std::string& id) const {
    const auto& c = corpora_.at(id);
    Json sets = Json::array();
    if (auto it = filtered_.find(id); it != filtered_.end())
      for (const auto& f : it->second) {
        std::size_t retained = 0;
        for (const auto& t : f.transcripts) retained += t.retained.size();
        sets.push_back({{"list", f.list_name}, {"config_hash", f.config_hash}, {"retained_segments", retained}});
      }
    return {{"corpus_id", id}, {"transcripts", c.transcripts.size()}, {"filtered", std::move(sets)}};
  }

  static Json session_json(const detail::SessionState& s) {
    Json queues = Json::object();
    for (const auto& [k, q] : s.queues) queues[k.empty() ? "*" : k] = q.size();
    return {{"session_id", s.id},
            {"corpus_id", s.corpus_id},
            {"filtered", {{"list", s.list_name}, {"config_hash", s.config_hash}}},
            {"roster", s.roster},
            {"policy", detail::policy_to_json(s.policy)},
            {"context_window", s.context_window},
            {"status", s.closed ? "closed" : "open"},
            {"items", s.items.size()},
            {"queues", std::move(queues)}};
  }

  Json item_json(const detail::SessionState& s, std::size_t idx, std::size_t context) const {
    const auto& item = s.items[idx];
    const Transcript& t = *corpora_.at(s.corpus_id).find(item.transcript_id);
    const std::size_t lo = item.focus >= context ? item.focus - context : 0;
    const std::size_t hi = std::min(t.segments.size() - 1, item.focus + context);
    Json segs = Json::array();
    for (std::size_t i = lo; i <= hi; ++i)
      segs.push_back({{"index", i},
                      {"segment_id", t.segments[i].id},
                      {"text", t.segments[i].text},
                      {"focus", i == item.focus}});
    return {{"item_id", item.id},
            {"session_id", s.id},
            {"transcript_id", item.transcript_id},
            {"focus", item.focus},
            {"segment_count", t.segments.size()},
            {"context_window", context},
            {"matched_keywords", item.matched},
            {"segments", std::move(segs)}};
  }

  static Json ack(const detail::SessionState& s, std::size_t annotation, bool replayed) {
    const auto& a = s.annotations[annotation];
    return {{"annotation_id", a.id},
            {"item_id", s.items[s.annotation_item[annotation]].id},
            {"replayed", replayed},
            {"annotation", annotation_to_json(a)}};
  }

  ServiceOptions options_;
  detail::EventLog log_;
  mutable std::shared_mutex mutex_;
  std::uint64_t seq_ = 0;
  std::size_t since_snapshot_ = 0;
  std::map<std::string, Corpus> corpora_;
  std::map<std::string, std::vector<FilteredSet>> filtered_;
  std::map<std::string, detail::SessionState> sessions_;
  std::vector<std::string> session_order_;
};

}  // namespace engage
