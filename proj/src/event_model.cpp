#include "codewatch/event_model.hpp"

#include <limits>

#include "codewatch/text.hpp"

namespace codewatch {

namespace {

constexpr std::array<std::string_view, 8> kKindTags = {
    "Start", "End", "Insertion", "Deletion", "Focus", "Unfocus", "Copy", "Paste",
};

constexpr std::array<std::string_view, 3> kPermissionTags = {"Subject", "Analyst", "Admin"};

std::string join_violations(const std::vector<std::string>& v) {
  std::string out = "validation failed";
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += i == 0 ? ": " : "; ";
    out += v[i];
  }
  return out;
}

std::string event_prefix(std::size_t index) {
  return "event " + std::to_string(index) + ": ";
}

// Reads an optional top-level string. Absent and null are reported as
// violations, any other non-string type is malformed.
std::string read_required_string(const Json& doc, const char* field,
                                 std::vector<std::string>& violations) {
  const auto it = doc.find(field);
  if (it == doc.end()) {
    violations.push_back(std::string(field) + " required");
    return {};
  }
  if (it->is_null()) {
    violations.push_back("field " + std::string(field) + " must not be null");
    return {};
  }
  if (!it->is_string()) {
    throw MalformedDocument(std::string("field ") + field + " must be a string");
  }
  return it->get<std::string>();
}

std::optional<std::string> read_optional_string(const Json& obj, const char* field,
                                                const std::string& prefix,
                                                std::vector<std::string>& violations) {
  const auto it = obj.find(field);
  if (it == obj.end()) return std::nullopt;
  if (it->is_null()) {
    violations.push_back(prefix + "field " + field + " must not be null");
    return std::nullopt;
  }
  if (!it->is_string()) {
    throw MalformedDocument(prefix + "field " + field + " must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(EventKind kind) {
  return kKindTags[static_cast<std::size_t>(kind)];
}

std::optional<EventKind> parse_event_kind(std::string_view tag) {
  for (std::size_t i = 0; i < kKindTags.size(); ++i) {
    if (kKindTags[i] == tag) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Permission p) {
  return kPermissionTags[static_cast<std::size_t>(p)];
}

std::optional<Permission> parse_permission(std::string_view tag) {
  for (std::size_t i = 0; i < kPermissionTags.size(); ++i) {
    if (kPermissionTags[i] == tag) return static_cast<Permission>(i);
  }
  return std::nullopt;
}

std::optional<EpochMs> SessionLog::start_time() const {
  if (events.empty()) return std::nullopt;
  return events.front().time;
}

ValidationFailed::ValidationFailed(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

ValidationResult validate_event(const InteractionEvent& event) {
  ValidationResult result;
  const auto kind = std::string(to_string(event.kind));
  const auto fields = applicability(event.kind);

  if (event.time < 0) result.violations.push_back("time must be non-negative");

  const auto check_field = [&](const std::optional<std::string>& value, bool allowed,
                               const char* name) {
    if (allowed && !value) {
      result.violations.push_back("field " + std::string(name) + " required for " + kind);
    } else if (!allowed && value) {
      result.violations.push_back("field " + std::string(name) + " not applicable to " + kind);
    }
  };
  check_field(event.text, fields.text, "text");
  check_field(event.line, fields.line, "line");
  if (event.text && !text::is_valid_utf8(*event.text)) {
    result.violations.push_back("field text must be valid UTF-8");
  }
  if (event.line && !text::is_valid_utf8(*event.line)) {
    result.violations.push_back("field line must be valid UTF-8");
  }

  if (event.text && fields.text) {
    if (event.kind == EventKind::Insertion) {
      if (text::scalar_count(*event.text) < kMinInsertionChars) {
        result.violations.push_back("insertion payload ≤ 3 chars");
      }
    } else if (event.text->empty()) {
      result.violations.push_back("field text must be non-empty for " + kind);
    }
  }
  return result;
}

ValidationResult validate_session(const SessionLog& log) {
  ValidationResult result;
  auto& v = result.violations;
  if (log.events.empty()) {
    v.push_back("events must be non-empty");
    return result;
  }
  if (log.events.front().kind != EventKind::Start) v.push_back("first event must be Start");
  if (log.events.back().kind != EventKind::End) v.push_back("last event must be End");

  for (std::size_t i = 1; i < log.events.size(); ++i) {
    if (log.events[i].time < log.events[i - 1].time) {
      v.push_back("non-monotonic timestamps");
      break;
    }
  }
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    for (auto& msg : validate_event(log.events[i]).violations) {
      v.push_back(event_prefix(i) + msg);
    }
  }
  return result;
}

Json event_to_json(const InteractionEvent& event) {
  Json j;
  j["type"] = to_string(event.kind);
  j["time"] = event.time;
  if (event.text) j["text"] = *event.text;
  if (event.line) j["line"] = *event.line;
  return j;
}

Json log_to_json(const SessionLog& log) {
  Json j;
  j["session_id"] = log.session_id;
  j["user_id"] = log.user_id;
  j["file_path"] = log.file_path;
  j["client_version"] = log.client_version;
  auto& events = j["events"] = Json::array();
  for (const auto& e : log.events) events.push_back(event_to_json(e));
  return j;
}

std::string encode_log(const SessionLog& log) {
  if (auto v = validate_session(log); !v.ok()) throw ValidationFailed(std::move(v.violations));
  return log_to_json(log).dump();
}

SessionLog log_from_json(const Json& doc) {
  if (!doc.is_object()) throw MalformedDocument("session document must be an object");

  std::vector<std::string> structural;
  SessionLog log;
  log.session_id = read_required_string(doc, "session_id", structural);
  log.user_id = read_required_string(doc, "user_id", structural);
  log.file_path = read_required_string(doc, "file_path", structural);
  log.client_version = read_required_string(doc, "client_version", structural);

  const auto events = doc.find("events");
  if (events == doc.end()) {
    structural.push_back("events required");
  } else if (events->is_null()) {
    structural.push_back("field events must not be null");
  } else if (!events->is_array()) {
    throw MalformedDocument("field events must be an array");
  } else {
    log.events.reserve(events->size());
    for (std::size_t i = 0; i < events->size(); ++i) {
      const auto& ej = (*events)[i];
      const auto prefix = event_prefix(i);
      if (!ej.is_object()) throw MalformedDocument(prefix + "must be an object");

      const auto type = ej.find("type");
      if (type == ej.end() || !type->is_string()) {
        throw MalformedDocument(prefix + "type must be a string");
      }
      const auto kind = parse_event_kind(type->get<std::string>());
      if (!kind) throw MalformedDocument(prefix + "unknown event type '" + type->get<std::string>() + "'");

      InteractionEvent event;
      event.kind = *kind;
      // Placeholder keeps ordering checks from flagging a missing time twice.
      event.time = log.events.empty() ? 0 : log.events.back().time;
      const auto time = ej.find("time");
      if (time == ej.end()) {
        structural.push_back(prefix + "time required");
      } else if (time->is_null()) {
        structural.push_back(prefix + "field time must not be null");
      } else if (time->is_number_integer()) {
        if (time->is_number_unsigned() &&
            time->get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<EpochMs>::max())) {
          throw MalformedDocument(prefix + "time out of range");
        }
        event.time = time->get<EpochMs>();
      } else {
        throw MalformedDocument(prefix + "time must be an integer");
      }
      event.text = read_optional_string(ej, "text", prefix, structural);
      event.line = read_optional_string(ej, "line", prefix, structural);
      log.events.push_back(std::move(event));
    }
  }

  auto violations = std::move(structural);
  // An absent events array already explains itself; skip the derived rules.
  if (events != doc.end() && events->is_array()) {
    for (auto& v : validate_session(log).violations) violations.push_back(std::move(v));
  }
  if (!violations.empty()) throw ValidationFailed(std::move(violations));
  return log;
}

SessionLog decode_log(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document.begin(), document.end());
  } catch (const Json::parse_error& e) {
    throw MalformedDocument(std::string("unparseable document: ") + e.what());
  }
  return log_from_json(doc);
}

Json account_public_json(const UserAccount& account) {
  Json j;
  j["user_id"] = account.user_id;
  j["username"] = account.username;
  j["permission"] = to_string(account.permission);
  j["created_at"] = account.created_at;
  return j;
}

Json account_storage_json(const UserAccount& account) {
  Json j;
  j["username"] = account.username;
  j["credential_hash"] = account.credential_hash;
  j["permission"] = to_string(account.permission);
  j["created_at"] = account.created_at;
  return j;
}

ValidationResult validate_account_document(const Json& doc) {
  ValidationResult r;
  if (!doc.is_object()) {
    r.violations.push_back("account document must be an object");
    return r;
  }
  const auto username = doc.find("username");
  if (username == doc.end() || !username->is_string() || username->get<std::string>().empty()) {
    r.violations.push_back("username required");
  }
  const auto hash = doc.find("credential_hash");
  if (hash == doc.end() || !hash->is_string() || hash->get<std::string>().empty()) {
    r.violations.push_back("credential_hash required");
  }
  const auto perm = doc.find("permission");
  if (perm == doc.end() || !perm->is_string() || !parse_permission(perm->get<std::string>())) {
    r.violations.push_back("permission must be one of Subject, Analyst, Admin");
  }
  const auto created = doc.find("created_at");
  if (created == doc.end() || !created->is_number_integer()) {
    r.violations.push_back("created_at required");
  }
  return r;
}

UserAccount account_from_json(const Json& doc) {
  if (auto v = validate_account_document(doc); !v.ok()) throw ValidationFailed(std::move(v.violations));
  UserAccount a;
  if (const auto id = doc.find("user_id"); id != doc.end() && id->is_string()) {
    a.user_id = id->get<std::string>();
  }
  a.username = doc.at("username").get<std::string>();
  a.credential_hash = doc.at("credential_hash").get<std::string>();
  a.permission = *parse_permission(doc.at("permission").get<std::string>());
  a.created_at = doc.at("created_at").get<EpochMs>();
  return a;
}

}  // namespace codewatch
