#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace codewatch {

using Json = nlohmann::ordered_json;

/// Milliseconds since the Unix epoch, UTC.
using EpochMs = std::int64_t;

enum class EventKind : std::uint8_t {
  Start,
  End,
  Insertion,
  Deletion,
  Focus,
  Unfocus,
  Copy,
  Paste,
};

inline constexpr std::array<EventKind, 8> kAllEventKinds = {
    EventKind::Start, EventKind::End,   EventKind::Insertion, EventKind::Deletion,
    EventKind::Focus, EventKind::Unfocus, EventKind::Copy,    EventKind::Paste,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view tag);

/// Which optional payload fields an event kind carries.
struct FieldApplicability {
  bool text;
  bool line;
};

constexpr FieldApplicability applicability(EventKind kind) {
  switch (kind) {
    case EventKind::Insertion:
    case EventKind::Deletion:
      return {true, true};
    case EventKind::Copy:
    case EventKind::Paste:
      return {true, false};
    default:
      return {false, false};
  }
}

/// Insertions shorter than this (in Unicode scalar values) are keystroke noise.
inline constexpr std::size_t kMinInsertionChars = 4;

struct InteractionEvent {
  EventKind kind = EventKind::Start;
  EpochMs time = 0;
  std::optional<std::string> text;
  std::optional<std::string> line;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

struct SessionLog {
  std::string session_id;
  std::string user_id;
  std::string file_path;
  std::string client_version;
  std::vector<InteractionEvent> events;

  friend bool operator==(const SessionLog&, const SessionLog&) = default;

  /// Time of the first event, or nullopt for an empty log.
  std::optional<EpochMs> start_time() const;
};

enum class Permission : std::uint8_t { Subject, Analyst, Admin };

std::string_view to_string(Permission p);
std::optional<Permission> parse_permission(std::string_view tag);

/// True when `held` grants at least the rights of `required`.
constexpr bool at_least(Permission held, Permission required) {
  return static_cast<int>(held) >= static_cast<int>(required);
}

struct UserAccount {
  std::string user_id;
  std::string username;
  std::string credential_hash;
  Permission permission = Permission::Subject;
  EpochMs created_at = 0;

  friend bool operator==(const UserAccount&, const UserAccount&) = default;
};

/// Outcome of a validation pass. Violations are human-readable rule names.
struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  explicit operator bool() const { return ok(); }
};

ValidationResult validate_event(const InteractionEvent& event);
ValidationResult validate_session(const SessionLog& log);

/// Text could not be parsed as a session document at all.
class MalformedDocument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Document parsed but violates the event or session rules.
class ValidationFailed : public std::runtime_error {
 public:
  explicit ValidationFailed(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

Json event_to_json(const InteractionEvent& event);
Json log_to_json(const SessionLog& log);

/// Canonical single-line encoding; throws ValidationFailed on invalid input.
std::string encode_log(const SessionLog& log);

/// Decodes and validates. Throws MalformedDocument or ValidationFailed.
SessionLog decode_log(std::string_view document);
SessionLog log_from_json(const Json& doc);

/// Account as exposed by the API: never includes the credential hash.
Json account_public_json(const UserAccount& account);
/// Account as persisted, including the credential hash.
Json account_storage_json(const UserAccount& account);
UserAccount account_from_json(const Json& doc);
ValidationResult validate_account_document(const Json& doc);

}  // namespace codewatch
