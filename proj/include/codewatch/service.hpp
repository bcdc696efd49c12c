#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "codewatch/event_model.hpp"
#include "codewatch/persistence.hpp"

namespace codewatch {

enum class ErrorCode : std::uint8_t {
  Malformed,
  ValidationFailed,
  Unauthorized,
  Forbidden,
  NotFound,
  Conflict,
  Internal,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view tag);
int http_status(ErrorCode code);

class ApiError : public std::runtime_error {
 public:
  ApiError(ErrorCode code, std::string message, std::vector<std::string> violations = {});

  ErrorCode code() const { return code_; }
  const std::vector<std::string>& violations() const { return violations_; }
  Json to_json() const;
  static ApiError from_json(const Json& body, ErrorCode fallback);

 private:
  ErrorCode code_;
  std::vector<std::string> violations_;
};

struct AuthToken {
  std::string token;
  std::string user_id;
  EpochMs issued_at = 0;
  EpochMs expires_at = 0;

  Json to_json() const;
};

inline constexpr EpochMs kDefaultTokenLifetimeMs = 24LL * 60 * 60 * 1000;

struct ServiceConfig {
  EpochMs token_lifetime_ms = kDefaultTokenLifetimeMs;
  Clock clock = system_now_ms;
  /// Use libsodium's minimum password-hash cost. Test and benchmark setups
  /// only; production keeps the interactive cost.
  bool fast_credential_hash = false;
};

/// Salted one-way credential hashing (Argon2id via libsodium).
std::string hash_credential(std::string_view credential, bool fast);
bool verify_credential(std::string_view credential, const std::string& hash);

/// One stored log together with its repository id.
struct LogRecord {
  std::string id;
  EpochMs stored_at = 0;
  SessionLog log;
  Json document;  // as stored, including fields the model does not know
};

/// Account lifecycle, authentication and log registration over a Repository.
///
/// Every authenticated call takes the caller's bearer token; a missing,
/// unknown or expired token, or one whose account was deleted, is
/// `unauthorized`. Permission checks read the account's current level, so
/// demotions take effect immediately.
///
/// Access rules:
///   create_user, delete_user, set_permission   Admin (create: or empty store)
///   register_log                               own user_id; Admin any
///   query_logs / get_log                       Analyst, Admin; Subject own only
class IngestionService {
 public:
  explicit IngestionService(Repository& repo, ServiceConfig config = {});

  UserAccount create_user(std::optional<std::string_view> caller_token, std::string_view username,
                          std::string_view credential, Permission permission);
  AuthToken login(std::string_view username, std::string_view credential);
  void delete_user(std::string_view caller_token, const std::string& user_id, bool purge_logs = false);
  UserAccount set_permission(std::string_view caller_token, const std::string& user_id, Permission permission);

  std::string register_log(std::string_view caller_token, const SessionLog& log);
  /// Decodes and validates `document` first; unknown extra fields are kept.
  std::string register_log_document(std::string_view caller_token, std::string_view document);

  /// Sorted by first-event time, then storage order.
  std::vector<LogRecord> query_logs(std::string_view caller_token, const QueryFilter& filter) const;
  LogRecord get_log(std::string_view caller_token, const std::string& id) const;

  /// Resolves a token to its current account or throws `unauthorized`.
  UserAccount authenticate(std::string_view token) const;

  std::size_t user_count() const;
  const ServiceConfig& config() const { return config_; }

 private:
  std::optional<UserAccount> find_user(const std::string& id) const;
  std::optional<UserAccount> find_username(std::string_view username) const;
  std::string store_log(const UserAccount& caller, const SessionLog& log, Json document);
  void revoke_tokens(const std::string& user_id);

  Repository& repo_;
  ServiceConfig config_;
  std::mutex accounts_mutex_;  // serializes account mutations
  mutable std::mutex tokens_mutex_;
  std::unordered_map<std::string, AuthToken> tokens_;
  std::string dummy_hash_;  // verified on unknown usernames to even out timing
};

}  // namespace codewatch
