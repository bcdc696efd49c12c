#include "codewatch/service.hpp"

#include <sodium.h>

#include <algorithm>
#include <array>

namespace codewatch {

namespace {

constexpr std::array<std::string_view, 7> kErrorTags = {
    "malformed", "validation_failed", "unauthorized", "forbidden", "not_found", "conflict", "internal",
};

void ensure_sodium() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw ApiError(ErrorCode::Internal, "libsodium initialisation failed");
}

std::string random_token() {
  ensure_sodium();
  std::array<unsigned char, 32> raw{};
  randombytes_buf(raw.data(), raw.size());
  std::string hex(raw.size() * 2 + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), raw.data(), raw.size());
  hex.pop_back();
  return hex;
}

ApiError forbidden(std::string message) { return {ErrorCode::Forbidden, std::move(message)}; }

}  // namespace

std::string_view to_string(ErrorCode code) { return kErrorTags[static_cast<std::size_t>(code)]; }

std::optional<ErrorCode> parse_error_code(std::string_view tag) {
  for (std::size_t i = 0; i < kErrorTags.size(); ++i) {
    if (kErrorTags[i] == tag) return static_cast<ErrorCode>(i);
  }
  return std::nullopt;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Malformed: return 400;
    case ErrorCode::ValidationFailed: return 422;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::Forbidden: return 403;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::Internal: return 500;
  }
  return 500;
}

ApiError::ApiError(ErrorCode code, std::string message, std::vector<std::string> violations)
    : std::runtime_error(std::move(message)), code_(code), violations_(std::move(violations)) {}

Json ApiError::to_json() const {
  Json j;
  j["code"] = to_string(code_);
  j["message"] = what();
  if (!violations_.empty()) j["violations"] = violations_;
  return j;
}

ApiError ApiError::from_json(const Json& body, ErrorCode fallback) {
  auto code = fallback;
  std::string message = std::string(to_string(fallback));
  std::vector<std::string> violations;
  if (body.is_object()) {
    if (const auto c = body.find("code"); c != body.end() && c->is_string()) {
      code = parse_error_code(c->get<std::string>()).value_or(fallback);
    }
    if (const auto m = body.find("message"); m != body.end() && m->is_string()) {
      message = m->get<std::string>();
    }
    if (const auto v = body.find("violations"); v != body.end() && v->is_array()) {
      for (const auto& s : *v) {
        if (s.is_string()) violations.push_back(s.get<std::string>());
      }
    }
  }
  return {code, std::move(message), std::move(violations)};
}

Json AuthToken::to_json() const {
  Json j;
  j["token"] = token;
  j["user_id"] = user_id;
  j["issued_at"] = issued_at;
  j["expires_at"] = expires_at;
  return j;
}

std::string hash_credential(std::string_view credential, bool fast) {
  ensure_sodium();
  std::array<char, crypto_pwhash_STRBYTES> out{};
  const auto ops = fast ? crypto_pwhash_OPSLIMIT_MIN : crypto_pwhash_OPSLIMIT_INTERACTIVE;
  const auto mem = fast ? crypto_pwhash_MEMLIMIT_MIN : crypto_pwhash_MEMLIMIT_INTERACTIVE;
  if (crypto_pwhash_str(out.data(), credential.data(), credential.size(), ops, mem) != 0) {
    throw ApiError(ErrorCode::Internal, "credential hashing failed");
  }
  return std::string(out.data());
}

bool verify_credential(std::string_view credential, const std::string& hash) {
  ensure_sodium();
  return crypto_pwhash_str_verify(hash.c_str(), credential.data(), credential.size()) == 0;
}

// --- IngestionService -------------------------------------------------------

IngestionService::IngestionService(Repository& repo, ServiceConfig config)
    : repo_(repo), config_(std::move(config)) {
  if (config_.token_lifetime_ms <= 0) throw std::invalid_argument("token lifetime must be positive");
  dummy_hash_ = hash_credential("unused-credential", config_.fast_credential_hash);
}

std::size_t IngestionService::user_count() const { return repo_.query(Collection::User, {}).size(); }

std::optional<UserAccount> IngestionService::find_user(const std::string& id) const {
  const auto doc = repo_.get(Collection::User, id);
  if (!doc) return std::nullopt;
  auto account = account_from_json(doc->body);
  account.user_id = doc->id;
  return account;
}

std::optional<UserAccount> IngestionService::find_username(std::string_view username) const {
  for (const auto& doc : repo_.query(Collection::User, {})) {
    if (doc.body.value("username", std::string{}) == username) {
      auto account = account_from_json(doc.body);
      account.user_id = doc.id;
      return account;
    }
  }
  return std::nullopt;
}

UserAccount IngestionService::authenticate(std::string_view token) const {
  std::optional<AuthToken> found;
  {
    std::lock_guard lock(tokens_mutex_);
    const auto it = tokens_.find(std::string(token));
    if (it != tokens_.end()) found = it->second;
  }
  if (!found || config_.clock() >= found->expires_at) {
    throw ApiError(ErrorCode::Unauthorized, "invalid or expired token");
  }
  auto account = find_user(found->user_id);
  if (!account) throw ApiError(ErrorCode::Unauthorized, "invalid or expired token");
  return *account;
}

UserAccount IngestionService::create_user(std::optional<std::string_view> caller_token, std::string_view username,
                                          std::string_view credential, Permission permission) {
  if (username.empty()) throw ApiError(ErrorCode::ValidationFailed, "username required", {"username required"});
  if (credential.empty()) {
    throw ApiError(ErrorCode::ValidationFailed, "credential required", {"credential required"});
  }
  std::lock_guard lock(accounts_mutex_);
  const bool bootstrap = user_count() == 0;
  if (!bootstrap) {
    if (!caller_token) throw ApiError(ErrorCode::Unauthorized, "authentication required");
    if (!at_least(authenticate(*caller_token).permission, Permission::Admin)) {
      throw forbidden("creating users requires Admin");
    }
  }
  if (find_username(username)) throw ApiError(ErrorCode::Conflict, "username already taken");

  UserAccount account;
  account.username = std::string(username);
  account.credential_hash = hash_credential(credential, config_.fast_credential_hash);
  account.permission = permission;
  account.created_at = config_.clock();
  account.user_id = repo_.insert(Collection::User, account_storage_json(account));
  return account;
}

AuthToken IngestionService::login(std::string_view username, std::string_view credential) {
  const auto account = find_username(username);
  // Unknown users still pay for one verification.
  const bool ok = verify_credential(credential, account ? account->credential_hash : dummy_hash_);
  if (!account || !ok) throw ApiError(ErrorCode::Unauthorized, "invalid credentials");

  AuthToken token;
  token.token = random_token();
  token.user_id = account->user_id;
  token.issued_at = config_.clock();
  token.expires_at = token.issued_at + config_.token_lifetime_ms;
  std::lock_guard lock(tokens_mutex_);
  tokens_[token.token] = token;
  return token;
}

void IngestionService::revoke_tokens(const std::string& user_id) {
  std::lock_guard lock(tokens_mutex_);
  std::erase_if(tokens_, [&](const auto& entry) { return entry.second.user_id == user_id; });
}

void IngestionService::delete_user(std::string_view caller_token, const std::string& user_id, bool purge_logs) {
  std::lock_guard lock(accounts_mutex_);
  if (!at_least(authenticate(caller_token).permission, Permission::Admin)) {
    throw forbidden("deleting users requires Admin");
  }
  if (!repo_.remove(Collection::User, user_id)) throw ApiError(ErrorCode::NotFound, "no such user");
  revoke_tokens(user_id);
  if (purge_logs) {
    QueryFilter own;
    own.user_id = user_id;
    for (const auto& doc : repo_.query(Collection::InteractionLogs, own)) {
      repo_.remove(Collection::InteractionLogs, doc.id);
    }
  }
}

UserAccount IngestionService::set_permission(std::string_view caller_token, const std::string& user_id,
                                             Permission permission) {
  std::lock_guard lock(accounts_mutex_);
  if (!at_least(authenticate(caller_token).permission, Permission::Admin)) {
    throw forbidden("changing permissions requires Admin");
  }
  auto account = find_user(user_id);
  if (!account) throw ApiError(ErrorCode::NotFound, "no such user");
  account->permission = permission;
  if (!repo_.replace(Collection::User, user_id, account_storage_json(*account))) {
    throw ApiError(ErrorCode::NotFound, "no such user");
  }
  return *account;
}

std::string IngestionService::store_log(const UserAccount& caller, const SessionLog& log, Json document) {
  if (caller.permission != Permission::Admin && log.user_id != caller.user_id) {
    throw forbidden("log user_id does not match the caller");
  }
  try {
    return repo_.insert(Collection::InteractionLogs, std::move(document));
  } catch (const ValidationFailed& e) {
    throw ApiError(ErrorCode::ValidationFailed, e.what(), e.violations());
  } catch (const StorageError& e) {
    throw ApiError(ErrorCode::Internal, e.what());
  }
}

std::string IngestionService::register_log(std::string_view caller_token, const SessionLog& log) {
  const auto caller = authenticate(caller_token);
  if (auto v = validate_session(log); !v.ok()) {
    throw ApiError(ErrorCode::ValidationFailed, "session log failed validation", std::move(v.violations));
  }
  return store_log(caller, log, log_to_json(log));
}

std::string IngestionService::register_log_document(std::string_view caller_token, std::string_view document) {
  const auto caller = authenticate(caller_token);
  Json doc;
  try {
    doc = Json::parse(document.begin(), document.end());
  } catch (const Json::parse_error& e) {
    throw ApiError(ErrorCode::Malformed, std::string("unparseable document: ") + e.what());
  }
  SessionLog log;
  try {
    log = log_from_json(doc);
  } catch (const MalformedDocument& e) {
    throw ApiError(ErrorCode::Malformed, e.what());
  } catch (const ValidationFailed& e) {
    throw ApiError(ErrorCode::ValidationFailed, "session log failed validation", e.violations());
  }
  return store_log(caller, log, std::move(doc));
}

std::vector<LogRecord> IngestionService::query_logs(std::string_view caller_token, const QueryFilter& filter) const {
  const auto caller = authenticate(caller_token);
  if (!at_least(caller.permission, Permission::Analyst) && filter.user_id != caller.user_id) {
    throw forbidden("Subjects may only query their own logs (set user_id)");
  }
  std::vector<LogRecord> out;
  for (auto& doc : repo_.query(Collection::InteractionLogs, filter)) {
    LogRecord rec{doc.id, doc.stored_at, log_from_json(doc.body), std::move(doc.body)};
    out.push_back(std::move(rec));
  }
  std::stable_sort(out.begin(), out.end(), [](const LogRecord& a, const LogRecord& b) {
    return a.log.start_time() < b.log.start_time();
  });
  return out;
}

LogRecord IngestionService::get_log(std::string_view caller_token, const std::string& id) const {
  const auto caller = authenticate(caller_token);
  auto doc = repo_.get(Collection::InteractionLogs, id);
  if (!doc) throw ApiError(ErrorCode::NotFound, "no such log");
  auto log = log_from_json(doc->body);
  if (!at_least(caller.permission, Permission::Analyst) && log.user_id != caller.user_id) {
    throw forbidden("Subjects may only read their own logs");
  }
  return {doc->id, doc->stored_at, std::move(log), std::move(doc->body)};
}

}  // namespace codewatch
