#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codewatch/service.hpp"

namespace httplib {
class Server;
class Client;
}  // namespace httplib

namespace codewatch {

/// HTTP/1.1 front end for IngestionService.
///
///   POST   /users                  create account (bootstrap without token)
///   POST   /auth/login             issue bearer token
///   DELETE /users/{id}[?purge=1]   delete account, optionally its logs
///   PUT    /users/{id}/permission  {"permission": "..."}
///   POST   /logs                   register one session document
///   GET    /logs?user_id=&file_path=&from=&to=
///   GET    /logs/{id}
///
/// Errors are {"code", "message", "violations"?} with the status from
/// http_status().
class HttpServer {
 public:
  explicit HttpServer(IngestionService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  IngestionService& service_;
  std::unique_ptr<httplib::Server> server_;
};

/// Blocking client for the routes above. Non-2xx responses throw ApiError
/// with the server's code; transport failures throw ApiError(Internal)
/// prefixed "unreachable".
class ApiClient {
 public:
  explicit ApiClient(const std::string& base_url);
  ~ApiClient();

  ApiClient(ApiClient&&) noexcept;
  ApiClient& operator=(ApiClient&&) noexcept;

  void set_token(std::string token) { token_ = std::move(token); }
  const std::string& token() const { return token_; }

  Json create_user(std::string_view username, std::string_view credential, Permission permission);
  AuthToken login(std::string_view username, std::string_view credential);
  void delete_user(const std::string& user_id, bool purge_logs = false);
  Json set_permission(const std::string& user_id, Permission permission);
  std::string register_log(std::string_view document);
  std::string register_log(const SessionLog& log);
  /// Session documents in service order.
  std::vector<Json> query_logs(const QueryFilter& filter);

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string token_;
};

/// Transport-independent mapping of the query string to a filter. Throws
/// ApiError(Malformed) on non-integer bounds.
QueryFilter parse_query_filter(const std::optional<std::string>& user_id,
                               const std::optional<std::string>& file_path,
                               const std::optional<std::string>& from,
                               const std::optional<std::string>& to);

}  // namespace codewatch
