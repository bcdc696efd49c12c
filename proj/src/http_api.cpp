#include "codewatch/http_api.hpp"

#include <charconv>

#include <httplib.h>

namespace codewatch {

namespace {

constexpr const char* kJsonType = "application/json";

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJsonType);
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, http_status(e.code()), e.to_json()); }

std::optional<std::string> bearer_token(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (header.size() <= kPrefix.size() || header.compare(0, kPrefix.size(), kPrefix) != 0) return std::nullopt;
  return header.substr(kPrefix.size());
}

std::string require_token(const httplib::Request& req) {
  auto token = bearer_token(req);
  if (!token) throw ApiError(ErrorCode::Unauthorized, "missing bearer token");
  return *token;
}

Json parse_body(const httplib::Request& req) {
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw ApiError(ErrorCode::Malformed, std::string("unparseable body: ") + e.what());
  }
}

std::string string_field(const Json& body, const char* name) {
  if (!body.is_object()) throw ApiError(ErrorCode::Malformed, "body must be an object");
  const auto it = body.find(name);
  if (it == body.end() || !it->is_string()) {
    throw ApiError(ErrorCode::Malformed, std::string("field ") + name + " must be a string");
  }
  return it->get<std::string>();
}

Permission permission_field(const Json& body) {
  const auto tag = string_field(body, "permission");
  const auto p = parse_permission(tag);
  if (!p) {
    throw ApiError(ErrorCode::ValidationFailed, "unknown permission",
                   {"permission must be one of Subject, Analyst, Admin"});
  }
  return *p;
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

// Runs a handler, translating every failure into the error envelope.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ApiError& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_error(res, ApiError(ErrorCode::Internal, e.what()));
    }
  };
}

Json record_json(const LogRecord& rec) {
  Json j;
  j["id"] = rec.id;
  j["stored_at"] = rec.stored_at;
  j["log"] = rec.document;
  return j;
}

std::optional<EpochMs> parse_bound(const std::optional<std::string>& raw, const char* name) {
  if (!raw) return std::nullopt;
  EpochMs value = 0;
  const auto* end = raw->data() + raw->size();
  const auto [ptr, ec] = std::from_chars(raw->data(), end, value);
  if (raw->empty() || ec != std::errc{} || ptr != end) {
    throw ApiError(ErrorCode::Malformed, std::string(name) + " must be an integer epoch-ms value");
  }
  return value;
}

}  // namespace

QueryFilter parse_query_filter(const std::optional<std::string>& user_id, const std::optional<std::string>& file_path,
                               const std::optional<std::string>& from, const std::optional<std::string>& to) {
  QueryFilter f;
  if (user_id && !user_id->empty()) f.user_id = user_id;
  if (file_path && !file_path->empty()) f.file_path = file_path;
  f.from = parse_bound(from && !from->empty() ? from : std::nullopt, "from");
  f.to = parse_bound(to && !to->empty() ? to : std::nullopt, "to");
  return f;
}

// --- HttpServer -------------------------------------------------------------

HttpServer::HttpServer(IngestionService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;

  s.Post("/users", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto token = bearer_token(req);
    const auto account = service_.create_user(token ? std::optional<std::string_view>(*token) : std::nullopt,
                                              string_field(body, "username"), string_field(body, "credential"),
                                              permission_field(body));
    send_json(res, 201, account_public_json(account));
  }));

  s.Post("/auth/login", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto token = service_.login(string_field(body, "username"), string_field(body, "credential"));
    send_json(res, 200, token.to_json());
  }));

  s.Delete(R"(/users/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto purge = param(req, "purge");
    service_.delete_user(require_token(req), req.matches[1], purge && (*purge == "1" || *purge == "true"));
    res.status = 204;
  }));

  s.Put(R"(/users/([^/]+)/permission)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto token = require_token(req);
    const auto body = parse_body(req);
    const auto account = service_.set_permission(token, req.matches[1], permission_field(body));
    send_json(res, 200, account_public_json(account));
  }));

  s.Post("/logs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto id = service_.register_log_document(require_token(req), req.body);
    Json j;
    j["id"] = id;
    send_json(res, 201, j);
  }));

  s.Get("/logs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto token = require_token(req);
    const auto filter =
        parse_query_filter(param(req, "user_id"), param(req, "file_path"), param(req, "from"), param(req, "to"));
    Json j;
    auto& logs = j["logs"] = Json::array();
    for (const auto& rec : service_.query_logs(token, filter)) logs.push_back(record_json(rec));
    send_json(res, 200, j);
  }));

  s.Get(R"(/logs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, record_json(service_.get_log(require_token(req), req.matches[1])));
  }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

// --- ApiClient --------------------------------------------------------------

namespace {

ErrorCode code_for_status(int status) {
  switch (status) {
    case 400: return ErrorCode::Malformed;
    case 401: return ErrorCode::Unauthorized;
    case 403: return ErrorCode::Forbidden;
    case 404: return ErrorCode::NotFound;
    case 409: return ErrorCode::Conflict;
    case 422: return ErrorCode::ValidationFailed;
    default: return ErrorCode::Internal;
  }
}

Json check(const httplib::Result& res, const char* what) {
  if (!res) {
    throw ApiError(ErrorCode::Internal,
                   std::string("unreachable: ") + what + ": " + httplib::to_string(res.error()));
  }
  Json body;
  if (!res->body.empty()) {
    try {
      body = Json::parse(res->body);
    } catch (const Json::parse_error&) {
      body = nullptr;
    }
  }
  if (res->status < 200 || res->status >= 300) {
    throw ApiError::from_json(body, code_for_status(res->status));
  }
  return body;
}

}  // namespace

ApiClient::ApiClient(const std::string& base_url) : client_(std::make_unique<httplib::Client>(base_url)) {
  if (!client_->is_valid()) throw std::invalid_argument("invalid server URL: " + base_url);
  client_->set_connection_timeout(5, 0);
  client_->set_read_timeout(60, 0);
  client_->set_write_timeout(60, 0);
}

ApiClient::~ApiClient() = default;
ApiClient::ApiClient(ApiClient&&) noexcept = default;
ApiClient& ApiClient::operator=(ApiClient&&) noexcept = default;

Json ApiClient::create_user(std::string_view username, std::string_view credential, Permission permission) {
  Json body;
  body["username"] = username;
  body["credential"] = credential;
  body["permission"] = to_string(permission);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  return check(client_->Post("/users", headers, body.dump(), kJsonType), "POST /users");
}

AuthToken ApiClient::login(std::string_view username, std::string_view credential) {
  Json body;
  body["username"] = username;
  body["credential"] = credential;
  const auto j = check(client_->Post("/auth/login", body.dump(), kJsonType), "POST /auth/login");
  AuthToken t;
  t.token = j.at("token").get<std::string>();
  t.user_id = j.at("user_id").get<std::string>();
  t.issued_at = j.at("issued_at").get<EpochMs>();
  t.expires_at = j.at("expires_at").get<EpochMs>();
  token_ = t.token;
  return t;
}

void ApiClient::delete_user(const std::string& user_id, bool purge_logs) {
  httplib::Headers headers{{"Authorization", "Bearer " + token_}};
  const auto path = "/users/" + httplib::detail::encode_url(user_id) + (purge_logs ? "?purge=1" : "");
  check(client_->Delete(path, headers), "DELETE /users");
}

Json ApiClient::set_permission(const std::string& user_id, Permission permission) {
  Json body;
  body["permission"] = to_string(permission);
  httplib::Headers headers{{"Authorization", "Bearer " + token_}};
  return check(client_->Put("/users/" + httplib::detail::encode_url(user_id) + "/permission", headers, body.dump(),
                            kJsonType),
               "PUT /users/{id}/permission");
}

std::string ApiClient::register_log(std::string_view document) {
  httplib::Headers headers{{"Authorization", "Bearer " + token_}};
  const auto j = check(client_->Post("/logs", headers, std::string(document), kJsonType), "POST /logs");
  return j.at("id").get<std::string>();
}

std::string ApiClient::register_log(const SessionLog& log) { return register_log(log_to_json(log).dump()); }

std::vector<Json> ApiClient::query_logs(const QueryFilter& filter) {
  httplib::Params params;
  if (filter.user_id) params.emplace("user_id", *filter.user_id);
  if (filter.file_path) params.emplace("file_path", *filter.file_path);
  if (filter.from) params.emplace("from", std::to_string(*filter.from));
  if (filter.to) params.emplace("to", std::to_string(*filter.to));
  httplib::Headers headers{{"Authorization", "Bearer " + token_}};
  const auto j = check(client_->Get("/logs", params, headers), "GET /logs");
  std::vector<Json> out;
  for (const auto& rec : j.at("logs")) out.push_back(rec.at("log"));
  return out;
}

}  // namespace codewatch
