#include "codewatch/cli.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "codewatch/harness.hpp"
#include "codewatch/http_api.hpp"
#include "codewatch/persistence.hpp"
#include "codewatch/service.hpp"
#include "codewatch/session_analysis.hpp"

extern char** environ;

namespace codewatch::cli {

namespace {

namespace fs = std::filesystem;

class OperationalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OperationalError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OperationalError("cannot write " + path);
  f << content;
}

// Flag value, else environment, else config file, else nothing.
class Settings {
 public:
  Settings(const std::map<std::string, std::string>& env, Json config) : env_(env), config_(std::move(config)) {}

  std::optional<std::string> get(const std::string& flag_value, const char* env_name, const char* key) const {
    if (!flag_value.empty()) return flag_value;
    if (const auto it = env_.find(env_name); it != env_.end() && !it->second.empty()) return it->second;
    if (config_.is_object()) {
      if (const auto it = config_.find(key); it != config_.end()) {
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number()) return it->dump();
      }
    }
    return std::nullopt;
  }

 private:
  const std::map<std::string, std::string>& env_;
  Json config_;
};

struct Common {
  std::string config_path;
  bool quiet = false;
  int verbosity = 0;
  std::string server;
  std::string token;
  std::string username;
  std::string credential;
  std::string store;
  std::string output;
};

// Log filters shared by query and classify.
struct FilterArgs {
  std::string user_id;
  std::string file_path;
  std::string from;
  std::string to;

  QueryFilter build() const {
    const auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };
    try {
      return parse_query_filter(opt(user_id), opt(file_path), opt(from), opt(to));
    } catch (const ApiError& e) {
      throw UsageError(e.what());
    }
  }
};

void add_filter_flags(CLI::App* cmd, FilterArgs& f) {
  cmd->add_option("--user-id", f.user_id, "Only logs of this user id");
  cmd->add_option("--file-path", f.file_path, "Only logs of this file path");
  cmd->add_option("--from", f.from, "Earliest first-event time (epoch ms, inclusive)");
  cmd->add_option("--to", f.to, "Latest first-event time (epoch ms, inclusive)");
}

ApiClient authenticated_client(const Settings& s, const Common& c) {
  const auto server = s.get(c.server, "CODEWATCH_SERVER", "server");
  if (!server) throw UsageError("no server URL (use --server or CODEWATCH_SERVER)");
  ApiClient client(*server);
  if (const auto token = s.get(c.token, "CODEWATCH_TOKEN", "token")) {
    client.set_token(*token);
    return client;
  }
  const auto user = s.get(c.username, "CODEWATCH_USERNAME", "username");
  const auto cred = s.get(c.credential, "CODEWATCH_CREDENTIAL", "credential");
  if (!user || !cred) throw UsageError("no token or username/credential for the server");
  client.login(*user, *cred);
  return client;
}

std::vector<SessionLog> parse_log_documents(const std::string& content, const std::string& origin) {
  Json doc;
  try {
    doc = Json::parse(content);
  } catch (const Json::parse_error& e) {
    throw MalformedDocument(origin + ": " + e.what());
  }
  std::vector<SessionLog> logs;
  if (doc.is_array()) {
    for (const auto& item : doc) logs.push_back(log_from_json(item));
  } else {
    logs.push_back(log_from_json(doc));
  }
  return logs;
}

// Orders logs independently of where they were loaded from, so every source
// yields the same report.
void canonical_order(std::vector<SessionLog>& logs) {
  std::stable_sort(logs.begin(), logs.end(), [](const SessionLog& a, const SessionLog& b) {
    const auto ka = std::tie(a.events.front().time, a.session_id, a.user_id, a.file_path);
    const auto kb = std::tie(b.events.front().time, b.session_id, b.user_id, b.file_path);
    return ka < kb;
  });
}

std::vector<SessionLog> logs_from_store(const std::string& location, const QueryFilter& filter) {
  auto repo = open_repository(location);
  std::vector<SessionLog> logs;
  for (const auto& doc : repo->query(Collection::InteractionLogs, filter)) logs.push_back(log_from_json(doc.body));
  return logs;
}

std::vector<SessionLog> logs_from_server(ApiClient& client, const QueryFilter& filter) {
  std::vector<SessionLog> logs;
  for (const auto& doc : client.query_logs(filter)) logs.push_back(log_from_json(doc));
  return logs;
}

std::atomic<HttpServer*> g_running_server{nullptr};

extern "C" void handle_stop_signal(int) {
  if (auto* s = g_running_server.load()) s->stop();
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("bind address must be host:port");
  try {
    return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("bad port in bind address " + bind);
  }
}

std::int64_t parse_int(const std::string& value, const char* what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("bad integer for ") + what + ": " + value);
  }
}

}  // namespace

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with("CODEWATCH_")) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return env;
}

std::vector<SessionLog> load_logs_from_files(const std::string& source) {
  std::vector<std::string> paths;
  std::error_code ec;
  if (fs::is_directory(source, ec)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") paths.push_back(entry.path().string());
    }
  } else if (source.find_first_of("*?[") != std::string::npos) {
    glob_t g{};
    if (::glob(source.c_str(), 0, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
  } else {
    paths.push_back(source);
  }
  if (paths.empty()) throw OperationalError("no log files match " + source);
  std::sort(paths.begin(), paths.end());
  std::vector<SessionLog> logs;
  for (const auto& p : paths) {
    for (auto& log : parse_log_documents(read_file(p), p)) logs.push_back(std::move(log));
  }
  return logs;
}

std::vector<LineLabelKind> load_ground_truth(const std::string& content) {
  std::vector<std::string> tags;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '[') {
    try {
      tags = Json::parse(content).get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
      throw MalformedDocument(std::string("ground truth: ") + e.what());
    }
  } else {
    std::istringstream in(content);
    for (std::string line; std::getline(in, line);) {
      const auto norm = normalize_line(line);
      if (!norm.empty()) tags.push_back(norm);
    }
  }
  std::vector<LineLabelKind> out;
  out.reserve(tags.size());
  for (const auto& t : tags) {
    const auto k = parse_label_kind(t);
    if (!k) throw MalformedDocument("ground truth: unknown label '" + t + "'");
    out.push_back(*k);
  }
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const std::map<std::string, std::string>& env) {
  CLI::App app{"Editor interaction telemetry: ingestion, session analysis and authorship classification",
               "codewatch"};
  app.require_subcommand(1, 1);
  Common c;
  app.add_option("--config", c.config_path, "JSON config file (keys: server, token, username, credential, store, bind, token_lifetime_ms)");
  app.add_flag("-q,--quiet", c.quiet, "Print only machine-readable output");
  app.add_flag("-v,--verbose", c.verbosity, "More diagnostics on stderr");

  const auto add_server = [&](CLI::App* cmd) {
    cmd->add_option("--server", c.server, "Service base URL [CODEWATCH_SERVER]");
    cmd->add_option("--token", c.token, "Bearer token [CODEWATCH_TOKEN]");
    cmd->add_option("--username", c.username, "Login name when no token is given [CODEWATCH_USERNAME]");
    cmd->add_option("--credential", c.credential, "Login credential [CODEWATCH_CREDENTIAL]");
  };
  const auto add_output = [&](CLI::App* cmd) { cmd->add_option("-o,--output", c.output, "Write output here instead of stdout"); };

  // serve
  auto* serve = app.add_subcommand("serve", "Run the ingestion service");
  std::string bind;
  std::string token_lifetime;
  std::string port_file;
  serve->add_option("--bind", bind, "host:port to listen on [CODEWATCH_BIND] (default 127.0.0.1:8080)");
  serve->add_option("--store", c.store, "Store directory or 'memory:' [CODEWATCH_STORE]");
  serve->add_option("--token-lifetime-ms", token_lifetime, "Bearer token lifetime [CODEWATCH_TOKEN_LIFETIME_MS]");
  serve->add_option("--port-file", port_file, "Write the bound port to this file once listening");

  // submit
  auto* submit = app.add_subcommand("submit", "Register session log(s) with the service");
  std::string submit_path;
  submit->add_option("log", submit_path, "Session document file (object or array)")->required();
  add_server(submit);

  // query
  auto* query = app.add_subcommand("query", "List stored session logs");
  FilterArgs query_filter;
  add_filter_flags(query, query_filter);
  add_server(query);
  query->add_option("--store", c.store, "Read a store directly instead of the service [CODEWATCH_STORE]");
  add_output(query);

  // login / create-user
  auto* login = app.add_subcommand("login", "Obtain a bearer token");
  add_server(login);
  auto* create_user = app.add_subcommand("create-user", "Create an account (first account needs no token)");
  std::string new_username;
  std::string new_credential;
  std::string new_permission = "Subject";
  create_user->add_option("--new-username", new_username, "Account name")->required();
  create_user->add_option("--new-credential", new_credential, "Account credential")->required();
  create_user->add_option("--permission", new_permission, "Subject, Analyst or Admin")
      ->check(CLI::IsMember({"Subject", "Analyst", "Admin"}));
  add_server(create_user);

  // reconstruct
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "Emit timeline and metrics for session log(s)");
  std::string reconstruct_path;
  EpochMs paste_window = kDefaultPasteWindowMs;
  reconstruct_cmd->add_option("log", reconstruct_path, "Session document file")->required();
  reconstruct_cmd->add_option("--paste-window-ms", paste_window, "Paste-to-Insertion pairing window")
      ->check(CLI::NonNegativeNumber);
  add_output(reconstruct_cmd);

  // classify
  auto* classify = app.add_subcommand("classify", "Label each line of a final submission");
  std::string final_path;
  std::string logs_source;
  std::string history_mode = "both";
  bool include_paste = false;
  bool include_deletion = false;
  FilterArgs classify_filter;
  classify->add_option("--final", final_path, "Final code file")->required();
  classify->add_option("--logs", logs_source, "Log file, directory or glob");
  classify->add_option("--store", c.store, "Read logs from a store directly [CODEWATCH_STORE]");
  classify->add_option("--history-mode", history_mode, "Historical lines from: text, line or both")
      ->check(CLI::IsMember({"text", "line", "both"}));
  classify->add_flag("--include-paste", include_paste, "Also use Paste text as history");
  classify->add_flag("--include-deletion", include_deletion, "Also use Deletion text as history");
  add_filter_flags(classify, classify_filter);
  add_server(classify);
  add_output(classify);

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a classification report against ground truth");
  std::string report_path;
  std::string truth_path;
  evaluate_cmd->add_option("--report", report_path, "Classification report")->required();
  evaluate_cmd->add_option("--truth", truth_path, "Ground-truth labels (JSON array or one per line)")->required();
  add_output(evaluate_cmd);

  // validate
  auto* validate = app.add_subcommand("validate", "Run the synthetic validation harness");
  harness::HarnessConfig hc;
  std::string live_url;
  std::string admin_user = "harness-admin";
  std::string admin_cred = "harness-admin-credential";
  std::optional<std::size_t> runs;
  bool json_report = false;
  std::vector<std::string> scenario_names;
  validate->add_option("--live", live_url, "Run against a live service URL instead of in-process");
  validate->add_option("--admin-username", admin_user, "Admin account for --live (bootstrapped if absent)");
  validate->add_option("--admin-credential", admin_cred, "Admin credential for --live");
  validate->add_option("--seed", hc.seed, "First seed");
  validate->add_option("--runs", runs, "Seeds per scenario (default 50 in-process, 1 live)");
  validate->add_option("--spurious-rate", hc.spurious_focus_rate, "Spurious Focus rate for the injected row")
      ->check(CLI::Range(0.0, 1.0));
  validate->add_option("--load-events", hc.generate.load_events, "Events in the load scenario");
  validate->add_option("--users", hc.generate.concurrent_users, "Users in the concurrency scenario");
  validate->add_option("--sessions-per-user", hc.generate.sessions_per_user, "Logs per user in the concurrency scenario");
  validate->add_option("--scenario", scenario_names, "Restrict to these scenarios (repeatable)");
  validate->add_flag("--json", json_report, "Emit the report as JSON instead of a table");
  add_output(validate);

  std::vector<std::string> argv_storage{"codewatch"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "codewatch: " << e.what() << "\n" << "Run with --help for usage.\n";
    return kExitUsage;
  }

  const auto info = [&](const std::string& msg) {
    if (!c.quiet) err << msg << "\n";
  };

  try {
    Json config;
    if (!c.config_path.empty()) {
      try {
        config = Json::parse(read_file(c.config_path));
      } catch (const Json::parse_error& e) {
        throw UsageError("config file " + c.config_path + ": " + e.what());
      }
    }
    const Settings settings(env, config);

    if (serve->parsed()) {
      const auto store = settings.get(c.store, "CODEWATCH_STORE", "store").value_or("codewatch-store");
      const auto [host, port] = parse_bind(settings.get(bind, "CODEWATCH_BIND", "bind").value_or("127.0.0.1:8080"));
      ServiceConfig sc;
      if (const auto lt = settings.get(token_lifetime, "CODEWATCH_TOKEN_LIFETIME_MS", "token_lifetime_ms")) {
        sc.token_lifetime_ms = parse_int(*lt, "token lifetime");
        if (sc.token_lifetime_ms <= 0) throw UsageError("token lifetime must be positive");
      }
      auto repo = open_repository(store);
      IngestionService service(*repo, sc);
      HttpServer server(service);
      const int bound = server.bind(host, port);
      if (!port_file.empty()) write_output(port_file, std::to_string(bound) + "\n", out);
      info("listening on " + host + ":" + std::to_string(bound) + " (store " + store + ")");
      g_running_server = &server;
      auto old_int = std::signal(SIGINT, handle_stop_signal);
      auto old_term = std::signal(SIGTERM, handle_stop_signal);
      server.listen();
      std::signal(SIGINT, old_int);
      std::signal(SIGTERM, old_term);
      g_running_server = nullptr;
      return kExitOk;
    }

    if (submit->parsed()) {
      auto client = authenticated_client(settings, c);
      Json ids = Json::array();
      for (const auto& log : parse_log_documents(read_file(submit_path), submit_path)) {
        ids.push_back(client.register_log(log));
      }
      Json j;
      j["ids"] = ids;
      out << j.dump() << "\n";
      return kExitOk;
    }

    if (query->parsed()) {
      const auto filter = query_filter.build();
      std::vector<SessionLog> logs;
      if (const auto store = settings.get(c.store, "CODEWATCH_STORE", "store"); store && c.server.empty()) {
        logs = logs_from_store(*store, filter);
      } else {
        auto client = authenticated_client(settings, c);
        logs = logs_from_server(client, filter);
      }
      Json arr = Json::array();
      for (const auto& log : logs) arr.push_back(log_to_json(log));
      write_output(c.output, arr.dump() + "\n", out);
      return kExitOk;
    }

    if (login->parsed()) {
      const auto server = settings.get(c.server, "CODEWATCH_SERVER", "server");
      const auto user = settings.get(c.username, "CODEWATCH_USERNAME", "username");
      const auto cred = settings.get(c.credential, "CODEWATCH_CREDENTIAL", "credential");
      if (!server || !user || !cred) throw UsageError("login needs --server, --username and --credential");
      ApiClient client(*server);
      out << client.login(*user, *cred).to_json().dump() << "\n";
      return kExitOk;
    }

    if (create_user->parsed()) {
      const auto server = settings.get(c.server, "CODEWATCH_SERVER", "server");
      if (!server) throw UsageError("no server URL (use --server or CODEWATCH_SERVER)");
      ApiClient client(*server);
      if (const auto token = settings.get(c.token, "CODEWATCH_TOKEN", "token")) {
        client.set_token(*token);
      } else if (const auto user = settings.get(c.username, "CODEWATCH_USERNAME", "username")) {
        const auto cred = settings.get(c.credential, "CODEWATCH_CREDENTIAL", "credential");
        if (!cred) throw UsageError("--username needs --credential");
        client.login(*user, *cred);
      }
      out << client.create_user(new_username, new_credential, *parse_permission(new_permission)).dump() << "\n";
      return kExitOk;
    }

    if (reconstruct_cmd->parsed()) {
      ReconstructOptions ro;
      ro.paste_window_ms = paste_window;
      Json arr = Json::array();
      for (const auto& log : parse_log_documents(read_file(reconstruct_path), reconstruct_path)) {
        const auto tl = reconstruct(log, ro);
        Json j;
        j["session_id"] = log.session_id;
        j["timeline"] = timeline_to_json(tl);
        j["metrics"] = metrics_to_json(session_metrics(tl));
        arr.push_back(std::move(j));
      }
      const auto& doc = arr.size() == 1 ? arr.front() : arr;
      write_output(c.output, doc.dump() + "\n", out);
      return kExitOk;
    }

    if (classify->parsed()) {
      const auto code = read_file(final_path);
      const auto filter = classify_filter.build();
      std::vector<SessionLog> logs;
      if (!logs_source.empty()) {
        logs = load_logs_from_files(logs_source);
      } else if (const auto store = settings.get(c.store, "CODEWATCH_STORE", "store"); store && c.server.empty()) {
        logs = logs_from_store(*store, filter);
      } else if (settings.get(c.server, "CODEWATCH_SERVER", "server")) {
        auto client = authenticated_client(settings, c);
        logs = logs_from_server(client, filter);
      } else {
        throw UsageError("classify needs --logs, --store or --server");
      }
      canonical_order(logs);
      ClassifyOptions co;
      co.history.include_text = history_mode != "line";
      co.history.include_line_field = history_mode != "text";
      co.history.include_paste = include_paste;
      co.history.include_deletion = include_deletion;
      const auto report = classify_submission(code, logs, co);
      info("classified " + std::to_string(report.labels.size()) + " lines against " + std::to_string(logs.size()) +
           " logs");
      write_output(c.output, report_to_json(report).dump() + "\n", out);
      return kExitOk;
    }

    if (evaluate_cmd->parsed()) {
      Json report_doc;
      try {
        report_doc = Json::parse(read_file(report_path));
      } catch (const Json::parse_error& e) {
        throw MalformedDocument(report_path + ": " + e.what());
      }
      const auto report = report_from_json(report_doc);
      const auto truth = load_ground_truth(read_file(truth_path));
      const auto result = evaluate(report, truth);
      write_output(c.output, evaluation_to_json(result).dump() + "\n", out);
      return kExitOk;
    }

    if (validate->parsed()) {
      if (!live_url.empty()) hc.live = harness::LiveTarget{live_url, admin_user, admin_cred};
      hc.runs = runs.value_or(live_url.empty() ? 50 : 1);
      if (!scenario_names.empty()) {
        hc.scenarios.clear();
        for (const auto& n : scenario_names) {
          const auto s = harness::parse_scenario_name(n);
          if (!s) throw UsageError("unknown scenario " + n);
          hc.scenarios.push_back(*s);
        }
      }
      const auto report = harness::run_harness(hc);
      write_output(c.output, json_report ? report.to_json().dump() + "\n" : report.table(), out);
      return report.all_passed() ? kExitOk : kExitOperational;
    }
  } catch (const UsageError& e) {
    err << "codewatch: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationFailed& e) {
    err << "codewatch: " << e.what() << "\n";
    return kExitOperational;
  } catch (const ApiError& e) {
    err << "codewatch: " << to_string(e.code()) << ": " << e.what() << "\n";
    for (const auto& v : e.violations()) err << "  - " << v << "\n";
    return kExitOperational;
  } catch (const std::exception& e) {
    err << "codewatch: " << e.what() << "\n";
    return kExitOperational;
  }
  return kExitUsage;
}

}  // namespace codewatch::cli
