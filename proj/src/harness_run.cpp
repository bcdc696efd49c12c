// Scoring, pipeline execution and the harness report.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <random>
#include <thread>
#include <unordered_map>

#include "codewatch/harness.hpp"
#include "codewatch/http_api.hpp"
#include "codewatch/persistence.hpp"
#include "codewatch/service.hpp"

namespace codewatch::harness {

namespace {

bool same_key(const InteractionEvent& a, const InteractionEvent& b) {
  return a.kind == b.kind && a.text == b.text && a.line == b.line;
}

// Larger middles are reported as wholly unmatched rather than aligned.
constexpr std::size_t kMaxAlignmentCells = 16u << 20;

// --- pipeline transports -------------------------------------------------------

// Minimal surface the pipeline needs, implemented in-process and over HTTP.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Creates a Subject account and returns (user_id, token).
  virtual std::pair<std::string, std::string> add_user(const std::string& username) = 0;
  virtual void submit(const std::string& token, const std::string& document) = 0;
  virtual std::vector<SessionLog> fetch(const std::string& token, const std::string& user_id) = 0;
  virtual std::size_t total_logs() = 0;
  virtual bool counts_total() const = 0;
};

class InProcessTransport final : public Transport {
 public:
  InProcessTransport() : service_(repo_, fast_config()) {
    service_.create_user(std::nullopt, "harness-admin", "harness", Permission::Admin);
    admin_token_ = service_.login("harness-admin", "harness").token;
  }

  std::pair<std::string, std::string> add_user(const std::string& username) override {
    const auto account = service_.create_user(admin_token_, username, "pw-" + username, Permission::Subject);
    return {account.user_id, service_.login(username, "pw-" + username).token};
  }

  void submit(const std::string& token, const std::string& document) override {
    service_.register_log_document(token, document);
  }

  std::vector<SessionLog> fetch(const std::string& token, const std::string& user_id) override {
    QueryFilter f;
    f.user_id = user_id;
    std::vector<SessionLog> out;
    for (auto& rec : service_.query_logs(token, f)) out.push_back(std::move(rec.log));
    return out;
  }

  std::size_t total_logs() override { return service_.query_logs(admin_token_, {}).size(); }
  bool counts_total() const override { return true; }

 private:
  static ServiceConfig fast_config() {
    ServiceConfig c;
    c.fast_credential_hash = true;
    return c;
  }

  MemoryRepository repo_;
  IngestionService service_;
  std::string admin_token_;
};

class LiveTransport final : public Transport {
 public:
  explicit LiveTransport(LiveTarget target) : target_(std::move(target)), admin_(target_.url) {
    try {
      admin_.login(target_.admin_username, target_.admin_credential);
    } catch (const ApiError& e) {
      if (e.code() != ErrorCode::Unauthorized) throw;
      // Fresh service: bootstrap the admin account.
      admin_.create_user(target_.admin_username, target_.admin_credential, Permission::Admin);
      admin_.login(target_.admin_username, target_.admin_credential);
    }
    std::random_device rd;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%08x%08x", rd(), rd());
    nonce_ = buf;
  }

  std::pair<std::string, std::string> add_user(const std::string& username) override {
    const auto name = username + "-" + nonce_;
    const auto account = admin_.create_user(name, "pw-" + name, Permission::Subject);
    ApiClient c(target_.url);
    const auto token = c.login(name, "pw-" + name);
    return {account.at("user_id").get<std::string>(), token.token};
  }

  void submit(const std::string& token, const std::string& document) override {
    ApiClient c(target_.url);
    c.set_token(token);
    c.register_log(document);
  }

  std::vector<SessionLog> fetch(const std::string& token, const std::string& user_id) override {
    ApiClient c(target_.url);
    c.set_token(token);
    QueryFilter f;
    f.user_id = user_id;
    std::vector<SessionLog> out;
    for (const auto& doc : c.query_logs(f)) out.push_back(log_from_json(doc));
    return out;
  }

  std::size_t total_logs() override { return 0; }
  bool counts_total() const override { return false; }

 private:
  LiveTarget target_;
  ApiClient admin_;
  std::string nonce_;
};

// Submits one user's documents over a single connection.
void submit_all(Transport& transport, const LiveTarget* live, const std::string& token,
                const std::vector<std::string>& docs) {
  if (!live) {
    for (const auto& d : docs) transport.submit(token, d);
    return;
  }
  ApiClient c(live->url);
  c.set_token(token);
  for (const auto& d : docs) c.register_log(d);
}

std::string fmt2(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

// --- ScenarioResult -------------------------------------------------------------

double ScenarioResult::precision() const {
  if (observed_count == 0) return expected_count == 0 ? 1.0 : 0.0;
  return static_cast<double>(matched) / static_cast<double>(observed_count);
}

double ScenarioResult::recall() const {
  if (expected_count == 0) return 1.0;
  return static_cast<double>(matched) / static_cast<double>(expected_count);
}

void ScenarioResult::merge(const ScenarioResult& other) {
  expected_count += other.expected_count;
  observed_count += other.observed_count;
  matched += other.matched;
  mismatches.insert(mismatches.end(), other.mismatches.begin(), other.mismatches.end());
}

// --- scoring ----------------------------------------------------------------------

ScenarioResult score(std::span<const InteractionEvent> expected, std::span<const InteractionEvent> observed,
                     std::string_view session_id) {
  ScenarioResult r;
  r.expected_count = expected.size();
  r.observed_count = observed.size();
  const std::string sid(session_id);

  const auto missing = [&](std::size_t i, const char* reason) {
    r.mismatches.push_back({sid, expected[i], std::nullopt, reason});
  };
  const auto spurious = [&](std::size_t j, const char* reason) {
    r.mismatches.push_back({sid, std::nullopt, observed[j], reason});
  };

  // Common prefix and suffix match outright; only the middle needs alignment.
  std::size_t head = 0;
  while (head < expected.size() && head < observed.size() && same_key(expected[head], observed[head])) ++head;
  std::size_t tail = 0;
  while (tail < expected.size() - head && tail < observed.size() - head &&
         same_key(expected[expected.size() - 1 - tail], observed[observed.size() - 1 - tail])) {
    ++tail;
  }

  // Alignment as (expected index, observed index); nullopt marks an unpaired side.
  std::vector<std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> steps;
  for (std::size_t k = 0; k < head; ++k) steps.emplace_back(k, k);

  const std::size_t n = expected.size() - head - tail;
  const std::size_t m = observed.size() - head - tail;
  if (n > 0 && m > 0 && n * m <= kMaxAlignmentCells) {
    // Longest common subsequence over the middle.
    std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
    const auto at = [&](std::size_t a, std::size_t b) -> std::uint32_t& { return lcs[a * (m + 1) + b]; };
    for (std::size_t a = n; a-- > 0;) {
      for (std::size_t b = m; b-- > 0;) {
        at(a, b) = same_key(expected[head + a], observed[head + b]) ? at(a + 1, b + 1) + 1
                                                                      : std::max(at(a + 1, b), at(a, b + 1));
      }
    }
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < n && b < m) {
      if (same_key(expected[head + a], observed[head + b]) && at(a, b) == at(a + 1, b + 1) + 1) {
        steps.emplace_back(head + a++, head + b++);
      } else if (at(a, b + 1) >= at(a + 1, b)) {
        steps.emplace_back(std::nullopt, head + b++);
      } else {
        steps.emplace_back(head + a++, std::nullopt);
      }
    }
    while (a < n) steps.emplace_back(head + a++, std::nullopt);
    while (b < m) steps.emplace_back(std::nullopt, head + b++);
  } else {
    for (std::size_t a = 0; a < n; ++a) steps.emplace_back(head + a, std::nullopt);
    for (std::size_t b = 0; b < m; ++b) steps.emplace_back(std::nullopt, head + b);
  }
  for (std::size_t k = 0; k < tail; ++k) {
    steps.emplace_back(expected.size() - tail + k, observed.size() - tail + k);
  }

  std::optional<EpochMs> last_matched_time;
  for (const auto& [e, o] : steps) {
    if (e && o) {
      if (last_matched_time && observed[*o].time < *last_matched_time) {
        missing(*e, "temporal order violated");
        spurious(*o, "temporal order violated");
      } else {
        ++r.matched;
        last_matched_time = observed[*o].time;
      }
    } else if (e) {
      missing(*e, "not observed");
    } else {
      spurious(*o, "not expected");
    }
  }
  return r;
}

ScenarioResult score_sessions(std::span<const ExpectedSession> expected, std::span<const SessionLog> observed,
                              const std::map<std::string, std::string>& user_ids) {
  ScenarioResult total;
  std::unordered_map<std::string, const SessionLog*> by_id;
  for (const auto& log : observed) {
    const auto [it, fresh] = by_id.emplace(log.session_id, &log);
    if (!fresh) {
      // Duplicate delivery: the extra copy is pure noise.
      total.observed_count += log.events.size();
      total.mismatches.push_back({log.session_id, std::nullopt, std::nullopt, "duplicate session"});
    }
  }
  for (const auto& exp : expected) {
    const auto it = by_id.find(exp.session_id);
    if (it == by_id.end()) {
      total.merge(score(exp.events, {}, exp.session_id));
      continue;
    }
    const auto& log = *it->second;
    by_id.erase(it);
    const auto owner = user_ids.find(exp.user);
    const bool attributed = owner != user_ids.end() && owner->second == log.user_id && log.file_path == exp.file_path;
    if (!attributed) {
      auto r = score(exp.events, {}, exp.session_id);
      r.observed_count += log.events.size();
      r.mismatches.push_back({exp.session_id, std::nullopt, std::nullopt, "misattributed session"});
      total.merge(r);
      continue;
    }
    total.merge(score(exp.events, log.events, exp.session_id));
  }
  for (const auto& [id, log] : by_id) {
    total.merge(score({}, log->events, id));
  }
  return total;
}

// --- pipeline -------------------------------------------------------------------

ScenarioResult run_pipeline(const Scenario& scenario, const PipelineOptions& options) {
  std::unique_ptr<Transport> transport;
  try {
    if (options.live) {
      transport = std::make_unique<LiveTransport>(*options.live);
    } else {
      transport = std::make_unique<InProcessTransport>();
    }
  } catch (const ApiError& e) {
    throw HarnessError(std::string("target unreachable or refused setup: ") + e.what());
  }

  struct UserRun {
    std::string user_id;
    std::string token;
    std::vector<std::string> docs;
  };
  std::vector<UserRun> runs;
  std::map<std::string, std::string> user_ids;
  std::size_t submitted = 0;
  for (const auto& script : scenario.scripts) {
    UserRun run;
    try {
      std::tie(run.user_id, run.token) = transport->add_user(script.user);
    } catch (const ApiError& e) {
      throw HarnessError("cannot create harness user: " + std::string(e.what()));
    }
    auto logs = capture(script, scenario.name, scenario.seed, run.user_id);
    inject_spurious_focus(logs, options.spurious_focus_rate, scenario.seed);
    for (const auto& log : logs) run.docs.push_back(encode_log(log));
    submitted += run.docs.size();
    user_ids[script.user] = run.user_id;
    runs.push_back(std::move(run));
  }

  const auto* live = options.live ? &*options.live : nullptr;
  const auto submit_user = [&](const UserRun& run) {
    try {
      submit_all(*transport, live, run.token, run.docs);
    } catch (const ApiError& e) {
      throw HarnessError("submission rejected: " + std::string(e.what()));
    }
  };
  if (scenario.name == ScenarioName::ConcurrentUsers) {
    std::vector<std::exception_ptr> errors(runs.size());
    {
      std::vector<std::jthread> workers;
      for (std::size_t u = 0; u < runs.size(); ++u) {
        workers.emplace_back([&, u] {
          try {
            submit_user(runs[u]);
          } catch (...) {
            errors[u] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (const auto& run : runs) submit_user(run);
  }

  std::vector<SessionLog> observed;
  try {
    for (const auto& run : runs) {
      for (auto& log : transport->fetch(run.token, run.user_id)) observed.push_back(std::move(log));
    }
  } catch (const ApiError& e) {
    throw HarnessError("read-back failed: " + std::string(e.what()));
  }

  auto result = score_sessions(scenario.expected, observed, user_ids);
  result.name = std::string(to_string(scenario.name));
  if (transport->counts_total() && transport->total_logs() != submitted) {
    result.mismatches.push_back({{}, std::nullopt, std::nullopt, "stored log count differs from submitted"});
  }
  return result;
}

// --- harness ----------------------------------------------------------------------

bool HarnessReport::all_passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const HarnessRow& r) { return r.passed; });
}

std::string HarnessReport::table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-34s %9s %7s %10s  %-26s %s\n", "scenario", "precision", "recall",
                "mismatches", "requirement", "result");
  out += line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-34s %9s %7s %10zu  %-26s %s\n", row.result.name.c_str(),
                  fmt2(row.result.precision()).c_str(), fmt2(row.result.recall()).c_str(),
                  row.result.mismatches.size(), row.requirement.c_str(), row.passed ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

Json HarnessReport::to_json() const {
  Json j;
  auto& arr = j["scenarios"] = Json::array();
  for (const auto& row : rows) {
    Json r;
    r["name"] = row.result.name;
    r["precision"] = row.result.precision();
    r["recall"] = row.result.recall();
    r["expected"] = row.result.expected_count;
    r["observed"] = row.result.observed_count;
    r["matched"] = row.result.matched;
    r["mismatch_count"] = row.result.mismatches.size();
    r["injected"] = row.injected;
    r["requirement"] = row.requirement;
    r["passed"] = row.passed;
    arr.push_back(std::move(r));
  }
  j["passed"] = all_passed();
  return j;
}

HarnessReport run_harness(const HarnessConfig& config) {
  HarnessReport report;
  PipelineOptions base;
  base.live = config.live;

  const auto run_many = [&](ScenarioName name, const PipelineOptions& opts) {
    ScenarioResult total;
    total.name = std::string(to_string(name));
    for (std::size_t k = 0; k < std::max<std::size_t>(config.runs, 1); ++k) {
      total.merge(run_pipeline(generate(name, config.seed + k, config.generate), opts));
    }
    return total;
  };

  for (const auto name : config.scenarios) {
    HarnessRow row;
    row.result = run_many(name, base);
    row.requirement = "precision=1.00 recall=1.00";
    row.passed = row.result.matched == row.result.expected_count &&
                 row.result.matched == row.result.observed_count && row.result.mismatches.empty();
    report.rows.push_back(std::move(row));
  }

  const bool wants_focus = std::find(config.scenarios.begin(), config.scenarios.end(),
                                     ScenarioName::FocusSwitching) != config.scenarios.end();
  if (config.spurious_focus_rate > 0 && wants_focus) {
    auto opts = base;
    opts.spurious_focus_rate = config.spurious_focus_rate;
    HarnessRow row;
    row.injected = true;
    row.result = run_many(ScenarioName::FocusSwitching, opts);
    row.result.name = "focus_switching+spurious(" + fmt2(config.spurious_focus_rate) + ")";
    row.requirement = "precision<1.00 recall=1.00";
    row.passed = row.result.precision() < 1.0 && row.result.matched == row.result.expected_count;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace codewatch::harness
