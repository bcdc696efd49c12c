// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "codewatch/classifier.hpp"
#include "codewatch/harness.hpp"
#include "codewatch/http_api.hpp"
#include "codewatch/session_analysis.hpp"
#include "oracles.hpp"

using namespace codewatch;
namespace fs = std::filesystem;

namespace {

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckFailed(what);
}

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ok && secs > budget_s) {
    ok = false;
    detail += " (over budget)";
  }
  if (!ok) ++failures;
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.3fs/%.0fs", secs, budget_s);
  std::cout << (ok ? "PASS " : "FAIL ") << name << " [" << timing << "] " << detail << std::endl;
}

// Live service on an ephemeral port over a file store in a scratch directory.
class LiveService {
 public:
  LiveService()
      : dir_(fs::temp_directory_path() / ("codewatch-accept-" + std::to_string(::getpid()))),
        repo_(prepare(dir_)),
        service_(repo_, config()),
        server_(service_) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::jthread([this] { server_.listen(); });
    server_.wait_until_ready();
  }
  ~LiveService() {
    server_.stop();
    thread_ = {};
    fs::remove_all(dir_);
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  static const fs::path& prepare(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }
  static ServiceConfig config() {
    ServiceConfig c;
    c.fast_credential_hash = true;
    return c;
  }

  fs::path dir_;
  FileRepository repo_;
  IngestionService service_;
  HttpServer server_;
  int port_ = 0;
  std::jthread thread_;
};

std::string schema_conformance() {
  int cases = 0;
  for (auto kind : kAllEventKinds) {
    for (int mask = 0; mask < 4; ++mask) {
      InteractionEvent e{kind, 1000, std::nullopt, std::nullopt};
      if (mask & 1) e.text = "return x";
      if (mask & 2) e.line = "    return x";
      const auto f = applicability(kind);
      const bool allowed = ((mask & 1) != 0) == f.text && ((mask & 2) != 0) == f.line;
      require(validate_event(e).ok() == allowed, std::string(to_string(kind)) + " mask " + std::to_string(mask));
      ++cases;
    }
  }
  const auto r3 = validate_event({EventKind::Insertion, 1, "abc", "abc"});
  const auto r4 = validate_event({EventKind::Insertion, 1, "abcd", "abcd"});
  require(!r3.ok() && r3.violations == std::vector<std::string>{"insertion payload ≤ 3 chars"}, "3-char insertion");
  require(r4.ok(), "4-char insertion");
  cases += 2;
  return std::to_string(cases) + " cases";
}

// Each mutation must be rejected with exactly the named rule among its violations.
struct Mutation {
  std::string expect;
  std::function<void(Json&, std::mt19937_64&)> apply;
};

std::string codec_round_trip() {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto log = oracle::random_valid_log(rng);
    const auto enc = encode_log(log);
    require(decode_log(enc) == log, "round trip " + std::to_string(i));
    require(encode_log(decode_log(enc)) == enc, "re-encode " + std::to_string(i));
  }

  const auto middle = [](const Json& d, std::mt19937_64& r) { return 1 + r() % (d["events"].size() - 2); };
  const std::vector<Mutation> mutations = {
      {"user_id required", [](Json& d, auto&) { d.erase("user_id"); }},
      {"field session_id must not be null", [](Json& d, auto&) { d["session_id"] = nullptr; }},
      {"events must be non-empty", [](Json& d, auto&) { d["events"] = Json::array(); }},
      {"first event must be Start", [](Json& d, auto&) { d["events"][0]["type"] = "Focus"; }},
      {"last event must be End", [](Json& d, auto&) { d["events"].back()["type"] = "Unfocus"; }},
      {"non-monotonic timestamps", [](Json& d, auto&) { d["events"].back()["time"] = 0; }},
      {"time must be non-negative", [](Json& d, auto&) { d["events"][0]["time"] = -5; }},
      {"field text not applicable to Start", [](Json& d, auto&) { d["events"][0]["text"] = "abcd"; }},
      {"insertion payload ≤ 3 chars",
       [&](Json& d, auto& r) {
         auto& e = d["events"][middle(d, r)];
         e = Json{{"type", "Insertion"}, {"time", e["time"]}, {"text", "abc"}, {"line", "abc"}};
       }},
      {"field text required for Copy",
       [&](Json& d, auto& r) {
         auto& e = d["events"][middle(d, r)];
         e = Json{{"type", "Copy"}, {"time", e["time"]}};
       }},
  };
  int rejected = 0;
  for (int i = 0; i < 100; ++i) {
    const auto& m = mutations[i % mutations.size()];
    auto log = oracle::random_valid_log(rng);
    if (log.events.size() < 3) log.events.insert(log.events.begin() + 1, {EventKind::Focus, log.events[0].time, {}, {}});
    auto doc = log_to_json(log);
    m.apply(doc, rng);
    try {
      decode_log(doc.dump());
    } catch (const ValidationFailed& e) {
      bool named = false;
      for (const auto& v : e.violations()) named |= v.ends_with(m.expect);
      require(named, "mutation '" + m.expect + "' reported other violations");
      ++rejected;
      continue;
    }
    throw CheckFailed("mutation '" + m.expect + "' accepted");
  }
  return "1000 round trips, " + std::to_string(rejected) + " mutations rejected";
}

std::string similarity_vs_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> len(0, 80);
  int disagreements = 0;
  for (int i = 0; i < 10'000; ++i) {
    // Small alphabet so pairs have real overlap.
    const auto a = oracle::random_ascii(rng, len(rng), "abcde ");
    const auto b = oracle::random_ascii(rng, len(rng), "abcde ");
    if (similarity(a, b) != oracle::similarity(a, b)) ++disagreements;
  }
  require(disagreements == 0, std::to_string(disagreements) + " disagreements");
  return "10000 pairs, 0 disagreements";
}

std::string threshold_boundaries() {
  const struct {
    std::size_t edits;
    int score;
    LineLabelKind label;
  } cases[] = {{21, 79, LineLabelKind::UserWritten},
               {20, 80, LineLabelKind::AIModified},
               {6, 94, LineLabelKind::AIModified},
               {5, 95, LineLabelKind::AIGenerated}};
  std::ostringstream out;
  for (const auto& c : cases) {
    const std::string hist(100, 'a');
    std::string fin = hist;
    for (std::size_t i = 0; i < c.edits; ++i) fin[i] = 'b';
    HistoricalLineSet h;
    h.lines.push_back({hist, 0, 1});
    const auto l = label_line(fin, h);
    require(oracle::similarity(hist, fin) == c.score, "constructed pair misses " + std::to_string(c.score));
    require(l.best_score == c.score && l.label == c.label, "score " + std::to_string(c.score));
    out << c.score << "->" << to_string(l.label) << " ";
  }
  return out.str();
}

std::string corpus_and_confusion() {
  const std::vector<std::string> history = {
      "def load_config(path):",          "    with open(path) as fh:",      "        return json.load(fh)",
      "def save_config(path, cfg):",     "    json.dump(cfg, open(path, 'w'))", "total = sum(values) / len(values)",
      "print('processing finished ok')",
  };
  const std::string final_code =
      "def load_config(path):\n    with open(path) as fh:\n        return json.load(fh)\n"
      "def save_config(path, cfg):\n    json.dump(cfg, open(path, 'w'))\n"
      "total = sum(vals) / len(vals)\nprint('processing done ok')\n"
      "import sys\nfor k in range(3): sys.exit(k)\n# hand written note\n";
  SessionLog log{"s", "u", "f.py", "1", {}};
  EpochMs t = 0;
  log.events.push_back({EventKind::Start, t, {}, {}});
  for (const auto& h : history) log.events.push_back({EventKind::Insertion, ++t, h, h});
  log.events.push_back({EventKind::End, ++t, {}, {}});
  const std::vector<SessionLog> logs = {log};
  const auto report = classify_submission(final_code, logs);
  require(report.labels.size() == 10, "expected 10 labeled lines");
  for (const auto& l : report.labels) {
    int best = 0;
    for (const auto& h : history) best = std::max(best, oracle::similarity(l.normalized, normalize_line(h)));
    require(oracle::label(best) == to_string(l.label), "line " + std::to_string(l.line_index) + " disagrees");
  }
  require(report.summary.percentages == std::array<double, 3>{50.0, 20.0, 30.0}, "percentages not 50/20/30");

  using L = LineLabelKind;
  const std::vector<L> truth = {L::AIGenerated, L::AIGenerated, L::AIGenerated, L::AIModified, L::AIModified,
                                L::UserWritten, L::UserWritten, L::UserWritten, L::UserWritten};
  const std::vector<L> pred = {L::AIGenerated, L::AIGenerated, L::AIModified, L::AIModified, L::UserWritten,
                               L::UserWritten, L::UserWritten, L::UserWritten, L::AIGenerated};
  const auto r = evaluate(pred, truth);
  using Row = std::array<std::size_t, 3>;
  require(r.confusion[0] == Row{2, 1, 0} && r.confusion[1] == Row{0, 1, 1} && r.confusion[2] == Row{1, 0, 3},
          "confusion matrix");
  require(r.per_class[0].precision == 2.0 / 3.0 && r.per_class[1].precision == 0.5 &&
              r.per_class[2].precision == 0.75 && r.per_class[1].recall == 0.5 && r.accuracy == 6.0 / 9.0,
          "per-class metrics");
  return "50.0/20.0/30.0, 9-line confusion exact";
}

std::string harness_in_process() {
  harness::HarnessConfig cfg;
  const auto report = harness::run_harness(cfg);
  require(report.all_passed(), "\n" + report.table());
  const auto& inj = report.rows.back().result;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu rows, injected precision %.2f recall %.2f", report.rows.size(),
                inj.precision(), inj.recall());
  return buf;
}

std::string concurrent_live(const LiveService& live) {
  ApiClient admin(live.url());
  admin.create_user("admin", "admin-pw", Permission::Admin);
  admin.login("admin", "admin-pw");

  constexpr int kUsers = 10;
  constexpr int kLogs = 100;
  std::vector<std::string> user_ids(kUsers);
  for (int u = 0; u < kUsers; ++u) {
    user_ids[u] = admin.create_user("user" + std::to_string(u), "pw" + std::to_string(u), Permission::Subject)["user_id"];
  }
  std::vector<std::set<std::string>> sent(kUsers);
  std::vector<std::string> errors(kUsers);
  {
    std::vector<std::jthread> workers;
    for (int u = 0; u < kUsers; ++u) {
      workers.emplace_back([&, u] {
        try {
          ApiClient c(live.url());
          c.login("user" + std::to_string(u), "pw" + std::to_string(u));
          std::mt19937_64 rng(1000 + u);
          for (int i = 0; i < kLogs; ++i) {
            auto log = oracle::random_valid_log(rng, 10);
            log.user_id = user_ids[u];
            log.session_id = "u" + std::to_string(u) + "-" + std::to_string(i);
            c.register_log(log);
            sent[u].insert(log.session_id);
          }
        } catch (const std::exception& e) {
          errors[u] = e.what();
        }
      });
    }
  }
  for (const auto& e : errors) require(e.empty(), e);

  std::size_t total = 0;
  for (int u = 0; u < kUsers; ++u) {
    std::set<std::string> got;
    for (const auto& doc : admin.query_logs(QueryFilter{user_ids[u], {}, {}, {}})) {
      require(doc["user_id"] == user_ids[u], "misattributed log");
      got.insert(doc["session_id"].get<std::string>());
    }
    require(got == sent[u], "user " + std::to_string(u) + " logs differ");
    total += got.size();
  }
  require(admin.query_logs({}).size() == 1000, "store holds other than 1000 logs");
  return std::to_string(total) + " logs retrieved and attributed";
}

std::string large_session_live(const LiveService& live) {
  ApiClient admin(live.url());
  admin.login("admin", "admin-pw");
  std::mt19937_64 rng(5);
  SessionLog log{"big-session", "load-user", "big.py", "1", {}};
  EpochMs t = 1'700'000'000'000;
  log.events.push_back({EventKind::Start, t, {}, {}});
  while (log.events.size() < 9'999) {
    t += static_cast<EpochMs>(rng() % 50);
    switch (rng() % 4) {
      case 0:
        log.events.push_back({EventKind::Insertion, t, "value_" + std::to_string(rng() % 1000), "x = 1"});
        break;
      case 1:
        log.events.push_back({EventKind::Deletion, t, "v", "x = "});
        break;
      case 2:
        log.events.push_back({EventKind::Unfocus, t, {}, {}});
        break;
      default:
        log.events.push_back({EventKind::Focus, t, {}, {}});
    }
  }
  log.events.push_back({EventKind::End, t + 1, {}, {}});
  admin.register_log(log);
  const auto docs = admin.query_logs(QueryFilter{"load-user", {}, {}, {}});
  require(docs.size() == 1, "expected one stored session");
  require(log_from_json(docs[0]) == log, "session changed in round trip");
  return "10000 events intact";
}

std::string conservation() {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 1000; ++i) {
    const auto log = oracle::random_valid_log(rng, 40);
    const auto t = reconstruct(log);
    const auto m = session_metrics(t);
    const auto span = log.events.back().time - log.events.front().time;
    require(m.focused_ms + m.unfocused_ms == span, "span not conserved in log " + std::to_string(i));
    std::size_t insertions = 0;
    for (const auto& e : log.events) insertions += e.kind == EventKind::Insertion;
    std::size_t classified = 0;
    for (const auto& ins : t.insertions) {
      classified += (ins.origin == InsertionOrigin::PasteInIde) + (ins.origin == InsertionOrigin::ExternalOrCgt);
    }
    require(t.insertions.size() == insertions && classified == insertions, "origin classes in log " + std::to_string(i));
  }
  return "1000 logs conserved";
}

}  // namespace

int main() {
  criterion("event schema conformance", 1, schema_conformance);
  criterion("codec round trip and rejection", 10, codec_round_trip);
  criterion("similarity vs edit-distance oracle", 30, similarity_vs_oracle);
  criterion("threshold boundaries 79/80/94/95", 1, threshold_boundaries);
  criterion("synthetic corpus and confusion matrix", 1, corpus_and_confusion);
  criterion("harness scenarios in-process", 120, harness_in_process);
  {
    LiveService live;
    criterion("concurrent ingestion 10x100 live", 60, [&] { return concurrent_live(live); });
    criterion("single 10000-event session live", 5, [&] { return large_session_live(live); });
  }
  criterion("session conservation and origin classes", 10, conservation);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
