// Scenario generators and the plugin capture model.

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include "codewatch/harness.hpp"
#include "codewatch/text.hpp"

namespace codewatch::harness {

namespace {

constexpr std::array<std::string_view, 8> kScenarioTags = {
    "insertion_accuracy", "deletion_detection", "copy_paste",       "focus_switching",
    "back_and_forth",     "multi_file",         "load_single_user", "concurrent_users",
};

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

EpochMs gap(Rng& rng, EpochMs lo, EpochMs hi) { return std::uniform_int_distribution<EpochMs>(lo, hi)(rng); }

// Code-looking line of at least four characters.
std::string code_line(Rng& rng) {
  static constexpr std::array<std::string_view, 6> kTypes = {"int", "auto", "double", "size_t", "bool", "long"};
  static constexpr std::array<std::string_view, 8> kNames = {"count", "total", "index", "value",
                                                              "result", "offset", "limit", "step"};
  const auto name = std::string(kNames[pick(rng, kNames.size())]) + std::to_string(pick(rng, 100));
  const auto other = std::string(kNames[pick(rng, kNames.size())]);
  switch (pick(rng, 6)) {
    case 0:
      return std::string(kTypes[pick(rng, kTypes.size())]) + " " + name + " = " + other + " + " +
             std::to_string(pick(rng, 1000)) + ";";
    case 1: return "return " + name + ";";
    case 2: return "for (int i = 0; i < " + name + "; ++i) {";
    case 3: return "if (" + name + " > " + other + ") {";
    case 4: return name + " = compute(" + other + ", " + std::to_string(pick(rng, 50)) + ");";
    default: return "print(\"" + name + "\")";
  }
}

// One to three lines joined with '\n'.
std::string code_block(Rng& rng) {
  std::string block = code_line(rng);
  const auto extra = pick(rng, 3);
  for (std::size_t i = 0; i < extra; ++i) block += "\n    " + code_line(rng);
  return block;
}

std::string first_line(const std::string& block) { return block.substr(0, block.find('\n')); }

std::string short_text(Rng& rng) {
  static constexpr std::string_view kChars = "abcxyz;(){}=+-";
  std::string s;
  const auto n = 1 + pick(rng, 3);
  for (std::size_t i = 0; i < n; ++i) s += kChars[pick(rng, kChars.size())];
  return s;
}

std::string removed_text(Rng& rng, const std::string& line) {
  if (pick(rng, 3) == 0) return std::string(1, line[pick(rng, line.size())]);
  const auto begin = pick(rng, line.size());
  const auto len = 1 + pick(rng, line.size() - begin);
  return line.substr(begin, len);
}

InteractionEvent bare(EventKind kind, EpochMs t) { return {kind, t, std::nullopt, std::nullopt}; }

// Builds a user's action script and, independently, the events a faithful
// capture must produce for it.
class ScriptBuilder {
 public:
  ScriptBuilder(ScenarioName name, std::uint64_t seed, std::string user, Rng& rng, EpochMs start)
      : name_(name), seed_(seed), rng_(rng), now_(start) {
    script_.user = std::move(user);
  }

  Rng& rng() { return rng_; }
  EpochMs now() const { return now_; }
  void advance(EpochMs lo, EpochMs hi) { now_ += gap(rng_, lo, hi); }
  bool has_file() const { return current_.has_value(); }
  std::size_t session_event_count() const { return current_ ? current_->events.size() : 0; }

  void open(const std::string& file) {
    if (current_) finish_session();
    push({EditorAction::Kind::OpenFile, now_, {}, {}, file});
    ExpectedSession s;
    s.session_id = session_id_for(name_, seed_, script_.user, sessions_.size() + 1);
    s.user = script_.user;
    s.file_path = file;
    s.events.push_back(bare(EventKind::Start, now_));
    current_ = std::move(s);
  }

  void close() {
    push({EditorAction::Kind::CloseFile, now_, {}, {}, {}});
    finish_session();
  }

  void type(const std::string& keys) { push({EditorAction::Kind::TypeKeys, now_, keys, {}, {}}); }

  void insert(const std::string& text, const std::string& line) {
    push({EditorAction::Kind::AtomicInsert, now_, text, line, {}});
    expect({EventKind::Insertion, now_, text, line});
  }

  void remove(const std::string& text, const std::string& line) {
    push({EditorAction::Kind::Remove, now_, text, line, {}});
    expect({EventKind::Deletion, now_, text, line});
  }

  void copy(const std::string& text) {
    push({EditorAction::Kind::Copy, now_, text, {}, {}});
    expect({EventKind::Copy, now_, text, std::nullopt});
  }

  void paste(const std::string& text, const std::string& line) {
    push({EditorAction::Kind::Paste, now_, text, line, {}});
    expect({EventKind::Paste, now_, text, std::nullopt});
    if (text::scalar_count(text) >= kMinInsertionChars) expect({EventKind::Insertion, now_, text, line});
  }

  void away() {
    push({EditorAction::Kind::WindowAway, now_, {}, {}, {}});
    expect(bare(EventKind::Unfocus, now_));
  }

  void back() {
    push({EditorAction::Kind::WindowBack, now_, {}, {}, {}});
    expect(bare(EventKind::Focus, now_));
  }

  void done(std::vector<UserScript>& scripts, std::vector<ExpectedSession>& expected) {
    if (current_) close();
    scripts.push_back(std::move(script_));
    for (auto& s : sessions_) expected.push_back(std::move(s));
  }

 private:
  void push(EditorAction a) { script_.actions.push_back(std::move(a)); }
  void expect(InteractionEvent e) {
    if (current_) current_->events.push_back(std::move(e));
  }
  void finish_session() {
    current_->events.push_back(bare(EventKind::End, now_));
    sessions_.push_back(std::move(*current_));
    current_.reset();
  }

  ScenarioName name_;
  std::uint64_t seed_;
  Rng& rng_;
  EpochMs now_;
  UserScript script_;
  std::optional<ExpectedSession> current_;
  std::vector<ExpectedSession> sessions_;
};

constexpr EpochMs kEpochBase = 1'700'000'000'000;

void gen_insertion_accuracy(ScriptBuilder& b) {
  b.open("src/main.py");
  const auto n = 10 + pick(b.rng(), 20);
  for (std::size_t i = 0; i < n; ++i) {
    b.advance(50, 3000);
    if (pick(b.rng(), 3) == 0) {
      b.type(short_text(b.rng()));  // keystrokes never become Insertions
    } else {
      const auto block = code_block(b.rng());
      b.insert(block, first_line(block));
    }
  }
  b.advance(10, 500);
}

void gen_deletion_detection(ScriptBuilder& b) {
  b.open("src/util.py");
  const auto n = 10 + pick(b.rng(), 20);
  for (std::size_t i = 0; i < n; ++i) {
    b.advance(50, 2000);
    const auto line = code_line(b.rng());
    if (pick(b.rng(), 2) == 0) {
      b.insert(line, line);
    } else if (pick(b.rng(), 4) == 0) {
      const auto block = code_block(b.rng()) + "\n" + line;  // multi-line removal
      b.remove(block, first_line(block));
    } else {
      b.remove(removed_text(b.rng(), line), line);
    }
  }
  b.advance(10, 500);
}

void gen_copy_paste(ScriptBuilder& b) {
  b.open("src/copy.py");
  const auto n = 5 + pick(b.rng(), 10);
  for (std::size_t i = 0; i < n; ++i) {
    b.advance(100, 2000);
    const auto block = code_block(b.rng());
    switch (pick(b.rng(), 4)) {
      case 0:
      case 1:
        b.copy(block);
        b.advance(50, 1500);
        b.paste(block, first_line(block));
        break;
      case 2:
        // Clipboard filled in a browser.
        b.away();
        b.advance(500, 5000);
        b.back();
        b.advance(20, 400);
        b.paste(block, first_line(block));
        break;
      default: {
        const auto tiny = short_text(b.rng());
        b.copy(tiny);
        b.advance(20, 400);
        b.paste(tiny, code_line(b.rng()));
        break;
      }
    }
  }
  b.advance(10, 500);
}

void gen_focus_switching(ScriptBuilder& b) {
  b.open("src/focus.py");
  const auto n = 5 + pick(b.rng(), 10);
  for (std::size_t i = 0; i < n; ++i) {
    b.advance(100, 3000);
    b.away();
    b.advance(200, 20000);
    b.back();
    if (pick(b.rng(), 2) == 0) {
      b.advance(50, 1000);
      const auto block = code_block(b.rng());
      b.insert(block, first_line(block));
    }
  }
  b.advance(10, 500);
}

void gen_back_and_forth(ScriptBuilder& b) {
  b.open("src/rapid.py");
  const auto n = 20 + pick(b.rng(), 30);
  for (std::size_t i = 0; i < n; ++i) {
    b.advance(0, 25);
    const auto block = code_block(b.rng());
    switch (pick(b.rng(), 4)) {
      case 0:
        // Accept a suggestion then immediately undo it.
        b.insert(block, first_line(block));
        b.advance(0, 15);
        b.remove(block, first_line(block));
        break;
      case 1: b.insert(block, first_line(block)); break;
      case 2: {
        const auto line = code_line(b.rng());
        b.remove(removed_text(b.rng(), line), line);
        break;
      }
      default: b.type(short_text(b.rng())); break;
    }
  }
  b.advance(0, 25);
}

void gen_multi_file(ScriptBuilder& b) {
  const auto files = 2 + pick(b.rng(), 3);
  const auto switches = 4 + pick(b.rng(), 5);
  std::size_t current = files;
  for (std::size_t s = 0; s < switches; ++s) {
    auto next = pick(b.rng(), files);
    if (next == current) next = (next + 1) % files;
    current = next;
    b.open("src/module_" + std::to_string(current) + ".py");
    const auto edits = 1 + pick(b.rng(), 4);
    for (std::size_t e = 0; e < edits; ++e) {
      b.advance(50, 2000);
      const auto block = code_block(b.rng());
      b.insert(block, first_line(block));
    }
    b.advance(10, 1000);
  }
}

void gen_load(ScriptBuilder& b, std::size_t target_events) {
  target_events = std::max<std::size_t>(target_events, 2);
  b.open("src/load.py");
  // Start is already counted; End takes the final slot.
  while (b.session_event_count() + 1 < target_events) {
    const auto remaining = target_events - 1 - b.session_event_count();
    b.advance(0, 40);
    const auto block = code_block(b.rng());
    const auto choice = remaining >= 2 ? pick(b.rng(), 5) : pick(b.rng(), 3);
    switch (choice) {
      case 0: b.insert(block, first_line(block)); break;
      case 1: {
        const auto line = code_line(b.rng());
        b.remove(removed_text(b.rng(), line), line);
        break;
      }
      case 2: b.copy(block); break;
      case 3: b.paste(block, first_line(block)); break;
      default:
        b.away();
        b.advance(1, 100);
        b.back();
        break;
    }
  }
  b.advance(0, 40);
}

void gen_user_sessions(ScriptBuilder& b, std::size_t sessions) {
  for (std::size_t s = 0; s < sessions; ++s) {
    b.open("src/task_" + std::to_string(pick(b.rng(), 5)) + ".py");
    const auto edits = 1 + pick(b.rng(), 4);
    for (std::size_t e = 0; e < edits; ++e) {
      b.advance(10, 1000);
      const auto block = code_block(b.rng());
      if (pick(b.rng(), 3) == 0) {
        b.remove(removed_text(b.rng(), first_line(block)), first_line(block));
      } else {
        b.insert(block, first_line(block));
      }
    }
    b.advance(10, 200);
    b.close();
    b.advance(10, 500);
  }
}

}  // namespace

std::string_view to_string(ScenarioName name) { return kScenarioTags[static_cast<std::size_t>(name)]; }

std::optional<ScenarioName> parse_scenario_name(std::string_view tag) {
  for (std::size_t i = 0; i < kScenarioTags.size(); ++i) {
    if (kScenarioTags[i] == tag) return static_cast<ScenarioName>(i);
  }
  return std::nullopt;
}

std::string session_id_for(ScenarioName name, std::uint64_t seed, std::string_view user, std::size_t ordinal) {
  return std::string(to_string(name)) + "-" + std::to_string(seed) + "-" + std::string(user) + "-" +
         std::to_string(ordinal);
}

Scenario generate(ScenarioName name, std::uint64_t seed, const GenerateOptions& options) {
  Scenario sc;
  sc.name = name;
  sc.seed = seed;
  // Mix the scenario into the stream so seeds are independent per scenario.
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(name) + 1);

  if (name == ScenarioName::ConcurrentUsers) {
    const auto users = std::max<std::size_t>(options.concurrent_users, 2);
    for (std::size_t u = 0; u < users; ++u) {
      char user[32];
      std::snprintf(user, sizeof user, "user%02zu", u + 1);
      ScriptBuilder b(name, seed, user, rng, kEpochBase + static_cast<EpochMs>(pick(rng, 1000)));
      gen_user_sessions(b, std::max<std::size_t>(options.sessions_per_user, 1));
      b.done(sc.scripts, sc.expected);
    }
    return sc;
  }

  ScriptBuilder b(name, seed, "user01", rng, kEpochBase);
  switch (name) {
    case ScenarioName::InsertionAccuracy: gen_insertion_accuracy(b); break;
    case ScenarioName::DeletionDetection: gen_deletion_detection(b); break;
    case ScenarioName::CopyPaste: gen_copy_paste(b); break;
    case ScenarioName::FocusSwitching: gen_focus_switching(b); break;
    case ScenarioName::BackAndForth: gen_back_and_forth(b); break;
    case ScenarioName::MultiFile: gen_multi_file(b); break;
    case ScenarioName::LoadSingleUser: gen_load(b, options.load_events); break;
    case ScenarioName::ConcurrentUsers: break;
  }
  b.done(sc.scripts, sc.expected);
  return sc;
}

// --- capture model ------------------------------------------------------------

std::vector<SessionLog> capture(const UserScript& script, ScenarioName name, std::uint64_t seed,
                                std::string_view user_id, std::string_view client_version) {
  std::vector<SessionLog> flushed;
  std::optional<SessionLog> active;
  std::size_t ordinal = 0;
  EpochMs last = 0;

  const auto end_session = [&](EpochMs t) {
    active->events.push_back({EventKind::End, t, std::nullopt, std::nullopt});
    flushed.push_back(std::move(*active));
    active.reset();
  };
  const auto emit = [&](InteractionEvent e) {
    if (active) active->events.push_back(std::move(e));
  };

  using Kind = EditorAction::Kind;
  for (const auto& a : script.actions) {
    last = a.time;
    switch (a.kind) {
      case Kind::OpenFile:
        if (active) end_session(a.time);
        active.emplace();
        active->session_id = session_id_for(name, seed, script.user, ++ordinal);
        active->user_id = std::string(user_id);
        active->file_path = a.file;
        active->client_version = std::string(client_version);
        active->events.push_back({EventKind::Start, a.time, std::nullopt, std::nullopt});
        break;
      case Kind::CloseFile:
        if (active) end_session(a.time);
        break;
      case Kind::TypeKeys:
        // Keystrokes accumulate and are discarded as noise.
        break;
      case Kind::AtomicInsert:
        if (text::scalar_count(a.text) >= kMinInsertionChars) emit({EventKind::Insertion, a.time, a.text, a.line});
        break;
      case Kind::Remove:
        if (!a.text.empty()) emit({EventKind::Deletion, a.time, a.text, a.line});
        break;
      case Kind::Copy:
        if (!a.text.empty()) emit({EventKind::Copy, a.time, a.text, std::nullopt});
        break;
      case Kind::Paste:
        if (a.text.empty()) break;
        emit({EventKind::Paste, a.time, a.text, std::nullopt});
        if (text::scalar_count(a.text) >= kMinInsertionChars) {
          emit({EventKind::Insertion, a.time, a.text, a.line});
        }
        break;
      case Kind::WindowAway: emit({EventKind::Unfocus, a.time, std::nullopt, std::nullopt}); break;
      case Kind::WindowBack: emit({EventKind::Focus, a.time, std::nullopt, std::nullopt}); break;
    }
  }
  if (active) end_session(last);
  return flushed;
}

void inject_spurious_focus(std::vector<SessionLog>& logs, double rate, std::uint64_t seed) {
  if (rate <= 0) return;
  Rng rng(seed ^ 0x5DEECE66DULL);
  std::bernoulli_distribution coin(std::min(rate, 1.0));
  bool injected = false;
  for (auto& log : logs) {
    std::vector<InteractionEvent> out;
    out.reserve(log.events.size() + log.events.size() / 4);
    for (std::size_t i = 0; i < log.events.size(); ++i) {
      out.push_back(log.events[i]);
      if (i + 1 < log.events.size() && coin(rng)) {
        out.push_back({EventKind::Focus, log.events[i].time, std::nullopt, std::nullopt});
        injected = true;
      }
    }
    log.events = std::move(out);
  }
  // A positive rate always yields at least one spurious event.
  if (!injected) {
    for (auto& log : logs) {
      if (log.events.size() < 2) continue;
      log.events.insert(log.events.begin() + 1, {EventKind::Focus, log.events.front().time, std::nullopt, std::nullopt});
      break;
    }
  }
}

}  // namespace codewatch::harness
