#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "codewatch/event_model.hpp"

namespace codewatch::harness {

enum class ScenarioName : std::uint8_t {
  InsertionAccuracy,
  DeletionDetection,
  CopyPaste,
  FocusSwitching,
  BackAndForth,
  MultiFile,
  LoadSingleUser,
  ConcurrentUsers,
};

inline constexpr std::array<ScenarioName, 8> kAllScenarios = {
    ScenarioName::InsertionAccuracy, ScenarioName::DeletionDetection, ScenarioName::CopyPaste,
    ScenarioName::FocusSwitching,    ScenarioName::BackAndForth,      ScenarioName::MultiFile,
    ScenarioName::LoadSingleUser,    ScenarioName::ConcurrentUsers,
};

std::string_view to_string(ScenarioName name);
std::optional<ScenarioName> parse_scenario_name(std::string_view tag);

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One simulated editor action at an absolute time.
struct EditorAction {
  enum class Kind : std::uint8_t {
    OpenFile,      // file becomes the active editor
    TypeKeys,      // keystrokes, one character at a time
    AtomicInsert,  // one editor change inserting `text` (suggestion accept, external paste)
    Remove,        // one editor change removing `text`
    Copy,          // in-editor copy command
    Paste,         // in-editor paste command followed by its document change
    WindowAway,    // editor window loses OS focus
    WindowBack,    // editor window regains OS focus
    CloseFile,     // active editor closed
  };

  Kind kind = Kind::OpenFile;
  EpochMs time = 0;
  std::string text;
  std::string line;
  std::string file;

  friend bool operator==(const EditorAction&, const EditorAction&) = default;
};

struct UserScript {
  std::string user;  // scenario-local user name
  std::vector<EditorAction> actions;

  friend bool operator==(const UserScript&, const UserScript&) = default;
};

/// Ground-truth events of one file session, Start and End included.
struct ExpectedSession {
  std::string session_id;
  std::string user;
  std::string file_path;
  std::vector<InteractionEvent> events;

  friend bool operator==(const ExpectedSession&, const ExpectedSession&) = default;
};

struct Scenario {
  ScenarioName name = ScenarioName::InsertionAccuracy;
  std::uint64_t seed = 0;
  std::vector<UserScript> scripts;
  std::vector<ExpectedSession> expected;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct GenerateOptions {
  std::size_t load_events = 10'000;    // load_single_user session size
  std::size_t concurrent_users = 10;   // concurrent_users user count
  std::size_t sessions_per_user = 100; // concurrent_users logs per user
};

/// Deterministic for a fixed (name, seed, options).
Scenario generate(ScenarioName name, std::uint64_t seed, const GenerateOptions& options = {});

/// Session id scheme shared by the generator and the capture model.
std::string session_id_for(ScenarioName name, std::uint64_t seed, std::string_view user, std::size_t ordinal);

/// Model of the editor plugin's capture rules: keystrokes are dropped,
/// atomic changes of at least four characters become Insertions, removals
/// become Deletions, a Paste command emits Paste plus the Insertion of its
/// change, window focus maps to Unfocus/Focus, and switching or closing the
/// active file emits End and starts a new session.
std::vector<SessionLog> capture(const UserScript& script, ScenarioName name, std::uint64_t seed,
                                std::string_view user_id, std::string_view client_version = "harness-sim/1");

/// Inserts redundant Focus events after non-final events with probability
/// `rate`, and at least once when `rate` is positive. The logs stay valid.
void inject_spurious_focus(std::vector<SessionLog>& logs, double rate, std::uint64_t seed);

struct Mismatch {
  std::string session_id;
  std::optional<InteractionEvent> expected;
  std::optional<InteractionEvent> observed;
  std::string reason;
};

struct ScenarioResult {
  std::string name;
  std::size_t expected_count = 0;
  std::size_t observed_count = 0;
  std::size_t matched = 0;
  std::vector<Mismatch> mismatches;

  /// matched / observed, 1 when nothing was observed and nothing expected.
  double precision() const;
  /// matched / expected, 1 when nothing was expected.
  double recall() const;
  void merge(const ScenarioResult& other);
};

/// Aligns the two sequences on (kind, text, line) as a longest common
/// subsequence. Unpaired observed events cost precision, unpaired expected
/// events cost recall. A pair whose observed time runs backwards relative to
/// the previous pair is counted as a mismatch on both sides. Exact timestamps
/// are never compared.
ScenarioResult score(std::span<const InteractionEvent> expected, std::span<const InteractionEvent> observed,
                     std::string_view session_id = {});

/// Scores observed logs against expected sessions joined on session_id.
/// `user_ids` maps scenario user names to the ids logs must be attributed to.
ScenarioResult score_sessions(std::span<const ExpectedSession> expected, std::span<const SessionLog> observed,
                              const std::map<std::string, std::string>& user_ids);

/// Where scenario logs go.
struct LiveTarget {
  std::string url;
  /// Admin account used to create per-run users. When the service has no
  /// users it is bootstrapped with these credentials.
  std::string admin_username = "harness-admin";
  std::string admin_credential = "harness-admin-credential";
};

struct PipelineOptions {
  std::optional<LiveTarget> live;  // nullopt: in-process service
  double spurious_focus_rate = 0;
};

/// Captures the scenario's scripts into logs, submits them through
/// register_log (in parallel per user for concurrent_users), reads every
/// user's logs back, checks attribution and scores against ground truth.
ScenarioResult run_pipeline(const Scenario& scenario, const PipelineOptions& options = {});

struct HarnessConfig {
  std::uint64_t seed = 1;
  std::size_t runs = 50;  // seeds seed .. seed+runs-1 per scenario
  GenerateOptions generate;
  std::optional<LiveTarget> live;
  double spurious_focus_rate = 0.10;  // rate for the extra injected row
  std::vector<ScenarioName> scenarios{kAllScenarios.begin(), kAllScenarios.end()};
};

struct HarnessRow {
  ScenarioResult result;
  bool injected = false;
  bool passed = false;
  std::string requirement;
};

struct HarnessReport {
  std::vector<HarnessRow> rows;
  bool all_passed() const;
  std::string table() const;
  Json to_json() const;
};

/// Runs every configured scenario, plus focus_switching with spurious
/// injection when the rate is positive. Clean rows must score 1.00/1.00;
/// the injected row must show precision below 1.00 with recall 1.00.
HarnessReport run_harness(const HarnessConfig& config);

}  // namespace codewatch::harness
