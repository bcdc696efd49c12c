#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codewatch/event_model.hpp"
#include "codewatch/session_analysis.hpp"

namespace codewatch {

enum class LineLabelKind : std::uint8_t { AIGenerated, AIModified, UserWritten };

inline constexpr std::array<LineLabelKind, 3> kAllLabelKinds = {
    LineLabelKind::AIGenerated, LineLabelKind::AIModified, LineLabelKind::UserWritten};

std::string_view to_string(LineLabelKind kind);
std::optional<LineLabelKind> parse_label_kind(std::string_view tag);

inline constexpr int kAiGeneratedThreshold = 95;
inline constexpr int kAiModifiedThreshold = 80;

/// Threshold rule: >= 95 generated, 80..94 modified, below 80 user-written.
constexpr LineLabelKind label_for_score(int score) {
  if (score >= kAiGeneratedThreshold) return LineLabelKind::AIGenerated;
  if (score >= kAiModifiedThreshold) return LineLabelKind::AIModified;
  return LineLabelKind::UserWritten;
}

/// Strips surrounding whitespace and collapses inner whitespace runs to one
/// space. Case is preserved.
std::string normalize_line(std::string_view raw);

/// Levenshtein distance over Unicode scalar values.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

/// round_half_up(100 * (1 - distance / max_len)); 100 for two empty strings.
int similarity(std::string_view a, std::string_view b);

/// Pluggable 0..100 line similarity. Must be symmetric and return 100 for
/// equal inputs.
using SimilarityMetric = std::function<int(std::string_view, std::string_view)>;

struct LineLabel {
  std::size_t line_index = 0;
  std::string content;
  std::string normalized;
  LineLabelKind label = LineLabelKind::UserWritten;
  int best_score = 0;
  std::optional<std::string> matched_line;

  friend bool operator==(const LineLabel&, const LineLabel&) = default;
};

/// Scores `final_line` against every historical line; the earliest line
/// wins ties. An empty history gives score 0 and no match.
LineLabel label_line(std::string_view final_line, const HistoricalLineSet& history,
                     const SimilarityMetric& metric = similarity);

struct LabelSummary {
  std::array<std::size_t, 3> counts{};
  /// One decimal place, largest-remainder normalized to sum to 100.0.
  /// All zeros when nothing was labeled.
  std::array<double, 3> percentages{};

  std::size_t total() const { return counts[0] + counts[1] + counts[2]; }
};

/// Splits a 100% total across counts in tenths of a percent so the parts sum
/// exactly to 1000 (largest remainder, ties to the lower class index).
std::array<int, 3> percentage_tenths(const std::array<std::size_t, 3>& counts);

struct ClassificationReport {
  std::vector<LineLabel> labels;
  std::vector<std::size_t> skipped_lines;
  LabelSummary summary;
};

struct ClassifyOptions {
  HistoryOptions history;
  SimilarityMetric metric = similarity;
};

ClassificationReport classify_submission(std::string_view final_code, std::span<const SessionLog> logs,
                                         const ClassifyOptions& options = {});
ClassificationReport classify_lines(std::string_view final_code, const HistoricalLineSet& history,
                                    const SimilarityMetric& metric = similarity);

Json report_to_json(const ClassificationReport& report);
ClassificationReport report_from_json(const Json& doc);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool precision_degenerate = false;  // no predictions of this class
  bool recall_degenerate = false;     // no ground-truth instances of this class
};

struct EvaluationResult {
  /// confusion[truth][predicted]
  std::array<std::array<std::size_t, 3>, 3> confusion{};
  std::array<ClassMetrics, 3> per_class{};
  /// Macro averages over the three classes.
  ClassMetrics macro;
  double accuracy = 0;
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

EvaluationResult evaluate(const ClassificationReport& report, std::span<const LineLabelKind> ground_truth);
EvaluationResult evaluate(std::span<const LineLabelKind> predicted, std::span<const LineLabelKind> ground_truth);

Json evaluation_to_json(const EvaluationResult& result);

}  // namespace codewatch
