#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "codewatch/event_model.hpp"

namespace codewatch {

/// Default gap allowed between a Paste and the Insertion carrying its content.
inline constexpr EpochMs kDefaultPasteWindowMs = 500;

enum class InsertionOrigin : std::uint8_t {
  PasteInIde,      // preceded by an in-editor Paste command
  ExternalOrCgt,   // pasted from outside the editor or an accepted suggestion
};

std::string_view to_string(InsertionOrigin origin);

struct TimeInterval {
  EpochMs begin = 0;
  EpochMs end = 0;

  EpochMs length() const { return end - begin; }
  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

struct TimelineInsertion {
  std::size_t event_index = 0;  // position in SessionLog::events
  EpochMs time = 0;
  std::string text;
  std::string line;
  InsertionOrigin origin = InsertionOrigin::ExternalOrCgt;

  friend bool operator==(const TimelineInsertion&, const TimelineInsertion&) = default;
};

struct TimelineDeletion {
  std::size_t event_index = 0;
  EpochMs time = 0;
  std::string text;
  std::string line;

  friend bool operator==(const TimelineDeletion&, const TimelineDeletion&) = default;
};

/// A Paste with the Copy that filled the clipboard (when it happened inside
/// the editor) and the Insertion that carried the pasted content.
struct CopyPastePair {
  std::optional<std::size_t> copy_index;
  std::size_t paste_index = 0;
  std::optional<std::size_t> insertion_index;

  friend bool operator==(const CopyPastePair&, const CopyPastePair&) = default;
};

struct SessionTimeline {
  TimeInterval session_span;
  std::vector<TimeInterval> focus_intervals;
  std::vector<TimelineInsertion> insertions;
  std::vector<TimelineDeletion> deletions;
  std::vector<CopyPastePair> copy_paste_pairs;
  std::vector<std::size_t> unpaired_copies;

  friend bool operator==(const SessionTimeline&, const SessionTimeline&) = default;
};

struct ReconstructOptions {
  EpochMs paste_window_ms = kDefaultPasteWindowMs;
};

/// Rebuilds the timeline of a valid session log. Deterministic.
///
/// The file is focused from Start until the first Unfocus; Focus reopens an
/// interval and an Unfocus with no later Focus closes at End. Redundant
/// Focus/Unfocus events (already in that state) are absorbed.
///
/// An Insertion pairs with the most recent unconsumed Paste no more than
/// `paste_window_ms` before it, preferring a Paste with identical text.
/// A Paste pairs with the latest earlier Copy carrying the same text.
SessionTimeline reconstruct(const SessionLog& log, const ReconstructOptions& options = {});

struct SessionMetrics {
  EpochMs total_duration_ms = 0;
  EpochMs focused_ms = 0;
  EpochMs unfocused_ms = 0;
  std::size_t insertion_chars = 0;
  std::size_t deletion_chars = 0;
  std::size_t paste_count = 0;
  std::size_t external_or_cgt_insertions = 0;

  friend bool operator==(const SessionMetrics&, const SessionMetrics&) = default;
};

SessionMetrics session_metrics(const SessionTimeline& timeline);

Json timeline_to_json(const SessionTimeline& timeline);
Json metrics_to_json(const SessionMetrics& metrics);

/// What feeds the historical line set.
struct HistoryOptions {
  bool include_text = true;        // split each event's text on newlines
  bool include_line_field = true;  // add each event's line field
  bool include_paste = false;      // widen to Paste text
  bool include_deletion = false;   // widen to Deletion text/line
};

struct HistoricalLine {
  std::string normalized;
  std::size_t log_index = 0;
  std::size_t event_index = 0;

  friend bool operator==(const HistoricalLine&, const HistoricalLine&) = default;
};

struct HistoricalLineSet {
  std::vector<HistoricalLine> lines;

  bool empty() const { return lines.empty(); }
  std::size_t size() const { return lines.size(); }
};

/// Collects normalized, non-empty lines from Insertion events (and the
/// optional widenings) in log order, then event order.
HistoricalLineSet extract_historical_lines(std::span<const SessionLog> logs,
                                           const HistoryOptions& options = {});

}  // namespace codewatch
