#include "codewatch/session_analysis.hpp"

#include "codewatch/classifier.hpp"
#include "codewatch/text.hpp"

namespace codewatch {

namespace {

struct PendingPaste {
  std::size_t event_index;
  EpochMs time;
  const std::string* text;
  std::size_t pair_index;
};

void push_interval(std::vector<TimeInterval>& out, EpochMs begin, EpochMs end) {
  if (end > begin) out.push_back({begin, end});
}

}  // namespace

std::string_view to_string(InsertionOrigin origin) {
  return origin == InsertionOrigin::PasteInIde ? "paste_in_ide" : "external_or_cgt";
}

SessionTimeline reconstruct(const SessionLog& log, const ReconstructOptions& options) {
  SessionTimeline tl;
  if (log.events.empty()) return tl;
  const auto& events = log.events;
  tl.session_span = {events.front().time, events.back().time};

  bool focused = true;
  EpochMs gained = tl.session_span.begin;

  std::vector<PendingPaste> pending;
  std::vector<std::size_t> copies;
  std::vector<bool> copy_used;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    switch (e.kind) {
      case EventKind::Unfocus:
        if (focused) {
          push_interval(tl.focus_intervals, gained, e.time);
          focused = false;
        }
        break;
      case EventKind::Focus:
        if (!focused) {
          gained = e.time;
          focused = true;
        }
        break;
      case EventKind::Copy:
        copies.push_back(i);
        copy_used.push_back(false);
        break;
      case EventKind::Paste: {
        CopyPastePair pair;
        pair.paste_index = i;
        for (std::size_t k = copies.size(); k-- > 0;) {
          if (events[copies[k]].text == e.text) {
            pair.copy_index = copies[k];
            copy_used[k] = true;
            break;
          }
        }
        pending.push_back({i, e.time, &*e.text, tl.copy_paste_pairs.size()});
        tl.copy_paste_pairs.push_back(pair);
        break;
      }
      case EventKind::Insertion: {
        TimelineInsertion ins{i, e.time, e.text.value_or(""), e.line.value_or(""),
                              InsertionOrigin::ExternalOrCgt};
        std::optional<std::size_t> chosen;
        for (std::size_t k = pending.size(); k-- > 0;) {
          if (e.time - pending[k].time > options.paste_window_ms) break;
          if (*pending[k].text == ins.text) {
            chosen = k;
            break;
          }
          if (!chosen) chosen = k;
        }
        if (chosen) {
          tl.copy_paste_pairs[pending[*chosen].pair_index].insertion_index = i;
          pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(*chosen));
          ins.origin = InsertionOrigin::PasteInIde;
        }
        tl.insertions.push_back(std::move(ins));
        break;
      }
      case EventKind::Deletion:
        tl.deletions.push_back({i, e.time, e.text.value_or(""), e.line.value_or("")});
        break;
      case EventKind::Start:
      case EventKind::End:
        break;
    }
  }
  if (focused) push_interval(tl.focus_intervals, gained, tl.session_span.end);

  for (std::size_t k = 0; k < copies.size(); ++k) {
    if (!copy_used[k]) tl.unpaired_copies.push_back(copies[k]);
  }
  return tl;
}

SessionMetrics session_metrics(const SessionTimeline& tl) {
  SessionMetrics m;
  m.total_duration_ms = tl.session_span.length();
  EpochMs cursor = tl.session_span.begin;
  for (const auto& iv : tl.focus_intervals) {
    m.focused_ms += iv.length();
    m.unfocused_ms += iv.begin - cursor;
    cursor = iv.end;
  }
  m.unfocused_ms += tl.session_span.end - cursor;

  for (const auto& ins : tl.insertions) {
    m.insertion_chars += text::scalar_count(ins.text);
    if (ins.origin == InsertionOrigin::ExternalOrCgt) ++m.external_or_cgt_insertions;
  }
  for (const auto& del : tl.deletions) m.deletion_chars += text::scalar_count(del.text);
  m.paste_count = tl.copy_paste_pairs.size();
  return m;
}

Json timeline_to_json(const SessionTimeline& tl) {
  Json j;
  j["session_span"] = Json::array({tl.session_span.begin, tl.session_span.end});
  auto& focus = j["focus_intervals"] = Json::array();
  for (const auto& iv : tl.focus_intervals) focus.push_back(Json::array({iv.begin, iv.end}));

  auto& ins = j["insertion_events"] = Json::array();
  for (const auto& i : tl.insertions) {
    Json e;
    e["event_index"] = i.event_index;
    e["time"] = i.time;
    e["text"] = i.text;
    e["line"] = i.line;
    e["origin"] = to_string(i.origin);
    ins.push_back(std::move(e));
  }
  auto& del = j["deletion_events"] = Json::array();
  for (const auto& d : tl.deletions) {
    Json e;
    e["event_index"] = d.event_index;
    e["time"] = d.time;
    e["text"] = d.text;
    e["line"] = d.line;
    del.push_back(std::move(e));
  }
  auto& pairs = j["copy_paste_pairs"] = Json::array();
  for (const auto& p : tl.copy_paste_pairs) {
    Json e;
    e["copy_index"] = p.copy_index ? Json(*p.copy_index) : Json(nullptr);
    e["paste_index"] = p.paste_index;
    e["insertion_index"] = p.insertion_index ? Json(*p.insertion_index) : Json(nullptr);
    pairs.push_back(std::move(e));
  }
  j["unpaired_copies"] = tl.unpaired_copies;
  return j;
}

Json metrics_to_json(const SessionMetrics& m) {
  Json j;
  j["total_duration_ms"] = m.total_duration_ms;
  j["focused_ms"] = m.focused_ms;
  j["unfocused_ms"] = m.unfocused_ms;
  j["insertion_chars"] = m.insertion_chars;
  j["deletion_chars"] = m.deletion_chars;
  j["paste_count"] = m.paste_count;
  j["external_or_cgt_insertions"] = m.external_or_cgt_insertions;
  return j;
}

HistoricalLineSet extract_historical_lines(std::span<const SessionLog> logs, const HistoryOptions& options) {
  HistoricalLineSet set;
  const auto add = [&](std::string_view raw, std::size_t log_index, std::size_t event_index) {
    auto normalized = normalize_line(raw);
    if (!normalized.empty()) set.lines.push_back({std::move(normalized), log_index, event_index});
  };
  for (std::size_t li = 0; li < logs.size(); ++li) {
    const auto& events = logs[li].events;
    for (std::size_t ei = 0; ei < events.size(); ++ei) {
      const auto& e = events[ei];
      const bool wanted = e.kind == EventKind::Insertion ||
                          (options.include_paste && e.kind == EventKind::Paste) ||
                          (options.include_deletion && e.kind == EventKind::Deletion);
      if (!wanted) continue;
      if (options.include_text && e.text) {
        for (const auto& piece : text::split_lines(*e.text)) add(piece, li, ei);
      }
      if (options.include_line_field && e.line) add(*e.line, li, ei);
    }
  }
  return set;
}

}  // namespace codewatch
