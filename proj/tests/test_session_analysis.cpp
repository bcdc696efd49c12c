#include <gtest/gtest.h>

#include <random>

#include "codewatch/session_analysis.hpp"
#include "oracles.hpp"

using namespace codewatch;

namespace {

InteractionEvent ev(EventKind k, EpochMs t, std::optional<std::string> text = std::nullopt,
                    std::optional<std::string> line = std::nullopt) {
  return {k, t, std::move(text), std::move(line)};
}

SessionLog session(std::vector<InteractionEvent> events) {
  return SessionLog{"s", "u", "a.py", "1", std::move(events)};
}

// Focused time by walking the events with a single boolean state.
EpochMs focused_oracle(const SessionLog& log) {
  bool focused = true;
  EpochMs total = 0;
  EpochMs since = log.events.front().time;
  for (const auto& e : log.events) {
    if (e.kind == EventKind::Unfocus && focused) {
      total += e.time - since;
      focused = false;
    } else if (e.kind == EventKind::Focus && !focused) {
      focused = true;
      since = e.time;
    }
  }
  if (focused) total += log.events.back().time - since;
  return total;
}

}  // namespace

TEST(Reconstruct, FocusIntervals) {
  const auto t = reconstruct(session({ev(EventKind::Start, 0), ev(EventKind::Unfocus, 10), ev(EventKind::Focus, 20),
                                      ev(EventKind::End, 30)}));
  EXPECT_EQ(t.session_span, (TimeInterval{0, 30}));
  EXPECT_EQ(t.focus_intervals, (std::vector<TimeInterval>{{0, 10}, {20, 30}}));
}

TEST(Reconstruct, UnfocusedAtEndAndRedundantEvents) {
  const auto t = reconstruct(session({ev(EventKind::Start, 0), ev(EventKind::Focus, 2), ev(EventKind::Unfocus, 10),
                                      ev(EventKind::Unfocus, 12), ev(EventKind::End, 30)}));
  EXPECT_EQ(t.focus_intervals, (std::vector<TimeInterval>{{0, 10}}));
  const auto m = session_metrics(t);
  EXPECT_EQ(m.focused_ms, 10);
  EXPECT_EQ(m.unfocused_ms, 20);
}

TEST(Reconstruct, CopyPasteInsertion) {
  const auto log = session({ev(EventKind::Start, 0), ev(EventKind::Copy, 5, "x+1"), ev(EventKind::Paste, 8, "x+1"),
                            ev(EventKind::Insertion, 8, "x+1", "y = x+1"), ev(EventKind::End, 9)});
  const auto t = reconstruct(log);
  ASSERT_EQ(t.copy_paste_pairs.size(), 1u);
  EXPECT_EQ(t.copy_paste_pairs[0], (CopyPastePair{1, 2, 3}));
  ASSERT_EQ(t.insertions.size(), 1u);
  EXPECT_EQ(t.insertions[0].origin, InsertionOrigin::PasteInIde);
  const auto m = session_metrics(t);
  EXPECT_EQ(m.paste_count, 1u);
  EXPECT_EQ(m.external_or_cgt_insertions, 0u);
}

TEST(Reconstruct, InsertionWithoutPasteIsExternal) {
  const auto t = reconstruct(
      session({ev(EventKind::Start, 0), ev(EventKind::Insertion, 5, "def f():", "def f():"), ev(EventKind::End, 9)}));
  ASSERT_EQ(t.insertions.size(), 1u);
  EXPECT_EQ(t.insertions[0].origin, InsertionOrigin::ExternalOrCgt);
}

TEST(Reconstruct, PasteWindow) {
  const auto log = session({ev(EventKind::Start, 0), ev(EventKind::Paste, 100, "abcd"),
                            ev(EventKind::Insertion, 601, "abcd", "abcd"), ev(EventKind::End, 700)});
  EXPECT_EQ(reconstruct(log).insertions[0].origin, InsertionOrigin::ExternalOrCgt);
  EXPECT_EQ(reconstruct(log, {501}).insertions[0].origin, InsertionOrigin::PasteInIde);

  // An editor may transform pasted text; within the window it still pairs.
  const auto changed = session({ev(EventKind::Start, 0), ev(EventKind::Paste, 100, "abcd"),
                                ev(EventKind::Insertion, 300, "  abcd", "  abcd"), ev(EventKind::End, 700)});
  EXPECT_EQ(reconstruct(changed).insertions[0].origin, InsertionOrigin::PasteInIde);
}

TEST(Reconstruct, PasteConsumedOnce) {
  const auto log = session({ev(EventKind::Start, 0), ev(EventKind::Paste, 10, "abcd"),
                            ev(EventKind::Insertion, 20, "abcd", "abcd"), ev(EventKind::Insertion, 30, "abcd", "abcd"),
                            ev(EventKind::End, 40)});
  const auto t = reconstruct(log);
  EXPECT_EQ(t.insertions[0].origin, InsertionOrigin::PasteInIde);
  EXPECT_EQ(t.insertions[1].origin, InsertionOrigin::ExternalOrCgt);
}

TEST(Reconstruct, UnpairedCopy) {
  const auto t = reconstruct(session({ev(EventKind::Start, 0), ev(EventKind::Copy, 5, "abc"), ev(EventKind::End, 9)}));
  EXPECT_EQ(t.unpaired_copies, std::vector<std::size_t>{1});
  EXPECT_TRUE(t.copy_paste_pairs.empty());
}

TEST(Metrics, EmptyActivity) {
  const auto m = session_metrics(reconstruct(session({ev(EventKind::Start, 0), ev(EventKind::End, 100)})));
  EXPECT_EQ(m.total_duration_ms, 100);
  EXPECT_EQ(m.focused_ms, 100);
  EXPECT_EQ(m.unfocused_ms, 0);
  EXPECT_EQ(m.insertion_chars, 0u);
  EXPECT_EQ(m.deletion_chars, 0u);
}

TEST(Metrics, VolumesCountScalars) {
  const auto m = session_metrics(reconstruct(session({ev(EventKind::Start, 0),
                                                      ev(EventKind::Insertion, 1, "\xC3\xA9t\xC3\xA9s", "x"),
                                                      ev(EventKind::Deletion, 2, "ab", ""), ev(EventKind::End, 3)})));
  EXPECT_EQ(m.insertion_chars, 4u);
  EXPECT_EQ(m.deletion_chars, 2u);
}

TEST(ReconstructProperty, ConservationAndSoundness) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto log = oracle::random_valid_log(rng, 40);
    const auto t = reconstruct(log);
    const auto m = session_metrics(t);
    const EpochMs span = log.events.back().time - log.events.front().time;
    ASSERT_EQ(m.total_duration_ms, span);
    ASSERT_EQ(m.focused_ms + m.unfocused_ms, span);
    ASSERT_EQ(m.focused_ms, focused_oracle(log));

    EpochMs prev_end = t.session_span.begin;
    for (const auto& iv : t.focus_intervals) {
      ASSERT_GE(iv.begin, prev_end);
      ASSERT_GT(iv.end, iv.begin);
      prev_end = iv.end;
    }
    ASSERT_LE(prev_end, t.session_span.end);

    std::size_t insertion_events = 0;
    for (const auto& e : log.events) insertion_events += e.kind == EventKind::Insertion;
    ASSERT_EQ(t.insertions.size(), insertion_events);
    std::size_t pasted = 0;
    std::size_t external = 0;
    for (const auto& ins : t.insertions) {
      pasted += ins.origin == InsertionOrigin::PasteInIde;
      external += ins.origin == InsertionOrigin::ExternalOrCgt;
    }
    ASSERT_EQ(pasted + external, insertion_events);
    ASSERT_EQ(m.external_or_cgt_insertions, external);

    for (const auto& p : t.copy_paste_pairs) {
      const auto& paste = log.events[p.paste_index];
      if (p.copy_index) ASSERT_LE(log.events[*p.copy_index].time, paste.time);
      if (p.insertion_index) {
        const auto gap = log.events[*p.insertion_index].time - paste.time;
        ASSERT_GE(gap, 0);
        ASSERT_LE(gap, kDefaultPasteWindowMs);
      }
    }
    ASSERT_EQ(reconstruct(log), t);
  }
}

TEST(HistoricalLines, DefaultsAndWidening) {
  const std::vector<SessionLog> logs = {
      session({ev(EventKind::Start, 0), ev(EventKind::Insertion, 1, "def f():\n    return  1\n", "def f():"),
               ev(EventKind::Paste, 2, "pasted line"), ev(EventKind::Deletion, 3, "gone", "gone line"),
               ev(EventKind::End, 4)})};
  std::vector<std::string> got;
  for (const auto& l : extract_historical_lines(logs).lines) got.push_back(l.normalized);
  EXPECT_EQ(got, (std::vector<std::string>{"def f():", "return 1", "def f():"}));

  HistoryOptions wide;
  wide.include_paste = true;
  wide.include_deletion = true;
  EXPECT_EQ(extract_historical_lines(logs, wide).size(), 6u);

  HistoryOptions line_only;
  line_only.include_text = false;
  EXPECT_EQ(extract_historical_lines(logs, line_only).size(), 1u);
}
