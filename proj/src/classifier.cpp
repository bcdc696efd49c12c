#include "codewatch/classifier.hpp"

#include <algorithm>
#include <numeric>

#include "codewatch/text.hpp"

namespace codewatch {

namespace {

constexpr std::array<std::string_view, 3> kLabelTags = {"AIGenerated", "AIModified", "UserWritten"};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

}  // namespace

std::string_view to_string(LineLabelKind kind) {
  return kLabelTags[static_cast<std::size_t>(kind)];
}

std::optional<LineLabelKind> parse_label_kind(std::string_view tag) {
  for (std::size_t i = 0; i < kLabelTags.size(); ++i) {
    if (kLabelTags[i] == tag) return static_cast<LineLabelKind>(i);
  }
  return std::nullopt;
}

std::string normalize_line(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // Single rolling row over the shorter string.
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const auto up = row[j];
      const auto cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(text::decode_utf8(a), text::decode_utf8(b));
}

int similarity(std::string_view a, std::string_view b) {
  const auto ua = text::decode_utf8(a);
  const auto ub = text::decode_utf8(b);
  const auto longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 100;
  const auto distance = levenshtein(ua, ub);
  // Half-up rounding of 100 * (longest - distance) / longest in integers.
  const auto scaled = 200 * (longest - distance) + longest;
  return static_cast<int>(scaled / (2 * longest));
}

LineLabel label_line(std::string_view final_line, const HistoricalLineSet& history,
                     const SimilarityMetric& metric) {
  LineLabel out;
  out.content = std::string(final_line);
  out.normalized = normalize_line(final_line);
  int best = -1;
  for (const auto& h : history.lines) {
    const int score = metric(out.normalized, h.normalized);
    if (score > best) {
      best = score;
      out.matched_line = h.normalized;
      if (best == 100) break;
    }
  }
  out.best_score = std::max(best, 0);
  out.label = label_for_score(out.best_score);
  return out;
}

std::array<int, 3> percentage_tenths(const std::array<std::size_t, 3>& counts) {
  const auto total = counts[0] + counts[1] + counts[2];
  std::array<int, 3> tenths{};
  if (total == 0) return tenths;
  std::array<std::size_t, 3> remainders{};
  int assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto scaled = counts[k] * 1000;
    tenths[k] = static_cast<int>(scaled / total);
    remainders[k] = scaled % total;
    assigned += tenths[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return remainders[x] > remainders[y]; });
  for (std::size_t k = 0; assigned < 1000; ++k, ++assigned) ++tenths[order[k % 3]];
  return tenths;
}

ClassificationReport classify_lines(std::string_view final_code, const HistoricalLineSet& history,
                                    const SimilarityMetric& metric) {
  ClassificationReport report;
  const auto lines = text::split_lines(final_code);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto normalized = normalize_line(lines[i]);
    if (normalized.empty()) {
      report.skipped_lines.push_back(i);
      continue;
    }
    auto label = label_line(normalized, history, metric);
    label.line_index = i;
    label.content = lines[i];
    ++report.summary.counts[static_cast<std::size_t>(label.label)];
    report.labels.push_back(std::move(label));
  }
  const auto tenths = percentage_tenths(report.summary.counts);
  for (std::size_t k = 0; k < 3; ++k) report.summary.percentages[k] = tenths[k] / 10.0;
  return report;
}

ClassificationReport classify_submission(std::string_view final_code, std::span<const SessionLog> logs,
                                         const ClassifyOptions& options) {
  return classify_lines(final_code, extract_historical_lines(logs, options.history), options.metric);
}

Json report_to_json(const ClassificationReport& report) {
  Json j;
  auto& lines = j["lines"] = Json::array();
  for (const auto& l : report.labels) {
    Json e;
    e["index"] = l.line_index;
    e["content"] = l.content;
    e["label"] = to_string(l.label);
    e["score"] = l.best_score;
    e["matched_line"] = l.matched_line ? Json(*l.matched_line) : Json(nullptr);
    lines.push_back(std::move(e));
  }
  j["skipped_lines"] = report.skipped_lines;
  auto& summary = j["summary"];
  summary["total"] = report.summary.total();
  for (const auto kind : kAllLabelKinds) {
    summary["counts"][std::string(to_string(kind))] = report.summary.counts[static_cast<std::size_t>(kind)];
  }
  for (const auto kind : kAllLabelKinds) {
    summary["percentages"][std::string(to_string(kind))] =
        report.summary.percentages[static_cast<std::size_t>(kind)];
  }
  return j;
}

ClassificationReport report_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("lines") || !doc["lines"].is_array()) {
    throw MalformedDocument("report must be an object with a lines array");
  }
  ClassificationReport report;
  try {
    for (const auto& e : doc["lines"]) {
      LineLabel l;
      l.line_index = e.at("index").get<std::size_t>();
      l.content = e.at("content").get<std::string>();
      l.normalized = normalize_line(l.content);
      const auto kind = parse_label_kind(e.at("label").get<std::string>());
      if (!kind) throw MalformedDocument("unknown label " + e.at("label").get<std::string>());
      l.label = *kind;
      l.best_score = e.at("score").get<int>();
      if (const auto m = e.find("matched_line"); m != e.end() && !m->is_null()) {
        l.matched_line = m->get<std::string>();
      }
      ++report.summary.counts[static_cast<std::size_t>(l.label)];
      report.labels.push_back(std::move(l));
    }
    if (const auto s = doc.find("skipped_lines"); s != doc.end()) {
      report.skipped_lines = s->get<std::vector<std::size_t>>();
    }
  } catch (const Json::exception& e) {
    throw MalformedDocument(std::string("bad report: ") + e.what());
  }
  const auto tenths = percentage_tenths(report.summary.counts);
  for (std::size_t k = 0; k < 3; ++k) report.summary.percentages[k] = tenths[k] / 10.0;
  return report;
}

EvaluationResult evaluate(std::span<const LineLabelKind> predicted, std::span<const LineLabelKind> truth) {
  if (predicted.size() != truth.size()) {
    throw LengthMismatch("ground truth has " + std::to_string(truth.size()) + " labels, report has " +
                         std::to_string(predicted.size()));
  }
  EvaluationResult r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::size_t correct = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto tp = r.confusion[k][k];
    std::size_t predicted_k = 0;
    std::size_t actual_k = 0;
    for (std::size_t o = 0; o < 3; ++o) {
      predicted_k += r.confusion[o][k];
      actual_k += r.confusion[k][o];
    }
    auto& m = r.per_class[k];
    m.precision_degenerate = predicted_k == 0;
    m.recall_degenerate = actual_k == 0;
    m.precision = ratio(tp, predicted_k);
    m.recall = ratio(tp, actual_k);
    m.f1 = harmonic(m.precision, m.recall);
    correct += tp;

    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
    r.macro.precision_degenerate = r.macro.precision_degenerate || m.precision_degenerate;
    r.macro.recall_degenerate = r.macro.recall_degenerate || m.recall_degenerate;
  }
  r.macro.precision /= 3;
  r.macro.recall /= 3;
  r.macro.f1 /= 3;
  r.accuracy = ratio(correct, truth.size());
  return r;
}

EvaluationResult evaluate(const ClassificationReport& report, std::span<const LineLabelKind> truth) {
  std::vector<LineLabelKind> predicted;
  predicted.reserve(report.labels.size());
  for (const auto& l : report.labels) predicted.push_back(l.label);
  return evaluate(predicted, truth);
}

Json evaluation_to_json(const EvaluationResult& r) {
  const auto metrics = [](const ClassMetrics& m) {
    Json j;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["precision_degenerate"] = m.precision_degenerate;
    j["recall_degenerate"] = m.recall_degenerate;
    return j;
  };
  Json j;
  for (const auto kind : kAllLabelKinds) {
    j["per_class"][std::string(to_string(kind))] = metrics(r.per_class[static_cast<std::size_t>(kind)]);
  }
  j["macro"] = metrics(r.macro);
  j["accuracy"] = r.accuracy;
  auto& confusion = j["confusion"] = Json::array();
  for (const auto& row : r.confusion) confusion.push_back(row);
  j["confusion_axes"] = "rows=truth, columns=predicted, order=AIGenerated,AIModified,UserWritten";
  return j;
}

}  // namespace codewatch
