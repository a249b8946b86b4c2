#include "rbqa/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rbqa/error.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Datasets

std::vector<GoldPair> parse_dataset(std::string_view content) {
  std::vector<GoldPair> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& line : text::split(content, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto where = "dataset line " + std::to_string(line_no) + ": ";
    GoldPair p;
    try {
      const auto j = json::parse(line);
      p.pair_id = j.at("pair_id").get<std::string>();
      p.question = j.at("question").get<std::string>();
      p.gold_answer = j.at("gold_answer").get<std::string>();
      p.requires_table = j.value("requires_table", false);
      p.requires_external = j.value("requires_external", false);
      p.tags = j.value("tags", std::vector<std::string>{});
    } catch (const json::exception& e) {
      fail(ErrorCode::DatasetError, where + e.what());
    }
    if (text::trim(p.pair_id).empty()) fail(ErrorCode::DatasetError, where + "empty pair_id");
    if (text::trim(p.question).empty()) fail(ErrorCode::DatasetError, where + "empty question");
    if (text::trim(p.gold_answer).empty()) fail(ErrorCode::DatasetError, where + "empty gold_answer");
    if (!ids.insert(p.pair_id).second) fail(ErrorCode::DatasetError, where + "duplicate pair_id " + p.pair_id);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<GoldPair> load_dataset(const std::filesystem::path& path) { return parse_dataset(text::read_file(path)); }

std::string format_dataset(const std::vector<GoldPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    json j{{"pair_id", p.pair_id}, {"question", p.question}, {"gold_answer", p.gold_answer},
           {"requires_table", p.requires_table}, {"requires_external", p.requires_external}, {"tags", p.tags}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::vector<GoldPair>& pairs, const std::filesystem::path& path) {
  text::write_file_atomic(path, format_dataset(pairs));
}

std::vector<TranscriptRecord> run_eval(const std::vector<GoldPair>& dataset, const std::vector<QaMode>& modes,
                                       std::size_t k, QaEngine& engine) {
  std::vector<std::string> questions;
  questions.reserve(dataset.size());
  for (const auto& p : dataset) questions.push_back(p.question);

  std::vector<std::vector<BatchItem>> per_mode;
  for (const auto mode : modes) per_mode.push_back(engine.batch_ask(questions, mode, k));

  std::vector<TranscriptRecord> out;
  out.reserve(dataset.size() * modes.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t m = 0; m < modes.size(); ++m) {
      auto r = to_transcript(dataset[i].pair_id, dataset[i].question, modes[m], per_mode[m][i]);
      r.gold_answer = dataset[i].gold_answer;
      r.requires_table = dataset[i].requires_table;
      r.requires_external = dataset[i].requires_external;
      out.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Percent arithmetic

Percent Percent::ratio(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0) fail(ErrorCode::EmptySelection, "percentage of an empty selection");
  const auto n = static_cast<std::int64_t>(numerator);
  const auto d = static_cast<std::int64_t>(denominator);
  return {(20000 * n + d) / (2 * d)};
}

Percent Percent::parse(std::string_view s) {
  const auto t = text::trim(s);
  std::string_view body = t;
  bool negative = false;
  if (body.starts_with('-')) {
    negative = true;
    body.remove_prefix(1);
  } else if (body.starts_with('+')) {
    body.remove_prefix(1);
  }
  if (body.ends_with('%')) body.remove_suffix(1);
  const auto dot = body.find('.');
  const auto whole = body.substr(0, dot);
  auto frac = dot == std::string_view::npos ? std::string_view{} : body.substr(dot + 1);
  const auto digits = [](std::string_view d) {
    return std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (whole.empty() || !digits(whole) || !digits(frac) || frac.size() > 2) {
    fail(ErrorCode::InvalidArgument, "bad percentage '" + std::string(t) + "'");
  }
  std::int64_t v = std::stoll(std::string(whole)) * 100;
  if (frac.size() >= 1) v += (frac[0] - '0') * 10;
  if (frac.size() == 2) v += frac[1] - '0';
  return {negative ? -v : v};
}

std::string Percent::str() const {
  const auto a = hundredths < 0 ? -hundredths : hundredths;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", hundredths < 0 ? "-" : "", static_cast<long long>(a / 100),
                static_cast<long long>(a % 100));
  return buf;
}

Accuracy compute_accuracy(std::size_t correct, std::size_t total) {
  if (total == 0) fail(ErrorCode::EmptySelection, "no judgments selected");
  if (correct > total) fail(ErrorCode::InvalidArgument, "more correct answers than judged answers");
  return {correct, total, Percent::ratio(correct, total)};
}

Percent compute_delta(Percent a, Percent b) { return a - b; }

Reconciliation reconcile(std::size_t correct, std::size_t total, Percent reported, std::size_t max_denominator) {
  Reconciliation r;
  r.computed = compute_accuracy(correct, total);
  r.reported = reported;
  r.matches = r.computed.percent == reported;
  for (std::size_t d = 1; d <= max_denominator && r.consistent_denominators.size() < 5; ++d) {
    const auto guess = static_cast<std::int64_t>(reported.hundredths) * static_cast<std::int64_t>(d) / 10000;
    for (auto n = guess - 1; n <= guess + 1; ++n) {
      if (n < 0 || n > static_cast<std::int64_t>(d)) continue;
      if (Percent::ratio(static_cast<std::size_t>(n), d) == reported) {
        r.consistent_denominators.push_back(d);
        break;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Judgments

std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::None: return "none";
    case ErrorCategory::Ambiguity: return "ambiguity";
    case ErrorCategory::ComplexQuestion: return "complex_question";
    case ErrorCategory::WrongContext: return "wrong_context";
    case ErrorCategory::Other: return "other";
  }
  return "none";
}

ErrorCategory parse_error_category(std::string_view name) {
  const auto n = text::trim(name);
  if (n == "none") return ErrorCategory::None;
  if (n == "ambiguity") return ErrorCategory::Ambiguity;
  if (n == "complex_question") return ErrorCategory::ComplexQuestion;
  if (n == "wrong_context") return ErrorCategory::WrongContext;
  if (n == "other") return ErrorCategory::Other;
  fail(ErrorCode::InvalidJudgment, "unknown error category '" + std::string(n) + "'");
}

void validate_judgment(const Judgment& j) {
  const auto who = "judgment " + j.pair_id + "/" + std::string(to_string(j.mode)) + ": ";
  if (text::trim(j.pair_id).empty()) fail(ErrorCode::InvalidJudgment, "judgment without pair_id");
  if (text::trim(j.judge_id).empty()) fail(ErrorCode::InvalidJudgment, who + "missing judge_id");
  if (j.correct != (j.answerable && j.complete)) {
    fail(ErrorCode::InvalidJudgment, who + "correct must equal answerable AND complete");
  }
  if (j.correct != (j.error_category == ErrorCategory::None)) {
    fail(ErrorCode::InvalidJudgment, who + "error_category must be none exactly when the answer is correct");
  }
  if (j.error_category == ErrorCategory::WrongContext && j.mode == QaMode::Agnostic) {
    fail(ErrorCode::InvalidJudgment, who + "wrong_context is not possible without retrieved context");
  }
}

Judgment record_judgment(const TranscriptRecord& record, Judgment judgment) {
  if (judgment.pair_id.empty()) judgment.pair_id = record.pair_id;
  if (judgment.pair_id != record.pair_id || judgment.mode != record.mode) {
    fail(ErrorCode::InvalidJudgment, "judgment " + judgment.pair_id + "/" + std::string(to_string(judgment.mode)) +
                                         " does not belong to transcript record " + record.pair_id + "/" +
                                         std::string(to_string(record.mode)));
  }
  judgment.requires_table = record.requires_table;
  judgment.requires_external = record.requires_external;
  validate_judgment(judgment);
  return judgment;
}

std::string judgment_to_line(const Judgment& j) {
  return json{{"pair_id", j.pair_id},
              {"mode", to_string(j.mode)},
              {"judge_id", j.judge_id},
              {"answerable", j.answerable},
              {"complete", j.complete},
              {"correct", j.correct},
              {"error_category", to_string(j.error_category)},
              {"requires_table", j.requires_table},
              {"requires_external", j.requires_external}}
      .dump();
}

std::vector<Judgment> parse_judgments(std::string_view content) {
  std::vector<Judgment> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split(content, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Judgment j;
    try {
      const auto d = json::parse(line);
      j.pair_id = d.at("pair_id").get<std::string>();
      j.mode = parse_mode(d.at("mode").get<std::string>());
      j.judge_id = d.at("judge_id").get<std::string>();
      j.answerable = d.at("answerable").get<bool>();
      j.complete = d.at("complete").get<bool>();
      j.correct = d.value("correct", j.answerable && j.complete);
      j.error_category = parse_error_category(d.value("error_category", "none"));
      j.requires_table = d.value("requires_table", false);
      j.requires_external = d.value("requires_external", false);
    } catch (const json::exception& e) {
      fail(ErrorCode::InvalidJudgment, "judgment line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::InvalidJudgment, "judgment line " + std::to_string(line_no) + ": " + e.what());
    }
    validate_judgment(j);
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<Judgment> load_judgments(const std::filesystem::path& path) {
  return parse_judgments(text::read_file(path));
}

void append_judgments(const std::vector<Judgment>& judgments, const std::filesystem::path& path) {
  for (const auto& j : judgments) validate_judgment(j);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot append to " + path.string());
  for (const auto& j : judgments) out << judgment_to_line(j) << '\n';
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

Adjudication adjudicate(const std::vector<Judgment>& judgments) {
  std::map<std::pair<std::string, QaMode>, std::vector<const Judgment*>> groups;
  std::vector<std::pair<std::string, QaMode>> order;
  for (const auto& j : judgments) {
    auto key = std::make_pair(j.pair_id, j.mode);
    auto& g = groups[key];
    if (g.empty()) order.push_back(key);
    g.push_back(&j);
  }
  Adjudication out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::vector<const Judgment*> annotators;
    const Judgment* final_verdict = nullptr;
    for (const auto* j : g) {
      if (j->judge_id == kFinalJudge) {
        final_verdict = j;
      } else {
        annotators.push_back(j);
      }
    }
    bool unanimous = true;
    for (const auto* j : annotators) unanimous = unanimous && j->correct == annotators.front()->correct;
    if (annotators.size() >= 2) {
      ++out.compared;
      if (annotators[0]->correct == annotators[1]->correct) ++out.agreed;
    }
    if (final_verdict) {
      out.finals.push_back(*final_verdict);
    } else if (!annotators.empty() && unanimous) {
      out.finals.push_back(*annotators.front());
    } else {
      out.unresolved.push_back(key);
    }
  }
  return out;
}

namespace {

bool in_subset(const Judgment& j, Subset s) {
  switch (s) {
    case Subset::All: return true;
    case Subset::Table: return j.requires_table;
    case Subset::External: return j.requires_external;
  }
  return true;
}

Accuracy accuracy_over(const std::vector<Judgment>& finals, const AccuracyFilter& filter) {
  std::size_t correct = 0, total = 0;
  for (const auto& j : finals) {
    if (j.mode != filter.mode || !in_subset(j, filter.subset)) continue;
    ++total;
    if (j.correct) ++correct;
  }
  return compute_accuracy(correct, total);
}

ErrorDistribution distribution_over(const std::vector<Judgment>& finals, QaMode mode) {
  ErrorDistribution d;
  for (const auto c : {ErrorCategory::Ambiguity, ErrorCategory::ComplexQuestion, ErrorCategory::WrongContext,
                       ErrorCategory::Other}) {
    d.counts[c] = 0;
  }
  for (const auto& j : finals) {
    if (j.mode != mode || j.correct) continue;
    ++d.failures;
    ++d.counts[j.error_category];
  }
  if (d.failures == 0) fail(ErrorCode::NoFailures, "no incorrect answers for mode " + std::string(to_string(mode)));
  for (const auto& [c, n] : d.counts) d.percents[c] = Percent::ratio(n, d.failures);
  return d;
}

}  // namespace

Accuracy compute_accuracy(const std::vector<Judgment>& judgments, const AccuracyFilter& filter) {
  return accuracy_over(adjudicate(judgments).finals, filter);
}

ErrorDistribution error_distribution(const std::vector<Judgment>& judgments, QaMode mode) {
  return distribution_over(adjudicate(judgments).finals, mode);
}

// ---------------------------------------------------------------------------
// Reports

const ModeReport* Report::find(QaMode mode) const {
  for (const auto& m : modes) {
    if (m.mode == mode) return &m;
  }
  return nullptr;
}

Report build_report(const std::vector<Judgment>& judgments) {
  const auto adj = adjudicate(judgments);
  Report report;
  report.unresolved = adj.unresolved.size();
  report.compared = adj.compared;
  report.agreed = adj.agreed;
  for (const auto& j : adj.finals) {
    report.has_table_subset = report.has_table_subset || j.requires_table;
    report.has_external_subset = report.has_external_subset || j.requires_external;
  }
  for (const auto mode : {QaMode::Agnostic, QaMode::Rulebook, QaMode::RulebookKg}) {
    const bool present =
        std::any_of(adj.finals.begin(), adj.finals.end(), [&](const Judgment& j) { return j.mode == mode; });
    if (!present) continue;
    ModeReport m;
    m.mode = mode;
    m.overall = accuracy_over(adj.finals, {mode, Subset::All});
    try {
      m.table = accuracy_over(adj.finals, {mode, Subset::Table});
    } catch (const Error&) {
    }
    try {
      m.external = accuracy_over(adj.finals, {mode, Subset::External});
    } catch (const Error&) {
    }
    try {
      m.errors = distribution_over(adj.finals, mode);
    } catch (const Error&) {
    }
    report.modes.push_back(std::move(m));
  }
  for (std::size_t a = 0; a < report.modes.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      report.deltas.push_back({report.modes[a].mode, report.modes[b].mode,
                               compute_delta(report.modes[a].overall.percent, report.modes[b].overall.percent)});
    }
  }
  return report;
}

Percent compute_delta(const Report& report, QaMode a, QaMode b) {
  const auto* ma = report.find(a);
  const auto* mb = report.find(b);
  if (!ma) fail(ErrorCode::MissingMode, "report has no results for mode " + std::string(to_string(a)));
  if (!mb) fail(ErrorCode::MissingMode, "report has no results for mode " + std::string(to_string(b)));
  return compute_delta(ma->overall.percent, mb->overall.percent);
}

namespace {

std::string fraction(const Accuracy& a) {
  return std::to_string(a.correct) + "/" + std::to_string(a.total) + " = " + a.percent.str() + "%";
}

std::string signed_str(Percent p) { return (p.hundredths >= 0 ? "+" : "") + p.str(); }

}  // namespace

std::string format_report_text(const Report& r) {
  std::ostringstream out;
  out << "Accuracy (correct/judged)\n";
  for (const auto& m : r.modes) out << "  " << to_string(m.mode) << ": " << fraction(m.overall) << "\n";
  if (!r.deltas.empty()) {
    out << "Differences (percentage points)\n";
    for (const auto& d : r.deltas) {
      out << "  " << to_string(d.a) << " - " << to_string(d.b) << ": " << signed_str(d.delta) << "\n";
    }
  }
  if (r.has_table_subset) {
    out << "Table questions\n";
    for (const auto& m : r.modes) {
      if (m.table) out << "  " << to_string(m.mode) << ": " << fraction(*m.table) << "\n";
    }
  }
  if (r.has_external_subset) {
    out << "External-knowledge questions\n";
    for (const auto& m : r.modes) {
      if (m.external) out << "  " << to_string(m.mode) << ": " << fraction(*m.external) << "\n";
    }
  }
  for (const auto& m : r.modes) {
    if (!m.errors) continue;
    out << "Error distribution, " << to_string(m.mode) << " (" << m.errors->failures << " incorrect)\n";
    for (const auto& [c, n] : m.errors->counts) {
      out << "  " << to_string(c) << ": " << n << " (" << m.errors->percents.at(c).str() << "%)\n";
    }
  }
  if (r.compared > 0) {
    out << "Annotator agreement: " << r.agreed << "/" << r.compared << " = "
        << Percent::ratio(r.agreed, r.compared).str() << "%\n";
  }
  if (r.unresolved > 0) out << "Unresolved (split verdicts without a final): " << r.unresolved << "\n";
  return out.str();
}

std::string format_report_csv(const Report& r) {
  std::ostringstream out;
  out << "section,mode,detail,numerator,denominator,percent\n";
  const auto acc_row = [&](std::string_view section, QaMode mode, const Accuracy& a) {
    out << section << "," << to_string(mode) << ",," << a.correct << "," << a.total << "," << a.percent.str() << "\n";
  };
  for (const auto& m : r.modes) acc_row("accuracy", m.mode, m.overall);
  for (const auto& d : r.deltas) {
    out << "delta," << to_string(d.a) << "," << to_string(d.b) << ",,," << d.delta.str() << "\n";
  }
  for (const auto& m : r.modes) {
    if (r.has_table_subset && m.table) acc_row("table", m.mode, *m.table);
    if (r.has_external_subset && m.external) acc_row("external", m.mode, *m.external);
  }
  for (const auto& m : r.modes) {
    if (!m.errors) continue;
    for (const auto& [c, n] : m.errors->counts) {
      out << "errors," << to_string(m.mode) << "," << to_string(c) << "," << n << "," << m.errors->failures << ","
          << m.errors->percents.at(c).str() << "\n";
    }
  }
  if (r.compared > 0) {
    out << "agreement,,," << r.agreed << "," << r.compared << "," << Percent::ratio(r.agreed, r.compared).str()
        << "\n";
  }
  out << "unresolved,,," << r.unresolved << ",,\n";
  return out.str();
}

}  // namespace rbqa
