#pragma once

// Evaluation harness: gold datasets, transcripts, human judgments and reports.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rbqa/pipeline.hpp"
#include "rbqa/prompting.hpp"

namespace rbqa {

struct GoldPair {
  std::string pair_id;
  std::string question;
  std::string gold_answer;
  bool requires_table = false;
  bool requires_external = false;
  std::vector<std::string> tags;

  friend bool operator==(const GoldPair&, const GoldPair&) = default;
};

/// JSONL, one GoldPair per line. Throws DatasetError on malformed rows, empty
/// question/answer, or duplicate pair ids.
std::vector<GoldPair> parse_dataset(std::string_view content);
std::vector<GoldPair> load_dataset(const std::filesystem::path& path);
std::string format_dataset(const std::vector<GoldPair>& pairs);
void save_dataset(const std::vector<GoldPair>& pairs, const std::filesystem::path& path);

/// One record per (pair, mode), pair-major. Item failures are embedded.
std::vector<TranscriptRecord> run_eval(const std::vector<GoldPair>& dataset, const std::vector<QaMode>& modes,
                                       std::size_t k, QaEngine& engine);

// ---------------------------------------------------------------------------
// Percentages

/// Fixed-point percentage with two decimals.
struct Percent {
  std::int64_t hundredths = 0;

  /// 100 * numerator / denominator, rounded half-up at the second decimal.
  static Percent ratio(std::size_t numerator, std::size_t denominator);
  /// Parses "65.40", "9.6", "-3.98".
  static Percent parse(std::string_view s);
  std::string str() const;

  friend auto operator<=>(const Percent&, const Percent&) = default;
  friend Percent operator-(Percent a, Percent b) { return {a.hundredths - b.hundredths}; }
};

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  Percent percent;
};

/// Throws EmptySelection when total == 0.
Accuracy compute_accuracy(std::size_t correct, std::size_t total);

/// mode_a - mode_b in percentage points.
Percent compute_delta(Percent a, Percent b);

struct Reconciliation {
  Accuracy computed;
  Percent reported;
  bool matches = false;
  /// Smallest denominators (up to five) for which some count rounds to `reported`.
  std::vector<std::size_t> consistent_denominators;
};

/// Compares a published percentage against the one implied by its counts.
Reconciliation reconcile(std::size_t correct, std::size_t total, Percent reported, std::size_t max_denominator = 200);

// ---------------------------------------------------------------------------
// Judgments

enum class ErrorCategory { None, Ambiguity, ComplexQuestion, WrongContext, Other };

std::string_view to_string(ErrorCategory c);
ErrorCategory parse_error_category(std::string_view name);

inline constexpr std::string_view kFinalJudge = "final";

struct Judgment {
  std::string pair_id;
  QaMode mode = QaMode::Agnostic;
  bool answerable = false;
  bool complete = false;
  bool correct = false;
  ErrorCategory error_category = ErrorCategory::None;
  std::string judge_id;
  bool requires_table = false;
  bool requires_external = false;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

/// correct == answerable && complete; category None iff correct; WrongContext
/// only outside agnostic mode. Throws InvalidJudgment.
void validate_judgment(const Judgment& j);

/// Binds a verdict to its transcript record (pair, mode and subset flags come
/// from the record). Throws InvalidJudgment on mismatch or invariant violation.
Judgment record_judgment(const TranscriptRecord& record, Judgment judgment);

std::string judgment_to_line(const Judgment& j);
/// Validates every record.
std::vector<Judgment> parse_judgments(std::string_view content);
std::vector<Judgment> load_judgments(const std::filesystem::path& path);
void append_judgments(const std::vector<Judgment>& judgments, const std::filesystem::path& path);

struct Adjudication {
  std::vector<Judgment> finals;  // one per resolved (pair, mode)
  std::vector<std::pair<std::string, QaMode>> unresolved;
  std::size_t compared = 0;  // items judged by at least two annotators
  std::size_t agreed = 0;
};

/// A "final" verdict wins; otherwise a sole verdict, or a unanimous one. Split
/// verdicts without a final are left unresolved.
Adjudication adjudicate(const std::vector<Judgment>& judgments);

enum class Subset { All, Table, External };

struct AccuracyFilter {
  QaMode mode = QaMode::Agnostic;
  Subset subset = Subset::All;
};

/// Accuracy over adjudicated verdicts. Throws EmptySelection.
Accuracy compute_accuracy(const std::vector<Judgment>& judgments, const AccuracyFilter& filter);

struct ErrorDistribution {
  std::size_t failures = 0;
  std::map<ErrorCategory, std::size_t> counts;
  std::map<ErrorCategory, Percent> percents;
};

/// Category shares among incorrect adjudicated answers. Throws NoFailures.
ErrorDistribution error_distribution(const std::vector<Judgment>& judgments, QaMode mode);

// ---------------------------------------------------------------------------
// Reports

struct ModeReport {
  QaMode mode = QaMode::Agnostic;
  Accuracy overall;
  std::optional<Accuracy> table;
  std::optional<Accuracy> external;
  std::optional<ErrorDistribution> errors;
};

struct DeltaRow {
  QaMode a;
  QaMode b;
  Percent delta;
};

struct Report {
  std::vector<ModeReport> modes;
  std::vector<DeltaRow> deltas;
  std::size_t unresolved = 0;
  std::size_t compared = 0;
  std::size_t agreed = 0;
  bool has_table_subset = false;
  bool has_external_subset = false;

  const ModeReport* find(QaMode mode) const;
};

Report build_report(const std::vector<Judgment>& judgments);
/// Throws MissingMode.
Percent compute_delta(const Report& report, QaMode a, QaMode b);

std::string format_report_text(const Report& report);
std::string format_report_csv(const Report& report);

}  // namespace rbqa
