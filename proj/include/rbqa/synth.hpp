#pragma once

// Synthesized question/answer pairs: generate per chunk, deduplicate, review.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rbqa/corpus.hpp"
#include "rbqa/error.hpp"
#include "rbqa/evaluation.hpp"
#include "rbqa/knowledge_graph.hpp"
#include "rbqa/llm.hpp"
#include "rbqa/pipeline.hpp"

namespace rbqa {

/// Prompt templates for the three completions. Placeholders: {passage},
/// {question}, {facts}, {index} (1-based), {count}.
struct SynthTemplates {
  std::string question =
      "Write one question answerable solely from the following passage: '{passage}'";
  std::string adjust =
      "Rewrite the question so that it reads naturally for a policyholder and stays answerable from the "
      "passage, using the external information only to clarify terms: '{question}' ---Passage: '{passage}' "
      "---External information: '{facts}'";
  std::string answer =
      "Answer the question in a short and concise way using only the passage and the external information: "
      "'{question}' ---Passage: '{passage}' ---External information: '{facts}'";

  /// JSON object with any of the keys "question", "adjust", "answer".
  static SynthTemplates load(const std::filesystem::path& path);
};

/// Replaces every `{name}` occurrence; unknown placeholders are left untouched.
std::string fill_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values);

enum class ReviewStatus { PendingReview, Accepted, Rejected };

std::string_view to_string(ReviewStatus s);
ReviewStatus parse_review_status(std::string_view s);

struct SynthPair {
  std::string pair_id;  // <chunk_id>/q<j>
  std::string chunk_id;
  std::string question;  // current question (adjusted, possibly edited in review)
  std::string answer;
  std::vector<KgEntity> entities;
  ReviewStatus status = ReviewStatus::PendingReview;
  std::string question_raw;
  std::string question_adjusted;
  std::vector<KgFact> facts;

  friend bool operator==(const SynthPair&, const SynthPair&) = default;
};

struct SynthFailure {
  std::string chunk_id;
  Error error;
};

struct SynthRun {
  std::vector<SynthPair> pairs;
  std::vector<SynthFailure> failures;
};

struct SynthOptions {
  std::size_t per_chunk = 1;
  SynthTemplates templates;
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
};

/// Runs question, entity/fact lookup, adjustment and answer per chunk. Without a
/// knowledge graph the facts are empty. Per-chunk errors are collected.
SynthRun generate_pairs(const std::vector<Chunk>& chunks, LlmBackend& backend, const KnowledgeGraph* kg,
                        const SynthOptions& options = {});

inline constexpr double kNearDuplicateJaccard = 0.9;

/// Lowercased, punctuation-free token set, sorted.
std::vector<std::string> question_token_set(std::string_view question);
double token_set_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);
/// True for byte-identical questions or token-set Jaccard >= threshold (over non-empty sets).
bool near_duplicate(std::string_view a, std::string_view b, double threshold = kNearDuplicateJaccard);

/// Keeps each pair unless it nearly duplicates an earlier kept pair.
std::vector<SynthPair> dedup(const std::vector<SynthPair>& pairs, double threshold = kNearDuplicateJaccard);

std::string synth_pair_to_line(const SynthPair& pair);
SynthPair synth_pair_from_line(std::string_view line);
std::vector<SynthPair> load_pairs(const std::filesystem::path& path);
void save_pairs(const std::vector<SynthPair>& pairs, const std::filesystem::path& path);

/// Review file: `status<TAB>pair_id<TAB>question<TAB>answer` per line, with
/// backslash escapes for tab, newline and backslash; lines starting with '#' are comments.
std::string format_review(const std::vector<SynthPair>& pairs);
void export_review(const std::vector<SynthPair>& pairs, const std::filesystem::path& path);
/// Applies statuses and edited texts to `known`. Throws ReviewParseError or UnknownPairId.
std::vector<SynthPair> apply_review(std::string_view content, std::vector<SynthPair> known);
std::vector<SynthPair> import_review(const std::filesystem::path& path, std::vector<SynthPair> known);

/// Accepted pairs only. requires_table is set for pairs drawn from table chunks.
std::vector<GoldPair> to_dataset(const std::vector<SynthPair>& pairs, const Corpus& corpus);

}  // namespace rbqa
