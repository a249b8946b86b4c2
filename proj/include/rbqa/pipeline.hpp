#pragma once

// End-to-end answering: retrieval, entity linking, facts, prompt, completion.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rbqa/corpus.hpp"
#include "rbqa/error.hpp"
#include "rbqa/knowledge_graph.hpp"
#include "rbqa/llm.hpp"
#include "rbqa/prompting.hpp"
#include "rbqa/retrieval.hpp"

namespace rbqa {

struct KnowledgeGraph {
  std::shared_ptr<const LabelIndex> labels;
  std::shared_ptr<const FactSource> facts;
  std::shared_ptr<const TermStats> term_stats;  // optional; ranks mentions
  MentionOptions mention_options;
  std::size_t max_facts = kMaxFactsPerQuestion;
};

struct EngineConfig {
  std::size_t k = 3;
  std::size_t max_prompt_tokens = kDefaultMaxPromptTokens;
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_output_tokens = 512;
  std::size_t parallelism = 4;  // batch workers
};

struct StageTimings {
  std::int64_t retrieval_ms = 0;
  std::int64_t linking_ms = 0;
  std::int64_t kg_ms = 0;
  std::int64_t prompt_ms = 0;
  std::int64_t llm_ms = 0;
};

struct PreparedPrompt {
  PromptBundle prompt;  // after budget fitting
  std::vector<RetrievalHit> hits;
  std::vector<EntityMention> mentions;
  std::vector<KgEntity> entities;
  std::vector<KgFact> facts;
  StageTimings timings;
};

struct AskResult {
  std::string answer;
  QaMode mode = QaMode::Agnostic;
  std::vector<RetrievalHit> hits;
  std::vector<KgEntity> entities;
  std::vector<KgFact> facts;
  PromptBundle prompt;
  std::uint64_t prompt_hash = 0;
  BackendKind backend = BackendKind::Echo;
  StageTimings timings;
};

struct BatchItem {
  std::optional<AskResult> result;
  std::optional<Error> error;
};

/// Borrowed references must outlive the engine. Read-only apart from the backend,
/// so one engine may serve concurrent questions when the backend allows it.
class QaEngine {
 public:
  QaEngine(const Corpus& corpus, const VectorIndex& index, const Embedder& embedder, LlmBackend& backend,
           std::optional<KnowledgeGraph> kg = std::nullopt, EngineConfig config = {});

  /// Every stage up to (not including) the completion. Errors carry their stage.
  PreparedPrompt prepare(const std::string& question, QaMode mode, std::size_t k) const;

  AskResult answer_question(const std::string& question, QaMode mode, std::size_t k);
  AskResult answer_question(const std::string& question, QaMode mode) {
    return answer_question(question, mode, config_.k);
  }

  /// Results are positionally aligned with `questions`; failures are kept per item.
  std::vector<BatchItem> batch_ask(const std::vector<std::string>& questions, QaMode mode, std::size_t k);

  const EngineConfig& config() const { return config_; }
  LlmBackend& backend() { return backend_; }
  LlmRequest make_request(const std::string& prompt) const;

 private:
  const Corpus& corpus_;
  const VectorIndex& index_;
  const Embedder& embedder_;
  LlmBackend& backend_;
  std::optional<KnowledgeGraph> kg_;
  EngineConfig config_;
};

/// Transcript row written by `ask-batch` and `eval run`.
struct TranscriptRecord {
  std::string pair_id;
  std::string question;
  QaMode mode = QaMode::Agnostic;
  std::string answer;
  std::vector<RetrievalHit> hits;
  std::vector<KgFact> facts;
  std::string prompt_hash;  // hex, empty if no prompt was produced
  std::string gold_answer;
  bool requires_table = false;
  bool requires_external = false;
  std::optional<std::string> error_code;
  std::string error_stage;
  std::string error_message;
};

TranscriptRecord to_transcript(const std::string& pair_id, const std::string& question, QaMode mode,
                               const BatchItem& item);

std::string transcript_to_line(const TranscriptRecord& record);
TranscriptRecord transcript_from_line(std::string_view line);
std::vector<TranscriptRecord> load_transcript(const std::filesystem::path& path);
void save_transcript(const std::vector<TranscriptRecord>& records, const std::filesystem::path& path);

}  // namespace rbqa
