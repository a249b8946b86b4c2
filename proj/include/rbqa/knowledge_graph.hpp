#pragma once

// Entity mentions, label linking and knowledge-graph facts.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rbqa/corpus.hpp"

namespace rbqa {

class HttpTransport;

struct EntityMention {
  std::string surface;
  Span span;  // byte offsets into the question

  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

struct KgEntity {
  std::string uri;
  std::string label;
  double match_score = 0.0;

  friend bool operator==(const KgEntity&, const KgEntity&) = default;
};

struct KgFact {
  std::string subject_label;
  std::string predicate;
  std::string object_text;

  friend bool operator==(const KgFact&, const KgFact&) = default;
};

// ---------------------------------------------------------------------------
// Mention extraction

/// Document frequencies over the chunk corpus, used to rank candidate mentions.
class TermStats {
 public:
  TermStats() = default;
  static TermStats from_texts(const std::vector<std::string>& texts);
  static TermStats from_corpus(const Corpus& corpus);

  /// ln((1 + N) / (1 + df)) + 1; unseen terms get the largest value.
  double idf(std::string_view lower_token) const;
  std::size_t documents() const { return documents_; }

 private:
  std::size_t documents_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

bool is_stopword(std::string_view lower_token);

struct MentionOptions {
  std::size_t max_mentions = 5;
  std::size_t max_tokens = 4;
};

/// Candidate spans are capitalized runs that are not a lone sentence-initial word,
/// and 1..max_tokens-grams of content words. Candidates are ranked (capitalized
/// runs first, then by mean IDF, then longer first); the best `max_mentions`
/// distinct surfaces are returned in question order.
std::vector<EntityMention> extract_mentions(std::string_view question, const TermStats* stats = nullptr,
                                            const MentionOptions& options = {});

// ---------------------------------------------------------------------------
// Linking

enum class LinkStage { Exact, Prefix, Trigram };

inline constexpr double kExactScore = 1.0;
inline constexpr double kPrefixScore = 0.9;
inline constexpr double kTrigramThreshold = 0.5;

/// Lowercase, trimmed, internal whitespace collapsed.
std::string normalize_label(std::string_view label);
/// Jaccard overlap of the padded character-trigram sets of two normalized strings.
double trigram_jaccard(std::string_view a, std::string_view b);

struct KgRecord {
  std::string label;
  std::string uri;
  std::string abstract;  // may be empty in a bare label dump
};

/// `label<TAB>uri<TAB>abstract` lines. A missing third column means no abstract.
std::vector<KgRecord> parse_kg_fixture(std::string_view content);
std::vector<KgRecord> load_kg_fixture(const std::filesystem::path& path);

/// Label search. Stage 1 exact case-insensitive equality (1.0), stage 2 label
/// starts with the mention at a word boundary (0.9, shortest label wins), stage 3
/// best trigram Jaccard if >= 0.5. Ties go to the earlier label.
class LabelIndex {
 public:
  LabelIndex() = default;
  explicit LabelIndex(const std::vector<KgRecord>& records);

  /// Throws IndexUnavailable when the index has no labels.
  std::optional<KgEntity> link(std::string_view surface) const;
  std::optional<KgEntity> link(const EntityMention& mention) const { return link(mention.surface); }

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string label;
    std::string uri;
    std::string normalized;
    std::vector<std::string> trigrams;  // sorted, unique
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> exact_;
};

// ---------------------------------------------------------------------------
// Facts

inline constexpr std::size_t kFactBudgetChars = 600;
inline constexpr std::size_t kMaxFactsPerQuestion = 3;

/// Collapses line breaks and tabs, then cuts at a word boundary so the result,
/// including a trailing "...", fits in `budget` bytes.
std::string truncate_fact(std::string_view text, std::size_t budget = kFactBudgetChars);

class FactSource {
 public:
  virtual ~FactSource() = default;
  virtual std::vector<KgFact> fetch(const KgEntity& entity) const = 0;
  virtual std::string_view name() const = 0;
};

/// Offline source backed by fixture records. Only `abstract` facts exist.
class FixtureFactSource final : public FactSource {
 public:
  explicit FixtureFactSource(std::vector<KgRecord> records, std::size_t fact_budget = kFactBudgetChars);
  /// Looks up by URI, then by label. Throws EntityNotFound.
  std::vector<KgFact> fetch(const KgEntity& entity) const override;
  std::string_view name() const override { return "fixture"; }

 private:
  std::vector<KgRecord> records_;
  std::unordered_map<std::string, std::size_t> by_uri_;
  std::unordered_map<std::string, std::size_t> by_label_;
  std::size_t fact_budget_;
};

struct SparqlConfig {
  std::string endpoint_url = "https://dbpedia.org/sparql";
  std::string language = "en";
  std::vector<std::string> predicates{"abstract"};
  std::chrono::milliseconds timeout{10'000};
  int retries = 1;
  std::size_t fact_budget = kFactBudgetChars;
};

/// SPARQL-over-HTTP-GET client returning JSON variable bindings. At most four
/// requests are in flight per instance.
class SparqlFactSource final : public FactSource {
 public:
  explicit SparqlFactSource(SparqlConfig config, std::shared_ptr<HttpTransport> transport = nullptr);
  ~SparqlFactSource() override;

  /// Throws EndpointTimeout or MalformedResponse.
  std::vector<KgFact> fetch(const KgEntity& entity) const override;
  std::string_view name() const override { return "endpoint"; }

  std::string build_query(const std::string& uri) const;
  /// Request path including the encoded query string.
  std::string request_path(const std::string& uri) const;
  std::vector<KgFact> parse_results(std::string_view body, const std::string& subject_label) const;

  const SparqlConfig& config() const { return config_; }

 private:
  SparqlConfig config_;
  std::string path_prefix_;
  std::shared_ptr<HttpTransport> transport_;
  mutable std::counting_semaphore<64> in_flight_{4};
};

/// `<subject> | <predicate> | <object>` per fact, joined by "...".
std::string format_fact(const KgFact& fact);
std::string format_external_knowledge(const std::vector<KgFact>& facts);

}  // namespace rbqa
