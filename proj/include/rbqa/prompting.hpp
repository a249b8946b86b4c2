#pragma once

// Prompt templates for the three answering modes and token-budget trimming.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rbqa {

enum class QaMode { Agnostic, Rulebook, RulebookKg };

std::string_view to_string(QaMode mode);
/// Accepts "agnostic", "rulebook", "rulebook_kg". Throws InvalidArgument.
QaMode parse_mode(std::string_view name);
/// Comma-separated list of modes.
std::vector<QaMode> parse_modes(std::string_view list);

inline constexpr std::string_view kIndicator = "Answer the question in a short and concise way";
inline constexpr std::string_view kKgIndicator =
    "Answer the question in a short and concise way based on the context and external information";
inline constexpr std::string_view kContextMarker = "---Context:";
inline constexpr std::string_view kExternalMarker = "---External information:";
inline constexpr std::string_view kRulebookContextPhrase = "base on the context";

inline constexpr std::size_t kDefaultMaxPromptTokens = 3000;

std::string_view indicator_for(QaMode mode);

struct ContextBlock {
  std::string chunk_id;
  double score = 0.0;
  std::string text;

  friend bool operator==(const ContextBlock&, const ContextBlock&) = default;
};

struct PromptBundle {
  QaMode mode = QaMode::Agnostic;
  std::string indicator;
  std::string question;
  std::vector<ContextBlock> context_blocks;  // score descending
  std::vector<std::string> external_blocks;  // one rendered fact each
  std::string rendered;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// Renders from the structured fields only:
///   agnostic     <indicator>: '<q>'
///   rulebook     <indicator>: '<q>', base on the context: '<c1>' '<c2>'
///   rulebook_kg  <indicator>: '<q>' ---Context: '<c1>' '<c2>' ---External information: '<e1>...<e2>'
std::string render(const PromptBundle& bundle);

/// Throw EmptyQuestion for a blank question; the context variants throw NoContext
/// when `contexts` is empty. Contexts are reordered by score (ties by chunk_id).
PromptBundle build_agnostic(std::string question);
PromptBundle build_rulebook(std::string question, std::vector<ContextBlock> contexts);
PromptBundle build_rulebook_kg(std::string question, std::vector<ContextBlock> contexts,
                               std::vector<std::string> external);

/// ceil(code points / 4).
std::size_t estimate_tokens(std::string_view s);

/// Drops whole context blocks (lowest score first), then whole external blocks
/// (last first) until the rendered prompt fits. Throws BudgetTooSmall if even the
/// prompt without any blocks does not fit.
PromptBundle fit_budget(PromptBundle bundle, std::size_t max_tokens);

}  // namespace rbqa
