#include "rbqa/prompting.hpp"

#include <algorithm>

#include "rbqa/error.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

std::string_view to_string(QaMode mode) {
  switch (mode) {
    case QaMode::Agnostic: return "agnostic";
    case QaMode::Rulebook: return "rulebook";
    case QaMode::RulebookKg: return "rulebook_kg";
  }
  return "agnostic";
}

QaMode parse_mode(std::string_view name) {
  const auto n = text::trim(name);
  if (n == "agnostic") return QaMode::Agnostic;
  if (n == "rulebook") return QaMode::Rulebook;
  if (n == "rulebook_kg") return QaMode::RulebookKg;
  fail(ErrorCode::InvalidArgument, "unknown mode '" + std::string(n) + "' (expected agnostic, rulebook or rulebook_kg)");
}

std::vector<QaMode> parse_modes(std::string_view list) {
  std::vector<QaMode> out;
  for (const auto& part : text::split(list, ',')) {
    if (text::trim(part).empty()) continue;
    const auto m = parse_mode(part);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) fail(ErrorCode::InvalidArgument, "no modes given");
  return out;
}

std::string_view indicator_for(QaMode mode) { return mode == QaMode::RulebookKg ? kKgIndicator : kIndicator; }

namespace {

std::string quoted_contexts(const std::vector<ContextBlock>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += ' ';
    out += '\'';
    out += blocks[i].text;
    out += '\'';
  }
  return out;
}

void check_question(const std::string& question) {
  if (text::trim(question).empty()) fail(ErrorCode::EmptyQuestion, "question is empty", Stage::Prompt);
}

void sort_contexts(std::vector<ContextBlock>& blocks) {
  std::stable_sort(blocks.begin(), blocks.end(), [](const ContextBlock& a, const ContextBlock& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
  });
}

}  // namespace

std::string render(const PromptBundle& b) {
  std::string out = b.indicator + ": '" + b.question + "'";
  switch (b.mode) {
    case QaMode::Agnostic:
      break;
    case QaMode::Rulebook:
      out += ", " + std::string(kRulebookContextPhrase) + ": " + quoted_contexts(b.context_blocks);
      break;
    case QaMode::RulebookKg:
      out += " " + std::string(kContextMarker) + " " + quoted_contexts(b.context_blocks);
      out += " " + std::string(kExternalMarker) + " '" + text::join(b.external_blocks, "...") + "'";
      break;
  }
  return out;
}

PromptBundle build_agnostic(std::string question) {
  check_question(question);
  PromptBundle b;
  b.mode = QaMode::Agnostic;
  b.indicator = std::string(kIndicator);
  b.question = std::move(question);
  b.rendered = render(b);
  return b;
}

PromptBundle build_rulebook(std::string question, std::vector<ContextBlock> contexts) {
  check_question(question);
  if (contexts.empty()) fail(ErrorCode::NoContext, "no rulebook context for the question", Stage::Prompt);
  PromptBundle b;
  b.mode = QaMode::Rulebook;
  b.indicator = std::string(kIndicator);
  b.question = std::move(question);
  sort_contexts(contexts);
  b.context_blocks = std::move(contexts);
  b.rendered = render(b);
  return b;
}

PromptBundle build_rulebook_kg(std::string question, std::vector<ContextBlock> contexts,
                               std::vector<std::string> external) {
  check_question(question);
  if (contexts.empty()) fail(ErrorCode::NoContext, "no rulebook context for the question", Stage::Prompt);
  PromptBundle b;
  b.mode = QaMode::RulebookKg;
  b.indicator = std::string(kKgIndicator);
  b.question = std::move(question);
  sort_contexts(contexts);
  b.context_blocks = std::move(contexts);
  b.external_blocks = std::move(external);
  b.rendered = render(b);
  return b;
}

std::size_t estimate_tokens(std::string_view s) { return (text::codepoint_count(s) + 3) / 4; }

PromptBundle fit_budget(PromptBundle bundle, std::size_t max_tokens) {
  PromptBundle bare = bundle;
  bare.context_blocks.clear();
  bare.external_blocks.clear();
  if (estimate_tokens(render(bare)) > max_tokens) {
    fail(ErrorCode::BudgetTooSmall,
         "prompt budget of " + std::to_string(max_tokens) + " tokens cannot hold the indicator and question",
         Stage::Prompt);
  }
  bundle.rendered = render(bundle);
  while (estimate_tokens(bundle.rendered) > max_tokens) {
    if (!bundle.context_blocks.empty()) {
      auto& blocks = bundle.context_blocks;
      std::size_t lowest = blocks.size() - 1;
      for (std::size_t i = blocks.size(); i-- > 0;) {
        if (blocks[i].score < blocks[lowest].score) lowest = i;
      }
      blocks.erase(blocks.begin() + static_cast<std::ptrdiff_t>(lowest));
    } else {
      bundle.external_blocks.pop_back();
    }
    bundle.rendered = render(bundle);
  }
  return bundle;
}

}  // namespace rbqa
