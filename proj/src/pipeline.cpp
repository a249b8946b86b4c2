#include "rbqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <set>
#include <thread>

#include "json.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::int64_t ms_since(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t).count();
}

}  // namespace

QaEngine::QaEngine(const Corpus& corpus, const VectorIndex& index, const Embedder& embedder, LlmBackend& backend,
                   std::optional<KnowledgeGraph> kg, EngineConfig config)
    : corpus_(corpus), index_(index), embedder_(embedder), backend_(backend), kg_(std::move(kg)),
      config_(std::move(config)) {}

LlmRequest QaEngine::make_request(const std::string& prompt) const {
  return LlmRequest{prompt, config_.model_id, config_.temperature, config_.max_output_tokens};
}

PreparedPrompt QaEngine::prepare(const std::string& question, QaMode mode, std::size_t k) const {
  if (text::trim(question).empty()) fail(ErrorCode::EmptyQuestion, "question is empty", Stage::Prompt);
  PreparedPrompt out;
  std::vector<ContextBlock> contexts;

  if (mode != QaMode::Agnostic) {
    const auto t = Clock::now();
    try {
      if (index_.empty()) fail(ErrorCode::EmptyIndex, "no rulebook corpus is indexed");
      out.hits = index_.retrieve(embedder_.embed(question), k);
    } catch (const Error& e) {
      throw e.with_stage(Stage::Retrieval);
    }
    for (const auto& hit : out.hits) {
      const auto* chunk = corpus_.find_chunk(hit.chunk_id);
      if (!chunk) {
        fail(ErrorCode::IndexFileError, "index references unknown chunk " + hit.chunk_id, Stage::Retrieval);
      }
      contexts.push_back({hit.chunk_id, hit.score, chunk->text});
    }
    out.timings.retrieval_ms = ms_since(t);
  }

  std::vector<std::string> external;
  if (mode == QaMode::RulebookKg) {
    if (!kg_ || !kg_->labels || !kg_->facts) {
      fail(ErrorCode::IndexUnavailable, "no knowledge-graph source configured", Stage::Linking);
    }
    auto t = Clock::now();
    out.mentions = extract_mentions(question, kg_->term_stats.get(), kg_->mention_options);
    std::set<std::string> seen_uris;
    try {
      for (const auto& m : out.mentions) {
        auto entity = kg_->labels->link(m);
        if (entity && seen_uris.insert(entity->uri).second) out.entities.push_back(std::move(*entity));
      }
    } catch (const Error& e) {
      throw e.with_stage(Stage::Linking);
    }
    out.timings.linking_ms = ms_since(t);

    t = Clock::now();
    try {
      for (const auto& entity : out.entities) {
        if (out.facts.size() >= kg_->max_facts) break;
        for (auto& fact : kg_->facts->fetch(entity)) {
          if (out.facts.size() >= kg_->max_facts) break;
          out.facts.push_back(std::move(fact));
        }
      }
    } catch (const Error& e) {
      throw e.with_stage(Stage::Kg);
    }
    for (const auto& f : out.facts) external.push_back(format_fact(f));
    out.timings.kg_ms = ms_since(t);
  }

  const auto t = Clock::now();
  try {
    PromptBundle bundle;
    switch (mode) {
      case QaMode::Agnostic: bundle = build_agnostic(question); break;
      case QaMode::Rulebook: bundle = build_rulebook(question, std::move(contexts)); break;
      case QaMode::RulebookKg: bundle = build_rulebook_kg(question, std::move(contexts), std::move(external)); break;
    }
    out.prompt = fit_budget(std::move(bundle), config_.max_prompt_tokens);
    if (mode != QaMode::Agnostic && out.prompt.context_blocks.empty()) {
      fail(ErrorCode::NoContext, "no rulebook context fits the prompt budget");
    }
  } catch (const Error& e) {
    throw e.with_stage(Stage::Prompt);
  }
  out.timings.prompt_ms = ms_since(t);
  return out;
}

AskResult QaEngine::answer_question(const std::string& question, QaMode mode, std::size_t k) {
  auto prepared = prepare(question, mode, k);
  const auto t = Clock::now();
  LlmResponse response;
  try {
    response = backend_.complete(make_request(prepared.prompt.rendered));
  } catch (const Error& e) {
    throw e.with_stage(Stage::Llm);
  }
  if (text::trim(response.text).empty()) fail(ErrorCode::BackendFailure, "backend returned an empty answer", Stage::Llm);
  AskResult r;
  r.answer = std::move(response.text);
  r.mode = mode;
  r.hits = std::move(prepared.hits);
  r.entities = std::move(prepared.entities);
  r.facts = std::move(prepared.facts);
  r.prompt = std::move(prepared.prompt);
  r.prompt_hash = response.prompt_hash;
  r.backend = response.backend;
  r.timings = prepared.timings;
  r.timings.llm_ms = ms_since(t);
  return r;
}

std::vector<BatchItem> QaEngine::batch_ask(const std::vector<std::string>& questions, QaMode mode, std::size_t k) {
  std::vector<BatchItem> items(questions.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (auto i = next++; i < questions.size(); i = next++) {
      try {
        items[i].result = answer_question(questions[i], mode, k);
      } catch (const Error& e) {
        items[i].error = e;
      } catch (const std::exception& e) {
        items[i].error = Error(ErrorCode::BackendFailure, e.what());
      }
    }
  };
  const auto n = std::clamp<std::size_t>(config_.parallelism, 1, std::max<std::size_t>(questions.size(), 1));
  std::vector<std::jthread> threads;
  for (std::size_t i = 1; i < n; ++i) threads.emplace_back(worker);
  worker();
  return items;
}

// ---------------------------------------------------------------------------
// Transcripts

TranscriptRecord to_transcript(const std::string& pair_id, const std::string& question, QaMode mode,
                               const BatchItem& item) {
  TranscriptRecord r;
  r.pair_id = pair_id;
  r.question = question;
  r.mode = mode;
  if (item.result) {
    r.answer = item.result->answer;
    r.hits = item.result->hits;
    r.facts = item.result->facts;
    r.prompt_hash = text::hex64(item.result->prompt_hash);
  }
  if (item.error) {
    r.error_code = std::string(to_string(item.error->code()));
    r.error_stage = std::string(to_string(item.error->stage()));
    r.error_message = item.error->what();
  }
  return r;
}

std::string transcript_to_line(const TranscriptRecord& r) {
  json hits = json::array();
  for (const auto& h : r.hits) hits.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}});
  json facts = json::array();
  for (const auto& f : r.facts) {
    facts.push_back({{"subject", f.subject_label}, {"predicate", f.predicate}, {"text", f.object_text}});
  }
  json j{{"pair_id", r.pair_id},
         {"question", r.question},
         {"mode", to_string(r.mode)},
         {"answer", r.answer},
         {"hits", hits},
         {"facts", facts},
         {"prompt_hash", r.prompt_hash}};
  if (!r.gold_answer.empty()) j["gold_answer"] = r.gold_answer;
  if (r.requires_table) j["requires_table"] = true;
  if (r.requires_external) j["requires_external"] = true;
  if (r.error_code) j["error"] = {{"code", *r.error_code}, {"stage", r.error_stage}, {"message", r.error_message}};
  return j.dump();
}

TranscriptRecord transcript_from_line(std::string_view line) {
  try {
    const auto j = json::parse(line);
    TranscriptRecord r;
    r.pair_id = j.value("pair_id", "");
    r.question = j.at("question").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.answer = j.value("answer", "");
    for (const auto& h : j.value("hits", json::array())) {
      r.hits.push_back({h.at("chunk_id").get<std::string>(), h.at("score").get<double>()});
    }
    for (const auto& f : j.value("facts", json::array())) {
      r.facts.push_back({f.at("subject").get<std::string>(), f.at("predicate").get<std::string>(),
                         f.at("text").get<std::string>()});
    }
    r.prompt_hash = j.value("prompt_hash", "");
    r.gold_answer = j.value("gold_answer", "");
    r.requires_table = j.value("requires_table", false);
    r.requires_external = j.value("requires_external", false);
    if (j.contains("error")) {
      r.error_code = j["error"].value("code", "");
      r.error_stage = j["error"].value("stage", "");
      r.error_message = j["error"].value("message", "");
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::DatasetError, std::string("bad transcript record: ") + e.what());
  }
}

std::vector<TranscriptRecord> load_transcript(const std::filesystem::path& path) {
  std::vector<TranscriptRecord> out;
  for (const auto& line : text::split(text::read_file(path), '\n')) {
    if (text::trim(line).empty()) continue;
    out.push_back(transcript_from_line(line));
  }
  return out;
}

void save_transcript(const std::vector<TranscriptRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += transcript_to_line(r);
    out += '\n';
  }
  text::write_file_atomic(path, out);
}

}  // namespace rbqa
