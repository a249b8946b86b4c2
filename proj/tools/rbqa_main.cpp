// rbqa command-line front end.

#include <csignal>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "rbqa/corpus.hpp"
#include "rbqa/error.hpp"
#include "rbqa/evaluation.hpp"
#include "rbqa/knowledge_graph.hpp"
#include "rbqa/llm.hpp"
#include "rbqa/pipeline.hpp"
#include "rbqa/retrieval.hpp"
#include "rbqa/service.hpp"
#include "rbqa/synth.hpp"
#include "rbqa/text.hpp"

using namespace rbqa;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct EngineOptions {
  std::string corpus_dir;
  std::string backend = "echo";
  std::string fixture;
  std::string kg_source = "none";
  std::string kg_fixture;
  std::string sparql_endpoint;
  std::size_t k = 3;
  std::size_t max_prompt_tokens = kDefaultMaxPromptTokens;
  std::size_t parallelism = 4;
};

void add_engine_options(CLI::App* cmd, EngineOptions& o, bool with_backend = true, bool corpus_positional = true) {
  cmd->add_option(corpus_positional ? "corpus,--corpus" : "--corpus", o.corpus_dir, "Corpus directory")->required();
  if (with_backend) {
    cmd->add_option("--backend", o.backend, "echo | replay | remote")->capture_default_str();
    cmd->add_option("--fixture", o.fixture, "Replay fixture file");
  }
  cmd->add_option("--kg-source", o.kg_source, "none | fixture | endpoint")->capture_default_str();
  cmd->add_option("--kg-fixture", o.kg_fixture, "KG label/abstract fixture (TSV)");
  cmd->add_option("--sparql-endpoint", o.sparql_endpoint, "SPARQL endpoint URL");
  cmd->add_option("-k,--top-k", o.k, "Chunks to retrieve")->capture_default_str();
  cmd->add_option("--max-prompt-tokens", o.max_prompt_tokens, "Prompt budget")->capture_default_str();
  cmd->add_option("--parallel", o.parallelism, "Batch workers")->capture_default_str();
}

/// Corpus, index, backend and KG opened from command-line options.
struct Workspace {
  Corpus corpus;
  HashingEmbedder embedder;
  VectorIndex index;
  std::shared_ptr<LlmBackend> backend;
  std::optional<KnowledgeGraph> kg;
  EngineConfig config;

  explicit Workspace(const EngineOptions& o, std::shared_ptr<LlmBackend> injected = nullptr) {
    corpus = Corpus::load(o.corpus_dir);
    index = load_or_build_index(o.corpus_dir, corpus, embedder);
    backend = injected ? injected : make_backend(parse_backend(o.backend), o.fixture);
    kg = make_knowledge_graph(parse_kg_source(o.kg_source), o.kg_fixture, o.sparql_endpoint, corpus);
    config.k = o.k;
    config.max_prompt_tokens = o.max_prompt_tokens;
    config.parallelism = o.parallelism;
  }

  QaEngine engine() { return QaEngine(corpus, index, embedder, *backend, kg, config); }
};

/// One question per line, either plain text or a JSON object with "question"
/// and optionally "pair_id".
std::vector<std::pair<std::string, std::string>> read_questions(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& line : text::split(text::read_file(path), '\n')) {
    const auto t = text::trim(line);
    if (t.empty()) continue;
    const auto id = "q" + std::to_string(out.size() + 1);
    if (t.front() == '{') {
      const auto j = json::parse(t, nullptr, false);
      if (j.is_object() && j.contains("question") && j["question"].is_string()) {
        out.emplace_back(j.value("pair_id", id), j["question"].get<std::string>());
        continue;
      }
    }
    out.emplace_back(id, std::string(t));
  }
  return out;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    text::write_file_atomic(path, content);
  }
}

void print_result(const AskResult& r, bool show_prompt) {
  if (show_prompt) std::cout << "--- prompt\n" << r.prompt.rendered << "\n--- answer\n";
  std::cout << r.answer << "\n";
  if (show_prompt) {
    for (const auto& h : r.hits) std::printf("hit %s %.4f\n", h.chunk_id.c_str(), h.score);
    for (const auto& f : r.facts) std::cout << "fact " << format_fact(f) << "\n";
    std::cout << "prompt_hash " << text::hex64(r.prompt_hash) << "\n";
  }
}

bool ask_yes_no(const std::string& prompt) {
  for (;;) {
    std::cout << prompt << " [y/n] " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) fail(ErrorCode::InvalidArgument, "input ended before the judgment was complete");
    const auto t = text::to_lower(text::trim(line));
    if (t == "y" || t == "yes") return true;
    if (t == "n" || t == "no") return false;
  }
}

ErrorCategory ask_category(QaMode mode) {
  for (;;) {
    std::cout << "error category: [a]mbiguity, [c]omplex question, "
              << (mode == QaMode::Agnostic ? "" : "[w]rong context, ") << "[o]ther " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) fail(ErrorCode::InvalidArgument, "input ended before the judgment was complete");
    const auto t = text::to_lower(text::trim(line));
    if (t == "a") return ErrorCategory::Ambiguity;
    if (t == "c") return ErrorCategory::ComplexQuestion;
    if (t == "w" && mode != QaMode::Agnostic) return ErrorCategory::WrongContext;
    if (t == "o") return ErrorCategory::Other;
  }
}

bool parse_flag(std::string_view s, std::size_t line_no) {
  const auto t = text::to_lower(text::trim(s));
  if (t == "1" || t == "y" || t == "yes" || t == "true") return true;
  if (t == "0" || t == "n" || t == "no" || t == "false") return false;
  fail(ErrorCode::InvalidJudgment, "line " + std::to_string(line_no) + ": expected yes/no, got '" + t + "'");
}

QaService* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rulebook question answering: ingest, retrieve, ask, synthesize and evaluate"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Chunk and index document bundles into a corpus directory");
  std::string ingest_dir;
  std::vector<std::string> ingest_bundles;
  ChunkParams chunk_params;
  ingest->add_option("bundles", ingest_bundles, "Document bundle files")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out,--corpus", ingest_dir, "Corpus directory (created or extended)")->required();
  ingest->add_option("--max-chars", chunk_params.max_chars)->capture_default_str();
  ingest->add_option("--overlap,--overlap-chars", chunk_params.overlap_chars)->capture_default_str();
  ingest->add_option("--snap-window", chunk_params.snap_window)->capture_default_str();

  // index
  auto* index_cmd = app.add_subcommand("index", "Embedding index maintenance and queries");
  index_cmd->require_subcommand(1);
  auto* index_build = index_cmd->add_subcommand("build", "Re-embed every chunk and write index.tsv");
  std::string index_dir;
  index_build->add_option("corpus,--corpus", index_dir)->required();
  auto* index_query = index_cmd->add_subcommand("query", "Top-k chunks for a query text");
  std::string query_text;
  std::size_t query_k = 3;
  bool query_show_text = false;
  index_query->add_option("corpus,--corpus", index_dir)->required();
  index_query->add_option("text,--q", query_text)->required();
  index_query->add_option("-k,--top-k", query_k)->capture_default_str();
  index_query->add_flag("--show-text", query_show_text);

  // kg
  auto* kg_cmd = app.add_subcommand("kg", "Entity linking and fact lookup");
  kg_cmd->require_subcommand(1);
  std::string kg_fixture;
  std::string kg_source = "fixture";
  std::string kg_endpoint;
  auto* kg_link = kg_cmd->add_subcommand("link", "Extract mentions from a question and link them to labels");
  std::string kg_question;
  kg_link->add_option("question,--q", kg_question)->required();
  kg_link->add_option("--fixture", kg_fixture, "Label fixture (TSV)")->required();
  auto* kg_facts = kg_cmd->add_subcommand("facts", "Facts for a label or resource URI");
  std::string kg_entity;
  kg_facts->add_option("entity,--entity", kg_entity)->required();
  kg_facts->add_option("--fixture", kg_fixture, "Label fixture (TSV)")->required();
  kg_facts->add_option("--source", kg_source, "fixture | endpoint")->capture_default_str();
  kg_facts->add_option("--sparql-endpoint", kg_endpoint);

  // ask
  auto* ask = app.add_subcommand("ask", "Answer one question");
  EngineOptions ask_opts;
  std::string ask_question;
  std::string ask_mode = "rulebook";
  bool show_prompt = false;
  add_engine_options(ask, ask_opts);
  ask->add_option("question,--q", ask_question)->required();
  ask->add_option("--mode", ask_mode, "agnostic | rulebook | rulebook_kg")->capture_default_str();
  ask->add_flag("--show-prompt", show_prompt, "Print the prompt, hits and facts");

  // ask-batch
  auto* batch = app.add_subcommand("ask-batch", "Answer one question per line and write a transcript");
  EngineOptions batch_opts;
  std::string batch_questions, batch_out, batch_mode = "rulebook";
  batch->add_option("questions,--questions", batch_questions, "One question per line, plain or JSON")->required();
  add_engine_options(batch, batch_opts, true, false);
  batch->add_option("--mode", batch_mode)->capture_default_str();
  batch->add_option("--out", batch_out, "Transcript JSONL (default stdout)");

  // replay
  auto* replay = app.add_subcommand("replay", "Replay fixture maintenance");
  replay->require_subcommand(1);
  auto* record = replay->add_subcommand("record", "Build the prompt for a question and record its answer");
  EngineOptions record_opts;
  std::string record_question, record_answer, record_mode = "rulebook", record_fixture_path;
  add_engine_options(record, record_opts, false);
  record->add_option("--fixture", record_fixture_path, "Fixture file to update")->required();
  record->add_option("--question", record_question)->required();
  record->add_option("--answer", record_answer)->required();
  record->add_option("--mode", record_mode)->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesized question/answer pairs");
  synth->require_subcommand(1);
  auto* synth_gen = synth->add_subcommand("generate", "Generate pairs from every chunk of a corpus");
  EngineOptions synth_opts;
  std::string synth_out, synth_templates;
  std::size_t per_chunk = 1;
  add_engine_options(synth_gen, synth_opts);
  synth_gen->add_option("--out", synth_out, "Pairs JSONL")->required();
  synth_gen->add_option("--per-chunk", per_chunk)->capture_default_str();
  synth_gen->add_option("--templates", synth_templates, "JSON file overriding prompt templates");
  auto* synth_dedup = synth->add_subcommand("dedup", "Drop duplicate and near-duplicate questions");
  std::string pairs_in, pairs_out;
  double dedup_threshold = kNearDuplicateJaccard;
  synth_dedup->add_option("pairs", pairs_in)->required();
  synth_dedup->add_option("--out", pairs_out)->required();
  synth_dedup->add_option("--threshold", dedup_threshold)->capture_default_str();
  auto* synth_export = synth->add_subcommand("export-review", "Write a review file for manual checking");
  std::string review_path;
  synth_export->add_option("pairs", pairs_in)->required();
  synth_export->add_option("--out", review_path)->required();
  auto* synth_import = synth->add_subcommand("import-review", "Apply review decisions to a pairs file");
  synth_import->add_option("pairs", pairs_in)->required();
  synth_import->add_option("review", review_path)->required();
  synth_import->add_option("--out", pairs_out)->required();
  auto* synth_dataset = synth->add_subcommand("dataset", "Export accepted pairs as an evaluation dataset");
  std::string dataset_corpus, dataset_out;
  synth_dataset->add_option("pairs", pairs_in)->required();
  synth_dataset->add_option("corpus", dataset_corpus)->required();
  synth_dataset->add_option("--out", dataset_out)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluation runs, judgments and reports");
  eval->require_subcommand(1);
  auto* eval_run = eval->add_subcommand("run", "Ask every dataset question in every mode");
  EngineOptions eval_opts;
  std::string eval_dataset, eval_modes = "agnostic,rulebook,rulebook_kg", eval_out;
  eval_run->add_option("dataset,--dataset", eval_dataset, "Dataset JSONL")->required();
  add_engine_options(eval_run, eval_opts, true, false);
  eval_run->add_option("--modes", eval_modes)->capture_default_str();
  eval_run->add_option("--out", eval_out, "Transcript JSONL (default stdout)");
  auto* eval_judge = eval->add_subcommand("judge", "Record human verdicts for a transcript");
  std::string judge_transcript, judge_out, judge_id, judge_import, judge_mode;
  eval_judge->add_option("transcript", judge_transcript)->required();
  eval_judge->add_option("--out", judge_out, "Judgments JSONL (appended)")->required();
  eval_judge->add_option("--judge-id", judge_id)->required();
  eval_judge->add_option("--import", judge_import,
                         "TSV of pair_id, mode, answerable, complete, error_category instead of prompting");
  eval_judge->add_option("--mode", judge_mode, "Only judge this mode");
  auto* eval_report = eval->add_subcommand("report", "Accuracy, differences and error shares");
  std::vector<std::string> report_inputs;
  std::string report_format = "text";
  eval_report->add_option("judgments", report_inputs)->required();
  eval_report->add_option("--format", report_format, "text | csv")->capture_default_str();
  auto* eval_reconcile = eval->add_subcommand("reconcile", "Check a published percentage against its counts");
  std::size_t rec_correct = 0, rec_total = 0;
  std::string rec_reported;
  eval_reconcile->add_option("--correct", rec_correct)->required();
  eval_reconcile->add_option("--total", rec_total)->required();
  eval_reconcile->add_option("--reported", rec_reported)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_config;
  ServiceConfig svc;
  std::string svc_corpus, svc_backend, svc_fixture, svc_mode, svc_kg, svc_kg_fixture;
  int svc_port = 0;
  serve->add_option("--config", serve_config, "JSON config file");
  serve->add_option("--port", svc_port);
  serve->add_option("--corpus", svc_corpus);
  serve->add_option("--backend", svc_backend);
  serve->add_option("--fixture", svc_fixture);
  serve->add_option("--mode", svc_mode, "Default mode");
  serve->add_option("--kg-source", svc_kg);
  serve->add_option("--kg-fixture", svc_kg_fixture);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      auto corpus = Corpus::load(ingest_dir);
      HashingEmbedder embedder;
      auto index = load_or_build_index(ingest_dir, corpus, embedder);
      for (const auto& path : ingest_bundles) {
        const auto doc = load_bundle(path);
        const auto chunks = corpus.add_document(doc, chunk_params);
        for (const auto& c : chunks) index.add(c.chunk_id, embedder.embed(c.text));
        std::cout << doc.doc_id << ": " << chunks.size() << " chunks\n";
      }
      corpus.save(ingest_dir);
      index.save(fs::path(ingest_dir) / kIndexFile);
      const auto s = corpus.stats();
      std::cout << "corpus: " << s.documents << " documents, " << s.chunks << " chunks, " << s.tables << " tables\n";
    } else if (*index_build) {
      const auto corpus = Corpus::load(index_dir);
      const auto index = build_index(corpus, HashingEmbedder{});
      index.save(fs::path(index_dir) / kIndexFile);
      std::cout << "indexed " << index.size() << " chunks\n";
    } else if (*index_query) {
      const auto corpus = Corpus::load(index_dir);
      HashingEmbedder embedder;
      const auto index = load_or_build_index(index_dir, corpus, embedder);
      for (const auto& h : index.retrieve(embedder.embed(query_text), query_k)) {
        std::printf("%.6f\t%s\n", h.score, h.chunk_id.c_str());
        if (query_show_text) {
          if (const auto* c = corpus.find_chunk(h.chunk_id)) std::cout << c->text << "\n\n";
        }
      }
    } else if (*kg_link) {
      const LabelIndex labels(load_kg_fixture(kg_fixture));
      for (const auto& m : extract_mentions(kg_question)) {
        const auto e = labels.link(m);
        if (e) {
          std::printf("%s\t%s\t%s\t%.3f\n", m.surface.c_str(), e->label.c_str(), e->uri.c_str(), e->match_score);
        } else {
          std::printf("%s\t-\n", m.surface.c_str());
        }
      }
    } else if (*kg_facts) {
      auto records = load_kg_fixture(kg_fixture);
      const LabelIndex labels(records);
      KgEntity entity;
      if (kg_entity.find("://") != std::string::npos) {
        entity.uri = kg_entity;
        for (const auto& r : records) {
          if (r.uri == kg_entity) entity.label = r.label;
        }
      } else if (auto e = labels.link(kg_entity)) {
        entity = *e;
      } else {
        fail(ErrorCode::EntityNotFound, "no label matches '" + kg_entity + "'", Stage::Linking);
      }
      std::unique_ptr<FactSource> source;
      if (parse_kg_source(kg_source) == KgSourceKind::Endpoint) {
        SparqlConfig cfg;
        if (!kg_endpoint.empty()) cfg.endpoint_url = kg_endpoint;
        source = std::make_unique<SparqlFactSource>(cfg);
      } else {
        source = std::make_unique<FixtureFactSource>(std::move(records));
      }
      for (const auto& f : source->fetch(entity)) std::cout << format_fact(f) << "\n";
    } else if (*ask) {
      Workspace ws(ask_opts);
      auto engine = ws.engine();
      print_result(engine.answer_question(ask_question, parse_mode(ask_mode), ask_opts.k), show_prompt);
    } else if (*batch) {
      Workspace ws(batch_opts);
      auto engine = ws.engine();
      const auto questions = read_questions(batch_questions);
      std::vector<std::string> texts;
      for (const auto& q : questions) texts.push_back(q.second);
      const auto mode = parse_mode(batch_mode);
      const auto items = engine.batch_ask(texts, mode, batch_opts.k);
      std::vector<TranscriptRecord> records;
      std::size_t failed = 0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        records.push_back(to_transcript(questions[i].first, texts[i], mode, items[i]));
        if (items[i].error) ++failed;
      }
      std::string out;
      for (const auto& r : records) out += transcript_to_line(r) + "\n";
      write_output(batch_out, out);
      if (failed) std::cerr << failed << " of " << items.size() << " questions failed\n";
    } else if (*record) {
      Workspace ws(record_opts, std::make_shared<EchoBackend>());
      const auto engine = ws.engine();
      const auto prepared = engine.prepare(record_question, parse_mode(record_mode), record_opts.k);
      auto fixture = ReplayFixture::load_or_empty(record_fixture_path);
      record_fixture(engine.make_request(prepared.prompt.rendered), record_answer, fixture, fs::path(record_fixture_path));
      std::cout << text::hex64(prompt_hash(prepared.prompt.rendered)) << "\n";
    } else if (*synth_gen) {
      Workspace ws(synth_opts);
      SynthOptions options;
      options.per_chunk = per_chunk;
      if (!synth_templates.empty()) options.templates = SynthTemplates::load(synth_templates);
      const auto run = generate_pairs(ws.corpus.chunks(), *ws.backend, ws.kg ? &*ws.kg : nullptr, options);
      save_pairs(run.pairs, synth_out);
      for (const auto& f : run.failures) {
        std::cerr << "chunk " << f.chunk_id << ": " << to_string(f.error.code()) << " [" << to_string(f.error.stage())
                  << "] " << f.error.what() << "\n";
      }
      std::cout << run.pairs.size() << " pairs, " << run.failures.size() << " failed chunks\n";
    } else if (*synth_dedup) {
      const auto pairs = load_pairs(pairs_in);
      const auto kept = dedup(pairs, dedup_threshold);
      save_pairs(kept, pairs_out);
      std::cout << kept.size() << " of " << pairs.size() << " pairs kept\n";
    } else if (*synth_export) {
      export_review(load_pairs(pairs_in), review_path);
    } else if (*synth_import) {
      const auto pairs = import_review(review_path, load_pairs(pairs_in));
      save_pairs(pairs, pairs_out);
      std::size_t accepted = 0, rejected = 0;
      for (const auto& p : pairs) {
        accepted += p.status == ReviewStatus::Accepted;
        rejected += p.status == ReviewStatus::Rejected;
      }
      std::cout << accepted << " accepted, " << rejected << " rejected, " << pairs.size() - accepted - rejected
                << " pending\n";
    } else if (*synth_dataset) {
      const auto dataset = to_dataset(load_pairs(pairs_in), Corpus::load(dataset_corpus));
      save_dataset(dataset, dataset_out);
      std::cout << dataset.size() << " pairs exported\n";
    } else if (*eval_run) {
      Workspace ws(eval_opts);
      auto engine = ws.engine();
      const auto records = run_eval(load_dataset(eval_dataset), parse_modes(eval_modes), eval_opts.k, engine);
      std::string out;
      std::size_t failed = 0;
      for (const auto& r : records) {
        out += transcript_to_line(r) + "\n";
        if (r.error_code) ++failed;
      }
      write_output(eval_out, out);
      if (failed) std::cerr << failed << " of " << records.size() << " answers failed\n";
    } else if (*eval_judge) {
      const auto records = load_transcript(judge_transcript);
      std::optional<QaMode> only;
      if (!judge_mode.empty()) only = parse_mode(judge_mode);
      std::set<std::pair<std::string, QaMode>> done;
      if (fs::exists(judge_out)) {
        for (const auto& j : load_judgments(judge_out)) {
          if (j.judge_id == judge_id) done.insert({j.pair_id, j.mode});
        }
      }
      std::map<std::pair<std::string, QaMode>, const TranscriptRecord*> by_key;
      for (const auto& r : records) by_key[{r.pair_id, r.mode}] = &r;

      std::vector<Judgment> imported;
      if (!judge_import.empty()) {
        std::size_t line_no = 0;
        for (const auto& line : text::split(text::read_file(judge_import), '\n')) {
          ++line_no;
          if (text::trim(line).empty() || line.starts_with('#')) continue;
          const auto f = text::split(line, '\t');
          if (f.size() < 4 || f.size() > 5) {
            fail(ErrorCode::InvalidJudgment, "line " + std::to_string(line_no) + ": expected 4 or 5 tab-separated fields");
          }
          const auto key = std::make_pair(std::string(text::trim(f[0])), parse_mode(f[1]));
          const auto it = by_key.find(key);
          if (it == by_key.end()) {
            fail(ErrorCode::InvalidJudgment, "line " + std::to_string(line_no) + ": no transcript record for " + key.first);
          }
          Judgment j;
          j.pair_id = key.first;
          j.mode = key.second;
          j.judge_id = judge_id;
          j.answerable = parse_flag(f[2], line_no);
          j.complete = parse_flag(f[3], line_no);
          j.correct = j.answerable && j.complete;
          j.error_category = f.size() == 5 ? parse_error_category(f[4]) : ErrorCategory::None;
          imported.push_back(record_judgment(*it->second, j));
        }
        append_judgments(imported, judge_out);
        std::cout << imported.size() << " judgments recorded\n";
      } else {
        std::size_t n = 0;
        for (const auto& r : records) {
          if ((only && r.mode != *only) || done.count({r.pair_id, r.mode})) continue;
          std::cout << "\n[" << r.pair_id << " / " << to_string(r.mode) << "]\nQ: " << r.question << "\nA: "
                    << (r.error_code ? "(no answer: " + *r.error_code + ")" : r.answer) << "\n";
          if (!r.gold_answer.empty()) std::cout << "Reference: " << r.gold_answer << "\n";
          Judgment j;
          j.pair_id = r.pair_id;
          j.mode = r.mode;
          j.judge_id = judge_id;
          j.answerable = ask_yes_no("answerable?");
          j.complete = ask_yes_no("complete?");
          j.correct = j.answerable && j.complete;
          j.error_category = j.correct ? ErrorCategory::None : ask_category(r.mode);
          append_judgments({record_judgment(r, j)}, judge_out);
          ++n;
        }
        std::cout << n << " judgments recorded\n";
      }
    } else if (*eval_report) {
      std::vector<Judgment> all;
      for (const auto& p : report_inputs) {
        auto js = load_judgments(p);
        all.insert(all.end(), js.begin(), js.end());
      }
      const auto report = build_report(all);
      if (report_format == "csv") {
        std::cout << format_report_csv(report);
      } else if (report_format == "text") {
        std::cout << format_report_text(report);
      } else {
        fail(ErrorCode::InvalidArgument, "unknown report format '" + report_format + "'");
      }
    } else if (*eval_reconcile) {
      const auto r = reconcile(rec_correct, rec_total, Percent::parse(rec_reported));
      std::cout << rec_correct << "/" << rec_total << " = " << r.computed.percent.str() << "%, reported "
                << r.reported.str() << "%: " << (r.matches ? "match" : "rounding mismatch") << "\n";
      if (!r.matches) {
        std::cout << "denominators consistent with " << r.reported.str() << "%:";
        for (const auto d : r.consistent_denominators) std::cout << " " << d;
        std::cout << "\n";
        return 3;
      }
    } else if (*serve) {
      ServiceConfig cfg = serve_config.empty() ? ServiceConfig{} : ServiceConfig::from_file(serve_config);
      cfg.apply_env();
      if (svc_port) cfg.port = svc_port;
      if (!svc_corpus.empty()) cfg.corpus_dir = svc_corpus;
      if (!svc_backend.empty()) cfg.backend = parse_backend(svc_backend);
      if (!svc_fixture.empty()) cfg.fixture = svc_fixture;
      if (!svc_mode.empty()) cfg.default_mode = parse_mode(svc_mode);
      if (!svc_kg.empty()) cfg.kg_source = parse_kg_source(svc_kg);
      if (!svc_kg_fixture.empty()) cfg.kg_fixture = svc_kg_fixture;
      QaService service(cfg);
      g_service = &service;
      std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
      });
      std::clog << "listening on " << cfg.bind_address << ":" << cfg.port << " (backend "
                << to_string(cfg.backend) << ")\n";
      if (!service.listen()) {
        std::cerr << "error: cannot bind " << cfg.bind_address << ":" << cfg.port << "\n";
        return 1;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code());
    if (e.stage() != Stage::None) std::cerr << " [" << to_string(e.stage()) << "]";
    std::cerr << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
