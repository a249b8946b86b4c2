#include "rbqa/service.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <mutex>

#include "httplib.h"
#include "json.hpp"
#include "rbqa/error.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(KgSourceKind kind) {
  switch (kind) {
    case KgSourceKind::None: return "none";
    case KgSourceKind::Fixture: return "fixture";
    case KgSourceKind::Endpoint: return "endpoint";
  }
  return "none";
}

KgSourceKind parse_kg_source(std::string_view name) {
  const auto n = text::to_lower(text::trim(name));
  if (n == "none" || n.empty()) return KgSourceKind::None;
  if (n == "fixture") return KgSourceKind::Fixture;
  if (n == "endpoint" || n == "dbpedia") return KgSourceKind::Endpoint;
  fail(ErrorCode::InvalidArgument, "unknown KG source '" + n + "' (expected none, fixture or endpoint)");
}

std::shared_ptr<LlmBackend> make_backend(BackendKind kind, const std::filesystem::path& fixture) {
  switch (kind) {
    case BackendKind::Echo: return std::make_shared<EchoBackend>();
    case BackendKind::Replay:
      if (fixture.empty()) fail(ErrorCode::InvalidArgument, "the replay backend needs a fixture file");
      return std::make_shared<ReplayBackend>(std::make_shared<const ReplayFixture>(ReplayFixture::load(fixture)));
    case BackendKind::Remote: return std::make_shared<RemoteBackend>(RemoteConfig::from_env());
  }
  fail(ErrorCode::InvalidArgument, "unknown backend");
}

std::optional<KnowledgeGraph> make_knowledge_graph(KgSourceKind kind, const std::filesystem::path& fixture,
                                                   const std::string& endpoint, const Corpus& corpus) {
  if (kind == KgSourceKind::None) return std::nullopt;
  if (fixture.empty()) fail(ErrorCode::IndexUnavailable, "entity linking needs a label fixture file", Stage::Linking);
  auto records = load_kg_fixture(fixture);
  KnowledgeGraph kg;
  kg.labels = std::make_shared<const LabelIndex>(records);
  kg.term_stats = std::make_shared<const TermStats>(TermStats::from_corpus(corpus));
  if (kind == KgSourceKind::Fixture) {
    kg.facts = std::make_shared<const FixtureFactSource>(std::move(records));
  } else {
    SparqlConfig cfg;
    if (!endpoint.empty()) cfg.endpoint_url = endpoint;
    kg.facts = std::make_shared<const SparqlFactSource>(cfg);
  }
  return kg;
}

VectorIndex load_or_build_index(const std::filesystem::path& dir, const Corpus& corpus, const Embedder& embedder) {
  if (!dir.empty()) {
    const auto path = dir / kIndexFile;
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
      try {
        auto index = VectorIndex::load(path, embedder.dimension());
        bool same = index.size() == corpus.chunks().size();
        for (std::size_t i = 0; same && i < index.size(); ++i) same = index.ids()[i] == corpus.chunks()[i].chunk_id;
        if (same) return index;
      } catch (const Error&) {
      }
    }
  }
  auto index = build_index(corpus, embedder);
  if (!dir.empty() && !index.empty()) {
    try {
      index.save(dir / kIndexFile);
    } catch (const Error&) {
    }
  }
  return index;
}

// ---------------------------------------------------------------------------
// Configuration

ServiceConfig ServiceConfig::from_file(const std::filesystem::path& path) {
  ServiceConfig c;
  try {
    const auto j = json::parse(text::read_file(path));
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, path.string() + ": expected a JSON object");
    for (const auto& [key, v] : j.items()) {
      if (key == "bind_address") c.bind_address = v.get<std::string>();
      else if (key == "port") c.port = v.get<int>();
      else if (key == "corpus_dir") c.corpus_dir = v.get<std::string>();
      else if (key == "backend") c.backend = parse_backend(v.get<std::string>());
      else if (key == "fixture") c.fixture = v.get<std::string>();
      else if (key == "default_mode") c.default_mode = parse_mode(v.get<std::string>());
      else if (key == "k") c.k = v.get<std::size_t>();
      else if (key == "kg_source") c.kg_source = parse_kg_source(v.get<std::string>());
      else if (key == "kg_fixture") c.kg_fixture = v.get<std::string>();
      else if (key == "sparql_endpoint") c.sparql_endpoint = v.get<std::string>();
      else if (key == "request_timeout_ms") c.request_timeout = std::chrono::milliseconds(v.get<std::int64_t>());
      else if (key == "max_concurrent") c.max_concurrent = v.get<std::size_t>();
      else if (key == "max_prompt_tokens") c.max_prompt_tokens = v.get<std::size_t>();
      else fail(ErrorCode::InvalidArgument, path.string() + ": unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return c;
}

namespace {

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

std::size_t env_size(const char* name, const char* value) {
  try {
    const auto n = std::stoll(value);
    if (n < 0) throw std::out_of_range("negative");
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArgument, std::string(name) + ": expected a non-negative integer, got '" + value + "'");
  }
}

}  // namespace

void ServiceConfig::apply_env() {
  if (auto v = env("RBQA_BIND")) bind_address = v;
  if (auto v = env("RBQA_PORT")) port = static_cast<int>(env_size("RBQA_PORT", v));
  if (auto v = env("RBQA_CORPUS_DIR")) corpus_dir = v;
  if (auto v = env("RBQA_BACKEND")) backend = parse_backend(v);
  if (auto v = env("RBQA_FIXTURE")) fixture = v;
  if (auto v = env("RBQA_MODE")) default_mode = parse_mode(v);
  if (auto v = env("RBQA_K")) k = env_size("RBQA_K", v);
  if (auto v = env("RBQA_KG_SOURCE")) kg_source = parse_kg_source(v);
  if (auto v = env("RBQA_KG_FIXTURE")) kg_fixture = v;
  if (auto v = env("RBQA_SPARQL_ENDPOINT")) sparql_endpoint = v;
  if (auto v = env("RBQA_TIMEOUT_MS")) {
    request_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(env_size("RBQA_TIMEOUT_MS", v)));
  }
  if (auto v = env("RBQA_MAX_CONCURRENT")) max_concurrent = env_size("RBQA_MAX_CONCURRENT", v);
}

// ---------------------------------------------------------------------------
// Service

namespace {

ServiceReply json_reply(int status, const json& body) { return {status, body.dump()}; }

ServiceReply error_reply(int status, std::string_view code, std::string_view stage, std::string_view message) {
  return json_reply(status, {{"error", {{"code", code}, {"stage", stage}, {"message", message}}}});
}

ServiceReply error_reply(int status, const Error& e) {
  return error_reply(status, to_string(e.code()), to_string(e.stage()), e.what());
}

int ask_status(const Error& e) {
  switch (e.code()) {
    case ErrorCode::EmptyQuestion:
    case ErrorCode::InvalidArgument: return 400;
    case ErrorCode::EmptyIndex: return 409;
    case ErrorCode::NoContext:
    case ErrorCode::BudgetTooSmall: return 422;
    case ErrorCode::Timeout:
    case ErrorCode::EndpointTimeout: return 504;
    default: return 502;
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace

QaService::QaService(ServiceConfig config) : config_(std::move(config)) {
  init_state();
  backend_ = make_backend(config_.backend, config_.fixture);
  kg_ = make_knowledge_graph(config_.kg_source, config_.kg_fixture, config_.sparql_endpoint, corpus_);
}

QaService::QaService(ServiceConfig config, std::shared_ptr<LlmBackend> backend, std::optional<KnowledgeGraph> kg)
    : config_(std::move(config)), backend_(std::move(backend)), kg_(std::move(kg)) {
  if (!backend_) fail(ErrorCode::InvalidArgument, "service needs a completion backend");
  init_state();
}

QaService::~QaService() { stop(); }

void QaService::init_state() {
  if (config_.max_concurrent == 0) fail(ErrorCode::InvalidArgument, "max_concurrent must be at least 1");
  if (config_.k == 0) fail(ErrorCode::InvalidArgument, "k must be at least 1");
  if (!config_.corpus_dir.empty()) {
    std::filesystem::create_directories(config_.corpus_dir);
    corpus_ = Corpus::load(config_.corpus_dir);
  }
  index_ = load_or_build_index(config_.corpus_dir, corpus_, embedder_);
  corpus_loaded_ = !index_.empty();
  ask_slots_.release(static_cast<std::ptrdiff_t>(std::min<std::size_t>(config_.max_concurrent, 1024)));
  logger_ = [](const std::string& line) {
    static std::mutex m;
    std::lock_guard lock(m);
    std::clog << line << '\n';
  };
}

void QaService::log_request(const std::string& route, const std::string& mode, int status,
                            std::int64_t latency_ms) const {
  if (!logger_) return;
  logger_(utc_timestamp() + " route=" + route + " mode=" + (mode.empty() ? "-" : mode) +
          " status=" + std::to_string(status) + " latency_ms=" + std::to_string(latency_ms));
}

ServiceReply QaService::ask(const std::string& body) {
  const auto start = Clock::now();
  std::string mode_name;
  const auto finish = [&](ServiceReply r) {
    log_request("POST /v1/ask", mode_name, r.status,
                std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
    return r;
  };

  std::string question;
  QaMode mode = config_.default_mode;
  std::size_t k = config_.k;
  try {
    const auto j = json::parse(body);
    if (!j.is_object()) return finish(error_reply(400, "InvalidArgument", "", "request body must be a JSON object"));
    if (!j.contains("question") || !j["question"].is_string()) {
      return finish(error_reply(400, "EmptyQuestion", "", "field 'question' (string) is required"));
    }
    question = j["question"].get<std::string>();
    if (j.contains("mode") && !j["mode"].is_null()) mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("k") && !j["k"].is_null()) {
      if (!j["k"].is_number_integer() || j["k"].get<std::int64_t>() < 1) {
        return finish(error_reply(400, "InvalidArgument", "", "field 'k' must be a positive integer"));
      }
      k = j["k"].get<std::size_t>();
    }
  } catch (const json::exception& e) {
    return finish(error_reply(400, "InvalidArgument", "", std::string("bad request body: ") + e.what()));
  } catch (const Error& e) {
    return finish(error_reply(400, e));
  }
  mode_name = std::string(to_string(mode));
  if (text::trim(question).empty()) return finish(error_reply(400, "EmptyQuestion", "", "question is empty"));

  ask_slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{ask_slots_};

  try {
    std::shared_lock lock(state_mutex_);
    EngineConfig ec;
    ec.k = config_.k;
    ec.max_prompt_tokens = config_.max_prompt_tokens;
    QaEngine engine(corpus_, index_, embedder_, *backend_, kg_, ec);
    const auto r = engine.answer_question(question, mode, k);
    json hits = json::array();
    for (const auto& h : r.hits) {
      const auto* chunk = corpus_.find_chunk(h.chunk_id);
      hits.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}, {"text", chunk ? chunk->text : ""}});
    }
    json facts = json::array();
    for (const auto& f : r.facts) {
      facts.push_back({{"subject", f.subject_label}, {"predicate", f.predicate}, {"text", f.object_text}});
    }
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    return finish(json_reply(200, {{"answer", r.answer},
                                   {"mode", to_string(r.mode)},
                                   {"hits", hits},
                                   {"facts", facts},
                                   {"prompt_hash", text::hex64(r.prompt_hash)},
                                   {"latency_ms", latency}}));
  } catch (const Error& e) {
    return finish(error_reply(ask_status(e), e));
  } catch (const std::exception& e) {
    return finish(error_reply(500, "InternalError", "", e.what()));
  }
}

ServiceReply QaService::ingest(const std::string& bundle, const ChunkParams& params) {
  const auto start = Clock::now();
  const auto finish = [&](ServiceReply r) {
    log_request("POST /v1/corpus/documents", "", r.status,
                std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
    return r;
  };

  SourceDocument doc;
  try {
    doc = parse_bundle(bundle);
  } catch (const Error& e) {
    return finish(error_reply(400, e));
  }

  std::unique_lock lock(state_mutex_);
  if (corpus_.contains_document(doc.doc_id)) {
    return finish(error_reply(409, "DuplicateDocument", "", "document '" + doc.doc_id + "' is already ingested"));
  }
  const auto docs_before = corpus_.documents().size();
  const auto index_before = index_.size();
  std::size_t chunk_count = 0;
  try {
    const auto chunks = corpus_.add_document(doc, params);
    chunk_count = chunks.size();
    for (const auto& c : chunks) index_.add(c.chunk_id, embedder_.embed(c.text));
    if (!config_.corpus_dir.empty()) {
      corpus_.save(config_.corpus_dir);
      index_.save(config_.corpus_dir / kIndexFile);
    }
  } catch (const std::exception& e) {
    corpus_.truncate(docs_before);
    index_.truncate(index_before);
    if (!config_.corpus_dir.empty()) {
      try {
        corpus_.save(config_.corpus_dir);
        index_.save(config_.corpus_dir / kIndexFile);
      } catch (const std::exception&) {
      }
    }
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
      const bool client = err->code() == ErrorCode::InvalidChunkParams || err->code() == ErrorCode::ValidationError ||
                          err->code() == ErrorCode::EmptyText || err->code() == ErrorCode::DuplicateDocument;
      return finish(error_reply(err->code() == ErrorCode::DuplicateDocument ? 409 : client ? 400 : 500, *err));
    }
    return finish(error_reply(500, "InternalError", "", e.what()));
  }
  corpus_loaded_ = !index_.empty();
  if (kg_) {
    kg_->term_stats = std::make_shared<const TermStats>(TermStats::from_corpus(corpus_));
  }
  return finish(json_reply(200, {{"doc_id", doc.doc_id}, {"chunk_count", chunk_count}}));
}

ServiceReply QaService::stats() const {
  std::shared_lock lock(state_mutex_);
  const auto s = corpus_.stats();
  return json_reply(200, {{"documents", s.documents}, {"chunks", s.chunks}, {"tables", s.tables}});
}

ServiceReply QaService::health() const {
  return json_reply(200, {{"status", "ok"}, {"backend", to_string(backend_->kind())}, {"corpus_loaded", corpus_loaded_.load()}});
}

void QaService::install_routes() {
  if (server_) return;
  server_ = std::make_unique<httplib::Server>();
  const auto pool = config_.max_concurrent + 2;  // headroom so health and stats never queue behind /ask
  server_->new_task_queue = [pool] { return new httplib::ThreadPool(pool); };
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  const auto send = [](httplib::Response& res, const ServiceReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server_->Post("/v1/ask", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, ask(req.body));
  });
  server_->Post("/v1/corpus/documents", [this, send](const httplib::Request& req, httplib::Response& res) {
    ChunkParams params;
    try {
      if (req.has_param("max_chars")) params.max_chars = std::stoul(req.get_param_value("max_chars"));
      if (req.has_param("overlap_chars")) params.overlap_chars = std::stoul(req.get_param_value("overlap_chars"));
      if (req.has_param("snap_window")) params.snap_window = std::stoul(req.get_param_value("snap_window"));
    } catch (const std::exception&) {
      send(res, error_reply(400, "InvalidChunkParams", "", "chunk parameters must be non-negative integers"));
      return;
    }
    send(res, ingest(req.body, params));
  });
  server_->Get("/v1/corpus/stats", [this, send](const httplib::Request&, httplib::Response& res) {
    const auto start = Clock::now();
    const auto r = stats();
    send(res, r);
    log_request("GET /v1/corpus/stats", "", r.status,
                std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
  });
  server_->Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
    const auto start = Clock::now();
    const auto r = health();
    send(res, r);
    log_request("GET /v1/health", "", r.status,
                std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
  });
}

bool QaService::listen() {
  install_routes();
  return server_->listen(config_.bind_address, config_.port);
}

int QaService::bind_ephemeral() {
  install_routes();
  return server_->bind_to_any_port(config_.bind_address);
}

bool QaService::listen_after_bind() {
  install_routes();
  return server_->listen_after_bind();
}

void QaService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

bool QaService::running() const { return server_ && server_->is_running(); }

}  // namespace rbqa
