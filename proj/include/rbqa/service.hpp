#pragma once

// HTTP/JSON service over the QA engine and the corpus store.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>

#include "rbqa/corpus.hpp"
#include "rbqa/knowledge_graph.hpp"
#include "rbqa/llm.hpp"
#include "rbqa/pipeline.hpp"
#include "rbqa/prompting.hpp"
#include "rbqa/retrieval.hpp"

namespace httplib {
class Server;
}

namespace rbqa {

enum class KgSourceKind { None, Fixture, Endpoint };

std::string_view to_string(KgSourceKind kind);
KgSourceKind parse_kg_source(std::string_view name);

/// Backend from its name; replay needs `fixture`, remote reads RemoteConfig::from_env().
std::shared_ptr<LlmBackend> make_backend(BackendKind kind, const std::filesystem::path& fixture);

/// Term statistics come from `corpus`. Returns nullopt for KgSourceKind::None.
std::optional<KnowledgeGraph> make_knowledge_graph(KgSourceKind kind, const std::filesystem::path& fixture,
                                                   const std::string& endpoint, const Corpus& corpus);

/// Loads `index.tsv` when it matches the corpus, otherwise embeds the corpus
/// (and writes the index back when `dir` is writable).
VectorIndex load_or_build_index(const std::filesystem::path& dir, const Corpus& corpus, const Embedder& embedder);

struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::filesystem::path corpus_dir;  // empty: in-memory corpus
  BackendKind backend = BackendKind::Echo;
  std::filesystem::path fixture;
  QaMode default_mode = QaMode::Rulebook;
  std::size_t k = 3;
  KgSourceKind kg_source = KgSourceKind::None;
  std::filesystem::path kg_fixture;
  std::string sparql_endpoint = "https://dbpedia.org/sparql";
  std::chrono::milliseconds request_timeout{30'000};
  std::size_t max_concurrent = 8;
  std::size_t max_prompt_tokens = kDefaultMaxPromptTokens;

  /// JSON object; keys mirror the field names. Unknown keys are rejected.
  static ServiceConfig from_file(const std::filesystem::path& path);
  /// Overrides from RBQA_BIND, RBQA_PORT, RBQA_CORPUS_DIR, RBQA_BACKEND,
  /// RBQA_FIXTURE, RBQA_MODE, RBQA_K, RBQA_KG_SOURCE, RBQA_KG_FIXTURE,
  /// RBQA_SPARQL_ENDPOINT, RBQA_TIMEOUT_MS, RBQA_MAX_CONCURRENT.
  void apply_env();
};

/// Status code and JSON body of one handled request.
struct ServiceReply {
  int status = 200;
  std::string body;
};

class QaService {
 public:
  using Logger = std::function<void(const std::string& line)>;

  /// Loads the corpus and index, and builds backend and KG from the config.
  explicit QaService(ServiceConfig config);
  /// Injected backend and KG (tests, embedding in other programs).
  QaService(ServiceConfig config, std::shared_ptr<LlmBackend> backend, std::optional<KnowledgeGraph> kg);
  ~QaService();

  QaService(const QaService&) = delete;
  QaService& operator=(const QaService&) = delete;

  // Transport-free handlers; the HTTP routes delegate to these.
  ServiceReply ask(const std::string& body);
  ServiceReply ingest(const std::string& bundle, const ChunkParams& params = {});
  ServiceReply stats() const;
  ServiceReply health() const;

  /// Binds and serves until stop(). Returns false if binding failed.
  bool listen();
  /// Binds to an ephemeral port on the configured address; returns it or -1.
  int bind_ephemeral();
  /// Serves on a socket bound by bind_ephemeral().
  bool listen_after_bind();
  void stop();
  bool running() const;

  void set_logger(Logger logger) { logger_ = std::move(logger); }
  const ServiceConfig& config() const { return config_; }

 private:
  void init_state();
  void install_routes();
  void log_request(const std::string& route, const std::string& mode, int status, std::int64_t latency_ms) const;

  ServiceConfig config_;
  std::shared_ptr<LlmBackend> backend_;
  std::optional<KnowledgeGraph> kg_;
  HashingEmbedder embedder_;
  Corpus corpus_;
  VectorIndex index_;
  mutable std::shared_mutex state_mutex_;
  std::atomic<bool> corpus_loaded_{false};
  std::counting_semaphore<1024> ask_slots_{0};
  std::unique_ptr<httplib::Server> server_;
  Logger logger_;
};

}  // namespace rbqa
