#pragma once

// Completion backends: remote chat-completion API, fixture replay and echo.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace rbqa {

class HttpTransport;

enum class BackendKind { Remote, Replay, Echo };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend(std::string_view name);

struct LlmRequest {
  std::string prompt;
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_output_tokens = 512;
};

struct LlmResponse {
  std::string text;
  std::uint64_t prompt_hash = 0;
  BackendKind backend = BackendKind::Echo;
  std::int64_t latency_ms = 0;
};

/// 64-bit FNV-1a over the exact prompt bytes.
std::uint64_t prompt_hash(std::string_view prompt);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual LlmResponse complete(const LlmRequest& request) = 0;
  virtual BackendKind kind() const = 0;
};

/// The quoted question of a QA prompt, or nullopt when `prompt` does not use one
/// of the answering templates.
std::optional<std::string> question_segment(std::string_view prompt);

/// Returns the question segment of QA prompts and any other prompt verbatim.
class EchoBackend final : public LlmBackend {
 public:
  LlmResponse complete(const LlmRequest& request) override;
  BackendKind kind() const override { return BackendKind::Echo; }
};

/// Recorded responses keyed by prompt hash. File form, sorted by hash:
///   <16 hex digits><TAB><base64 response>
class ReplayFixture {
 public:
  static ReplayFixture parse(std::string_view content);
  /// Throws IoError when the file cannot be read.
  static ReplayFixture load(const std::filesystem::path& path);
  /// Empty fixture when the file does not exist yet.
  static ReplayFixture load_or_empty(const std::filesystem::path& path);

  std::string serialize() const;
  /// Throws FixtureWriteError.
  void save(const std::filesystem::path& path) const;

  std::optional<std::string> find(std::uint64_t hash) const;
  void put(std::uint64_t hash, std::string response_text);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::uint64_t, std::string> entries_;
};

/// Records `response_text` for the request's prompt and, when `path` is given,
/// persists the fixture.
void record_fixture(const LlmRequest& request, std::string response_text, ReplayFixture& fixture,
                    const std::optional<std::filesystem::path>& path = std::nullopt);

class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(std::shared_ptr<const ReplayFixture> fixture) : fixture_(std::move(fixture)) {}
  /// Throws ReplayMiss when the prompt hash was never recorded.
  LlmResponse complete(const LlmRequest& request) override;
  BackendKind kind() const override { return BackendKind::Replay; }

 private:
  std::shared_ptr<const ReplayFixture> fixture_;
};

struct RemoteConfig {
  std::string url = "https://api.openai.com/v1/chat/completions";
  std::string api_key;
  std::string model_id = "gpt-3.5-turbo";
  std::chrono::milliseconds timeout{60'000};
  /// Delay before each retry; its size is the retry count (at most 3 attempts total).
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)};

  /// RBQA_LLM_URL, RBQA_LLM_API_KEY (or OPENAI_API_KEY), RBQA_LLM_MODEL.
  static RemoteConfig from_env();
};

/// Chat-completion client sending the prompt as one user message.
class RemoteBackend final : public LlmBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit RemoteBackend(RemoteConfig config, std::shared_ptr<HttpTransport> transport = nullptr,
                         Sleeper sleeper = nullptr);
  ~RemoteBackend() override;

  /// Throws AuthFailure, RateLimited, Timeout or BackendFailure.
  LlmResponse complete(const LlmRequest& request) override;
  BackendKind kind() const override { return BackendKind::Remote; }

  std::string request_body(const LlmRequest& request) const;
  static std::string parse_completion(std::string_view body);

  std::uint64_t requests_sent() const { return requests_sent_.load(); }

 private:
  RemoteConfig config_;
  std::string path_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::atomic<std::uint64_t> requests_sent_{0};
  std::counting_semaphore<64> in_flight_{4};
};

}  // namespace rbqa
