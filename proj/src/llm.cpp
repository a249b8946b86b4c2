#include "rbqa/llm.hpp"

#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "rbqa/error.hpp"
#include "rbqa/http.hpp"
#include "rbqa/prompting.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Remote: return "remote";
    case BackendKind::Replay: return "replay";
    case BackendKind::Echo: return "echo";
  }
  return "echo";
}

BackendKind parse_backend(std::string_view name) {
  const auto n = text::trim(name);
  if (n == "remote") return BackendKind::Remote;
  if (n == "replay") return BackendKind::Replay;
  if (n == "echo") return BackendKind::Echo;
  fail(ErrorCode::InvalidArgument, "unknown backend '" + std::string(n) + "' (expected remote, replay or echo)");
}

std::uint64_t prompt_hash(std::string_view prompt) { return text::fnv1a64(prompt); }

namespace {

std::int64_t elapsed_ms(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

}  // namespace

std::optional<std::string> question_segment(std::string_view prompt) {
  const std::string kg_open = std::string(kKgIndicator) + ": '";
  const std::string open = std::string(kIndicator) + ": '";
  if (prompt.starts_with(kg_open)) {
    const auto body = prompt.substr(kg_open.size());
    const auto end = body.find("' " + std::string(kContextMarker));
    if (end != std::string_view::npos) return std::string(body.substr(0, end));
    if (body.ends_with('\'')) return std::string(body.substr(0, body.size() - 1));
    return std::nullopt;
  }
  if (prompt.starts_with(open)) {
    const auto body = prompt.substr(open.size());
    const auto end = body.find("', " + std::string(kRulebookContextPhrase) + ": ");
    if (end != std::string_view::npos) return std::string(body.substr(0, end));
    if (body.ends_with('\'')) return std::string(body.substr(0, body.size() - 1));
  }
  return std::nullopt;
}

LlmResponse EchoBackend::complete(const LlmRequest& request) {
  const auto start = Clock::now();
  LlmResponse r;
  r.text = question_segment(request.prompt).value_or(request.prompt);
  r.prompt_hash = prompt_hash(request.prompt);
  r.backend = BackendKind::Echo;
  r.latency_ms = elapsed_ms(start);
  return r;
}

// ---------------------------------------------------------------------------
// Replay

ReplayFixture ReplayFixture::parse(std::string_view content) {
  ReplayFixture f;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    try {
      if (tab == std::string::npos) throw std::invalid_argument("missing tab");
      f.entries_[text::parse_hex64(std::string_view(line).substr(0, tab))] =
          text::base64_decode(std::string_view(line).substr(tab + 1));
    } catch (const std::invalid_argument& e) {
      fail(ErrorCode::IoError, "replay fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return f;
}

ReplayFixture ReplayFixture::load(const std::filesystem::path& path) { return parse(text::read_file(path)); }

ReplayFixture ReplayFixture::load_or_empty(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return load(path);
}

std::string ReplayFixture::serialize() const {
  std::string out;
  for (const auto& [hash, response] : entries_) {
    out += text::hex64(hash);
    out += '\t';
    out += text::base64_encode(response);
    out += '\n';
  }
  return out;
}

void ReplayFixture::save(const std::filesystem::path& path) const {
  try {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    text::write_file_atomic(path, serialize());
  } catch (const Error& e) {
    fail(ErrorCode::FixtureWriteError, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    fail(ErrorCode::FixtureWriteError, e.what());
  }
}

std::optional<std::string> ReplayFixture::find(std::uint64_t hash) const {
  const auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReplayFixture::put(std::uint64_t hash, std::string response_text) {
  entries_[hash] = std::move(response_text);
}

void record_fixture(const LlmRequest& request, std::string response_text, ReplayFixture& fixture,
                    const std::optional<std::filesystem::path>& path) {
  fixture.put(prompt_hash(request.prompt), std::move(response_text));
  if (path) fixture.save(*path);
}

LlmResponse ReplayBackend::complete(const LlmRequest& request) {
  const auto start = Clock::now();
  const auto hash = prompt_hash(request.prompt);
  auto text = fixture_ ? fixture_->find(hash) : std::nullopt;
  if (!text) fail(ErrorCode::ReplayMiss, "no recorded response for prompt hash " + text::hex64(hash), Stage::Llm);
  return LlmResponse{std::move(*text), hash, BackendKind::Replay, elapsed_ms(start)};
}

// ---------------------------------------------------------------------------
// Remote

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  if (const char* v = std::getenv("RBQA_LLM_URL"); v && *v) c.url = v;
  if (const char* v = std::getenv("RBQA_LLM_API_KEY"); v && *v) {
    c.api_key = v;
  } else if (const char* k = std::getenv("OPENAI_API_KEY"); k && *k) {
    c.api_key = k;
  }
  if (const char* v = std::getenv("RBQA_LLM_MODEL"); v && *v) c.model_id = v;
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (config_.backoff.size() > 2) config_.backoff.resize(2);
  const auto parts = split_url(config_.url);
  path_ = parts.path;
  if (!transport_) transport_ = std::make_shared<HttplibTransport>(parts.origin, config_.timeout);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::request_body(const LlmRequest& request) const {
  json body{{"model", request.model_id.empty() ? config_.model_id : request.model_id},
            {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens}};
  return body.dump();
}

std::string RemoteBackend::parse_completion(std::string_view body) {
  try {
    const auto doc = json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::BackendFailure, std::string("malformed completion response: ") + e.what(), Stage::Llm);
  }
}

LlmResponse RemoteBackend::complete(const LlmRequest& request) {
  if (request.prompt.empty()) fail(ErrorCode::InvalidArgument, "empty prompt", Stage::Llm);
  const auto start = Clock::now();
  HttpHeaders headers{{"Accept", "application/json"}};
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const auto body = request_body(request);

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  HttpReply reply;
  const auto attempts = config_.backoff.size() + 1;
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) sleeper_(config_.backoff[attempt - 1]);
    ++requests_sent_;
    reply = transport_->post(path_, body, "application/json", headers);
    const bool transient =
        reply.failure != HttpReply::Failure::None || reply.status == 429 || reply.status >= 500;
    if (!transient) break;
  }

  if (reply.failure == HttpReply::Failure::Timeout) {
    fail(ErrorCode::Timeout, "completion request timed out", Stage::Llm);
  }
  if (reply.failure == HttpReply::Failure::Connection) {
    fail(ErrorCode::BackendFailure, "cannot reach completion endpoint " + config_.url, Stage::Llm);
  }
  if (reply.status == 401 || reply.status == 403) {
    fail(ErrorCode::AuthFailure, "completion endpoint rejected credentials (HTTP " + std::to_string(reply.status) + ")",
         Stage::Llm);
  }
  if (reply.status == 429) fail(ErrorCode::RateLimited, "rate limited after retries", Stage::Llm);
  if (reply.status != 200) {
    fail(ErrorCode::BackendFailure, "completion endpoint returned HTTP " + std::to_string(reply.status), Stage::Llm);
  }
  return LlmResponse{parse_completion(reply.body), prompt_hash(request.prompt), BackendKind::Remote,
                     std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count()};
}

}  // namespace rbqa
