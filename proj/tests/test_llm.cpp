#include <gtest/gtest.h>

#include <random>

#include "golden_prompts.hpp"
#include "json.hpp"
#include "rbqa/error.hpp"
#include "rbqa/llm.hpp"
#include "rbqa/text.hpp"
#include "stub_transport.hpp"
#include "test_support.hpp"

using namespace rbqa;
using rbqa::testkit::StubTransport;
using std::chrono::milliseconds;

namespace {

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

struct Harness {
  std::shared_ptr<StubTransport> stub;
  std::vector<milliseconds> sleeps;
  std::unique_ptr<RemoteBackend> backend;

  explicit Harness(std::vector<HttpReply> replies, std::string key = "sk-test") {
    stub = std::make_shared<StubTransport>(std::move(replies));
    RemoteConfig cfg;
    cfg.url = "https://llm.example/v1/chat/completions";
    cfg.api_key = std::move(key);
    backend = std::make_unique<RemoteBackend>(cfg, stub, [this](milliseconds d) { sleeps.push_back(d); });
  }
};

ErrorCode code_of(LlmBackend& b, const std::string& prompt) {
  try {
    b.complete({prompt});
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), Stage::Llm);
    return e.code();
  }
  return testkit::kNoError;
}

}  // namespace

TEST(Backend, Names) {
  for (auto k : {BackendKind::Remote, BackendKind::Replay, BackendKind::Echo}) EXPECT_EQ(parse_backend(to_string(k)), k);
  EXPECT_THROW(parse_backend("gpt"), Error);
}

TEST(Echo, ReturnsQuestionSegment) {
  EchoBackend echo;
  EXPECT_EQ(echo.complete({golden::agnostic().rendered}).text, golden::kNotifyQuestion);
  EXPECT_EQ(echo.complete({golden::rulebook().rendered}).text, golden::kNotifyQuestion);
  EXPECT_EQ(echo.complete({golden::rulebook_kg().rendered}).text, golden::kDiabetesQuestion);
  EXPECT_EQ(echo.complete({"free text prompt"}).text, "free text prompt");
  EXPECT_EQ(echo.complete({"x"}).prompt_hash, prompt_hash("x"));
}

TEST(Replay, FixtureRoundTrip) {
  std::mt19937_64 rng(1);
  ReplayFixture f;
  for (int i = 0; i < 50; ++i) {
    std::string response = testkit::random_text(rng, 10 + i * 7);
    if (i % 3 == 0) response += "\n\ttabs, newlines \xe5\x86\x86 and 'quotes'";
    f.put(rng(), response);
  }
  const auto text = f.serialize();
  const auto back = ReplayFixture::parse(text);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.size(), 50u);
  // one line per entry, sorted by hash
  const auto lines = text::split(text, '\n');
  std::vector<std::string> keys;
  for (const auto& l : lines) {
    if (!l.empty()) keys.push_back(l.substr(0, 16));
  }
  EXPECT_EQ(keys.size(), 50u);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(Replay, RecordThenReplay) {
  testkit::TempDir dir;
  ReplayFixture f;
  const LlmRequest req{golden::rulebook().rendered};
  record_fixture(req, "At least two months prior.", f, dir / "replay.tsv");
  auto loaded = std::make_shared<const ReplayFixture>(ReplayFixture::load(dir / "replay.tsv"));
  ReplayBackend replay(loaded);
  const auto r = replay.complete(req);
  EXPECT_EQ(r.text, "At least two months prior.");
  EXPECT_EQ(r.prompt_hash, prompt_hash(req.prompt));
  EXPECT_EQ(code_of(replay, req.prompt + " "), ErrorCode::ReplayMiss);
}

TEST(Replay, BadFixture) {
  EXPECT_THROW(ReplayFixture::parse("nothex\tAAAA\n"), Error);
  EXPECT_THROW(ReplayFixture::parse("0123456789abcdef\n"), Error);
  EXPECT_EQ(ReplayFixture::load_or_empty("/nonexistent/replay.tsv").size(), 0u);
}

TEST(Remote, SendsChatRequest) {
  Harness h({testkit::ok(completion("Two months."))});
  const auto r = h.backend->complete({"hello prompt"});
  EXPECT_EQ(r.text, "Two months.");
  EXPECT_EQ(r.backend, BackendKind::Remote);
  const auto reqs = h.stub->requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].path, "/v1/chat/completions");
  const auto body = nlohmann::json::parse(reqs[0].body);
  EXPECT_EQ(body["messages"][0]["content"], "hello prompt");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["temperature"], 0.0);
  const auto auth = reqs[0].headers.find("Authorization");
  ASSERT_NE(auth, reqs[0].headers.end());
  EXPECT_EQ(auth->second, "Bearer sk-test");
  EXPECT_TRUE(h.sleeps.empty());
}

TEST(Remote, AuthFailureNotRetried) {
  for (int status : {401, 403}) {
    Harness h({testkit::status(status)});
    EXPECT_EQ(code_of(*h.backend, "p"), ErrorCode::AuthFailure);
    EXPECT_EQ(h.stub->requests().size(), 1u);
  }
}

TEST(Remote, RateLimitedAfterBackoff) {
  Harness h({testkit::status(429)});
  EXPECT_EQ(code_of(*h.backend, "p"), ErrorCode::RateLimited);
  EXPECT_EQ(h.stub->requests().size(), 3u);
  EXPECT_EQ(h.sleeps, (std::vector<milliseconds>{milliseconds(500), milliseconds(1000)}));
}

TEST(Remote, RecoversAfterTransientError) {
  Harness h({testkit::status(502), testkit::status(429), testkit::ok(completion("ok"))});
  EXPECT_EQ(h.backend->complete({"p"}).text, "ok");
  EXPECT_EQ(h.backend->requests_sent(), 3u);
}

TEST(Remote, TimeoutAndServerErrors) {
  {
    Harness h({testkit::timeout()});
    EXPECT_EQ(code_of(*h.backend, "p"), ErrorCode::Timeout);
  }
  {
    Harness h({testkit::status(500)});
    EXPECT_EQ(code_of(*h.backend, "p"), ErrorCode::BackendFailure);
  }
  {
    Harness h({testkit::ok("{\"choices\":[]}")});
    EXPECT_EQ(code_of(*h.backend, "p"), ErrorCode::BackendFailure);
  }
  {
    Harness h({testkit::ok(completion("x"))});
    EXPECT_EQ(code_of(*h.backend, ""), ErrorCode::InvalidArgument);
  }
}

TEST(Hash, MatchesFnv) {
  EXPECT_EQ(prompt_hash(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(prompt_hash("foobar"), 0x85944171f73967e8ull);
}
