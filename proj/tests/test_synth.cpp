#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "rbqa/error.hpp"
#include "rbqa/synth.hpp"
#include "rbqa/text.hpp"
#include "test_support.hpp"

using namespace rbqa;

namespace {

std::vector<SynthPair> pairs_from(const std::vector<std::string>& questions) {
  std::vector<SynthPair> out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    SynthPair p;
    p.pair_id = "c#" + std::to_string(i) + "/q1";
    p.chunk_id = "c#" + std::to_string(i);
    p.question = questions[i];
    p.answer = "answer " + std::to_string(i);
    out.push_back(p);
  }
  return out;
}

std::vector<std::string> questions_of(const std::vector<SynthPair>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.question);
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return testkit::kNoError;
}

/// Answers every prompt with a fixed string.
class ConstantBackend final : public LlmBackend {
 public:
  explicit ConstantBackend(std::string text) : text_(std::move(text)) {}
  LlmResponse complete(const LlmRequest& r) override { return {text_, prompt_hash(r.prompt), BackendKind::Replay, 0}; }
  BackendKind kind() const override { return BackendKind::Replay; }

 private:
  std::string text_;
};

}  // namespace

TEST(Templates, Fill) {
  EXPECT_EQ(fill_template("{a}-{b}-{a}-{c}", {{"a", "1"}, {"b", "{a}"}}), "1-{a}-1-{c}");
  EXPECT_EQ(fill_template("", {{"a", "1"}}), "");
}

TEST(Templates, LoadOverrides) {
  testkit::TempDir dir;
  text::write_file_atomic(dir / "t.json", R"({"question": "Q: {passage}"})");
  const auto t = SynthTemplates::load(dir / "t.json");
  EXPECT_EQ(t.question, "Q: {passage}");
  EXPECT_EQ(t.answer, SynthTemplates{}.answer);
  text::write_file_atomic(dir / "bad.json", R"({"questions": "x"})");
  EXPECT_THROW(SynthTemplates::load(dir / "bad.json"), Error);
}

TEST(Generate, SingleChunk) {
  const auto chunks = testkit::synth_chunks(1);
  ReplayFixture fixture;
  SynthOptions opt;
  const auto p2 = fill_template(opt.templates.question, {{"passage", chunks[0].text}, {"index", "1"}, {"count", "1"}});
  fixture.put(prompt_hash(p2), "What is paid for diabetes?");
  const auto p4 = fill_template(opt.templates.adjust, {{"passage", chunks[0].text},
                                                        {"question", "What is paid for diabetes?"},
                                                        {"facts", ""},
                                                        {"index", "1"},
                                                        {"count", "1"}});
  fixture.put(prompt_hash(p4), "Which benefits are paid for diabetes?");
  const auto p5 = fill_template(opt.templates.answer, {{"passage", chunks[0].text},
                                                        {"question", "Which benefits are paid for diabetes?"},
                                                        {"facts", ""},
                                                        {"index", "1"},
                                                        {"count", "1"}});
  fixture.put(prompt_hash(p5), "The benefits described in the clause.");
  ReplayBackend replay(std::make_shared<const ReplayFixture>(fixture));
  const auto run = generate_pairs(chunks, replay, nullptr, opt);
  ASSERT_TRUE(run.failures.empty()) << run.failures[0].error.what();
  ASSERT_EQ(run.pairs.size(), 1u);
  const auto& p = run.pairs[0];
  EXPECT_EQ(p.chunk_id, chunks[0].chunk_id);
  EXPECT_EQ(p.pair_id, chunks[0].chunk_id + "/q1");
  EXPECT_EQ(p.question_raw, "What is paid for diabetes?");
  EXPECT_EQ(p.question_adjusted, "Which benefits are paid for diabetes?");
  EXPECT_EQ(p.question, p.question_adjusted);
  EXPECT_EQ(p.answer, "The benefits described in the clause.");
  EXPECT_EQ(p.status, ReviewStatus::PendingReview);
}

TEST(Generate, EchoWithKgRetainsEverySteps) {
  testkit::SampleWorld w;
  const auto kg = w.kg();
  const auto chunks = testkit::synth_chunks(10);
  EchoBackend echo;
  SynthOptions opt;
  opt.per_chunk = 2;
  const auto run = generate_pairs(chunks, echo, &kg, opt);
  EXPECT_TRUE(run.failures.empty());
  ASSERT_EQ(run.pairs.size(), 20u);
  std::set<std::string> chunk_ids;
  for (const auto& c : chunks) chunk_ids.insert(c.chunk_id);
  for (const auto& p : run.pairs) {
    EXPECT_TRUE(chunk_ids.count(p.chunk_id));
    EXPECT_EQ(p.status, ReviewStatus::PendingReview);
    EXPECT_FALSE(p.facts.empty()) << p.pair_id;
    EXPECT_FALSE(p.entities.empty());
    EXPECT_NE(p.question_adjusted, p.question_raw);
    EXPECT_FALSE(p.answer.empty());
    // the adjustment prompt carried the formatted facts
    EXPECT_NE(p.question_adjusted.find(format_external_knowledge(p.facts)), std::string::npos);
  }
  EXPECT_TRUE(run.pairs[1].pair_id.ends_with("/q2"));
}

TEST(Generate, FailuresCollectedPerChunk) {
  testkit::SampleWorld w;
  auto kg = w.kg();
  kg.labels = std::make_shared<const LabelIndex>();
  EchoBackend echo;
  const auto chunks = testkit::synth_chunks(3);
  const auto run = generate_pairs(chunks, echo, &kg);
  EXPECT_TRUE(run.pairs.empty());
  ASSERT_EQ(run.failures.size(), 3u);
  for (const auto& f : run.failures) {
    EXPECT_EQ(f.error.code(), ErrorCode::IndexUnavailable);
    EXPECT_EQ(f.error.stage(), Stage::Linking);
  }
  ConstantBackend blank(" ");
  const auto run2 = generate_pairs(chunks, blank, nullptr);
  EXPECT_EQ(run2.failures.size(), 3u);
  EXPECT_EQ(code_of([&] { generate_pairs(chunks, echo, nullptr, SynthOptions{0}); }), ErrorCode::InvalidArgument);
}

TEST(Dedup, Examples) {
  EXPECT_EQ(dedup(pairs_from({"How much is it?", "How much is it?"})).size(), 1u);
  EXPECT_TRUE(near_duplicate("How much is the benefit?", "How much is the benefit"));
  EXPECT_DOUBLE_EQ(token_set_jaccard(question_token_set("How much is the benefit?"),
                                     question_token_set("how MUCH is the benefit")),
                   1.0);
  EXPECT_FALSE(near_duplicate("How much is the benefit?", "How much is the premium?"));
  EXPECT_FALSE(near_duplicate("???", "!!!"));
  EXPECT_TRUE(near_duplicate("???", "???"));
  const auto kept = dedup(pairs_from({"a b c", "x y", "C B A"}));
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].pair_id, "c#0/q1");
}

TEST(Dedup, MatchesPairwiseOracleAndIsIdempotent) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto questions = testkit::dedup_questions(rng, 50);
    const auto once = dedup(pairs_from(questions));
    EXPECT_EQ(questions_of(once), oracle::dedup_questions(questions));
    EXPECT_EQ(dedup(once), once);
    EXPECT_LT(once.size(), questions.size());
  }
}

TEST(Pairs, JsonRoundTrip) {
  testkit::TempDir dir;
  SynthPair p;
  p.pair_id = "d#0/q1";
  p.chunk_id = "d#0";
  p.question = "Q?\n";
  p.answer = "A";
  p.status = ReviewStatus::Rejected;
  p.question_raw = "raw";
  p.question_adjusted = "adj";
  p.entities = {{"u", "l", 0.9}};
  p.facts = {{"l", "abstract", "t"}};
  save_pairs({p, p}, dir / "p.jsonl");
  EXPECT_EQ(load_pairs(dir / "p.jsonl"), (std::vector<SynthPair>{p, p}));
  EXPECT_EQ(code_of([] { synth_pair_from_line("{}"); }), ErrorCode::DatasetError);
}

TEST(Review, RoundTripWithoutEdits) {
  testkit::TempDir dir;
  auto pairs = pairs_from({"Tab\there?", "Line\nbreak \\ slash", "plain"});
  export_review(pairs, dir / "r.tsv");
  const auto back = import_review(dir / "r.tsv", pairs);
  EXPECT_EQ(back, pairs);
  for (const auto& p : back) EXPECT_EQ(p.status, ReviewStatus::PendingReview);
}

TEST(Review, TwoOfFiveAcceptedFlowIntoDataset) {
  testkit::SampleWorld w;
  std::vector<SynthPair> pairs;
  for (std::size_t i = 0; i < 5; ++i) {
    SynthPair p;
    p.chunk_id = w.corpus.chunks()[i].chunk_id;
    p.pair_id = p.chunk_id + "/q1";
    p.question = "Question " + std::to_string(i) + "?";
    p.answer = "Answer " + std::to_string(i);
    pairs.push_back(p);
  }
  auto lines = text::split(format_review(pairs), '\n');
  for (std::size_t i : {2u, 5u}) lines[i].replace(0, lines[i].find('\t'), "accepted");
  lines[3].replace(0, lines[3].find('\t'), "rejected");
  lines[5] += " (edited)";
  const auto reviewed = apply_review(text::join(lines, "\n"), pairs);
  const auto ds = to_dataset(reviewed, w.corpus);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].pair_id, pairs[1].pair_id);
  EXPECT_EQ(ds[1].gold_answer, "Answer 4 (edited)");
  EXPECT_EQ(ds[1].requires_table, w.corpus.chunks()[4].kind == ChunkKind::Table);
  EXPECT_EQ(reviewed[2].status, ReviewStatus::Rejected);
}

TEST(Review, Errors) {
  const auto pairs = pairs_from({"q1", "q2"});
  EXPECT_EQ(code_of([&] { apply_review("accepted\tnope/q1\tq\ta\n", pairs); }), ErrorCode::UnknownPairId);
  EXPECT_EQ(code_of([&] { apply_review("accepted\tc#0/q1\tq\n", pairs); }), ErrorCode::ReviewParseError);
  EXPECT_EQ(code_of([&] { apply_review("maybe\tc#0/q1\tq\ta\n", pairs); }), ErrorCode::ReviewParseError);
  EXPECT_EQ(code_of([&] { apply_review("accepted\tc#0/q1\tq\\x\ta\n", pairs); }), ErrorCode::ReviewParseError);
  EXPECT_EQ(code_of([&] { apply_review("accepted\tc#0/q1\t\ta\n", pairs); }), ErrorCode::ReviewParseError);
  EXPECT_EQ(code_of([&] { apply_review("rejected\tc#0/q1\tq\ta\nrejected\tc#0/q1\tq\ta\n", pairs); }),
            ErrorCode::ReviewParseError);
  SynthPair orphan = pairs[0];
  orphan.status = ReviewStatus::Accepted;
  orphan.chunk_id = "missing#0";
  EXPECT_EQ(code_of([&] { to_dataset({orphan}, Corpus{}); }), ErrorCode::DatasetError);
}
