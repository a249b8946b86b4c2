#include <gtest/gtest.h>

#include <random>

#include "rbqa/error.hpp"
#include "rbqa/evaluation.hpp"
#include "rbqa/text.hpp"
#include "test_support.hpp"

using namespace rbqa;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return testkit::kNoError;
}

/// Independent half-up rounding of 100 * n / d to hundredths, as an integer.
std::int64_t hundredths(std::int64_t n, std::int64_t d) { return (20000 * n + d) / (2 * d); }

Judgment verdict(std::string pair, QaMode mode, bool correct, ErrorCategory cat = ErrorCategory::Other,
                 std::string judge = "a") {
  Judgment j;
  j.pair_id = std::move(pair);
  j.mode = mode;
  j.answerable = correct;
  j.complete = correct;
  j.correct = correct;
  j.error_category = correct ? ErrorCategory::None : cat;
  j.judge_id = std::move(judge);
  return j;
}

}  // namespace

TEST(Percent, PublishedValues) {
  EXPECT_EQ(compute_accuracy(16, 20).percent.str(), "80.00");
  EXPECT_EQ(compute_accuracy(10, 104).percent.str(), "9.62");
  EXPECT_EQ(compute_accuracy(69, 83).percent.str(), "83.13");
  EXPECT_EQ(compute_accuracy(46, 83).percent.str(), "55.42");
  EXPECT_EQ(compute_accuracy(21, 83).percent.str(), "25.30");
  EXPECT_EQ(compute_accuracy(2, 104).percent.str(), "1.92");
  EXPECT_EQ(compute_accuracy(0, 7).percent.str(), "0.00");
  EXPECT_EQ(compute_delta(Percent::parse("65.40"), Percent::parse("9.60")).str(), "55.80");
  EXPECT_EQ(compute_delta(Percent::parse("83.13"), Percent::parse("25.30")).str(), "57.83");
  EXPECT_EQ(compute_delta(Percent::parse("9.60"), Percent::parse("65.40")).str(), "-55.80");
  EXPECT_EQ(compute_delta(Percent::parse("12.34"), Percent::parse("12.34")).str(), "0.00");
}

TEST(Percent, RatioMatchesIntegerOracle) {
  for (std::int64_t d = 1; d <= 300; ++d) {
    for (std::int64_t n = 0; n <= d; ++n) {
      ASSERT_EQ(Percent::ratio(n, d).hundredths, hundredths(n, d)) << n << "/" << d;
    }
  }
  // exact halves round up: 1/8 = 12.5%, 1/16 = 6.25%, 1/32 = 3.125% -> 3.13
  EXPECT_EQ(Percent::ratio(1, 32).str(), "3.13");
  EXPECT_EQ(Percent::ratio(1, 3).str(), "33.33");
  EXPECT_EQ(Percent::ratio(2, 3).str(), "66.67");
}

TEST(Percent, Parse) {
  EXPECT_EQ(Percent::parse("9.6").hundredths, 960);
  EXPECT_EQ(Percent::parse("-3.98%").hundredths, -398);
  EXPECT_EQ(Percent::parse("100").hundredths, 10000);
  for (const char* bad : {"", "abc", "1.234", "1..2", "-", "."}) EXPECT_THROW(Percent::parse(bad), Error) << bad;
  EXPECT_EQ(Percent{-5}.str(), "-0.05");
}

TEST(Accuracy, Errors) {
  EXPECT_EQ(code_of([] { compute_accuracy(0, 0); }), ErrorCode::EmptySelection);
  EXPECT_EQ(code_of([] { compute_accuracy(3, 2); }), ErrorCode::InvalidArgument);
}

TEST(Reconcile, FlagsPrintedExpertBaseline) {
  const auto r = reconcile(10, 104, Percent::parse("9.60"));
  EXPECT_FALSE(r.matches);
  EXPECT_EQ(r.computed.percent.str(), "9.62");
  EXPECT_EQ(r.consistent_denominators, (std::vector<std::size_t>{125, 177, 198}));
  EXPECT_TRUE(reconcile(16, 20, Percent::parse("80")).matches);
}

TEST(Reconcile, SynthesizedSetImpliesEightyThree) {
  for (const char* p : {"25.30", "55.42", "83.13"}) {
    const auto r = reconcile(1, 1, Percent::parse(p));
    ASSERT_FALSE(r.consistent_denominators.empty());
    EXPECT_EQ(r.consistent_denominators.front(), 83u) << p;
    for (auto d : r.consistent_denominators) EXPECT_NE(d, 87u);
  }
}

TEST(Reconcile, DenominatorsMatchExhaustiveSearch) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::int64_t> pct(0, 10000);
  for (int t = 0; t < 200; ++t) {
    const Percent reported{pct(rng)};
    std::vector<std::size_t> want;
    for (std::int64_t d = 1; d <= 200 && want.size() < 5; ++d) {
      for (std::int64_t n = 0; n <= d; ++n) {
        if (hundredths(n, d) == reported.hundredths) {
          want.push_back(static_cast<std::size_t>(d));
          break;
        }
      }
    }
    EXPECT_EQ(reconcile(1, 2, reported).consistent_denominators, want) << reported.str();
  }
}

TEST(Judgments, Validation) {
  auto ok = verdict("p", QaMode::Rulebook, false, ErrorCategory::WrongContext);
  EXPECT_NO_THROW(validate_judgment(ok));
  auto bad = ok;
  bad.mode = QaMode::Agnostic;
  EXPECT_EQ(code_of([&] { validate_judgment(bad); }), ErrorCode::InvalidJudgment);
  bad = ok;
  bad.correct = true;
  EXPECT_EQ(code_of([&] { validate_judgment(bad); }), ErrorCode::InvalidJudgment);
  bad = verdict("p", QaMode::Rulebook, true);
  bad.error_category = ErrorCategory::Other;
  EXPECT_EQ(code_of([&] { validate_judgment(bad); }), ErrorCode::InvalidJudgment);
  bad = verdict("p", QaMode::Rulebook, false);
  bad.answerable = true;
  EXPECT_NO_THROW(validate_judgment(bad));  // answerable but incomplete
  bad.error_category = ErrorCategory::None;
  EXPECT_EQ(code_of([&] { validate_judgment(bad); }), ErrorCode::InvalidJudgment);
}

TEST(Judgments, BoundToTranscript) {
  TranscriptRecord rec;
  rec.pair_id = "p1";
  rec.mode = QaMode::RulebookKg;
  rec.requires_external = true;
  auto j = record_judgment(rec, verdict("", QaMode::RulebookKg, true));
  EXPECT_EQ(j.pair_id, "p1");
  EXPECT_TRUE(j.requires_external);
  EXPECT_EQ(code_of([&] { record_judgment(rec, verdict("p1", QaMode::Rulebook, true)); }), ErrorCode::InvalidJudgment);
}

TEST(Judgments, FileRoundTripAndAppend) {
  testkit::TempDir dir;
  std::vector<Judgment> js{verdict("p1", QaMode::Agnostic, true), verdict("p2", QaMode::Rulebook, false)};
  js[1].requires_table = true;
  append_judgments({js[0]}, dir / "j.jsonl");
  append_judgments({js[1]}, dir / "j.jsonl");
  EXPECT_EQ(load_judgments(dir / "j.jsonl"), js);
  EXPECT_EQ(code_of([] {
              parse_judgments(
                  R"({"pair_id":"p","mode":"agnostic","judge_id":"a","answerable":true,"complete":true,"correct":false,"error_category":"other"})");
            }),
            ErrorCode::InvalidJudgment);
}

TEST(Adjudication, FinalUnanimousSplit) {
  const std::vector<Judgment> js{
      verdict("p1", QaMode::Rulebook, true, ErrorCategory::None, "a"),
      verdict("p1", QaMode::Rulebook, true, ErrorCategory::None, "b"),
      verdict("p2", QaMode::Rulebook, true, ErrorCategory::None, "a"),
      verdict("p2", QaMode::Rulebook, false, ErrorCategory::Ambiguity, "b"),
      verdict("p3", QaMode::Rulebook, true, ErrorCategory::None, "a"),
      verdict("p3", QaMode::Rulebook, false, ErrorCategory::Other, "b"),
      verdict("p3", QaMode::Rulebook, false, ErrorCategory::Other, "final"),
      verdict("p4", QaMode::Agnostic, false, ErrorCategory::Other, "a"),
  };
  const auto a = adjudicate(js);
  ASSERT_EQ(a.finals.size(), 3u);
  EXPECT_EQ(a.finals[0].pair_id, "p1");
  EXPECT_EQ(a.finals[1].judge_id, "final");
  EXPECT_EQ(a.finals[2].pair_id, "p4");
  ASSERT_EQ(a.unresolved.size(), 1u);
  EXPECT_EQ(a.unresolved[0].first, "p2");
  EXPECT_EQ(a.compared, 3u);
  EXPECT_EQ(a.agreed, 1u);
}

TEST(Accuracy, FilteredByModeAndSubset) {
  std::vector<Judgment> js;
  for (int i = 0; i < 20; ++i) {
    auto j = verdict("t" + std::to_string(i), QaMode::Rulebook, i < 16);
    j.requires_table = true;
    js.push_back(j);
  }
  for (int i = 0; i < 10; ++i) js.push_back(verdict("o" + std::to_string(i), QaMode::Rulebook, i < 3));
  for (int i = 0; i < 5; ++i) js.push_back(verdict("o" + std::to_string(i), QaMode::Agnostic, false));
  const auto table = compute_accuracy(js, {QaMode::Rulebook, Subset::Table});
  EXPECT_EQ(table.correct, 16u);
  EXPECT_EQ(table.total, 20u);
  EXPECT_EQ(table.percent.str(), "80.00");
  EXPECT_EQ(compute_accuracy(js, {QaMode::Rulebook, Subset::All}).percent.str(), "63.33");
  EXPECT_EQ(compute_accuracy(js, {QaMode::Agnostic, Subset::All}).percent.str(), "0.00");
  EXPECT_EQ(code_of([&] { compute_accuracy(js, {QaMode::Agnostic, Subset::External}); }), ErrorCode::EmptySelection);
  EXPECT_EQ(code_of([&] { compute_accuracy(js, {QaMode::RulebookKg, Subset::All}); }), ErrorCode::EmptySelection);
}

TEST(Errors, DistributionHandArithmetic) {
  std::vector<Judgment> js;
  const auto add = [&](int n, ErrorCategory c) {
    for (int i = 0; i < n; ++i) js.push_back(verdict("e" + std::to_string(js.size()), QaMode::RulebookKg, false, c));
  };
  add(20, ErrorCategory::Ambiguity);
  add(5, ErrorCategory::ComplexQuestion);
  add(11, ErrorCategory::WrongContext);
  js.push_back(verdict("ok", QaMode::RulebookKg, true));
  const auto d = error_distribution(js, QaMode::RulebookKg);
  EXPECT_EQ(d.failures, 36u);
  EXPECT_EQ(d.counts.at(ErrorCategory::Ambiguity), 20u);
  EXPECT_EQ(d.percents.at(ErrorCategory::Ambiguity).str(), "55.56");
  EXPECT_EQ(d.percents.at(ErrorCategory::ComplexQuestion).str(), "13.89");
  EXPECT_EQ(d.percents.at(ErrorCategory::WrongContext).str(), "30.56");
  EXPECT_EQ(d.percents.at(ErrorCategory::Other).str(), "0.00");
  std::int64_t sum = 0;
  for (const auto& [c, p] : d.percents) sum += p.hundredths;
  EXPECT_LE(std::abs(sum - 10000), 2);
}

TEST(Errors, SingleCategoryAndNoFailures) {
  std::vector<Judgment> js{verdict("a", QaMode::Agnostic, false), verdict("b", QaMode::Agnostic, false)};
  const auto d = error_distribution(js, QaMode::Agnostic);
  EXPECT_EQ(d.percents.at(ErrorCategory::Other).str(), "100.00");
  EXPECT_EQ(d.percents.at(ErrorCategory::Ambiguity).str(), "0.00");
  EXPECT_EQ(code_of([] { error_distribution({verdict("a", QaMode::Agnostic, true)}, QaMode::Agnostic); }),
            ErrorCode::NoFailures);
}

TEST(Errors, DistributionMatchesTally) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> cat(0, 4);
  std::vector<Judgment> js;
  std::map<ErrorCategory, std::size_t> tally;
  std::size_t failures = 0;
  for (int i = 0; i < 300; ++i) {
    const auto c = static_cast<ErrorCategory>(cat(rng));
    js.push_back(verdict("x" + std::to_string(i), QaMode::Rulebook, c == ErrorCategory::None, c));
    if (c != ErrorCategory::None) {
      ++tally[c];
      ++failures;
    }
  }
  const auto d = error_distribution(js, QaMode::Rulebook);
  EXPECT_EQ(d.failures, failures);
  for (const auto& [c, n] : tally) {
    EXPECT_EQ(d.counts.at(c), n);
    EXPECT_EQ(d.percents.at(c).hundredths, hundredths(static_cast<std::int64_t>(n), static_cast<std::int64_t>(failures)));
  }
}

TEST(Report, ModesDeltasSubsets) {
  std::vector<Judgment> js;
  for (int i = 0; i < 10; ++i) {
    const auto id = "q" + std::to_string(i);
    auto a = verdict(id, QaMode::Agnostic, i < 1);
    auto r = verdict(id, QaMode::Rulebook, i < 6, ErrorCategory::WrongContext);
    auto k = verdict(id, QaMode::RulebookKg, i < 8, ErrorCategory::Ambiguity);
    for (auto* j : {&a, &r, &k}) j->requires_external = i >= 8;
    js.insert(js.end(), {a, r, k});
  }
  const auto rep = build_report(js);
  ASSERT_EQ(rep.modes.size(), 3u);
  EXPECT_EQ(rep.modes[0].mode, QaMode::Agnostic);
  EXPECT_EQ(compute_delta(rep, QaMode::Rulebook, QaMode::Agnostic).str(), "50.00");
  EXPECT_EQ(compute_delta(rep, QaMode::RulebookKg, QaMode::Agnostic).str(), "70.00");
  EXPECT_EQ(compute_delta(rep, QaMode::RulebookKg, QaMode::Rulebook).str(), "20.00");
  EXPECT_TRUE(rep.has_external_subset);
  EXPECT_FALSE(rep.has_table_subset);
  EXPECT_EQ(rep.find(QaMode::RulebookKg)->external->percent.str(), "0.00");
  const auto text = format_report_text(rep);
  EXPECT_NE(text.find("rulebook_kg: 8/10 = 80.00%"), std::string::npos) << text;
  EXPECT_NE(text.find("External-knowledge questions"), std::string::npos);
  EXPECT_NE(text.find("Error distribution, rulebook (4 incorrect)"), std::string::npos);
  const auto csv = format_report_csv(rep);
  EXPECT_TRUE(csv.starts_with("section,mode,detail,numerator,denominator,percent\n"));
  EXPECT_NE(csv.find("accuracy,rulebook,,6,10,60.00"), std::string::npos) << csv;
  const auto only_agnostic = build_report({verdict("z", QaMode::Agnostic, true)});
  EXPECT_EQ(code_of([&] { compute_delta(only_agnostic, QaMode::Rulebook, QaMode::Agnostic); }), ErrorCode::MissingMode);
  EXPECT_EQ(compute_delta(only_agnostic, QaMode::Agnostic, QaMode::Agnostic).str(), "0.00");
}

TEST(Dataset, ParseAndErrors) {
  const auto ds = parse_dataset(
      R"({"pair_id":"a","question":"Q?","gold_answer":"G"})"
      "\n"
      R"({"pair_id":"b","question":"Q2?","gold_answer":"G2","requires_table":true,"tags":["x"]})"
      "\n");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_FALSE(ds[0].requires_table);
  EXPECT_TRUE(ds[1].requires_table);
  EXPECT_EQ(parse_dataset(format_dataset(ds)), ds);
  EXPECT_EQ(code_of([] { parse_dataset(R"({"pair_id":"a","question":"","gold_answer":"G"})"); }), ErrorCode::DatasetError);
  EXPECT_EQ(code_of([] {
              parse_dataset(R"({"pair_id":"a","question":"q","gold_answer":"G"})"
                            "\n"
                            R"({"pair_id":"a","question":"q","gold_answer":"G"})");
            }),
            ErrorCode::DatasetError);
}

TEST(RunEval, CardinalityAndDeterminism) {
  testkit::SampleWorld w;
  const auto ds = load_dataset(testkit::data_dir() / "table2" / "dataset.jsonl");
  EchoBackend echo;
  QaEngine engine(w.corpus, w.index, w.embedder, echo, w.kg());
  const std::vector<QaMode> modes{QaMode::Agnostic, QaMode::Rulebook, QaMode::RulebookKg};
  const auto t1 = run_eval(ds, modes, 3, engine);
  const auto t2 = run_eval(ds, modes, 3, engine);
  ASSERT_EQ(t1.size(), ds.size() * 3);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    EXPECT_EQ(transcript_to_line(t1[i]), transcript_to_line(t2[i]));
    EXPECT_EQ(t1[i].pair_id, ds[i / 3].pair_id);
    EXPECT_EQ(t1[i].mode, modes[i % 3]);
    EXPECT_EQ(t1[i].gold_answer, ds[i / 3].gold_answer);
    EXPECT_FALSE(t1[i].error_code) << t1[i].error_message;
  }
}
