#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbqa/corpus.hpp"
#include "rbqa/knowledge_graph.hpp"
#include "rbqa/pipeline.hpp"
#include "rbqa/retrieval.hpp"

namespace rbqa::testkit {

/// Sentinel for "nothing was thrown" in error-capturing helpers.
inline constexpr ErrorCode kNoError = static_cast<ErrorCode>(-1);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("rbqa-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path data_dir() { return RBQA_DATA_DIR; }

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words{
      "insurance", "benefit",  "hospital",  "surgery",   "payment",  "policy",    "premium",   "clause",
      "article",   "daily",    "amount",    "treatment", "radiation", "cancer",   "donor",     "marrow",
      "breast",    "uterus",   "advanced",  "medical",   "care",     "lifestyle", "disease",   "diabetes",
      "company",   "insured",  "period",    "contract",  "rider",    "lump",      "sum",       "claim",
      "notify",    "change",   "provision", "table",     "row",      "column",    "value",     "yen",
      "million",   "once",     "twice",     "days",      "week",     "stroke",    "heart",     "obesity"};
  return words;
}

inline std::string random_sentence(std::mt19937_64& rng, int min_words = 4, int max_words = 14) {
  const auto& pool = word_pool();
  std::uniform_int_distribution<int> len(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    auto w = pool[pick(rng)];
    if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    s += w;
  }
  return s + ".";
}

inline std::string random_text(std::mt19937_64& rng, std::size_t min_bytes) {
  std::string s;
  while (s.size() < min_bytes) {
    if (!s.empty()) s += ' ';
    s += random_sentence(rng);
  }
  return s;
}

/// Labels of one to three pool words; duplicates are possible and intended.
inline std::vector<KgRecord> random_labels(std::mt19937_64& rng, std::size_t n) {
  const auto& pool = word_pool();
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> len(1, 3);
  std::vector<KgRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string label;
    const int words = len(rng);
    for (int w = 0; w < words; ++w) label += (w ? " " : "") + pool[pick(rng)];
    if (i % 7 == 0) label[0] = static_cast<char>(label[0] - 'a' + 'A');
    out.push_back({label, "http://dbpedia.org/resource/L" + std::to_string(i), "Abstract of " + label + "."});
  }
  return out;
}

/// A mix of exact labels, re-cased labels, word prefixes, one-letter edits and noise.
inline std::vector<std::string> random_mentions(std::mt19937_64& rng, const std::vector<KgRecord>& labels,
                                                std::size_t n) {
  const auto& pool = word_pool();
  std::uniform_int_distribution<std::size_t> pick_label(0, labels.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_word(0, pool.size() - 1);
  std::uniform_int_distribution<int> kind(0, 5);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string m = labels[pick_label(rng)].label;
    switch (kind(rng)) {
      case 0:
        break;
      case 1:
        for (auto& c : m) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        m = "  " + m + " ";
        break;
      case 2:
        m = m.substr(0, m.find(' '));
        break;
      case 3: {
        std::uniform_int_distribution<std::size_t> pos(0, m.size() - 1);
        m[pos(rng)] = 'x';
        break;
      }
      case 4:
        m = pool[pick_word(rng)] + " " + pool[pick_word(rng)];
        break;
      default:
        m = "zq" + pool[pick_word(rng)].substr(0, 3) + "vv";
        break;
    }
    out.push_back(m);
  }
  return out;
}

/// The committed sample corpus with its index and knowledge-graph fixture.
struct SampleWorld {
  Corpus corpus;
  HashingEmbedder embedder;
  VectorIndex index;
  std::vector<KgRecord> kg_records;

  SampleWorld()
      : corpus(Corpus::load(data_dir() / "table2" / "corpus")),
        index(VectorIndex::load(data_dir() / "table2" / "corpus" / kIndexFile)),
        kg_records(load_kg_fixture(data_dir() / "table2" / "kg_fixture.tsv")) {}

  KnowledgeGraph kg() const {
    KnowledgeGraph g;
    g.labels = std::make_shared<const LabelIndex>(kg_records);
    g.facts = std::make_shared<const FixtureFactSource>(kg_records);
    g.term_stats = std::make_shared<const TermStats>(TermStats::from_corpus(corpus));
    return g;
  }
};

/// Prose chunks that each name a capitalized fixture concept, so linking finds it.
inline std::vector<Chunk> synth_chunks(std::size_t n) {
  static const std::vector<std::string> concepts{"Diabetes", "Surgery", "Hospital", "Insurance", "Bone Marrow",
                                                 "Radiation Therapy", "Breast Reconstruction", "Medical Care"};
  std::mt19937_64 rng(77);
  std::vector<Chunk> out;
  for (std::size_t i = 0; i < n; ++i) {
    Chunk c;
    c.doc_id = "synth-doc";
    c.seq_no = static_cast<int>(i);
    c.chunk_id = c.doc_id + "#" + std::to_string(i);
    c.text = "Benefits related to " + concepts[i % concepts.size()] + " are paid as follows. " + random_sentence(rng);
    out.push_back(std::move(c));
  }
  return out;
}

/// Questions with planted exact and near duplicates (case, punctuation, word order).
inline std::vector<std::string> dedup_questions(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::string> out;
  std::uniform_int_distribution<int> kind(0, 4);
  while (out.size() < n) {
    const auto k = out.empty() ? 0 : kind(rng);
    std::uniform_int_distribution<std::size_t> pick(0, out.empty() ? 0 : out.size() - 1);
    if (k <= 1) {
      auto s = random_sentence(rng, 3, 9);
      s.back() = '?';
      out.push_back(s);
    } else if (k == 2) {
      out.push_back(out[pick(rng)]);
    } else if (k == 3) {
      auto s = out[pick(rng)];
      for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      out.push_back(s.substr(0, s.size() - 1) + "!!");
    } else {
      out.push_back("Well, " + out[pick(rng)]);
    }
  }
  return out;
}

struct Table2Entry {
  std::string pair_id;
  std::string question;
  std::map<QaMode, std::string> answers;
};

/// The four printed example questions with their answer per mode.
inline std::vector<Table2Entry> load_table2() {
  std::ifstream in(data_dir() / "table2" / "table2.json");
  const auto doc = nlohmann::json::parse(in);
  std::vector<Table2Entry> out;
  for (const auto& q : doc.at("questions")) {
    Table2Entry e{q.at("pair_id").get<std::string>(), q.at("question").get<std::string>(), {}};
    for (const auto& [mode, answer] : q.at("answers").items()) e.answers[parse_mode(mode)] = answer.get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

/// Copies the committed sample corpus directory so tests may write to it.
inline std::filesystem::path copy_sample_corpus(const std::filesystem::path& dest) {
  std::filesystem::copy(data_dir() / "table2" / "corpus", dest, std::filesystem::copy_options::recursive);
  return dest;
}

inline TableGrid womens_specific_insurance() {
  return TableGrid{"Women's Specific Insurance",
                   {"Female Specific Surgery Benefits", "Breast Reconstruction Benefits"},
                   {"Details of benefits"},
                   {{"Surgery involving the breast, uterus"}, {"Breast reconstruction surgery for the breast"}}};
}

}  // namespace rbqa::testkit
