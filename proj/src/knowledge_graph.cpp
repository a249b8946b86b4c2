#include "rbqa/knowledge_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "rbqa/error.hpp"
#include "rbqa/http.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TermStats

TermStats TermStats::from_texts(const std::vector<std::string>& texts) {
  TermStats stats;
  stats.documents_ = texts.size();
  for (const auto& t : texts) {
    std::unordered_set<std::string> seen;
    for (auto& tok : text::normalized_tokens(t)) seen.insert(std::move(tok));
    for (const auto& tok : seen) ++stats.df_[tok];
  }
  return stats;
}

TermStats TermStats::from_corpus(const Corpus& corpus) {
  std::vector<std::string> texts;
  texts.reserve(corpus.chunks().size());
  for (const auto& c : corpus.chunks()) texts.push_back(c.text);
  return from_texts(texts);
}

double TermStats::idf(std::string_view lower_token) const {
  const auto it = df_.find(std::string(lower_token));
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + df)) + 1.0;
}

// ---------------------------------------------------------------------------
// Mentions

bool is_stopword(std::string_view w) {
  static const std::unordered_set<std::string_view> kWords = {
      "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are",
      "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
      "can", "could", "did", "do", "does", "doing", "done", "down", "due", "during", "each", "either",
      "else", "ever", "every", "few", "for", "from", "further", "get", "gets", "got", "had", "has", "have",
      "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in",
      "into", "is", "it", "its", "itself", "just", "let", "like", "may", "me", "might", "mine", "more",
      "most", "much", "must", "my", "myself", "need", "no", "nor", "not", "now", "of", "off", "on", "once",
      "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "please", "same", "shall",
      "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
      "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under",
      "until", "up", "us", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
      "whom", "whose", "why", "will", "with", "would", "yes", "you", "your", "yours", "yourself",
      "yourselves", "it's", "i'm", "i'd", "i'll", "i've", "he's", "she's", "they're", "we're", "you're",
      "don't", "doesn't", "didn't", "can't", "won't", "isn't", "aren't", "wasn't", "there's", "what's",
      "someone", "something", "anyone", "anything", "one", "ones", "many", "kind", "know", "tell", "want",
      "like", "would", "able", "there", "thing", "things", "way", "ways", "still", "yet", "however",
      "ok", "okay", "hello", "hi", "thanks", "thank"};
  return kWords.count(w) > 0;
}

namespace {

bool is_number(std::string_view t) {
  return std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_capitalized(std::string_view t) { return !t.empty() && t[0] >= 'A' && t[0] <= 'Z'; }

struct Candidate {
  std::size_t first = 0;  // token indices, inclusive/exclusive
  std::size_t last = 0;
  bool capitalized = false;
  double mean_idf = 0.0;
};

}  // namespace

std::vector<EntityMention> extract_mentions(std::string_view question, const TermStats* stats,
                                            const MentionOptions& options) {
  const auto tokens = text::tokenize(question, /*keep_apostrophes=*/true);
  const auto n = tokens.size();
  if (n == 0 || options.max_mentions == 0 || options.max_tokens == 0) return {};

  std::vector<std::string> lower(n);
  std::vector<bool> stop(n), sentence_initial(n), joined_to_prev(n);
  for (std::size_t i = 0; i < n; ++i) {
    lower[i] = text::to_lower(tokens[i].text);
    stop[i] = is_stopword(lower[i]) || is_number(lower[i]);
    if (i == 0) {
      sentence_initial[i] = true;
    } else {
      const auto gap = question.substr(tokens[i - 1].end, tokens[i].begin - tokens[i - 1].end);
      sentence_initial[i] = gap.find_first_of(".?!") != std::string_view::npos;
      joined_to_prev[i] = text::trim(gap).empty();
    }
  }
  const auto idf = [&](std::size_t i) { return stats ? stats->idf(lower[i]) : 1.0; };
  const auto mean_idf = [&](std::size_t b, std::size_t e) {
    double s = 0;
    for (auto i = b; i < e; ++i) s += idf(i);
    return s / static_cast<double>(e - b);
  };

  std::vector<Candidate> candidates;
  // (a) capitalized runs
  for (std::size_t i = 0; i < n;) {
    if (!is_capitalized(tokens[i].text) || stop[i]) {
      ++i;
      continue;
    }
    auto j = i + 1;
    while (j < n && joined_to_prev[j] && is_capitalized(tokens[j].text) && !stop[j]) ++j;
    auto b = i;
    if (j - i == 1 && sentence_initial[i]) b = j;
    const auto e = std::min(j, b + options.max_tokens);
    if (b < e) candidates.push_back({b, e, true, mean_idf(b, e)});
    i = j;
  }
  // (b) content n-grams inside runs of adjacent content words
  for (std::size_t i = 0; i < n;) {
    if (stop[i]) {
      ++i;
      continue;
    }
    auto j = i + 1;
    while (j < n && joined_to_prev[j] && !stop[j]) ++j;
    for (auto b = i; b < j; ++b) {
      for (auto e = b + 1; e <= std::min(j, b + options.max_tokens); ++e) {
        candidates.push_back({b, e, false, mean_idf(b, e)});
      }
    }
    i = j;
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.capitalized != y.capitalized) return x.capitalized;
    if (x.mean_idf != y.mean_idf) return x.mean_idf > y.mean_idf;
    if (x.last - x.first != y.last - y.first) return x.last - x.first > y.last - y.first;
    return x.first < y.first;
  });

  std::vector<EntityMention> out;
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (out.size() == options.max_mentions) break;
    const Span span{tokens[c.first].begin, tokens[c.last - 1].end};
    std::string surface(question.substr(span.begin, span.end - span.begin));
    if (!seen.insert(text::to_lower(surface)).second) continue;
    out.push_back({std::move(surface), span});
  }
  std::sort(out.begin(), out.end(), [](const EntityMention& x, const EntityMention& y) {
    if (x.span.begin != y.span.begin) return x.span.begin < y.span.begin;
    return x.span.end > y.span.end;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Linking

std::string normalize_label(std::string_view label) {
  std::string out;
  bool space = false;
  for (char c : text::trim(label)) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

namespace {

std::vector<std::string> trigram_set(std::string_view normalized) {
  const std::string padded = "^" + std::string(normalized) + "$";
  std::vector<std::string> grams;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) grams.push_back(padded.substr(i, 3));
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

double trigram_jaccard(std::string_view a, std::string_view b) {
  return jaccard(trigram_set(normalize_label(a)), trigram_set(normalize_label(b)));
}

LabelIndex::LabelIndex(const std::vector<KgRecord>& records) {
  entries_.reserve(records.size());
  for (const auto& r : records) {
    Entry e{r.label, r.uri, normalize_label(r.label), {}};
    e.trigrams = trigram_set(e.normalized);
    exact_.try_emplace(e.normalized, entries_.size());
    entries_.push_back(std::move(e));
  }
}

std::optional<KgEntity> LabelIndex::link(std::string_view surface) const {
  if (entries_.empty()) fail(ErrorCode::IndexUnavailable, "label index is empty", Stage::Linking);
  const auto query = normalize_label(surface);
  if (query.empty()) return std::nullopt;

  if (const auto it = exact_.find(query); it != exact_.end()) {
    const auto& e = entries_[it->second];
    return KgEntity{e.uri, e.label, kExactScore};
  }

  const Entry* prefix = nullptr;
  for (const auto& e : entries_) {
    if (e.normalized.size() > query.size() && e.normalized.starts_with(query) &&
        !text::is_word_byte(static_cast<unsigned char>(e.normalized[query.size()])) &&
        (!prefix || e.normalized.size() < prefix->normalized.size())) {
      prefix = &e;
    }
  }
  if (prefix) return KgEntity{prefix->uri, prefix->label, kPrefixScore};

  const auto grams = trigram_set(query);
  const Entry* best = nullptr;
  double best_score = -1.0;
  for (const auto& e : entries_) {
    const double s = jaccard(grams, e.trigrams);
    if (s > best_score) {
      best_score = s;
      best = &e;
    }
  }
  if (!best || best_score < kTrigramThreshold) return std::nullopt;
  return KgEntity{best->uri, best->label, best_score};
}

std::vector<KgRecord> parse_kg_fixture(std::string_view content) {
  std::vector<KgRecord> out;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.starts_with('#')) continue;
    auto fields = text::split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      fail(ErrorCode::MalformedResponse, "kg fixture line " + std::to_string(line_no) + ": expected 2 or 3 columns");
    }
    KgRecord r{std::string(text::trim(fields[0])), std::string(text::trim(fields[1])),
               fields.size() == 3 ? fields[2] : std::string()};
    if (r.label.empty() || r.uri.empty()) {
      fail(ErrorCode::MalformedResponse, "kg fixture line " + std::to_string(line_no) + ": empty label or uri");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<KgRecord> load_kg_fixture(const std::filesystem::path& path) {
  return parse_kg_fixture(text::read_file(path));
}

// ---------------------------------------------------------------------------
// Facts

std::string truncate_fact(std::string_view input, std::size_t budget) {
  std::string s;
  s.reserve(input.size());
  for (char c : input) s += (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
  if (s.size() <= budget) return s;
  constexpr std::string_view kMarker = "...";
  if (budget <= kMarker.size()) return std::string(kMarker.substr(0, budget));
  auto cut = text::floor_boundary(s, budget - kMarker.size());
  const auto space = s.rfind(' ', cut);
  if (space != std::string::npos && space > 0) cut = space;
  while (cut > 0 && s[cut - 1] == ' ') --cut;
  return s.substr(0, cut) + std::string(kMarker);
}

FixtureFactSource::FixtureFactSource(std::vector<KgRecord> records, std::size_t fact_budget)
    : records_(std::move(records)), fact_budget_(fact_budget) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    by_uri_.try_emplace(records_[i].uri, i);
    by_label_.try_emplace(normalize_label(records_[i].label), i);
  }
}

std::vector<KgFact> FixtureFactSource::fetch(const KgEntity& entity) const {
  std::size_t pos = records_.size();
  if (const auto it = by_uri_.find(entity.uri); it != by_uri_.end()) {
    pos = it->second;
  } else if (const auto jt = by_label_.find(normalize_label(entity.label)); jt != by_label_.end()) {
    pos = jt->second;
  }
  if (pos == records_.size()) {
    fail(ErrorCode::EntityNotFound, "entity '" + entity.label + "' is not in the fixture", Stage::Kg);
  }
  const auto& r = records_[pos];
  if (r.abstract.empty()) return {};
  const auto& subject = entity.label.empty() ? r.label : entity.label;
  return {KgFact{subject, "abstract", truncate_fact(r.abstract, fact_budget_)}};
}

SparqlFactSource::SparqlFactSource(SparqlConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  const auto parts = split_url(config_.endpoint_url);
  path_prefix_ = parts.path;
  if (!transport_) transport_ = std::make_shared<HttplibTransport>(parts.origin, config_.timeout);
  if (config_.language.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ-") !=
      std::string::npos) {
    fail(ErrorCode::InvalidArgument, "bad language tag '" + config_.language + "'");
  }
}

SparqlFactSource::~SparqlFactSource() = default;

namespace {

std::string predicate_term(const std::string& p) {
  if (p.starts_with("http://") || p.starts_with("https://")) return "<" + p + ">";
  if (p.find(':') != std::string::npos) return p;
  return "dbo:" + p;
}

std::string local_name(const std::string& uri) {
  const auto pos = uri.find_last_of("/#:");
  return pos == std::string::npos ? uri : uri.substr(pos + 1);
}

}  // namespace

std::string SparqlFactSource::build_query(const std::string& uri) const {
  if (uri.empty() || uri.find_first_of("<>\"{}|\\^` \t\r\n") != std::string::npos) {
    fail(ErrorCode::InvalidArgument, "unsafe resource URI '" + uri + "'", Stage::Kg);
  }
  std::string values;
  for (const auto& p : config_.predicates) values += " " + predicate_term(p);
  return "PREFIX dbo: <http://dbpedia.org/ontology/>\n"
         "SELECT ?p ?o WHERE {\n"
         "  VALUES ?p {" + values + " }\n"
         "  <" + uri + "> ?p ?o .\n"
         "  FILTER (!isLiteral(?o) || lang(?o) = \"\" || langMatches(lang(?o), \"" + config_.language + "\"))\n"
         "}";
}

std::string SparqlFactSource::request_path(const std::string& uri) const {
  return path_prefix_ + "?query=" + url_encode(build_query(uri)) + "&format=" +
         url_encode("application/sparql-results+json");
}

std::vector<KgFact> SparqlFactSource::parse_results(std::string_view body, const std::string& subject_label) const {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedResponse, std::string("SPARQL response is not JSON: ") + e.what(), Stage::Kg);
  }
  if (!doc.is_object() || !doc.contains("results") || !doc["results"].contains("bindings") ||
      !doc["results"]["bindings"].is_array()) {
    fail(ErrorCode::MalformedResponse, "SPARQL response lacks results.bindings", Stage::Kg);
  }
  std::vector<std::pair<std::size_t, KgFact>> ranked;
  for (const auto& b : doc["results"]["bindings"]) {
    if (!b.contains("p") || !b.contains("o") || !b["p"].contains("value") || !b["o"].contains("value")) {
      fail(ErrorCode::MalformedResponse, "SPARQL binding lacks ?p or ?o", Stage::Kg);
    }
    const auto p = b["p"]["value"].get<std::string>();
    const auto o = b["o"]["value"].get<std::string>();
    const auto name = local_name(p);
    std::size_t rank = config_.predicates.size();
    for (std::size_t i = 0; i < config_.predicates.size(); ++i) {
      if (local_name(config_.predicates[i]) == name) rank = i;
    }
    if (text::trim(o).empty()) continue;
    ranked.push_back({rank, KgFact{subject_label, name, truncate_fact(o, config_.fact_budget)}});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first < y.first;
    return x.second.object_text < y.second.object_text;
  });
  std::vector<KgFact> out;
  for (auto& r : ranked) out.push_back(std::move(r.second));
  return out;
}

std::vector<KgFact> SparqlFactSource::fetch(const KgEntity& entity) const {
  const auto path = request_path(entity.uri);
  const HttpHeaders headers{{"Accept", "application/sparql-results+json"}};
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  HttpReply reply;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    reply = transport_->get(path, headers);
    if (reply.failure == HttpReply::Failure::None && reply.status < 500) break;
  }
  if (reply.failure != HttpReply::Failure::None) {
    fail(ErrorCode::EndpointTimeout, "SPARQL endpoint " + config_.endpoint_url + " did not respond", Stage::Kg);
  }
  if (reply.status != 200) {
    fail(ErrorCode::MalformedResponse, "SPARQL endpoint returned HTTP " + std::to_string(reply.status), Stage::Kg);
  }
  return parse_results(reply.body, entity.label);
}

std::string format_fact(const KgFact& fact) {
  return fact.subject_label + " | " + fact.predicate + " | " + fact.object_text;
}

std::string format_external_knowledge(const std::vector<KgFact>& facts) {
  std::string out;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (i) out += "...";
    out += format_fact(facts[i]);
  }
  return out;
}

}  // namespace rbqa
