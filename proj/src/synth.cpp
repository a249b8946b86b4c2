#include "rbqa/synth.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

using nlohmann::json;

SynthTemplates SynthTemplates::load(const std::filesystem::path& path) {
  SynthTemplates t;
  try {
    const auto j = json::parse(text::read_file(path));
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, path.string() + ": templates must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key != "question" && key != "adjust" && key != "answer") {
        fail(ErrorCode::InvalidArgument, path.string() + ": unknown template key '" + key + "'");
      }
    }
    if (j.contains("question")) t.question = j.at("question").get<std::string>();
    if (j.contains("adjust")) t.adjust = j.at("adjust").get<std::string>();
    if (j.contains("answer")) t.answer = j.at("answer").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return t;
}

std::string fill_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        const auto it = std::find_if(values.begin(), values.end(), [&](const auto& v) { return v.first == name; });
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string_view to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::PendingReview: return "pending_review";
    case ReviewStatus::Accepted: return "accepted";
    case ReviewStatus::Rejected: return "rejected";
  }
  return "pending_review";
}

ReviewStatus parse_review_status(std::string_view s) {
  const auto t = text::to_lower(text::trim(s));
  if (t == "pending_review" || t == "pending") return ReviewStatus::PendingReview;
  if (t == "accepted") return ReviewStatus::Accepted;
  if (t == "rejected") return ReviewStatus::Rejected;
  fail(ErrorCode::ReviewParseError, "unknown review status '" + t + "'");
}

// ---------------------------------------------------------------------------
// Generation

namespace {

std::string complete_text(LlmBackend& backend, const SynthOptions& options, std::string prompt) {
  LlmRequest req;
  req.prompt = std::move(prompt);
  req.model_id = options.model_id;
  req.temperature = options.temperature;
  auto text = backend.complete(req).text;
  if (text::trim(text).empty()) fail(ErrorCode::BackendFailure, "backend returned an empty completion", Stage::Llm);
  return std::string(text::trim(text));
}

}  // namespace

SynthRun generate_pairs(const std::vector<Chunk>& chunks, LlmBackend& backend, const KnowledgeGraph* kg,
                        const SynthOptions& options) {
  if (options.per_chunk == 0) fail(ErrorCode::InvalidArgument, "per_chunk must be at least 1");
  SynthRun run;
  const auto count = std::to_string(options.per_chunk);
  for (const auto& chunk : chunks) {
    std::vector<SynthPair> produced;
    try {
      for (std::size_t j = 1; j <= options.per_chunk; ++j) {
        SynthPair p;
        p.pair_id = chunk.chunk_id + "/q" + std::to_string(j);
        p.chunk_id = chunk.chunk_id;
        const auto index = std::to_string(j);

        try {
          p.question_raw = complete_text(
              backend, options,
              fill_template(options.templates.question, {{"passage", chunk.text}, {"index", index}, {"count", count}}));
        } catch (const Error& e) {
          throw e.with_stage(Stage::Llm);
        }

        if (kg && kg->labels && kg->facts) {
          std::set<std::string> seen;
          try {
            for (const auto& m : extract_mentions(p.question_raw, kg->term_stats.get(), kg->mention_options)) {
              auto entity = kg->labels->link(m);
              if (entity && seen.insert(entity->uri).second) p.entities.push_back(std::move(*entity));
            }
          } catch (const Error& e) {
            throw e.with_stage(Stage::Linking);
          }
          try {
            for (const auto& entity : p.entities) {
              for (auto& f : kg->facts->fetch(entity)) {
                if (p.facts.size() >= kg->max_facts) break;
                p.facts.push_back(std::move(f));
              }
              if (p.facts.size() >= kg->max_facts) break;
            }
          } catch (const Error& e) {
            throw e.with_stage(Stage::Kg);
          }
        }
        const auto facts = format_external_knowledge(p.facts);

        try {
          p.question_adjusted = complete_text(backend, options,
                                              fill_template(options.templates.adjust, {{"passage", chunk.text},
                                                                                       {"question", p.question_raw},
                                                                                       {"facts", facts},
                                                                                       {"index", index},
                                                                                       {"count", count}}));
          p.question = p.question_adjusted;
          p.answer = complete_text(backend, options,
                                   fill_template(options.templates.answer, {{"passage", chunk.text},
                                                                            {"question", p.question_adjusted},
                                                                            {"facts", facts},
                                                                            {"index", index},
                                                                            {"count", count}}));
        } catch (const Error& e) {
          throw e.with_stage(Stage::Llm);
        }
        produced.push_back(std::move(p));
      }
    } catch (const Error& e) {
      run.failures.push_back({chunk.chunk_id, e});
      continue;
    }
    for (auto& p : produced) run.pairs.push_back(std::move(p));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Deduplication

std::vector<std::string> question_token_set(std::string_view question) {
  std::vector<std::string> out;
  for (const auto& t : text::tokenize(question)) out.push_back(text::to_lower(t.text));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double token_set_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

namespace {

bool near_duplicate_sets(std::string_view qa, const std::vector<std::string>& a, std::string_view qb,
                         const std::vector<std::string>& b, double threshold) {
  if (qa == qb) return true;
  if (a.empty() || b.empty()) return false;
  return token_set_jaccard(a, b) >= threshold;
}

}  // namespace

bool near_duplicate(std::string_view a, std::string_view b, double threshold) {
  return near_duplicate_sets(a, question_token_set(a), b, question_token_set(b), threshold);
}

std::vector<SynthPair> dedup(const std::vector<SynthPair>& pairs, double threshold) {
  std::vector<SynthPair> kept;
  std::vector<std::vector<std::string>> kept_sets;
  for (const auto& p : pairs) {
    auto set = question_token_set(p.question);
    bool dup = false;
    for (std::size_t i = 0; i < kept.size() && !dup; ++i) {
      dup = near_duplicate_sets(kept[i].question, kept_sets[i], p.question, set, threshold);
    }
    if (dup) continue;
    kept.push_back(p);
    kept_sets.push_back(std::move(set));
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Persistence

std::string synth_pair_to_line(const SynthPair& p) {
  json entities = json::array();
  for (const auto& e : p.entities) entities.push_back({{"uri", e.uri}, {"label", e.label}, {"match_score", e.match_score}});
  json facts = json::array();
  for (const auto& f : p.facts) {
    facts.push_back({{"subject", f.subject_label}, {"predicate", f.predicate}, {"text", f.object_text}});
  }
  return json{{"pair_id", p.pair_id},
              {"chunk_id", p.chunk_id},
              {"question", p.question},
              {"answer", p.answer},
              {"status", to_string(p.status)},
              {"question_raw", p.question_raw},
              {"question_adjusted", p.question_adjusted},
              {"entities", entities},
              {"facts", facts}}
      .dump();
}

SynthPair synth_pair_from_line(std::string_view line) {
  SynthPair p;
  try {
    const auto j = json::parse(line);
    p.pair_id = j.at("pair_id").get<std::string>();
    p.chunk_id = j.at("chunk_id").get<std::string>();
    p.question = j.at("question").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    p.status = parse_review_status(j.at("status").get<std::string>());
    p.question_raw = j.value("question_raw", "");
    p.question_adjusted = j.value("question_adjusted", "");
    for (const auto& e : j.value("entities", json::array())) {
      p.entities.push_back({e.at("uri").get<std::string>(), e.at("label").get<std::string>(),
                            e.value("match_score", 0.0)});
    }
    for (const auto& f : j.value("facts", json::array())) {
      p.facts.push_back({f.at("subject").get<std::string>(), f.at("predicate").get<std::string>(),
                         f.at("text").get<std::string>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::DatasetError, std::string("bad pair record: ") + e.what());
  }
  return p;
}

std::vector<SynthPair> load_pairs(const std::filesystem::path& path) {
  std::vector<SynthPair> out;
  for (const auto& line : text::split(text::read_file(path), '\n')) {
    if (!text::trim(line).empty()) out.push_back(synth_pair_from_line(line));
  }
  return out;
}

void save_pairs(const std::vector<SynthPair>& pairs, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : pairs) out += synth_pair_to_line(p) + "\n";
  text::write_file_atomic(path, out);
}

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s, std::size_t line_no) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) fail(ErrorCode::ReviewParseError, "review line " + std::to_string(line_no) + ": dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default:
        fail(ErrorCode::ReviewParseError,
             "review line " + std::to_string(line_no) + ": unknown escape \\" + std::string(1, s[i]));
    }
  }
  return out;
}

}  // namespace

std::string format_review(const std::vector<SynthPair>& pairs) {
  std::string out = "# status\tpair_id\tquestion\tanswer  (status: pending_review | accepted | rejected)\n";
  for (const auto& p : pairs) {
    out += std::string(to_string(p.status)) + "\t" + escape_field(p.pair_id) + "\t" + escape_field(p.question) +
           "\t" + escape_field(p.answer) + "\n";
  }
  return out;
}

void export_review(const std::vector<SynthPair>& pairs, const std::filesystem::path& path) {
  text::write_file_atomic(path, format_review(pairs));
}

std::vector<SynthPair> apply_review(std::string_view content, std::vector<SynthPair> known) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < known.size(); ++i) pos.emplace(known[i].pair_id, i);
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.starts_with('#')) continue;
    const auto where = "review line " + std::to_string(line_no) + ": ";
    const auto fields = text::split(line, '\t');
    if (fields.size() != 4) {
      fail(ErrorCode::ReviewParseError, where + "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    const auto status = [&] {
      try {
        return parse_review_status(fields[0]);
      } catch (const Error& e) {
        fail(ErrorCode::ReviewParseError, where + e.what());
      }
    }();
    const auto pair_id = unescape_field(fields[1], line_no);
    const auto it = pos.find(pair_id);
    if (it == pos.end()) fail(ErrorCode::UnknownPairId, where + "unknown pair_id " + pair_id);
    if (!seen.insert(pair_id).second) fail(ErrorCode::ReviewParseError, where + "pair_id listed twice: " + pair_id);
    auto& p = known[it->second];
    p.status = status;
    p.question = unescape_field(fields[2], line_no);
    p.answer = unescape_field(fields[3], line_no);
    if (status == ReviewStatus::Accepted && (text::trim(p.question).empty() || text::trim(p.answer).empty())) {
      fail(ErrorCode::ReviewParseError, where + "accepted pair " + pair_id + " needs a question and an answer");
    }
  }
  return known;
}

std::vector<SynthPair> import_review(const std::filesystem::path& path, std::vector<SynthPair> known) {
  return apply_review(text::read_file(path), std::move(known));
}

std::vector<GoldPair> to_dataset(const std::vector<SynthPair>& pairs, const Corpus& corpus) {
  std::vector<GoldPair> out;
  std::set<std::string> ids;
  for (const auto& p : pairs) {
    if (p.status != ReviewStatus::Accepted || !ids.insert(p.pair_id).second) continue;
    const auto* chunk = corpus.find_chunk(p.chunk_id);
    if (!chunk) fail(ErrorCode::DatasetError, "pair " + p.pair_id + " references unknown chunk " + p.chunk_id);
    GoldPair g;
    g.pair_id = p.pair_id;
    g.question = p.question;
    g.gold_answer = p.answer;
    g.requires_table = chunk->kind == ChunkKind::Table;
    g.tags = {"synthesized"};
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace rbqa
